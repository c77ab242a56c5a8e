//! Euler-Bernoulli beam statics: closed-form simply supported deflection, a
//! Hermite finite-element solver, and response synthesis at sensors.

mod beam;
mod fe;
mod response;

pub use beam::{ss_influence, BeamModel, BeamSegment, Support, SupportKind, GRAVITY};
pub use fe::{fe_static_solve, FeBeam, FeSolution};
pub use response::{
    read_response, response_csv, synthesize_response, synthesize_with_plan, write_response, ResponseMatrix,
    ResponseMeta, ResponseMethod, SensorLayout, StructuralModel,
};
