//! Metrics and the experiment protocols built on them.

mod metrics;
mod studies;

pub use metrics::{prf1, Metrics};
pub use studies::{
    case_study, neighbor_fp_study, noise_sweep, run_job, section_length_csv, section_length_study, section_study,
    total_weight_fp_study, CaseRate, JobOutcome, SectionLengthRow, StudyMeta, StudyResult, StudyRow, StudySetup,
    STUDY_CSV_HEADER,
};
