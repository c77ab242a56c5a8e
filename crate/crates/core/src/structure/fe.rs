//! Static Euler–Bernoulli beam finite elements.
//!
//! Two-node cubic Hermite elements with deflection and rotation at every
//! node. Pinned supports remove the deflection DOF, springs add to its
//! diagonal. The global matrix is banded (half-bandwidth 3) and is factored
//! once with a band Cholesky decomposition; every later solve reuses it.

use super::beam::{BeamModel, SupportKind};
use crate::error::{Error, Result};

const HALF_BAND: usize = 3;

/// Hermite shape functions at local coordinate `xi` on an element of
/// length `h`: deflection/rotation at the left node, then the right node.
pub fn hermite(xi: f64, h: f64) -> [f64; 4] {
    let xi2 = xi * xi;
    let xi3 = xi2 * xi;
    [
        1.0 - 3.0 * xi2 + 2.0 * xi3,
        h * (xi - 2.0 * xi2 + xi3),
        3.0 * xi2 - 2.0 * xi3,
        h * (xi3 - xi2),
    ]
}

fn element_stiffness(ei: f64, h: f64) -> [[f64; 4]; 4] {
    let c = ei / (h * h * h);
    let h2 = h * h;
    [
        [12.0 * c, 6.0 * h * c, -12.0 * c, 6.0 * h * c],
        [6.0 * h * c, 4.0 * h2 * c, -6.0 * h * c, 2.0 * h2 * c],
        [-12.0 * c, -6.0 * h * c, 12.0 * c, -6.0 * h * c],
        [6.0 * h * c, 2.0 * h2 * c, -6.0 * h * c, 4.0 * h2 * c],
    ]
}

/// Lower band of a symmetric positive definite matrix and its Cholesky
/// factor; `band[i][d]` holds entry `(i, i - d)`.
#[derive(Debug, Clone)]
struct BandCholesky {
    factor: Vec<[f64; HALF_BAND + 1]>,
}

impl BandCholesky {
    fn factorize(mut band: Vec<[f64; HALF_BAND + 1]>) -> Result<Self> {
        let n = band.len();
        let scale = band.iter().map(|r| r[0].abs()).fold(0.0, f64::max);
        for j in 0..n {
            let lo = j.saturating_sub(HALF_BAND);
            let mut pivot = band[j][0];
            for k in lo..j {
                pivot -= band[j][j - k] * band[j][j - k];
            }
            if !(pivot > 1e-11 * scale) {
                return Err(Error::Singular(format!(
                    "pivot {pivot:e} at free DOF {j}; the supports leave a mechanism"
                )));
            }
            let diag = pivot.sqrt();
            band[j][0] = diag;
            for i in j + 1..n.min(j + HALF_BAND + 1) {
                let mut v = band[i][i - j];
                let lo = i.saturating_sub(HALF_BAND);
                for k in lo..j {
                    v -= band[i][i - k] * band[j][j - k];
                }
                band[i][i - j] = v / diag;
            }
        }
        Ok(Self { factor: band })
    }

    fn solve(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        let l = &self.factor;
        for i in 0..n {
            let lo = i.saturating_sub(HALF_BAND);
            let mut v = rhs[i];
            for k in lo..i {
                v -= l[i][i - k] * rhs[k];
            }
            rhs[i] = v / l[i][0];
        }
        for i in (0..n).rev() {
            let mut v = rhs[i];
            for k in i + 1..n.min(i + HALF_BAND + 1) {
                v -= l[k][k - i] * rhs[k];
            }
            rhs[i] = v / l[i][0];
        }
    }
}

/// Assembled and factored beam, ready for repeated solves.
#[derive(Debug, Clone)]
pub struct FeBeam {
    nodes: Vec<f64>,
    element_ei: Vec<f64>,
    /// Free-DOF index for every global DOF, `None` where constrained.
    free_index: Vec<Option<usize>>,
    factor: BandCholesky,
}

/// Nodal deflection (m, upward positive so downward loads give negative
/// values) and rotation (rad).
#[derive(Debug, Clone, PartialEq)]
pub struct FeSolution {
    pub nodes: Vec<f64>,
    pub deflection: Vec<f64>,
    pub rotation: Vec<f64>,
}

impl FeSolution {
    /// Deflection at any point, interpolated with the element shape functions.
    pub fn deflection_at(&self, x: f64) -> f64 {
        let e = element_index(&self.nodes, x);
        let (x0, x1) = (self.nodes[e], self.nodes[e + 1]);
        let h = x1 - x0;
        let n = hermite(((x - x0) / h).clamp(0.0, 1.0), h);
        n[0] * self.deflection[e]
            + n[1] * self.rotation[e]
            + n[2] * self.deflection[e + 1]
            + n[3] * self.rotation[e + 1]
    }
}

fn element_index(nodes: &[f64], x: f64) -> usize {
    let upper = nodes.partition_point(|&n| n <= x);
    upper.clamp(1, nodes.len() - 1) - 1
}

impl FeBeam {
    /// Builds the mesh (uniform grid plus support, segment and `extra_points`
    /// breakpoints), assembles the stiffness and factors it.
    pub fn assemble(model: &BeamModel, extra_points: &[f64]) -> Result<Self> {
        model.validate()?;
        let len = model.length;
        let tol = 1e-9 * len;
        let mut points: Vec<f64> = (0..=model.n_elements)
            .map(|i| len * i as f64 / model.n_elements as f64)
            .collect();
        points.extend(model.supports.iter().map(|s| s.position));
        let mut acc = 0.0;
        for s in &model.segments {
            acc += s.span;
            points.push(acc.min(len));
        }
        for &p in extra_points {
            if !(0.0..=len).contains(&p) {
                return Err(Error::Invalid(format!("mesh point {p} m is off the beam")));
            }
            points.push(p);
        }
        points.sort_by(f64::total_cmp);
        let mut nodes: Vec<f64> = Vec::with_capacity(points.len());
        for p in points {
            match nodes.last() {
                Some(&last) if p - last <= tol => {}
                _ => nodes.push(p),
            }
        }
        if let Some(last) = nodes.last_mut() {
            *last = len;
        }

        let element_ei: Vec<f64> = nodes
            .windows(2)
            .map(|w| model.segment_at(0.5 * (w[0] + w[1])).ei())
            .collect();

        let n_dof = 2 * nodes.len();
        let mut constrained = vec![false; n_dof];
        let mut springs = vec![0.0; n_dof];
        for s in &model.supports {
            let node = nearest_node(&nodes, s.position);
            match s.kind {
                SupportKind::Pinned => constrained[2 * node] = true,
                SupportKind::Spring { stiffness } => springs[2 * node] += stiffness,
            }
        }
        let mut free_index = vec![None; n_dof];
        let mut n_free = 0;
        for (dof, slot) in free_index.iter_mut().enumerate() {
            if !constrained[dof] {
                *slot = Some(n_free);
                n_free += 1;
            }
        }

        let mut band = vec![[0.0; HALF_BAND + 1]; n_free];
        for (e, w) in nodes.windows(2).enumerate() {
            let ke = element_stiffness(element_ei[e], w[1] - w[0]);
            let dofs = [2 * e, 2 * e + 1, 2 * e + 2, 2 * e + 3];
            for a in 0..4 {
                for b in 0..=a {
                    let (Some(fa), Some(fb)) = (free_index[dofs[a]], free_index[dofs[b]]) else {
                        continue;
                    };
                    let (hi, lo) = if fa >= fb { (fa, fb) } else { (fb, fa) };
                    band[hi][hi - lo] += ke[a][b];
                }
            }
        }
        for (dof, k) in springs.iter().enumerate() {
            if let Some(f) = free_index[dof] {
                band[f][0] += k;
            }
        }
        let factor = BandCholesky::factorize(band)?;
        Ok(Self {
            nodes,
            element_ei,
            free_index,
            factor,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn n_elements(&self) -> usize {
        self.element_ei.len()
    }

    pub fn length(&self) -> f64 {
        *self.nodes.last().expect("mesh has nodes")
    }

    /// Solves for downward point forces given as `(position m, force N)`.
    /// Forces between nodes are distributed with the element shape functions.
    pub fn solve(&self, loads: &[(f64, f64)]) -> Result<FeSolution> {
        let len = self.length();
        let n_free = self.factor.factor.len();
        let mut rhs = vec![0.0; n_free];
        for &(x, force) in loads {
            if !(0.0..=len).contains(&x) || !force.is_finite() {
                return Err(Error::Invalid(format!("load {force} N at {x} m is off the beam")));
            }
            let e = element_index(&self.nodes, x);
            let (x0, x1) = (self.nodes[e], self.nodes[e + 1]);
            let h = x1 - x0;
            let n = hermite((x - x0) / h, h);
            for (a, na) in n.iter().enumerate() {
                if let Some(f) = self.free_index[2 * e + a] {
                    rhs[f] -= force * na;
                }
            }
        }
        self.factor.solve(&mut rhs);
        let mut deflection = vec![0.0; self.nodes.len()];
        let mut rotation = vec![0.0; self.nodes.len()];
        for (dof, slot) in self.free_index.iter().enumerate() {
            if let Some(f) = slot {
                if dof % 2 == 0 {
                    deflection[dof / 2] = rhs[*f];
                } else {
                    rotation[dof / 2] = rhs[*f];
                }
            }
        }
        if deflection.iter().chain(&rotation).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite displacement".into()));
        }
        Ok(FeSolution {
            nodes: self.nodes.clone(),
            deflection,
            rotation,
        })
    }
}

fn nearest_node(nodes: &[f64], x: f64) -> usize {
    let upper = nodes.partition_point(|&n| n < x).min(nodes.len() - 1);
    if upper > 0 && (x - nodes[upper - 1]).abs() < (nodes[upper] - x).abs() {
        upper - 1
    } else {
        upper
    }
}

/// One-shot assemble and solve.
pub fn fe_static_solve(model: &BeamModel, loads: &[(f64, f64)]) -> Result<FeSolution> {
    FeBeam::assemble(model, &[])?.solve(loads)
}
