//! Per-slice two-point boundary value problems for the amplitude.
//!
//! Each time slice solves the discrete Dirichlet problem
//!
//! ```text
//! -(R[i-1] - 2R[i] + R[i+1]) / h² - β Q[i] R[i] + μ R[i] = g[i],   i = 1 .. nx-2
//! R[0] = left,  R[nx-1] = right
//! ```
//!
//! The interior operator `-Δ_h - β diag(Q)` is symmetric tridiagonal. Its spectrum `Σ_h` decides
//! solvability: the system is singular exactly when `-μ ∈ Σ_h`.

use rayon::prelude::*;
use serde::Serialize;

use crate::grid::{Axis, Field, GridError, PhysParams, SpaceTimeGrid};

/// Relative factor of the default singularity threshold.
pub const DEFAULT_SIGMA_TOL: f64 = 1e-8;
/// Absolute floor of the singularity threshold.
pub const SIGMA_ABS_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EllipticError {
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error(
        "boundary value problem is singular: eigenvalue {eigenvalue:e} of the shifted operator lies within {tolerance:e} of zero, so the solution is not unique"
    )]
    Singular { eigenvalue: f64, tolerance: f64 },
    #[error("{} slice(s) failed; first at slice {}: {}", .0.len(), .0[0].0, .0[0].1)]
    Slices(Vec<(usize, EllipticError)>),
    #[error(transparent)]
    Grid(#[from] GridError),
}

impl EllipticError {
    pub fn is_singular(&self) -> bool {
        match self {
            EllipticError::Singular { .. } => true,
            EllipticError::Slices(v) => v.iter().any(|(_, e)| e.is_singular()),
            _ => false,
        }
    }
}

/// One slice of the amplitude problem.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipticProblem {
    pub axis: Axis,
    /// `Q(·, t)` at every node of `axis`, boundary nodes included.
    pub q: Vec<f64>,
    pub beta: f64,
    pub mu: f64,
    pub left: f64,
    pub right: f64,
    /// Source term at every node; `None` means zero.
    pub source: Option<Vec<f64>>,
    /// Relative factor of the singularity threshold.
    pub sigma_tol: f64,
}

impl EllipticProblem {
    pub fn new(axis: Axis, q: Vec<f64>, beta: f64) -> Self {
        EllipticProblem {
            axis,
            q,
            beta,
            mu: 0.0,
            left: 0.0,
            right: 0.0,
            source: None,
            sigma_tol: DEFAULT_SIGMA_TOL,
        }
    }

    pub fn with_boundary(mut self, left: f64, right: f64) -> Self {
        self.left = left;
        self.right = right;
        self
    }

    pub fn with_shift(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_source(mut self, source: Vec<f64>) -> Self {
        self.source = Some(source);
        self
    }

    fn validate(&self) -> Result<(), EllipticError> {
        let n = self.axis.n;
        if n < 3 || self.axis.end <= self.axis.start {
            return Err(EllipticError::Invalid("need at least 3 nodes on a proper interval".into()));
        }
        if self.q.len() != n {
            return Err(EllipticError::Invalid(format!(
                "q has {} samples, axis has {n} nodes",
                self.q.len()
            )));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(EllipticError::Invalid(format!("beta must be positive, got {}", self.beta)));
        }
        if !self.mu.is_finite() || !self.left.is_finite() || !self.right.is_finite() {
            return Err(EllipticError::Invalid("shift and boundary values must be finite".into()));
        }
        if self.q.iter().any(|v| !v.is_finite()) {
            return Err(EllipticError::Invalid("q has non-finite samples".into()));
        }
        if let Some(g) = &self.source {
            if g.len() != n || g.iter().any(|v| !v.is_finite()) {
                return Err(EllipticError::Invalid("source must be finite with one sample per node".into()));
            }
        }
        if !(self.sigma_tol.is_finite() && self.sigma_tol >= 0.0) {
            return Err(EllipticError::Invalid("sigma_tol must be non-negative".into()));
        }
        Ok(())
    }

    fn operator(&self) -> Tridiagonal {
        Tridiagonal::shifted(&self.axis, &self.q, self.beta, self.mu)
    }

    /// Right-hand side on interior nodes with the boundary data lifted in.
    fn rhs(&self) -> Vec<f64> {
        let n = self.axis.n;
        let h = self.axis.step().expect("n >= 3");
        let inv_h2 = 1.0 / (h * h);
        let mut b: Vec<f64> = match &self.source {
            Some(g) => g[1..n - 1].to_vec(),
            None => vec![0.0; n - 2],
        };
        b[0] += inv_h2 * self.left;
        let last = b.len() - 1;
        b[last] += inv_h2 * self.right;
        b
    }
}

/// Solvability diagnostics of one slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveReport {
    pub slice: usize,
    pub t: f64,
    pub coercive: bool,
    pub margin: f64,
    pub sigma_distance: f64,
    pub condition_estimate: f64,
}

/// Symmetric tridiagonal interior operator, stored as a constant Laplacian diagonal plus a
/// per-node potential part so that diagonal shifts stay exact in the eigenvalue counts.
#[derive(Debug, Clone)]
struct Tridiagonal {
    lap: f64,
    pot: Vec<f64>,
    off: f64,
}

impl Tridiagonal {
    fn shifted(axis: &Axis, q: &[f64], beta: f64, mu: f64) -> Self {
        let h = axis.step().expect("n >= 3");
        let inv_h2 = 1.0 / (h * h);
        let n = axis.n;
        Tridiagonal {
            lap: 2.0 * inv_h2,
            pot: q[1..n - 1].iter().map(|&v| mu - beta * v).collect(),
            off: -inv_h2,
        }
    }

    fn dim(&self) -> usize {
        self.pot.len()
    }

    fn diag(&self, i: usize) -> f64 {
        self.lap + self.pot[i]
    }

    /// Gershgorin interval.
    fn bounds(&self) -> (f64, f64) {
        let r = if self.dim() > 1 { 2.0 * self.off.abs() } else { 0.0 };
        let lo = self.pot.iter().fold(f64::INFINITY, |m, &p| m.min(p)) + self.lap - r;
        let hi = self.pot.iter().fold(f64::NEG_INFINITY, |m, &p| m.max(p)) + self.lap + r;
        (lo, hi)
    }

    fn norm_inf(&self) -> f64 {
        let r = if self.dim() > 1 { 2.0 * self.off.abs() } else { 0.0 };
        self.pot
            .iter()
            .map(|&p| (self.lap + p).abs() + r)
            .fold(0.0, f64::max)
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence of the LDLᵀ pivots).
    fn count_below(&self, x: f64) -> usize {
        let e2 = self.off * self.off;
        let pivmin = f64::MIN_POSITIVE.max(e2 * f64::EPSILON);
        let mut count = 0;
        let mut q = self.lap + (self.pot[0] - x);
        for i in 0..self.dim() {
            if i > 0 {
                q = self.lap + (self.pot[i] - x) - e2 / q;
            }
            if q.abs() < pivmin {
                q = -pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (0-based), bisected to full precision.
    fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.bounds();
        let pad = f64::EPSILON * lo.abs().max(hi.abs()) + f64::MIN_POSITIVE;
        lo -= pad;
        hi += pad;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Eigenvalue of smallest magnitude.
    fn nearest_zero(&self) -> f64 {
        let below = self.count_below(0.0);
        let n = self.dim();
        let above = (below < n).then(|| self.eigenvalue(below));
        let under = (below > 0).then(|| self.eigenvalue(below - 1));
        match (under, above) {
            (Some(a), Some(b)) => {
                if a.abs() < b.abs() {
                    a
                } else {
                    b
                }
            }
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => unreachable!("operator has at least one eigenvalue"),
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut v = self.diag(i) * x[i];
                if i > 0 {
                    v += self.off * x[i - 1];
                }
                if i + 1 < n {
                    v += self.off * x[i + 1];
                }
                v
            })
            .collect()
    }

    /// Thomas algorithm; `None` on a vanishing pivot.
    fn thomas(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let n = self.dim();
        let tiny = 1e-14 * self.norm_inf();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut pivot = self.diag(0);
        if pivot.abs() <= tiny {
            return None;
        }
        c[0] = self.off / pivot;
        d[0] = rhs[0] / pivot;
        for i in 1..n {
            pivot = self.diag(i) - self.off * c[i - 1];
            if pivot.abs() <= tiny {
                return None;
            }
            c[i] = self.off / pivot;
            d[i] = (rhs[i] - self.off * d[i - 1]) / pivot;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        Some(d)
    }

    /// Gaussian elimination with partial pivoting on the band.
    fn pivoted(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut dl: Vec<f64> = vec![self.off; n.saturating_sub(1)];
        let mut d: Vec<f64> = (0..n).map(|i| self.diag(i)).collect();
        let mut du: Vec<f64> = vec![self.off; n.saturating_sub(1)];
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut b = rhs.to_vec();
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                let f = dl[i] / d[i];
                d[i + 1] -= f * du[i];
                b[i + 1] -= f * b[i];
                dl[i] = 0.0;
            } else {
                let f = d[i] / dl[i];
                d[i] = dl[i];
                let tmp = d[i + 1];
                d[i + 1] = du[i] - f * tmp;
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -f * du2[i];
                }
                du[i] = tmp;
                b.swap(i, i + 1);
                b[i + 1] -= f * b[i];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut v = b[i];
            if i + 1 < n {
                v -= du[i] * x[i + 1];
            }
            if i + 2 < n {
                v -= du2[i] * x[i + 2];
            }
            x[i] = v / d[i];
        }
        x
    }
}

fn threshold(norm: f64, rel: f64) -> f64 {
    SIGMA_ABS_FLOOR.max(rel * norm)
}

/// Smallest Dirichlet eigenvalue of the discrete `-d²/dx²` on `axis`.
pub fn laplacian_ground_eigenvalue(axis: &Axis) -> f64 {
    let h = axis.step().expect("n >= 2");
    let s = (std::f64::consts::PI / (2.0 * (axis.n - 1) as f64)).sin();
    4.0 * s * s / (h * h)
}

/// Sufficient coercivity test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coercivity {
    pub coercive: bool,
    /// `μ + λ₁(-Δ_h) - β·sup Q` over interior nodes; a lower bound for the shifted operator.
    pub margin: f64,
}

/// Checks `μ + λ₁(-Δ_h) - β sup Q > threshold`, which bounds every eigenvalue of the shifted
/// operator away from zero and therefore guarantees a unique solution.
pub fn coercivity_check(axis: &Axis, q: &[f64], beta: f64, mu: f64) -> Coercivity {
    coercivity_with_tol(axis, q, beta, mu, DEFAULT_SIGMA_TOL)
}

fn coercivity_with_tol(axis: &Axis, q: &[f64], beta: f64, mu: f64, rel: f64) -> Coercivity {
    let n = axis.n;
    let sup_q = q[1..n - 1].iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let margin = mu + laplacian_ground_eigenvalue(axis) - beta * sup_q;
    let norm = Tridiagonal::shifted(axis, q, beta, mu).norm_inf();
    Coercivity {
        coercive: margin > threshold(norm, rel),
        margin,
    }
}

/// The lowest `n_eigs` eigenvalues `λ` of `(-Δ_h - β diag(Q)) u = λ u` on interior nodes,
/// ascending.
pub fn sigma_spectrum(axis: &Axis, q: &[f64], beta: f64, n_eigs: usize) -> Result<Vec<f64>, EllipticError> {
    let p = EllipticProblem::new(*axis, q.to_vec(), beta);
    p.validate()?;
    let op = p.operator();
    if n_eigs > op.dim() {
        return Err(EllipticError::Invalid(format!(
            "asked for {n_eigs} eigenvalues, operator has {}",
            op.dim()
        )));
    }
    Ok((0..n_eigs).map(|k| op.eigenvalue(k)).collect())
}

/// Whether `0 ∈ Σ_h` up to the singularity threshold, with the eigenvalue nearest zero.
pub fn zero_in_sigma(axis: &Axis, q: &[f64], beta: f64, rel_tol: f64) -> Result<(bool, f64), EllipticError> {
    let mut p = EllipticProblem::new(*axis, q.to_vec(), beta);
    p.sigma_tol = rel_tol;
    p.validate()?;
    let op = p.operator();
    let nearest = op.nearest_zero();
    Ok((nearest.abs() <= threshold(op.norm_inf(), rel_tol), nearest))
}

/// `‖A R - b‖∞ / (‖A‖∞ ‖R‖∞ + ‖b‖∞)` of the interior equations.
pub fn relative_residual(problem: &EllipticProblem, r: &[f64]) -> f64 {
    let op = problem.operator();
    let n = problem.axis.n;
    let interior = &r[1..n - 1];
    let mut b = problem.rhs();
    // The lift assumes the boundary samples equal the data.
    let h = problem.axis.step().expect("n >= 3");
    let inv_h2 = 1.0 / (h * h);
    b[0] += inv_h2 * (r[0] - problem.left);
    let last = b.len() - 1;
    b[last] += inv_h2 * (r[n - 1] - problem.right);
    let ar = op.apply(interior);
    let res = ar.iter().zip(&b).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    let r_norm = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let b_norm = b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let scale = op.norm_inf() * r_norm + b_norm;
    if scale == 0.0 {
        res
    } else {
        res / scale
    }
}

/// Solves one slice, boundary nodes included in the returned samples.
pub fn solve_slice(problem: &EllipticProblem) -> Result<(Vec<f64>, SolveReport), EllipticError> {
    problem.validate()?;
    let op = problem.operator();
    let norm = op.norm_inf();
    let tol = threshold(norm, problem.sigma_tol);
    let nearest = op.nearest_zero();
    if nearest.abs() <= tol {
        return Err(EllipticError::Singular {
            eigenvalue: nearest,
            tolerance: tol,
        });
    }
    let lowest = op.eigenvalue(0);
    let highest = op.eigenvalue(op.dim() - 1);
    let coercivity = coercivity_with_tol(&problem.axis, &problem.q, problem.beta, problem.mu, problem.sigma_tol);

    let rhs = problem.rhs();
    let interior = op.thomas(&rhs).unwrap_or_else(|| op.pivoted(&rhs));
    let n = problem.axis.n;
    let mut r = Vec::with_capacity(n);
    r.push(problem.left);
    r.extend_from_slice(&interior);
    r.push(problem.right);
    if r.iter().any(|v| !v.is_finite()) {
        return Err(EllipticError::Singular {
            eigenvalue: nearest,
            tolerance: tol,
        });
    }

    let report = SolveReport {
        slice: 0,
        t: 0.0,
        coercive: coercivity.coercive,
        margin: coercivity.margin,
        sigma_distance: nearest.abs(),
        condition_estimate: lowest.abs().max(highest.abs()) / nearest.abs(),
    };
    Ok((r, report))
}

/// Dirichlet values per time slice.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletData {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl DirichletData {
    pub fn constant(nt: usize, left: f64, right: f64) -> Self {
        DirichletData {
            left: vec![left; nt],
            right: vec![right; nt],
        }
    }

    pub fn from_fns(grid: &SpaceTimeGrid, left: impl Fn(f64) -> f64, right: impl Fn(f64) -> f64) -> Self {
        let ts = grid.ts();
        DirichletData {
            left: ts.iter().map(|&t| left(t)).collect(),
            right: ts.iter().map(|&t| right(t)).collect(),
        }
    }
}

/// Solves every time slice independently (in parallel).
pub fn solve_all_slices(
    q: &Field,
    params: PhysParams,
    mu: f64,
    bc: &DirichletData,
    source: Option<&Field>,
    sigma_tol: f64,
) -> Result<(Field, Vec<SolveReport>), EllipticError> {
    let grid = *q.grid();
    let nt = grid.nt();
    if bc.left.len() != nt || bc.right.len() != nt {
        return Err(EllipticError::Invalid(format!(
            "boundary data needs {nt} values per side"
        )));
    }
    if let Some(g) = source {
        if g.grid() != &grid {
            return Err(GridError::GridMismatch.into());
        }
    }
    let outcomes: Vec<Result<(Vec<f64>, SolveReport), EllipticError>> = (0..nt)
        .into_par_iter()
        .map(|j| {
            let mut problem = EllipticProblem::new(grid.space(), q.slice(j), params.beta())
                .with_shift(mu)
                .with_boundary(bc.left[j], bc.right[j]);
            problem.sigma_tol = sigma_tol;
            if let Some(g) = source {
                problem = problem.with_source(g.slice(j));
            }
            solve_slice(&problem).map(|(r, mut report)| {
                report.slice = j;
                report.t = grid.t(j);
                (r, report)
            })
        })
        .collect();

    let mut rows = Vec::with_capacity(nt);
    let mut reports = Vec::with_capacity(nt);
    let mut failures = Vec::new();
    for (j, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok((r, report)) => {
                rows.push(r);
                reports.push(report);
            }
            Err(e) => failures.push((j, e)),
        }
    }
    if !failures.is_empty() {
        return Err(EllipticError::Slices(failures));
    }
    Ok((Field::from_slices(grid, &rows)?, reports))
}
