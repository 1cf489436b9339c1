//! Momentum, phase and potential fields of the polar (Madelung) form `ψ = R e^{iS/ħ}`, and the
//! residuals of the equations they must satisfy:
//!
//! ```text
//! continuity       ∂t(R²) + (1/m) ∂x(R² p) = 0
//! Hamilton-Jacobi  ∂t S + (∂x S)² / 2m + Q + V = 0
//! compatibility    ∂x S - p = 0
//! Newton           ∂t p + p ∂x p / m + ∂x (Q + V) = 0
//! Schrödinger      -(ħ²/2m) ψ'' + V ψ - iħ ∂t ψ = 0
//! ```
//!
//! Nodes where `|R|` falls below the nodal floor are masked: `p` is singular there, and every
//! field computed from a masked sample inherits the mask through its stencil or quadrature path.

mod golden;
mod pipeline;

pub use golden::{
    golden_case, hermite_function, zero_crossings, CaseName, CheckRow, GoldenCase, GoldenError, MAX_OSCILLATOR_LEVEL,
};
pub use pipeline::{
    run_pipeline, AmplitudeInput, PhaseSeed, PipelineConfig, PipelineResult, PotentialMode, QInput,
    ResidualNorms, Residuals,
};

use crate::elliptic::EllipticError;
use crate::expr::{Consts, Expr, FieldEvalError, Var};
use crate::grid::{ComplexField, Field, GridError, Mask, MaskedField, PhysParams};

use ndarray::Array2;
use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MadelungError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Eval(#[from] FieldEvalError),
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
    #[error("|R| is below the nodal floor {r_floor:e} on all of slice {slice}")]
    AllMasked { slice: usize, r_floor: f64 },
    #[error("{what} must not depend on {var}")]
    Dependency { what: &'static str, var: &'static str },
    #[error("residual `{0}` has no unmasked nodes")]
    EmptySupport(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Samples a function of `t` alone at every slice.
pub(crate) fn sample_in_t(
    expr: &Expr,
    what: &'static str,
    ts: &[f64],
    consts: Consts,
) -> Result<Vec<f64>, MadelungError> {
    if expr.depends_on(Var::X) {
        return Err(MadelungError::Dependency { what, var: "x" });
    }
    ts.iter()
        .enumerate()
        .map(|(j, &t)| {
            expr.eval(0.0, t, consts)
                .map_err(|source| FieldEvalError { i: 0, j, x: 0.0, t, source }.into())
        })
        .collect()
}

/// Nodes with `|R| > r_floor`.
pub fn nodal_mask(r: &Field, r_floor: f64) -> Mask {
    Mask::from_fn(r.grid(), |j, i| r.get(j, i).abs() > r_floor)
}

/// `p = m (f(t) - ∫_{x_ref}^x ∂t(R²) dx) / R²`, masked where `|R| <= r_floor`.
pub fn momentum_field(
    r: &Field,
    f: &Expr,
    params: PhysParams,
    x_ref: f64,
    r_floor: f64,
) -> Result<MaskedField, MadelungError> {
    let grid = *r.grid();
    let f_t = sample_in_t(f, "f", &grid.ts(), params.into())?;
    let r2 = r.mul(r)?;
    let flux = r2.ddt()?.cumint_x(x_ref)?;
    let mask = nodal_mask(r, r_floor);
    let m = params.mass();
    for j in 0..grid.nt() {
        if (0..grid.nx()).all(|i| !mask.is_valid(j, i)) {
            return Err(MadelungError::AllMasked { slice: j, r_floor });
        }
    }
    let values = Array2::from_shape_fn(grid.shape(), |(j, i)| {
        if mask.is_valid(j, i) {
            m * (f_t[j] - flux.get(j, i)) / r2.get(j, i)
        } else {
            0.0
        }
    });
    Ok(MaskedField::new(Field::from_values(grid, values)?, mask))
}

/// `S = g - ∫_{t0}^t (Q + V + p²/2m) dt`.
pub fn phase_field(
    p: &MaskedField,
    q: &Field,
    v: &MaskedField,
    g: &MaskedField,
    params: PhysParams,
) -> Result<MaskedField, MadelungError> {
    let two_m = 2.0 * params.mass();
    let q = MaskedField::full(q.clone());
    let drive = q
        .zip_map(v, |a, b| a + b)?
        .zip_map(p, |w, p| w + p * p / two_m)?;
    Ok(g.zip_map(&drive.cumint_t()?, |g, w| g - w)?)
}

/// `∂V = -∂t p - p ∂x p / m - ∂x Q`: the potential gradient that makes `p` a solution of the
/// Newton-form equation for the given `Q`.
pub fn reconstruct_dv(p: &MaskedField, q: &Field, params: PhysParams) -> Result<MaskedField, MadelungError> {
    let m = params.mass();
    let pt = p.ddt()?;
    let px = p.ddx();
    let qx = MaskedField::full(q.ddx());
    let convective = p.zip_map(&px, |p, px| p * px / m)?;
    Ok(pt
        .zip_map(&convective, |a, b| -a - b)?
        .zip_map(&qx, |a, b| a - b)?)
}

/// `V = ∫_{x_ref}^x ∂V dx` (so `V(x_ref, t) = 0`), with the staticity defect
/// `max |V(x, t) - V(x, t0)|` over nodes valid at both times.
pub fn integrate_v(dv: &MaskedField, x_ref: f64) -> Result<(MaskedField, f64), MadelungError> {
    let v = dv.cumint_x(x_ref)?;
    Ok((v.clone(), staticity_defect(&v)))
}

pub(crate) fn staticity_defect(v: &MaskedField) -> f64 {
    let grid = v.grid();
    let mut defect = 0.0_f64;
    for j in 0..grid.nt() {
        for i in 0..grid.nx() {
            if v.mask.is_valid(j, i) && v.mask.is_valid(0, i) {
                defect = defect.max((v.field.get(j, i) - v.field.get(0, i)).abs());
            }
        }
    }
    defect
}

/// `Q = -(ħ²/2m) R'' / R` on nodes with `|R| > r_floor`.
pub fn quantum_potential(r: &Field, params: PhysParams, r_floor: f64) -> Result<MaskedField, MadelungError> {
    let mask = nodal_mask(r, r_floor);
    let c = -params.hbar().powi(2) / (2.0 * params.mass());
    let d2 = r.d2dx2();
    let values = Array2::from_shape_fn(r.grid().shape(), |(j, i)| {
        if mask.is_valid(j, i) {
            c * d2.get(j, i) / r.get(j, i)
        } else {
            0.0
        }
    });
    Ok(MaskedField::new(Field::from_values(*r.grid(), values)?, mask))
}

/// `∂t(R²) + (1/m) ∂x(R² p)`.
pub fn residual_continuity(r: &Field, p: &MaskedField, params: PhysParams) -> Result<MaskedField, MadelungError> {
    let r2 = r.mul(r)?;
    let flux = MaskedField::new(r2.mul(&p.field)?, p.mask.clone()).ddx();
    let rate = MaskedField::full(r2.ddt()?);
    let m = params.mass();
    Ok(rate.zip_map(&flux, |a, b| a + b / m)?)
}

/// `∂t S + (∂x S)²/2m + Q + V`.
pub fn residual_hj(
    s: &MaskedField,
    q: &Field,
    v: &MaskedField,
    params: PhysParams,
) -> Result<MaskedField, MadelungError> {
    let two_m = 2.0 * params.mass();
    let st = s.ddt()?;
    let sx = s.ddx();
    let q = MaskedField::full(q.clone());
    Ok(st
        .zip_map(&sx, |a, b| a + b * b / two_m)?
        .zip_map(&q, |a, b| a + b)?
        .zip_map(v, |a, b| a + b)?)
}

/// `∂x S - p`.
pub fn residual_compatibility(s: &MaskedField, p: &MaskedField) -> Result<MaskedField, MadelungError> {
    Ok(s.ddx().zip_map(p, |a, b| a - b)?)
}

/// `∂t p + p ∂x p / m + ∂x(Q + V)`.
pub fn residual_newton(
    p: &MaskedField,
    q: &Field,
    v: &MaskedField,
    params: PhysParams,
) -> Result<MaskedField, MadelungError> {
    let m = params.mass();
    let qv = MaskedField::full(q.clone()).zip_map(v, |a, b| a + b)?.ddx();
    let px = p.ddx();
    Ok(p
        .ddt()?
        .zip_map(&p.zip_map(&px, |p, px| p * px / m)?, |a, b| a + b)?
        .zip_map(&qv, |a, b| a + b)?)
}

/// Schrödinger residual of `ψ = R e^{iS/ħ}`, returned in the frame of the phase: the real and
/// imaginary parts of `e^{-iS/ħ} (-(ħ²/2m) ψ'' + V ψ - iħ ∂t ψ)`.
///
/// Analytically the real part is `R` times the Hamilton-Jacobi residual (with `Q` taken from
/// `R`), and the imaginary part is `-(ħ/2R)` times the continuity residual with `p = ∂x S`.
pub fn residual_se(
    r: &Field,
    s: &MaskedField,
    v: &MaskedField,
    params: PhysParams,
) -> Result<(MaskedField, MaskedField), MadelungError> {
    let hbar = params.hbar();
    let psi = ComplexField::from_polar(r, &s.field, hbar)?;
    let kinetic = psi.d2dx2();
    let rate = psi.ddt()?;
    let c = hbar * hbar / (2.0 * params.mass());
    let grid = *r.grid();
    let mut re = Array2::zeros(grid.shape());
    let mut im = Array2::zeros(grid.shape());
    for j in 0..grid.nt() {
        for i in 0..grid.nx() {
            let z = psi.values()[[j, i]];
            let res = -c * kinetic.values()[[j, i]] + v.field.get(j, i) * z
                - Complex64::i() * hbar * rate.values()[[j, i]];
            let dephased = res * Complex64::from_polar(1.0, -s.field.get(j, i) / hbar);
            re[[j, i]] = dephased.re;
            im[[j, i]] = dephased.im;
        }
    }
    let mask = s
        .mask
        .through_x_stencil(2)
        .and(&s.mask.through_t_stencil())
        .and(&v.mask);
    Ok((
        MaskedField::new(Field::from_values(grid, re)?, mask.clone()),
        MaskedField::new(Field::from_values(grid, im)?, mask),
    ))
}

/// Spreads a profile in `x` over every slice.
pub fn broadcast_profile(grid: &crate::grid::SpaceTimeGrid, values: &[f64], valid: &[bool]) -> Result<MaskedField, MadelungError> {
    if values.len() != grid.nx() || valid.len() != grid.nx() {
        return Err(GridError::Shape {
            expected: (1, grid.nx()),
            found: (1, values.len()),
        }
        .into());
    }
    let field = Field::from_values(*grid, Array2::from_shape_fn(grid.shape(), |(_, i)| values[i]))?;
    let mask = Mask::from_fn(grid, |_, i| valid[i]);
    Ok(MaskedField::new(field, mask))
}
