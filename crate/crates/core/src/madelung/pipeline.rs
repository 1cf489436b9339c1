use serde::Serialize;

use super::{
    broadcast_profile, integrate_v, momentum_field, nodal_mask, phase_field, reconstruct_dv,
    residual_compatibility, residual_continuity, residual_hj, residual_newton, residual_se,
    MadelungError,
};
use crate::elliptic::{solve_all_slices, DirichletData, SolveReport, DEFAULT_SIGMA_TOL};
use crate::expr::{Expr, Var};
use crate::grid::{ComplexField, Field, GridError, MaskedField, PhysParams, SpaceTimeGrid};

/// How the initial phase profile `g(x) = S(x, t0)` is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum PhaseSeed {
    /// `g = ∫_{x_ref}^x p(·, t0)`, which closes `∂x S = p` at `t0`.
    Auto,
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialMode {
    Given(Expr),
    /// Define `∂V` so that the Newton-form equation holds for the computed `p`.
    Reconstruct,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub params: PhysParams,
    /// `f(t)`, the free function of the continuity inversion.
    pub f: Expr,
    pub g: PhaseSeed,
    pub v: PotentialMode,
    /// Nodal guard; `None` means `1e-8 · linf(R)`.
    pub r_floor: Option<f64>,
    /// Quadrature base point in `x`; `None` means the left end.
    pub x_ref: Option<f64>,
    /// Shift of the amplitude operator.
    pub mu: f64,
    pub sigma_tol: f64,
}

impl PipelineConfig {
    pub fn new(params: PhysParams) -> Self {
        PipelineConfig {
            params,
            f: Expr::zero(),
            g: PhaseSeed::Auto,
            v: PotentialMode::Reconstruct,
            r_floor: None,
            x_ref: None,
            mu: 0.0,
            sigma_tol: DEFAULT_SIGMA_TOL,
        }
    }

    fn validate(&self, grid: &SpaceTimeGrid) -> Result<f64, MadelungError> {
        if let Some(r) = self.r_floor {
            if !(r.is_finite() && r > 0.0) {
                return Err(MadelungError::Config(format!("r_floor must be positive, got {r}")));
            }
        }
        if !(self.sigma_tol.is_finite() && self.sigma_tol >= 0.0) || !self.mu.is_finite() {
            return Err(MadelungError::Config("mu and sigma_tol must be finite".into()));
        }
        let x_ref = self.x_ref.unwrap_or(grid.x0());
        if !(grid.x0()..=grid.x1()).contains(&x_ref) {
            return Err(GridError::ReferenceOutside { x_ref, x0: grid.x0(), x1: grid.x1() }.into());
        }
        Ok(x_ref)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QInput {
    Expr(Expr),
    Field(Field),
}

#[derive(Debug, Clone, PartialEq)]
pub enum AmplitudeInput {
    /// Solve the amplitude problem slice by slice with these Dirichlet values.
    Solve { bc: DirichletData, source: Option<Field> },
    /// Use this amplitude as is (for example when the slice problem is singular because `Q`
    /// is an exact eigen-potential).
    Given(Field),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualNorms {
    pub linf: f64,
    pub l2: f64,
}

impl ResidualNorms {
    fn of(name: &'static str, f: &MaskedField) -> Result<Self, MadelungError> {
        if f.mask.count_valid() == 0 {
            return Err(MadelungError::EmptySupport(name));
        }
        Ok(ResidualNorms { linf: f.linf(), l2: f.l2() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residuals {
    pub continuity: ResidualNorms,
    pub hj: ResidualNorms,
    pub newton: ResidualNorms,
    pub compatibility: ResidualNorms,
    pub se_real: ResidualNorms,
    pub se_imag: ResidualNorms,
}

impl Residuals {
    pub const NAMES: [&'static str; 6] = ["continuity", "hj", "newton", "compatibility", "se_real", "se_imag"];

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, ResidualNorms)> {
        let all = [self.continuity, self.hj, self.newton, self.compatibility, self.se_real, self.se_imag];
        Self::NAMES.into_iter().zip(all)
    }

    pub fn get(&self, name: &str) -> Option<ResidualNorms> {
        self.iter().find(|(n, _)| *n == name).map(|(_, r)| r)
    }
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub r: Field,
    pub q_used: Field,
    pub p: MaskedField,
    pub s: MaskedField,
    pub v: MaskedField,
    /// Reconstructed `∂V` (reconstruct mode only).
    pub dv: Option<MaskedField>,
    /// `None` when more than half the nodes are masked.
    pub psi: Option<ComplexField>,
    pub residuals: Residuals,
    pub masked_fraction: f64,
    pub v_staticity_defect: f64,
    pub r_floor: f64,
    pub x_ref: f64,
    /// Per-slice solver diagnostics (empty for a given amplitude).
    pub reports: Vec<SolveReport>,
}

/// Amplitude, momentum, potential, phase and residuals, in that order.
pub fn run_pipeline(
    q: &QInput,
    amplitude: &AmplitudeInput,
    grid: &SpaceTimeGrid,
    config: &PipelineConfig,
) -> Result<PipelineResult, MadelungError> {
    let x_ref = config.validate(grid)?;
    let params = config.params;
    if grid.nt() < 3 {
        return Err(GridError::TooFewSlices { needed: 3, found: grid.nt() }.into());
    }
    let q_used = match q {
        QInput::Expr(e) => e.eval_field(grid, params.into())?,
        QInput::Field(f) => {
            if f.grid() != grid {
                return Err(GridError::GridMismatch.into());
            }
            f.clone()
        }
    };

    let (r, reports) = match amplitude {
        AmplitudeInput::Solve { bc, source } => {
            solve_all_slices(&q_used, params, config.mu, bc, source.as_ref(), config.sigma_tol)?
        }
        AmplitudeInput::Given(r) => {
            if r.grid() != grid {
                return Err(GridError::GridMismatch.into());
            }
            (r.clone(), Vec::new())
        }
    };

    let r_floor = config.r_floor.unwrap_or(1e-8 * r.linf());
    let p = momentum_field(&r, &config.f, params, x_ref, r_floor)?;
    let masked_fraction = nodal_mask(&r, r_floor).masked_fraction();

    let (v, dv, v_staticity_defect) = match &config.v {
        PotentialMode::Given(e) => {
            let v = MaskedField::full(e.eval_field(grid, params.into())?);
            let defect = super::staticity_defect(&v);
            (v, None, defect)
        }
        PotentialMode::Reconstruct => {
            let dv = reconstruct_dv(&p, &q_used, params)?;
            let (v, defect) = integrate_v(&dv, x_ref)?;
            (v, Some(dv), defect)
        }
    };

    let g = match &config.g {
        PhaseSeed::Auto => {
            let gx = p.cumint_x(x_ref)?;
            let values = gx.field.slice(0);
            let valid: Vec<bool> = (0..grid.nx()).map(|i| gx.mask.is_valid(0, i)).collect();
            broadcast_profile(grid, &values, &valid)?
        }
        PhaseSeed::Expr(e) => {
            if e.depends_on(Var::T) {
                return Err(MadelungError::Dependency { what: "g", var: "t" });
            }
            MaskedField::full(e.eval_field(grid, params.into())?)
        }
    };
    let s = phase_field(&p, &q_used, &v, &g, params)?;

    let (se_re, se_im) = residual_se(&r, &s, &v, params)?;
    let residuals = Residuals {
        continuity: ResidualNorms::of("continuity", &residual_continuity(&r, &p, params)?)?,
        hj: ResidualNorms::of("hj", &residual_hj(&s, &q_used, &v, params)?)?,
        newton: ResidualNorms::of("newton", &residual_newton(&p, &q_used, &v, params)?)?,
        compatibility: ResidualNorms::of("compatibility", &residual_compatibility(&s, &p)?)?,
        se_real: ResidualNorms::of("se_real", &se_re)?,
        se_imag: ResidualNorms::of("se_imag", &se_im)?,
    };

    let psi = if masked_fraction > 0.5 {
        None
    } else {
        Some(ComplexField::from_polar(&r, &s.field, params.hbar())?)
    };

    Ok(PipelineResult {
        r,
        q_used,
        p,
        s,
        v,
        dv,
        psi,
        residuals,
        masked_fraction,
        v_staticity_defect,
        r_floor,
        x_ref,
        reports,
    })
}
