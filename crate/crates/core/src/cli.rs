//! Problem files, reports and the `qpot` command line.
//!
//! A problem file is JSON. Every key is listed below, and unknown keys are rejected:
//!
//! ```json
//! {
//!   "grid": { "x0": 0.5, "x1": 1.5, "nx": 401, "t0": 0.0, "t1": 1.0, "nt": 401 },
//!   "physics": { "hbar": 1.0, "m": 1.0 },
//!   "q": "0",
//!   "mode": "reconstruct",
//!   "f": "-2*c*0.5*exp(2*c*t)",
//!   "bc": { "left": "exp(c*t)", "right": "exp(c*t)" },
//!   "constants": { "c": 0.5 },
//!   "tolerances": { "r_floor": 1e-8, "sigma_tol": 1e-8 }
//! }
//! ```
//!
//! `mode` is `"reconstruct"` (the default) or `"given"`, in which case `v` holds the potential.
//! `f` (a function of `t`) and `g` (a function of `x`) are optional; a missing `g` means the
//! phase starts from `∫ p(·, t0)`. `bc` is needed by `invert` only.
//!
//! Exit codes: 0 success, 1 other failure, 2 singular amplitude problem, 3 invalid input.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::elliptic::{sigma_spectrum, zero_in_sigma, DirichletData, SolveReport, DEFAULT_SIGMA_TOL};
use crate::expr::{parse_bound, Expr, Var};
use crate::grid::{CsvError, FieldDump, PhysParams, SpaceTimeGrid};
use crate::madelung::{
    golden_case, run_pipeline, AmplitudeInput, CaseName, MadelungError, PhaseSeed, PipelineConfig,
    PotentialMode, QInput, Residuals,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_SINGULAR: i32 = 2;
pub const EXIT_INVALID: i32 = 3;

/// Environment variable capping the number of worker threads (0 or unset: one per core).
pub const THREADS_ENV: &str = "QPOT_THREADS";

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x0: f64,
    pub x1: f64,
    pub nx: usize,
    pub t0: f64,
    pub t1: f64,
    pub nt: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSpec {
    pub hbar: f64,
    pub m: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BcSpec {
    pub left: String,
    pub right: String,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    pub r_floor: Option<f64>,
    pub sigma_tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeSpec {
    #[default]
    Reconstruct,
    Given,
}

/// The raw problem file.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub grid: GridSpec,
    pub physics: PhysicsSpec,
    pub q: String,
    #[serde(default)]
    pub mode: ModeSpec,
    pub v: Option<String>,
    pub f: Option<String>,
    pub g: Option<String>,
    pub bc: Option<BcSpec>,
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
    #[serde(default)]
    pub tolerances: ToleranceSpec,
}

/// A validation failure, tagged with the offending key.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{key}: {message}")]
pub struct SpecError {
    pub key: String,
    pub message: String,
}

impl SpecError {
    fn new(key: impl Into<String>, message: impl ToString) -> Self {
        SpecError {
            key: key.into(),
            message: message.to_string(),
        }
    }
}

/// A validated problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub grid: SpaceTimeGrid,
    pub params: PhysParams,
    pub q: Expr,
    pub config: PipelineConfig,
    /// Left and right Dirichlet data as functions of `t`.
    pub bc: Option<(Expr, Expr)>,
}

const RESERVED: [&str; 12] = ["x", "t", "hbar", "m", "pi", "e", "exp", "log", "sin", "cos", "sqrt", "abs"];

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        serde_json::from_str(text).map_err(|e| SpecError::new("spec", e))
    }

    pub fn load(path: &Path) -> Result<Self, SpecError> {
        let text = fs::read_to_string(path).map_err(|e| SpecError::new("spec", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<Problem, SpecError> {
        let g = &self.grid;
        let grid = SpaceTimeGrid::new(g.x0, g.x1, g.nx, g.t0, g.t1, g.nt).map_err(|e| SpecError::new("grid", e))?;
        let params = PhysParams::new(self.physics.hbar, self.physics.m).map_err(|e| SpecError::new("physics", e))?;
        for (name, value) in &self.constants {
            let key = format!("constants.{name}");
            let ident = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
            if !ident {
                return Err(SpecError::new(key, "not an identifier"));
            }
            if RESERVED.contains(&name.as_str()) {
                return Err(SpecError::new(key, "name is reserved by the expression language"));
            }
            if !value.is_finite() {
                return Err(SpecError::new(key, "value must be finite"));
            }
        }
        let expr = |key: &str, src: &str| parse_bound(src, &self.constants).map_err(|e| SpecError::new(key, e));
        let only = |key: &str, e: Expr, forbidden: Var| {
            if e.depends_on(forbidden) {
                let var = if forbidden == Var::X { "x" } else { "t" };
                Err(SpecError::new(key, format!("must not depend on {var}")))
            } else {
                Ok(e)
            }
        };

        let q = expr("q", &self.q)?;
        let v = match (self.mode, &self.v) {
            (ModeSpec::Given, Some(v)) => PotentialMode::Given(expr("v", v)?),
            (ModeSpec::Given, None) => return Err(SpecError::new("v", "required when mode is \"given\"")),
            (ModeSpec::Reconstruct, None) => PotentialMode::Reconstruct,
            (ModeSpec::Reconstruct, Some(_)) => {
                return Err(SpecError::new("v", "only allowed when mode is \"given\""))
            }
        };
        let f = match &self.f {
            Some(src) => only("f", expr("f", src)?, Var::X)?,
            None => Expr::zero(),
        };
        let g_seed = match &self.g {
            Some(src) => PhaseSeed::Expr(only("g", expr("g", src)?, Var::T)?),
            None => PhaseSeed::Auto,
        };
        let bc = match &self.bc {
            Some(bc) => Some((
                only("bc.left", expr("bc.left", &bc.left)?, Var::X)?,
                only("bc.right", expr("bc.right", &bc.right)?, Var::X)?,
            )),
            None => None,
        };
        let tol = &self.tolerances;
        if let Some(r) = tol.r_floor {
            if !(r.is_finite() && r > 0.0) {
                return Err(SpecError::new("tolerances.r_floor", "must be positive"));
            }
        }
        if let Some(s) = tol.sigma_tol {
            if !(s.is_finite() && s >= 0.0) {
                return Err(SpecError::new("tolerances.sigma_tol", "must be non-negative"));
            }
        }

        let mut config = PipelineConfig::new(params);
        config.f = f;
        config.g = g_seed;
        config.v = v;
        config.r_floor = tol.r_floor;
        config.sigma_tol = tol.sigma_tol.unwrap_or(DEFAULT_SIGMA_TOL);
        Ok(Problem { grid, params, q, config, bc })
    }
}

impl Problem {
    /// Samples the boundary expressions at every slice.
    pub fn dirichlet_data(&self) -> Result<DirichletData, SpecError> {
        let (left, right) = self.bc.as_ref().ok_or_else(|| SpecError::new("bc", "required to solve for the amplitude"))?;
        let sample = |key: &str, e: &Expr| -> Result<Vec<f64>, SpecError> {
            self.grid
                .ts()
                .iter()
                .map(|&t| e.eval(self.grid.x0(), t, self.params.into()).map_err(|err| SpecError::new(key, format!("at t = {t}: {err}"))))
                .collect()
        };
        Ok(DirichletData {
            left: sample("bc.left", left)?,
            right: sample("bc.right", right)?,
        })
    }
}

/// Contents of `report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Report<'a> {
    #[serde(flatten)]
    pub residuals: &'a Residuals,
    pub masked_fraction: f64,
    pub v_staticity_defect: f64,
    pub r_floor: f64,
    pub x_ref: f64,
    pub psi_written: bool,
    pub slices: &'a [SolveReport],
}

fn write_atomic(dir: &Path, name: &str, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> std::io::Result<PathBuf> {
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        body(&mut w)?;
        w.flush()?;
    }
    fs::rename(&tmp, &target)?;
    Ok(target)
}

fn pipeline_exit(e: &MadelungError) -> i32 {
    match e {
        MadelungError::Elliptic(inner) if inner.is_singular() => EXIT_SINGULAR,
        MadelungError::Eval(_) | MadelungError::Dependency { .. } | MadelungError::Config(_) => EXIT_INVALID,
        _ => EXIT_FAILURE,
    }
}

/// `invert`: runs the pipeline and writes `report.json` plus the field dumps into `out_dir`.
/// Nothing is written unless the pipeline succeeds.
pub fn cmd_invert(spec_path: &Path, out_dir: &Path, err: &mut dyn Write) -> i32 {
    let problem = match ProblemSpec::load(spec_path).and_then(|s| s.validate()) {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INVALID;
        }
    };
    let bc = match problem.dirichlet_data() {
        Ok(bc) => bc,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INVALID;
        }
    };
    let amplitude = AmplitudeInput::Solve { bc, source: None };
    let res = match run_pipeline(&QInput::Expr(problem.q.clone()), &amplitude, &problem.grid, &problem.config) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return pipeline_exit(&e);
        }
    };
    if res.psi.is_none() {
        let _ = writeln!(
            err,
            "warning: {:.1}% of nodes are below the nodal floor, psi.csv not written",
            100.0 * res.masked_fraction
        );
    }

    let report = Report {
        residuals: &res.residuals,
        masked_fraction: res.masked_fraction,
        v_staticity_defect: res.v_staticity_defect,
        r_floor: res.r_floor,
        x_ref: res.x_ref,
        psi_written: res.psi.is_some(),
        slices: &res.reports,
    };
    let written = (|| -> std::io::Result<()> {
        fs::create_dir_all(out_dir)?;
        write_atomic(out_dir, "R.csv", |w| res.r.write_csv(w))?;
        write_atomic(out_dir, "p.csv", |w| res.p.write_csv(w))?;
        write_atomic(out_dir, "S.csv", |w| res.s.write_csv(w))?;
        write_atomic(out_dir, "V.csv", |w| res.v.write_csv(w))?;
        if let Some(psi) = &res.psi {
            write_atomic(out_dir, "psi.csv", |w| psi.write_csv(w))?;
        }
        // Last, so that its presence marks a complete run.
        write_atomic(out_dir, "report.json", |w| {
            serde_json::to_writer_pretty(&mut *w, &report)?;
            writeln!(w)
        })?;
        Ok(())
    })();
    match written {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: writing {}: {e}", out_dir.display());
            EXIT_FAILURE
        }
    }
}

/// One line of `eigs` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenLine {
    pub slice: usize,
    pub t: f64,
    pub eigenvalues: Vec<f64>,
    pub zero_in_sigma: bool,
}

/// `eigs`: the `n` lowest eigenvalues of `-d²/dx² - βQ` per slice, as JSON lines.
pub fn cmd_eigs(spec_path: &Path, n: usize, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let problem = match ProblemSpec::load(spec_path).and_then(|s| s.validate()) {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INVALID;
        }
    };
    let q = match problem.q.eval_field(&problem.grid, problem.params.into()) {
        Ok(q) => q,
        Err(e) => {
            let _ = writeln!(err, "error: q: {e}");
            return EXIT_INVALID;
        }
    };
    let axis = problem.grid.space();
    let beta = problem.params.beta();
    for j in 0..problem.grid.nt() {
        let slice = q.slice(j);
        let line = sigma_spectrum(&axis, &slice, beta, n).and_then(|eigenvalues| {
            let (zero, _) = zero_in_sigma(&axis, &slice, beta, problem.config.sigma_tol)?;
            Ok(EigenLine {
                slice: j,
                t: problem.grid.t(j),
                eigenvalues,
                zero_in_sigma: zero,
            })
        });
        match line {
            Ok(line) => {
                let text = serde_json::to_string(&line).expect("plain data");
                if writeln!(out, "{text}").is_err() {
                    return EXIT_FAILURE;
                }
            }
            Err(e) => {
                let _ = writeln!(err, "error: slice {j}: {e}");
                return EXIT_INVALID;
            }
        }
    }
    EXIT_OK
}

fn parse_overrides(sets: &[String]) -> Result<BTreeMap<String, f64>, SpecError> {
    let mut out = BTreeMap::new();
    for s in sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| SpecError::new("--set", format!("`{s}` is not of the form key=value")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| SpecError::new(format!("--set {}", k.trim()), format!("`{v}` is not a number")))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

/// `case`: runs a golden case and prints the comparison table; succeeds iff every row passes.
pub fn cmd_case(name: &str, sets: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let case_name: CaseName = match name.parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INVALID;
        }
    };
    let case = match parse_overrides(sets).map_err(|e| e.to_string()).and_then(|o| golden_case(case_name, &o).map_err(|e| e.to_string())) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INVALID;
        }
    };
    let rows = match case.verify() {
        Ok((_, rows)) => rows,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return match e {
                crate::madelung::GoldenError::Pipeline(p) => pipeline_exit(&p),
                _ => EXIT_FAILURE,
            };
        }
    };
    let bindings: Vec<String> = case.bindings.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let width = rows.iter().map(|r| r.name.chars().count()).max().unwrap_or(0);
    let mut text = format!("case {case_name} ({})\n", bindings.join(", "));
    for r in &rows {
        let pad = width - r.name.chars().count();
        text.push_str(&format!(
            "{}  {}{}  {:>10.3e}  <= {:.0e}\n",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            " ".repeat(pad),
            r.measured,
            r.tolerance
        ));
    }
    let failed = rows.iter().filter(|r| !r.passed).count();
    if failed == 0 {
        text.push_str(&format!("all {} checks passed\n", rows.len()));
    } else {
        text.push_str(&format!("{failed} of {} checks failed\n", rows.len()));
    }
    if out.write_all(text.as_bytes()).is_err() {
        return EXIT_FAILURE;
    }
    if failed == 0 {
        EXIT_OK
    } else {
        EXIT_FAILURE
    }
}

/// Color ramp of heatmaps: five stops sampled from viridis, interpolated linearly in RGB from
/// the smallest value (dark purple) to the largest (yellow). Masked (`NaN`) cells are grey.
pub const RAMP: [(u8, u8, u8); 5] = [
    (0x44, 0x01, 0x54),
    (0x3b, 0x52, 0x8b),
    (0x21, 0x91, 0x8c),
    (0x5e, 0xc9, 0x62),
    (0xfd, 0xe7, 0x25),
];

pub const MASKED_COLOR: &str = "#cccccc";

/// Ramp color at `u ∈ [0, 1]`.
pub fn ramp_color(u: f64) -> String {
    let u = u.clamp(0.0, 1.0) * (RAMP.len() - 1) as f64;
    let k = (u.floor() as usize).min(RAMP.len() - 2);
    let w = u - k as f64;
    let mix = |a: u8, b: u8| (a as f64 + w * (b as f64 - a as f64)).round() as u8;
    let (a, b) = (RAMP[k], RAMP[k + 1]);
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 60.0;
/// Heatmaps are decimated to at most this many cells per direction.
const MAX_CELLS: usize = 200;

fn value_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    if hi - lo <= 1e-12 * lo.abs().max(1.0) {
        let pad = 0.5 * lo.abs().max(1.0);
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn svg_frame(title: &str, xlabel: (f64, f64), ylabel: (f64, f64), body: &str) -> String {
    let (pw, ph) = (W - 2.0 * MARGIN, H - 2.0 * MARGIN);
    format!(
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">
<rect width="{W}" height="{H}" fill="white"/>
<text x="{cx}" y="24" text-anchor="middle" font-size="14">{title}</text>
{body}<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="black"/>
<text x="{MARGIN}" y="{by}" text-anchor="start">{x0:.4}</text>
<text x="{rx}" y="{by}" text-anchor="end">{x1:.4}</text>
<text x="{lx}" y="{ty}" text-anchor="end">{y1:.4}</text>
<text x="{lx}" y="{bot}" text-anchor="end">{y0:.4}</text>
</svg>
"##,
        cx = W / 2.0,
        by = H - MARGIN + 18.0,
        rx = W - MARGIN,
        lx = MARGIN - 6.0,
        ty = MARGIN + 4.0,
        bot = H - MARGIN,
        x0 = xlabel.0,
        x1 = xlabel.1,
        y0 = ylabel.0,
        y1 = ylabel.1,
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders one slice as a polyline, several as a heatmap over `(x, t)`.
pub fn render_svg(dump: &FieldDump, title: &str) -> String {
    let title = escape(title);
    let (pw, ph) = (W - 2.0 * MARGIN, H - 2.0 * MARGIN);
    let xs = &dump.xs;
    let (xa, xb) = (xs[0], *xs.last().expect("non-empty"));
    let xspan = if xb > xa { xb - xa } else { 1.0 };
    let (lo, hi) = value_range(dump.values.iter().flatten().copied());
    if dump.ts.len() == 1 {
        // NaN samples split the line.
        let mut body = String::new();
        let mut run: Vec<String> = Vec::new();
        let flush = |run: &mut Vec<String>, body: &mut String| {
            if run.len() > 1 {
                body.push_str(&format!(
                    "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"{}\"/>\n",
                    run.join(" ")
                ));
            }
            run.clear();
        };
        for (x, v) in xs.iter().zip(&dump.values[0]) {
            if v.is_finite() {
                let px = MARGIN + pw * (x - xa) / xspan;
                let py = H - MARGIN - ph * (v - lo) / (hi - lo);
                run.push(format!("{px:.2},{py:.2}"));
            } else {
                flush(&mut run, &mut body);
            }
        }
        flush(&mut run, &mut body);
        let title = format!("{title} (t = {})", dump.ts[0]);
        return svg_frame(&title, (xa, xb), (lo, hi), &body);
    }

    let ts = &dump.ts;
    let (ta, tb) = (ts[0], *ts.last().expect("non-empty"));
    let stride_x = xs.len().div_ceil(MAX_CELLS);
    let stride_t = ts.len().div_ceil(MAX_CELLS);
    let cols: Vec<usize> = (0..xs.len()).step_by(stride_x).collect();
    let rows: Vec<usize> = (0..ts.len()).step_by(stride_t).collect();
    let (cw, chh) = (pw / cols.len() as f64, ph / rows.len() as f64);
    let mut body = String::new();
    for (r, &j) in rows.iter().enumerate() {
        for (c, &i) in cols.iter().enumerate() {
            let v = dump.values[j][i];
            let fill = if v.is_finite() { ramp_color((v - lo) / (hi - lo)) } else { MASKED_COLOR.to_string() };
            // Time grows upwards.
            let y = H - MARGIN - (r + 1) as f64 * chh;
            body.push_str(&format!(
                "<rect x=\"{:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{fill}\"/>\n",
                MARGIN + c as f64 * cw,
                cw + 0.3,
                chh + 0.3
            ));
        }
    }
    // Color bar with the value range.
    let bx = W - MARGIN + 12.0;
    let steps = 32;
    for k in 0..steps {
        let y = H - MARGIN - (k + 1) as f64 * ph / steps as f64;
        body.push_str(&format!(
            "<rect x=\"{bx}\" y=\"{y:.2}\" width=\"12\" height=\"{:.2}\" fill=\"{}\"/>\n",
            ph / steps as f64 + 0.3,
            ramp_color((k as f64 + 0.5) / steps as f64)
        ));
    }
    body.push_str(&format!(
        "<text x=\"{bx}\" y=\"{:.2}\" font-size=\"10\">{hi:.3e}</text>\n<text x=\"{bx}\" y=\"{:.2}\" font-size=\"10\">{lo:.3e}</text>\n",
        MARGIN - 6.0,
        H - MARGIN + 14.0
    ));
    svg_frame(&format!("{title} (x horizontal, t vertical)"), (xa, xb), (ta, tb), &body)
}

/// `plot`: renders a field dump to a self-contained SVG.
pub fn cmd_plot(csv_path: &Path, svg_path: &Path, err: &mut dyn Write) -> i32 {
    let file = match fs::File::open(csv_path) {
        Ok(f) => f,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", csv_path.display());
            return EXIT_INVALID;
        }
    };
    let dump = match FieldDump::read(BufReader::new(file)) {
        Ok(d) => d,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", csv_path.display());
            return match e {
                CsvError::Io(_) => EXIT_FAILURE,
                _ => EXIT_INVALID,
            };
        }
    };
    let title = csv_path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let svg = render_svg(&dump, &title);
    let dir = svg_path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = match svg_path.file_name() {
        Some(n) => n.to_string_lossy().into_owned(),
        None => {
            let _ = writeln!(err, "error: {} is not a file path", svg_path.display());
            return EXIT_INVALID;
        }
    };
    match write_atomic(dir, &name, |w| w.write_all(svg.as_bytes())) {
        Ok(_) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: writing {}: {e}", svg_path.display());
            EXIT_FAILURE
        }
    }
}

/// Sizes the global worker pool from [`THREADS_ENV`]. Returns the requested count (0: auto).
pub fn configure_threads(err: &mut dyn Write) -> usize {
    let requested = match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) => n,
            Err(_) => {
                let _ = writeln!(err, "warning: ignoring {THREADS_ENV}={v:?}, expected a count");
                0
            }
        },
        Err(_) => 0,
    };
    if requested > 0 {
        // Fails only if the pool was already built, in which case it stays as it is.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(requested).build_global();
    }
    requested
}

#[derive(Debug, Parser)]
#[command(name = "qpot", version, about = "Invert a quantum potential into amplitude, phase and classical potential")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a problem file and write the report and field dumps.
    Invert {
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the lowest eigenvalues of the amplitude operator per slice.
    Eigs {
        spec: PathBuf,
        #[arg(short = 'n', default_value_t = 5)]
        n: usize,
    },
    /// Verify a closed-form case (linear_a0, linear_b0, plane_wave, cos_superposition, oscillator_n).
    Case {
        name: String,
        /// Override a case parameter or grid value, e.g. `--set n=3`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Render a field dump to SVG.
    Plot { csv: PathBuf, svg: PathBuf },
}

/// Entry point of the binary; returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_FAILURE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    configure_threads(err);
    match cli.command {
        Command::Invert { spec, out: dir } => cmd_invert(&spec, &dir, err),
        Command::Eigs { spec, n } => cmd_eigs(&spec, n, out, err),
        Command::Case { name, set } => cmd_case(&name, &set, out, err),
        Command::Plot { csv, svg } => cmd_plot(&csv, &svg, err),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "grid": {"x0": 0, "x1": 1, "nx": 11, "t0": 0, "t1": 1, "nt": 3},
        "physics": {"hbar": 1, "m": 1},
        "q": "a*x",
        "constants": {"a": 2}
    }"#;

    #[test]
    fn minimal_spec_validates() {
        let p = ProblemSpec::from_json(MINIMAL).unwrap().validate().unwrap();
        assert_eq!(p.grid.nx(), 11);
        assert_eq!(p.q.eval(0.5, 0.0, p.params.into()).unwrap(), 1.0);
        assert_eq!(p.config.v, PotentialMode::Reconstruct);
        assert_eq!(p.config.g, PhaseSeed::Auto);
        assert!(p.bc.is_none());
    }

    fn key_of(json: &str) -> String {
        ProblemSpec::from_json(json).and_then(|s| s.validate()).unwrap_err().key
    }

    #[test]
    fn errors_name_their_key() {
        let with = |extra: &str| MINIMAL.replacen("\"q\": \"a*x\",", &format!("\"q\": \"a*x\", {extra}"), 1);
        assert_eq!(key_of(&with(r#""mode": "given","#)), "v");
        assert_eq!(key_of(&with(r#""v": "0","#)), "v");
        assert_eq!(key_of(&with(r#""f": "x","#)), "f");
        assert_eq!(key_of(&with(r#""g": "t","#)), "g");
        assert_eq!(key_of(&with(r#""bc": {"left": "1", "right": "x"},"#)), "bc.right");
        assert_eq!(key_of(&with(r#""tolerances": {"r_floor": -1},"#)), "tolerances.r_floor");
        assert_eq!(key_of(&MINIMAL.replace("a*x", "a*y")), "q");
        assert_eq!(key_of(&MINIMAL.replace("\"a\": 2", "\"pi\": 2")), "constants.pi");
        assert_eq!(key_of(&MINIMAL.replace("\"nx\": 11", "\"nx\": 2")), "grid");
        assert_eq!(key_of(&MINIMAL.replace("\"m\": 1", "\"m\": 0")), "physics");
        let unknown = ProblemSpec::from_json(&with(r#""colour": 1,"#)).unwrap_err();
        assert!(unknown.message.contains("colour"), "{unknown}");
        let missing = ProblemSpec::from_json(r#"{"q": "0"}"#).unwrap_err();
        assert!(missing.message.contains("grid"), "{missing}");
    }

    #[test]
    fn overrides_parse() {
        let o = parse_overrides(&["n=3".into(), " k = 2.5".into()]).unwrap();
        assert_eq!(o["n"], 3.0);
        assert_eq!(o["k"], 2.5);
        assert!(parse_overrides(&["n".into()]).is_err());
        assert!(parse_overrides(&["n=x".into()]).is_err());
    }

    #[test]
    fn ramp_endpoints() {
        assert_eq!(ramp_color(0.0), "#440154");
        assert_eq!(ramp_color(1.0), "#fde725");
        assert_eq!(ramp_color(0.5), "#21918c");
        assert_eq!(ramp_color(f64::NAN.max(2.0)), "#fde725");
    }
}
