//! Acceptance suite: one PASS/FAIL line per criterion, at the stated grids and tolerances.
//!
//! Runs without the libtest harness so the lines are always printed. Exits non-zero if any
//! criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use qpot::elliptic::{sigma_spectrum, solve_slice, DirichletData, EllipticProblem};
use qpot::expr::{parse, parse_bound};
use qpot::grid::{Axis, Field, MaskedField, PhysParams, SpaceTimeGrid};
use qpot::madelung::{
    golden_case, hermite_function, quantum_potential, run_pipeline, zero_crossings, AmplitudeInput, CaseName,
    GoldenCase, PhaseSeed, PipelineConfig, PipelineResult, QInput,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Halving h and τ must shrink a truncation-dominated error by 3.5 to 4.5. An error already at
/// rounding level on the coarse grid has nothing left to converge.
fn refinement(coarse: f64, fine: f64) -> (bool, f64) {
    let ratio = coarse / fine;
    (coarse <= 1e-10 || (3.5..=4.5).contains(&ratio), ratio)
}

fn max_err(a: &MaskedField, b: &Field, keep: impl Fn(usize, usize) -> bool) -> f64 {
    let g = a.grid();
    let mut e = 0.0_f64;
    for j in 0..g.nt() {
        for i in 0..g.nx() {
            if a.mask.is_valid(j, i) && keep(j, i) {
                e = e.max((a.field.get(j, i) - b.get(j, i)).abs());
            }
        }
    }
    e
}

fn case(name: CaseName, sets: &[(&str, f64)]) -> GoldenCase {
    let o: BTreeMap<String, f64> = sets.iter().map(|&(k, v)| (k.to_string(), v)).collect();
    golden_case(name, &o).unwrap()
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn linear_branch(name: CaseName) -> Outcome {
    let fine = case(name, &[]);
    let coarse = case(name, &[("nx", 201.0), ("nt", 201.0)]);
    let run = |c: &GoldenCase| {
        let res = c.run_pipeline().unwrap();
        let all = |_: usize, _: usize| true;
        (max_err(res.dv.as_ref().unwrap(), &c.dv, all), max_err(&res.p, &c.p, all))
    };
    let (dv, p) = run(&fine);
    let (dv_c, p_c) = run(&coarse);
    let (conv, ratio) = refinement(dv_c, dv);
    let (pconv, pratio) = refinement(p_c, p);
    let mut passed = dv <= 1e-3 && conv;
    let mut detail = format!("|dV - dV*| = {dv:.3e} (<= 1e-3), ratio {ratio:.2}");
    if name == CaseName::LinearA0 {
        passed &= p <= 1e-4 && pconv;
        detail.push_str(&format!("; |p - p*| = {p:.3e} (<= 1e-4), ratio {pratio:.2}"));
    }
    Outcome { passed, detail }
}

fn criterion_1() -> Outcome {
    linear_branch(CaseName::LinearA0)
}

fn criterion_2() -> Outcome {
    linear_branch(CaseName::LinearB0)
}

fn criterion_3() -> Outcome {
    let c = case(CaseName::CosSuperposition, &[]);
    let res = c.run_pipeline().unwrap();
    let s_err = max_err(&res.s, &c.s, |_, _| true);
    let se = res.residuals.se_real.linf.max(res.residuals.se_imag.linf);
    let coarse = case(CaseName::CosSuperposition, &[("nx", 201.0), ("nt", 201.0)]).run_pipeline().unwrap();
    let se_c = coarse.residuals.se_real.linf.max(coarse.residuals.se_imag.linf);
    let (conv, ratio) = refinement(se_c, se);
    Outcome {
        passed: s_err <= 1e-10 && se <= 1e-5 && conv,
        detail: format!(
            "|S + t/2| = {s_err:.3e} (<= 1e-10); SE residual {se:.3e} (<= 1e-5), ratio {ratio:.2}; masked {:.3}",
            res.masked_fraction
        ),
    }
}

fn criterion_4() -> Outcome {
    let run = |name, n: f64| {
        let c = case(name, &[("nx", n), ("nt", n)]);
        let res = c.run_pipeline().unwrap();
        let q = quantum_potential(&res.r, c.params, res.r_floor).unwrap();
        (c, res, q)
    };
    let se = |r: &PipelineResult| r.residuals.se_real.linf.max(r.residuals.se_imag.linf);

    let (_, pw_res, pw_q) = run(CaseName::PlaneWave, 401.0);
    let r_exact = pw_res.r.values().iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    let q_pw = pw_q.linf();

    let (cs, cs_res, cs_q) = run(CaseName::CosSuperposition, 401.0);
    let away = |g: &SpaceTimeGrid| {
        let g = *g;
        move |_: usize, i: usize| g.x(i).cos().abs() > 0.1
    };
    let q_cos = max_err(&cs_q, &cs.q, away(&cs.grid));
    let se_max = se(&pw_res).max(se(&cs_res));
    let (_, pw_coarse, _) = run(CaseName::PlaneWave, 201.0);
    let (_, cs_coarse, _) = run(CaseName::CosSuperposition, 201.0);
    let (conv_pw, ratio_pw) = refinement(se(&pw_coarse), se(&pw_res));
    let (conv_cs, ratio_cs) = refinement(se(&cs_coarse), se(&cs_res));
    let conv = conv_pw && conv_cs;
    Outcome {
        passed: q_pw <= 1e-8 && r_exact <= 1e-12 && q_cos <= 1e-3 && conv && se_max <= 1e-5,
        detail: format!(
            "plane wave |Q_rec| = {q_pw:.3e} (<= 1e-8), |R - 1| = {r_exact:.1e} (rounding, <= 1e-12); cos |Q_rec - 1/2| = {q_cos:.3e} (<= 1e-3); SE residuals <= {se_max:.3e} (<= 1e-5), ratios {ratio_pw:.2}, {ratio_cs:.2}"
        ),
    }
}

fn criterion_5() -> Outcome {
    let grid = SpaceTimeGrid::stationary(-8.0, 8.0, 2001, 0.0).unwrap();
    let params = PhysParams::unit();
    let mut passed = true;
    let mut parts = Vec::new();
    for n in 0..4usize {
        let r = Field::from_fn(grid, |x, _| hermite_function(n, 1.0, x)).unwrap();
        let exact = Field::from_fn(grid, |x, _| n as f64 + 0.5 - 0.5 * x * x).unwrap();
        let cut = 1e-6 * r.linf();
        let q = quantum_potential(&r, params, cut).unwrap();
        let err = max_err(&q, &exact, |_, _| true);
        let x_star = (2.0 * (n as f64 + 0.5)).sqrt();
        let found = zero_crossings(&q, 1.0);
        let miss = [-x_star, x_star]
            .iter()
            .map(|z| found.iter().map(|f| (f - z).abs()).fold(f64::INFINITY, f64::min))
            .fold(0.0_f64, f64::max);
        passed &= err <= 1e-3 && miss <= 1e-2;
        parts.push(format!("n={n}: |Q_rec - Q| = {err:.2e}, zero miss {miss:.1e}"));
    }
    Outcome {
        passed,
        detail: format!("{} (tolerances 1e-3, 1e-2)", parts.join("; ")),
    }
}

fn criterion_6() -> Outcome {
    let beta = 1.0;
    let q = |x: f64| 2.0 + (3.0 * x).cos() + x;
    let mut errs = Vec::new();
    for n in [101, 201, 401] {
        let axis = Axis { start: 0.0, end: 1.0, n };
        let xs = axis.nodes();
        let g: Vec<f64> = xs.iter().map(|&x| (PI * PI - beta * q(x)) * (PI * x).sin()).collect();
        let problem = EllipticProblem::new(axis, xs.iter().map(|&x| q(x)).collect(), beta).with_source(g);
        let (r, _) = solve_slice(&problem).unwrap();
        let h = axis.step().unwrap();
        let e = xs.iter().zip(&r).map(|(x, r)| (r - (PI * x).sin()).abs()).fold(0.0, f64::max);
        errs.push((e, e / (h * h)));
    }
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0].0 / w[1].0).log2()).collect();
    let consts: Vec<f64> = errs.iter().map(|e| e.1).collect();
    let spread = consts.iter().cloned().fold(0.0, f64::max) / consts.iter().cloned().fold(f64::INFINITY, f64::min);
    Outcome {
        passed: orders.iter().all(|o| (o - 2.0).abs() <= 0.2) && spread <= 1.1,
        detail: format!(
            "errors {:.3e}, {:.3e}, {:.3e}; orders {:.3}, {:.3}; error/h² in [{:.4}, {:.4}]",
            errs[0].0,
            errs[1].0,
            errs[2].0,
            orders[0],
            orders[1],
            consts.iter().cloned().fold(f64::INFINITY, f64::min),
            consts.iter().cloned().fold(0.0, f64::max)
        ),
    }
}

fn criterion_7() -> Outcome {
    let axis = Axis { start: 0.0, end: 1.0, n: 1001 };
    let eigs = sigma_spectrum(&axis, &vec![0.0; axis.n], 1.0, 5).unwrap();
    let rel = eigs
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let exact = ((k + 1) as f64 * PI).powi(2);
            (l - exact).abs() / exact
        })
        .fold(0.0, f64::max);
    let mut shift = 0.0_f64;
    let q: Vec<f64> = axis.nodes().iter().map(|x| 3.0 * (2.0 * x).sin()).collect();
    let base = sigma_spectrum(&axis, &q, 2.0, 5).unwrap();
    for s in [2.5, -7.0, 100.0] {
        let shifted: Vec<f64> = q.iter().map(|v| v + s / 2.0).collect();
        let l = sigma_spectrum(&axis, &shifted, 2.0, 5).unwrap();
        shift = shift.max(base.iter().zip(&l).map(|(a, b)| (b - (a - s)).abs()).fold(0.0, f64::max));
    }
    Outcome {
        passed: rel <= 5e-3 && shift <= 1e-10,
        detail: format!("max relative deviation from (n pi)^2 {rel:.2e} (<= 5e-3); shift identity {shift:.2e} (<= 1e-10)"),
    }
}

/// Randomized smooth problems on [-1, 1] with time-dependent boundary data and a nonzero `f`,
/// so every residual is dominated by truncation. `|βQ|` stays well below the first Dirichlet
/// eigenvalue (π/2)², which keeps the amplitude positive and the flow moderate: error constants
/// grow quickly with the flow speed.
fn random_spec(kind: usize, rng: &mut ChaCha8Rng) -> (String, String, BTreeMap<String, f64>) {
    let mut c = BTreeMap::new();
    let mut put = |name: &str, lo: f64, hi: f64| {
        c.insert(name.to_string(), rng.gen_range(lo..hi));
    };
    let (label, q) = match kind {
        0 => {
            put("a1", -0.6, 0.6);
            put("a2", -0.6, 0.6);
            put("c1", -0.5, 0.0);
            put("c2", 0.0, 0.5);
            put("w1", 0.3, 0.6);
            put("w2", 0.3, 0.6);
            ("gaussian bumps", "a1*exp(-(x-c1)^2/w1^2) + a2*exp(-(x-c2)^2/w2^2)*(1 + 0.3*sin(t))")
        }
        1 => {
            put("a", -1.5, 1.5);
            put("c", -0.3, 0.3);
            put("v", -0.5, 0.5);
            put("w", 0.3, 0.6);
            ("drifting bump", "a*exp(-(x - c - v*t)^2/w^2)")
        }
        _ => {
            put("a", 0.2, 0.5);
            put("k", 1.0, 3.0);
            put("om", 0.5, 1.5);
            put("b", -0.3, 0.3);
            ("sinusoid", "a*sin(k*x + om*t) + b")
        }
    };
    put("bl", 0.1, 0.3);
    put("wl", 1.0, 3.0);
    put("br", 0.1, 0.3);
    put("f0", -0.2, 0.2);
    (label.to_string(), q.to_string(), c)
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0008);
    let params = PhysParams::unit();
    let mut passed = true;
    let mut parts = Vec::new();
    for kind in 0..3 {
        let (label, q_src, consts) = random_spec(kind, &mut rng);
        let q = QInput::Expr(parse_bound(&q_src, &consts).unwrap());
        let mut config = PipelineConfig::new(params);
        config.f = parse_bound("f0*cos(t)", &consts).unwrap();
        let left = parse_bound("1 + bl*sin(wl*t)", &consts).unwrap();
        let right = parse_bound("1 + br*t", &consts).unwrap();
        let coarse = SpaceTimeGrid::new(-1.0, 1.0, 401, 0.0, 1.0, 401).unwrap();
        let run = |grid: &SpaceTimeGrid| {
            let bc = DirichletData::from_fns(
                grid,
                |t| left.eval(0.0, t, params.into()).unwrap(),
                |t| right.eval(0.0, t, params.into()).unwrap(),
            );
            run_pipeline(&q, &AmplitudeInput::Solve { bc, source: None }, grid, &config).unwrap()
        };
        let (c, f) = (run(&coarse), run(&coarse.refined()));
        let mut worst = 0.0_f64;
        let mut ratios = Vec::new();
        for ((name, a), (_, b)) in c.residuals.iter().zip(f.residuals.iter()) {
            let (ok, ratio) = refinement(a.linf, b.linf);
            passed &= ok && a.linf <= 5e-3;
            worst = worst.max(a.linf);
            ratios.push(format!("{name} {ratio:.2}"));
        }
        parts.push(format!("{label}: max linf {worst:.2e}, ratios [{}]", ratios.join(", ")));
    }
    Outcome {
        passed,
        detail: format!("{} (linf <= 5e-3, ratios in [3.5, 4.5])", parts.join("; ")),
    }
}

fn criterion_9() -> Outcome {
    let params = PhysParams::unit();
    // Rounding in R'' grows like eps/h², so the check uses a moderate grid.
    let grid = SpaceTimeGrid::new(-1.0, 1.0, 41, 0.0, 1.0, 5).unwrap();
    let r = Field::from_fn(grid, |x, t| 1.2 + 0.5 * (2.0 * x + t).sin() + 0.1 * x * x).unwrap();
    let base = quantum_potential(&r, params, 1e-8).unwrap();
    let mut scale = 0.0_f64;
    for c in [2.0, -3.0, 1e-4] {
        let q = quantum_potential(&r.scale(c), params, 1e-8 * c.abs()).unwrap();
        scale = scale.max(q.zip_map(&base, |a, b| a - b).unwrap().linf());
    }

    let grid = SpaceTimeGrid::new(-1.0, 1.0, 51, 0.0, 1.0, 51).unwrap();
    let q = QInput::Expr(parse("0.3*exp(-x^2)").unwrap());
    let bc = DirichletData::from_fns(&grid, |t| 1.0 + 0.2 * t, |t| 1.0 + 0.1 * (2.0 * t).sin());
    let amp = AmplitudeInput::Solve { bc, source: None };
    let mut config = PipelineConfig::new(params);
    config.g = PhaseSeed::Expr(parse("0.3*x^2").unwrap());
    let a = run_pipeline(&q, &amp, &grid, &config).unwrap();
    config.g = PhaseSeed::Expr(parse("0.3*x^2 + 0.7").unwrap());
    let b = run_pipeline(&q, &amp, &grid, &config).unwrap();
    let s_shift = b.s.zip_map(&a.s, |x, y| (x - y - 0.7).abs()).unwrap().linf();
    let res_shift = a
        .residuals
        .iter()
        .zip(b.residuals.iter())
        .map(|((_, x), (_, y))| (x.linf - y.linf).abs().max((x.l2 - y.l2).abs()))
        .fold(0.0, f64::max);
    Outcome {
        passed: scale <= 1e-12 && s_shift <= 1e-12 && res_shift <= 1e-12,
        detail: format!(
            "|Q(cR) - Q(R)| = {scale:.2e}; |S' - S - 0.7| = {s_shift:.2e}; residual change {res_shift:.2e} (all <= 1e-12)"
        ),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("linear a = 0 branch: dV and p", criterion_1),
        ("linear b = 0 branch: dV", criterion_2),
        ("cos superposition: phase and SE residual", criterion_3),
        ("plane wave vs cos superposition: Q depends on the state", criterion_4),
        ("oscillator n = 0..3 at Nx = 2001: Q_rec and its zeros", criterion_5),
        ("manufactured amplitude: second-order convergence", criterion_6),
        ("spectrum of the amplitude operator", criterion_7),
        ("randomized problems: residual convergence", criterion_8),
        ("scale and gauge invariance", criterion_9),
    ];
    let start = Instant::now();
    let mut failed = Vec::new();
    for (k, (title, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let out = check();
        let tag = if out.passed { "PASS" } else { "FAIL" };
        println!("{tag} criterion {}: {title} | {} [{:.1}s]", k + 1, out.detail, t.elapsed().as_secs_f64());
        if !out.passed {
            failed.push(k + 1);
        }
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.1}s",
        criteria.len() - failed.len(),
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
