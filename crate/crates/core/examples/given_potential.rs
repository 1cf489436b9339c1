//! Given-potential mode: the flow of the linear a = 0 branch with V = 0 imposed. The flow needs
//! V = -2mc^2 x^2, so the phase drifts away from the momentum at a rate set by the missing force.
use std::collections::BTreeMap;

use qpot::expr::Expr;
use qpot::madelung::{golden_case, residual_compatibility, run_pipeline, CaseName, PotentialMode};

fn main() {
    let case = golden_case(CaseName::LinearA0, &BTreeMap::new()).unwrap();
    let mut config = case.config.clone();
    config.v = PotentialMode::Given(Expr::zero());
    let res = run_pipeline(&case.q_input, &case.amplitude, &case.grid, &config).unwrap();
    let gap = residual_compatibility(&res.s, &res.p).unwrap();
    let g = case.grid;
    for j in (0..g.nt()).step_by(100) {
        let row = (0..g.nx()).map(|i| gap.field.get(j, i).abs()).fold(0.0, f64::max);
        // d/dt (S_x - p) = -dV_true = 4 m c^2 x, so the gap grows linearly.
        println!("t = {:.2}: max |S_x - p| = {row:.4}  (expected {:.4})", g.t(j), 4.0 * 0.25 * 1.5 * g.t(j));
    }
    for (name, n) in res.residuals.iter() {
        println!("{name:14} {:.3e}", n.linf);
    }
}
