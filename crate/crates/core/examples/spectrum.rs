//! Solvability of the amplitude problem: spectrum, shifts and coercivity.
use std::f64::consts::PI;

use qpot::elliptic::{coercivity_check, sigma_spectrum, zero_in_sigma};
use qpot::grid::Axis;

fn main() {
    let axis = Axis { start: 0.0, end: 1.0, n: 1001 };
    let q = vec![0.0; axis.n];
    let eigs = sigma_spectrum(&axis, &q, 1.0, 5).unwrap();
    for (k, l) in eigs.iter().enumerate() {
        let exact = ((k + 1) as f64 * PI).powi(2);
        println!("lambda_{} = {l:.4}  (n pi)^2 = {exact:.4}  rel {:.1e}", k + 1, (l - exact).abs() / exact);
    }

    // Raising Q by s/beta lowers every eigenvalue by s.
    let s = 2.5;
    let shifted = sigma_spectrum(&axis, &vec![s; axis.n], 1.0, 5).unwrap();
    println!("shift check: {:.2e}", eigs.iter().zip(&shifted).map(|(a, b)| (a - b - s).abs()).fold(0.0, f64::max));

    for beta_q in [-50.0, 5.0, PI * PI, 20.0] {
        let q = vec![beta_q; axis.n];
        let c = coercivity_check(&axis, &q, 1.0, 0.0);
        let (zero, _) = zero_in_sigma(&axis, &q, 1.0, 1e-8).unwrap();
        println!("beta Q = {beta_q:7.3}: coercive {:5}, margin {:+.3e}, 0 in sigma {zero}", c.coercive, c.margin);
    }
}
