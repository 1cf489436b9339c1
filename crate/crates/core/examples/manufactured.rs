//! Manufactured solution for the amplitude solver: R = sin(pi x) with a source chosen to match.
use std::f64::consts::PI;

use qpot::elliptic::{solve_slice, EllipticProblem};
use qpot::grid::Axis;

fn main() {
    let beta = 1.0;
    let q = |x: f64| 2.0 + (3.0 * x).cos();
    let mut last: Option<f64> = None;
    for n in [101, 201, 401, 801] {
        let axis = Axis { start: 0.0, end: 1.0, n };
        let xs = axis.nodes();
        let qs: Vec<f64> = xs.iter().map(|&x| q(x)).collect();
        // -R'' - beta Q R = g for R = sin(pi x)
        let g: Vec<f64> = xs.iter().map(|&x| (PI * PI - beta * q(x)) * (PI * x).sin()).collect();
        let problem = EllipticProblem::new(axis, qs, beta).with_source(g);
        let (r, report) = solve_slice(&problem).unwrap();
        let err = xs.iter().zip(&r).map(|(x, r)| (r - (PI * x).sin()).abs()).fold(0.0, f64::max);
        let order = last.map(|e| (e / err).log2());
        println!(
            "Nx = {n:4}: error {err:.3e}  order {}  coercive {}",
            order.map_or("-".to_string(), |o| format!("{o:.3}")),
            report.coercive
        );
        last = Some(err);
    }
}
