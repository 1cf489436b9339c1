//! Quantum potential of oscillator eigenstates and its zeros (the classical turning points).
use std::collections::BTreeMap;

use qpot::madelung::{golden_case, quantum_potential, zero_crossings, CaseName};

fn main() {
    for n in 0..4 {
        let overrides = BTreeMap::from([("n".to_string(), n as f64), ("nt".to_string(), 3.0)]);
        let case = golden_case(CaseName::Oscillator, &overrides).unwrap();
        let q = quantum_potential(&case.r, case.params, 1e-6 * case.r.linf()).unwrap();
        let err = q.zip_map(&qpot::grid::MaskedField::full(case.q.clone()), |a, b| a - b).unwrap();
        let turning = (2.0 * (n as f64 + 0.5)).sqrt();
        let zeros: Vec<String> = zero_crossings(&q, 1.0).iter().map(|z| format!("{z:+.4}")).collect();
        println!(
            "n = {n}: max |Q_rec - Q| = {:.2e}, zeros [{}], expected ±{turning:.4}",
            err.linf(),
            zeros.join(", ")
        );
    }
}
