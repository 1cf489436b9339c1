//! Two solutions of the same free Schrödinger equation with different quantum potentials.
use std::collections::BTreeMap;

use qpot::madelung::{golden_case, quantum_potential, CaseName};

fn main() {
    let mut results = Vec::new();
    for name in [CaseName::PlaneWave, CaseName::CosSuperposition] {
        let case = golden_case(name, &BTreeMap::new()).unwrap();
        let res = case.run_pipeline().unwrap();
        let q = quantum_potential(&res.r, case.params, res.r_floor).unwrap();
        let se = res.residuals.se_real.linf.max(res.residuals.se_imag.linf);
        println!("{name:>18}: Q(0) = {:.6}, SE residual {:.2e}", q.field.get(0, case.grid.nx() / 2), se);
        results.push(q);
    }
    let gap = results[1].zip_map(&results[0], |a, b| a - b).unwrap();
    println!("Q gap at x = 0: {:.6} (hbar^2 k^2 / 2m = 0.5)", gap.field.get(0, 200));
}
