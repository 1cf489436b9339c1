//! Amplitudes linear in x with Q = 0: the potential that carries each flow is reconstructed and
//! compared with its closed form.
use std::collections::BTreeMap;

use qpot::madelung::{golden_case, CaseName};

fn main() {
    for name in [CaseName::LinearA0, CaseName::LinearB0] {
        let case = golden_case(name, &BTreeMap::new()).unwrap();
        let (res, rows) = case.verify().unwrap();
        println!("{name}");
        let dv = res.dv.as_ref().unwrap();
        let g = case.grid;
        let j = g.nt() / 2;
        for i in (0..g.nx()).step_by(100) {
            println!(
                "  x = {:.2}  p = {:+.6} ({:+.6})  dV = {:+.6} ({:+.6})",
                g.x(i),
                res.p.field.get(j, i),
                case.p.get(j, i),
                dv.field.get(j, i),
                case.dv.get(j, i)
            );
        }
        for r in rows {
            println!("  {} {:40} {:.2e}", if r.passed { "ok  " } else { "FAIL" }, r.name, r.measured);
        }
    }
}
