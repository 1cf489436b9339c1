//! Parsing, binding and evaluating user expressions.
use std::collections::BTreeMap;

use qpot::expr::{parse, parse_bound, parse_with_params, Consts};
use qpot::grid::{PhysParams, SpaceTimeGrid};

fn main() {
    let consts = Consts::from(PhysParams::unit());

    let e = parse("hbar^2*sin(pi*x)^2/(2*m) - 0.5*t").unwrap();
    println!("{e}");
    println!("at (0.5, 1): {}", e.eval(0.5, 1.0, consts).unwrap());

    // Free parameters are declared, then bound.
    let open = parse_with_params("A*exp(-(x-x0)^2/w^2)", &["A", "x0", "w"]).unwrap();
    println!("parameters: {:?}", open.params());
    let bindings = BTreeMap::from([("A".to_string(), 0.3), ("x0".to_string(), 0.0), ("w".to_string(), 1.0)]);
    let bump = parse_bound("A*exp(-(x-x0)^2/w^2)", &bindings).unwrap();
    let grid = SpaceTimeGrid::new(-2.0, 2.0, 5, 0.0, 1.0, 2).unwrap();
    let field = bump.eval_field(&grid, consts).unwrap();
    println!("sampled: {:?}", field.slice(0));

    for bad in ["2*", "sin(x, t)", "y + 1", "2e"] {
        println!("{bad:>10} -> {}", parse(bad).unwrap_err());
    }
    println!("{}", parse("log(x)").unwrap().eval(-1.0, 0.0, consts).unwrap_err());
}
