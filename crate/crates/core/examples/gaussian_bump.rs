//! A quantum potential with no closed-form answer: a Gaussian bump, time-dependent boundary
//! data and a reconstructed classical potential. Fields are written as CSV and plotted.
use qpot::elliptic::DirichletData;
use qpot::expr::parse;
use qpot::grid::{PhysParams, SpaceTimeGrid};
use qpot::madelung::{run_pipeline, AmplitudeInput, PipelineConfig, QInput};

fn main() {
    let params = PhysParams::unit();
    let q = QInput::Expr(parse("0.3*exp(-x^2)").unwrap());
    let config = PipelineConfig::new(params);
    let mut previous = None;
    for (nx, nt) in [(201, 201), (401, 401)] {
        let grid = SpaceTimeGrid::new(-1.0, 1.0, nx, 0.0, 1.0, nt).unwrap();
        let bc = DirichletData::from_fns(&grid, |t| 1.0 + 0.2 * t, |t| 1.0 + 0.1 * (2.0 * t).sin());
        let amp = AmplitudeInput::Solve { bc, source: None };
        let res = run_pipeline(&q, &amp, &grid, &config).unwrap();
        println!("{nx} x {nt}:");
        for (name, norms) in res.residuals.iter() {
            let ratio = previous
                .as_ref()
                .and_then(|p: &qpot::madelung::Residuals| p.get(name))
                .map(|p| format!("{:.2}", p.linf / norms.linf))
                .unwrap_or_default();
            println!("  {name:14} linf {:.3e}  {ratio}", norms.linf);
        }
        previous = Some(res.residuals);

        if nx == 401 {
            let dir = std::env::temp_dir().join("qpot_gaussian_bump");
            std::fs::create_dir_all(&dir).unwrap();
            let path = dir.join("V.csv");
            res.v.write_csv(std::io::BufWriter::new(std::fs::File::create(&path).unwrap())).unwrap();
            let svg = dir.join("V.svg");
            let code = qpot::cli::cmd_plot(&path, &svg, &mut std::io::stderr());
            println!("wrote {} (exit {code})", svg.display());
        }
    }
}
