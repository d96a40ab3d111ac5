//! Run a harness experiment from an inline config and persist its outputs,
//! as `ustat experiment run` does.
//!
//! `cargo run --release --example run_experiment -- OUT_DIR`

use banach_ustat::cli::run_to_dir;
use banach_ustat::harness::RunOverrides;
use banach_ustat::Result;

const CONFIG: &str = r#"{
  "experiment": "deviation",
  "kernel": {"name": "product", "m": 2},
  "distribution": {"family": "rademacher"},
  "params": {
    "p": 2, "q": 2,
    "n_grid": [8, 16, 32],
    "t_grid": [0.5, 1.0, 1.5, 2.0],
    "t_scale_exponent": 1.0,
    "replications": 2000
  }
}"#;

fn main() -> Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "deviation-run".into());
    let report = run_to_dir(CONFIG, out.as_ref(), &RunOverrides::default())?;
    for p in &report.points {
        println!(
            "N = {:>2}  t = {:>5.1}  P = {:.4}  bound = {:.4}  ratio = {:.4}",
            p.n,
            p.t.unwrap(),
            p.lhs,
            p.rhs,
            p.ratio
        );
    }
    println!("{}", report.summary());
    Ok(())
}
