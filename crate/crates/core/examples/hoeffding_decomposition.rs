//! Degeneracy certification and Hoeffding components.

use banach_ustat::hoeffding::{
    check_degeneracy, project_component, project_degenerate_level, reconstruct_identity_check,
    ProjectionOptions,
};
use banach_ustat::{builtin_kernel, Distribution, Kernel, Result, StreamSeed};

fn main() -> Result<()> {
    let seed = StreamSeed::new(7);
    let law = Distribution::finite_discrete(vec![-1.0, 0.0, 2.0], vec![0.4, 0.4, 0.2])?;

    for name in ["product", "sum", "covariance_style"] {
        let h = builtin_kernel(name, 2)?;
        let report = check_degeneracy(&h, &law, 256, 64, &seed)?;
        println!(
            "{name:>16}: {:?}, order {:?} ({:?} path)",
            report.verdict, report.order, report.path
        );
    }

    let h = Kernel::from_expr("x1*x2 + x1^2 + x3", 3, false)?;
    let h12 = project_component(&h, &[0, 1], &law, 256, &seed)?;
    println!(
        "h^{{1,2}}(1, 2) = {:.6}",
        h12.estimate(&[1.0, 2.0], &[])?.value[0]
    );

    let check = reconstruct_identity_check(&h, &law, 20, &ProjectionOptions::new(256, seed))?;
    println!("sum over I of h^I = h: max deviation {:.2e}", check.max_deviation);

    // Monte Carlo path for a continuous law
    let gauss = Distribution::gaussian(0.0, 1.0)?;
    let sum3 = builtin_kernel("sum", 3)?;
    let level1 = project_degenerate_level(&sum3, 1, &gauss, 2048, &seed)?;
    let e = level1.estimate(&[0.5], &[])?;
    println!(
        "h^(1)(0.5) for the 3-sum under N(0,1): {:.4} +/- {:.4}",
        e.value[0], e.se
    );
    Ok(())
}
