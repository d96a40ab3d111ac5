//! Complete U-statistics, running maxima and the decomposition identity.

use banach_ustat::hoeffding::ProjectionOptions;
use banach_ustat::ustat::{complete_ustat, decomposition_identity_check, PartialSumPath};
use banach_ustat::{builtin_kernel, sample_iid, Distribution, Result, StreamSeed};

fn main() -> Result<()> {
    let h = builtin_kernel("product", 2)?;
    let r = complete_ustat(&h, &[1.0, -1.0, 2.0], 3)?;
    println!(
        "U_3 on (1, -1, 2): {:?}, running maxima {:?}",
        r.value, r.running_max
    );

    let seed = StreamSeed::new(11);
    let law = Distribution::Rademacher;
    let sample = sample_iid(&law, 2000, &seed, 0)?;
    let r = complete_ustat(&h, &sample, 2000)?;
    println!(
        "n = 2000: U = {:.1}, max_k |U_k| = {:.1}",
        r.value[0],
        r.running_max.last().unwrap()
    );

    let path = PartialSumPath::from_ustat(&h, &sample, 2000, 1.0)?;
    println!(
        "n^-1 U path at t = 0.25, 0.5, 1: {:.4} {:.4} {:.4}",
        path.eval(0.25),
        path.eval(0.5),
        path.eval(1.0)
    );

    let law = Distribution::finite_discrete(vec![0.0, 1.0, 3.0], vec![0.5, 0.3, 0.2])?;
    let x = sample_iid(&law, 8, &seed, 1)?;
    let cov = builtin_kernel("covariance_style", 2)?;
    let check = decomposition_identity_check(&cov, &law, &x, 8, &ProjectionOptions::new(64, seed))?;
    println!("decomposition identity deviation: {:.2e}", check.deviation);
    Ok(())
}
