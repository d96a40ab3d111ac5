//! Empirical tails and the functionals entering the bounds.

use banach_ustat::tails::{conditional_moment_tail, level_moment_tail, EmpiricalTail};
use banach_ustat::{builtin_kernel, Distribution, Result, StreamSeed};

fn main() -> Result<()> {
    let tail = EmpiricalTail::new(vec![1.0, 2.0, 3.0])?;
    println!("tail integral at t = 2, q = 1: {}", tail.tail_integral(2.0, 1.0)?);
    println!("weak L^1.5 norm: {:.6}", tail.weak_lp_norm(1.5));

    let seed = StreamSeed::new(9);
    let h = builtin_kernel("product", 2)?;
    let law = Distribution::gaussian(0.0, 1.0)?;
    let cond = conditional_moment_tail(&h, &law, &[0], 2.0, 512, 512, &seed)?;
    println!(
        "(E[|h|^2 | xi_1])^(1/2): median {:.4}, max {:.4} (exact inner: {})",
        cond.tail.values()[cond.tail.len() / 2],
        cond.tail.max(),
        cond.exact_inner
    );
    let hp = level_moment_tail(&h, &law, 2.0, 512, 512, &seed)?;
    println!(
        "H_2 tail integral at t = 1: {:.4}",
        hp.tail.tail_integral(1.0, 2.0)?
    );
    Ok(())
}
