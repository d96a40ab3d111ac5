//! Built-in, expression and vector-valued kernels.

use banach_ustat::combinatorics::IncreasingTuple;
use banach_ustat::kernels::BuiltinKernel;
use banach_ustat::{BanachSpace, Distribution, Kernel, Result, StreamSeed};

fn main() -> Result<()> {
    let product = Kernel::builtin(BuiltinKernel::Product, 2)?;
    println!(
        "{}: h(2, 3) = {:?}",
        product.name(),
        product.evaluate(&[2.0, 3.0], None)?
    );

    // index-weighted: arguments come with their 1-based sample positions
    let weighted = Kernel::from_expr("x1*x2/i2", 2, false)?;
    let idx = IncreasingTuple::new(vec![0, 4])?;
    println!(
        "x1*x2/i2 at (2, 3), indices (1, 5): {:?}",
        weighted.evaluate(&[2.0, 3.0], Some(&idx))?
    );

    // two coordinates in l^3, whose smoothness is r = 2
    let space = BanachSpace::new(2, 3.0)?;
    let pair = Kernel::from_exprs(&["x1*x2", "sign(x1)*x2^2"], 2, space, false)?;
    let v = pair.evaluate(&[-1.0, 2.0], None)?;
    println!(
        "vector kernel: {v:?}, l^3 norm {:.6}, r = {}",
        pair.norm(&v),
        space.smoothness()
    );

    let law = Distribution::uniform(-1.0, 1.0)?;
    println!(
        "product symmetric under Uniform(-1, 1): {}",
        product.check_symmetry(&law, 100, &StreamSeed::new(1))
    );
    Ok(())
}
