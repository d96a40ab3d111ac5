//! Hölder norms of normalized U-statistic paths and the dyadic tightness
//! statistic, writing the exceedance curve as CSV to standard output.

use banach_ustat::holder::{dyadic_increment_exceedance, dyadic_scale, holder_norm, DyadicSpec};
use banach_ustat::numeric::quantile;
use banach_ustat::ustat::PartialSumPath;
use banach_ustat::{builtin_kernel, sample_iid, Distribution, Result, StreamSeed};

fn main() -> Result<()> {
    let tent = PartialSumPath::from_values(vec![0.0, 1.0, 0.0])?;
    println!("tent path, alpha = 1/2: {:.12}", holder_norm(&tent, 0.5)?);

    let (n, alpha, d) = (512, 0.3, 2);
    let h = builtin_kernel("product", 2)?;
    let seed = StreamSeed::new(5);
    let paths = (0..200)
        .map(|r| PartialSumPath::from_ustat(&h, &sample_iid(&Distribution::Rademacher, n, &seed, r)?, n, 1.0))
        .collect::<Result<Vec<_>>>()?;
    let norms = paths
        .iter()
        .map(|p| holder_norm(p, alpha))
        .collect::<Result<Vec<_>>>()?;
    println!("median Hölder norm at n = {n}: {:.4}", quantile(&norms, 0.5));

    let epsilon = quantile(&dyadic_scale(&paths, alpha, d, 2)?, 0.9);
    let spec = DyadicSpec {
        alpha,
        epsilon,
        d,
        j_min: 2,
        j_max: None,
    };
    let ex = dyadic_increment_exceedance(&paths, &spec)?;
    ex.write_curve_csv(std::io::stdout().lock())?;
    Ok(())
}
