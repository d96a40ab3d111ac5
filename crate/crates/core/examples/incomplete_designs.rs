//! Subsampling designs for incomplete U-statistics.

use banach_ustat::incomplete::{bernoulli_sum_moment_check, draw_design, incomplete_ustat, SamplingDesign};
use banach_ustat::ustat::complete_ustat;
use banach_ustat::{builtin_kernel, sample_iid, Distribution, Result, StreamSeed};

fn main() -> Result<()> {
    let seed = StreamSeed::new(3);
    let h = builtin_kernel("product", 2)?;
    let n = 200;
    let x = sample_iid(&Distribution::gaussian(0.0, 1.0)?, n, &seed, 0)?;
    let full = complete_ustat(&h, &x, n)?.value[0];
    println!("complete: {full:.4}");

    let designs = [
        SamplingDesign::Bernoulli { p_n: 1.0 },
        SamplingDesign::Bernoulli { p_n: 0.05 },
        SamplingDesign::WithoutReplacement { n_draws: 1000 },
        SamplingDesign::WithReplacement { n_draws: 1000 },
    ];
    for d in &designs {
        let w = draw_design(d, n, 2, &seed, 0)?;
        let u = incomplete_ustat(&h, &x, n, &w)?[0];
        println!(
            "{d:?}: {} tuples, total weight {}, value {u:.4}",
            w.len(),
            w.total_weight()
        );
    }

    for y in [0.05, 0.1, 0.3] {
        let c = bernoulli_sum_moment_check(8, 16, y, 2.0, 3.0, 4000, &seed)?;
        println!(
            "Bernoulli row sums, y = {y}: moment {:.4} / shape {:.4} = {:.3}",
            c.estimate, c.bound_shape, c.ratio
        );
    }
    Ok(())
}
