//! Acceptance suite. Runs every criterion once on a single-threaded pool,
//! prints one PASS/FAIL line each, then reruns all of them on an 8-thread
//! pool and compares fingerprints of the numerics.

use banach_ustat::harness::{run_experiment, ExperimentConfig, InequalityReport, RunOverrides};
use banach_ustat::hoeffding::{
    check_degeneracy, check_degeneracy_with, project_degenerate_level_with, reconstruct_identity_check,
    Degeneracy, DegeneracyOptions, EvaluationPath, ProjectionMethod, ProjectionOptions,
};
use banach_ustat::holder::holder_norm;
use banach_ustat::incomplete::{
    bernoulli_sum_moment_check, draw_design, incomplete_ustat, SamplingDesign, WeightSet,
};
use banach_ustat::tails::EmpiricalTail;
use banach_ustat::ustat::{complete_ustat, decomposition_identity_check, PartialSumPath};
use banach_ustat::{
    builtin_kernel, count_tuples, enumerate_tuples, rank_tuple, sample_iid, unrank_tuple, Distribution,
    Kernel, Result, StreamSeed,
};
use rand::Rng;
use rayon::ThreadPoolBuilder;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::time::Instant;

struct Outcome {
    pass: bool,
    detail: String,
    /// Serialized numerics compared across thread counts.
    fingerprint: String,
}

type Criterion = (u32, &'static str, f64, fn() -> Result<Outcome>);

fn finite_law(values: &[f64], probs: &[f64]) -> Distribution {
    Distribution::finite_discrete(values.to_vec(), probs.to_vec()).unwrap()
}

fn expr(src: &str, m: usize, symmetric: bool) -> Kernel {
    Kernel::from_expr(src, m, symmetric).unwrap()
}

fn run(json: &str) -> Result<InequalityReport> {
    run_experiment(&ExperimentConfig::from_json(json)?, &RunOverrides::default())
}

fn report_fingerprint(reports: &[&InequalityReport]) -> String {
    reports
        .iter()
        .map(|r| serde_json::to_string(r).unwrap())
        .collect::<Vec<_>>()
        .join("\n")
}

#[allow(clippy::needless_range_loop)]
fn combinatorics_oracle() -> Result<Outcome> {
    // Pascal's triangle, independent of the library's multiplicative formula
    let mut pascal = vec![vec![0u128; 17]; 17];
    for n in 0..=16 {
        pascal[n][0] = 1;
        for m in 1..=n {
            pascal[n][m] = pascal[n - 1][m - 1] + if m < n { pascal[n - 1][m] } else { 0 };
        }
    }
    let mut checked = 0u64;
    let mut failures = 0u64;
    for n in 1..=16usize {
        for m in 1..=n {
            if count_tuples(n, m)? != pascal[n][m] {
                failures += 1;
            }
            // ascending bitmasks of weight m list the subsets in colex order
            let masks = (0u32..1 << n).filter(|x| x.count_ones() as usize == m);
            let mut listed = enumerate_tuples(n, m);
            for (r, mask) in masks.enumerate() {
                let expected: Vec<usize> = (0..n).filter(|b| mask >> b & 1 == 1).collect();
                let Some(t) = listed.next() else {
                    failures += 1;
                    break;
                };
                let ok = t.indices() == expected.as_slice()
                    && rank_tuple(&t, n)? == r as u128
                    && unrank_tuple(r as u128, n, m)? == t;
                failures += u64::from(!ok);
                checked += 1;
            }
            failures += listed.count() as u64;
        }
    }
    Ok(Outcome {
        pass: failures == 0,
        detail: format!("{checked} tuples, {failures} mismatches"),
        fingerprint: format!("{checked}/{failures}"),
    })
}

fn reconstruction_identity() -> Result<Outcome> {
    let skewed = finite_law(&[-1.0, 0.0, 2.0], &[0.4, 0.4, 0.2]);
    let four = finite_law(&[-2.0, -0.5, 1.0, 3.0], &[0.1, 0.3, 0.4, 0.2]);
    let coin = finite_law(&[0.0, 1.0], &[0.7, 0.3]);
    let cases: Vec<(Kernel, &Distribution)> = vec![
        (builtin_kernel("product", 2)?, &skewed),
        (builtin_kernel("sum", 2)?, &four),
        (builtin_kernel("covariance_style", 2)?, &four),
        (builtin_kernel("sign", 2)?, &skewed),
        (expr("x1^2*x2 + exp(x1 - x2)", 2, false), &coin),
        (builtin_kernel("product", 3)?, &four),
        (builtin_kernel("sum", 3)?, &coin),
        (expr("x1*x2*x3 + x1^2 - x3", 3, false), &skewed),
        (expr("max(x1, x2, x3)", 3, true), &four),
        (expr("abs(x1 - x2) + x3*x1", 3, false), &coin),
    ];
    let opts = ProjectionOptions::new(256, StreamSeed::new(2));
    let mut worst = 0.0f64;
    let mut all_exact = true;
    let mut fp = String::new();
    for (h, law) in &cases {
        let c = reconstruct_identity_check(h, law, 50, &opts)?;
        all_exact &= c.path == EvaluationPath::Exact;
        worst = worst.max(c.max_deviation);
        fp += &format!("{:e};", c.max_deviation);
    }
    Ok(Outcome {
        pass: all_exact && worst <= 1e-10,
        detail: format!(
            "{} pairs, max deviation {worst:.2e}, exact path: {all_exact}",
            cases.len()
        ),
        fingerprint: fp,
    })
}

fn decomposition_identity() -> Result<Outcome> {
    let law = finite_law(&[-1.0, 0.5, 2.0], &[0.3, 0.5, 0.2]);
    let kernels = [
        builtin_kernel("product", 2)?,
        builtin_kernel("covariance_style", 2)?,
        expr("max(x1, x2)", 2, true),
        builtin_kernel("sum", 3)?,
        expr("x1*x2*x3 + (x1 + x2 + x3)^2", 3, true),
    ];
    let seed = StreamSeed::new(3);
    let opts = ProjectionOptions::new(256, seed);
    let mut worst = 0.0f64;
    let mut fp = String::new();
    for (i, h) in kernels.iter().enumerate() {
        for n in [h.arity(), 5, 8] {
            let x = sample_iid(&law, n, &seed, i as u64)?;
            let c = decomposition_identity_check(h, &law, &x, n, &opts)?;
            worst = worst.max(c.deviation);
            fp += &format!("{:e};", c.deviation);
        }
    }
    Ok(Outcome {
        pass: worst <= 1e-8,
        detail: format!(
            "{} kernels x 3 sample sizes, max |LHS - RHS| {worst:.2e}",
            kernels.len()
        ),
        fingerprint: fp,
    })
}

fn degeneracy_certification() -> Result<Outcome> {
    let (inner, outer) = (1024, 1024);
    let seed = StreamSeed::new(4);
    let laws = [
        Distribution::Rademacher,
        Distribution::uniform(-1.0, 1.0)?,
        Distribution::gaussian(0.0, 1.0)?,
        finite_law(&[-2.0, 1.0], &[1.0 / 3.0, 2.0 / 3.0]),
    ];
    let mut failures = Vec::new();
    let mut fp = String::new();
    for (li, law) in laws.iter().enumerate() {
        for m in [2, 3] {
            for (name, want) in [("product", m), ("sum", 1)] {
                let r = check_degeneracy(
                    &builtin_kernel(name, m)?,
                    law,
                    inner,
                    outer,
                    &seed.derive(li as u64),
                )?;
                fp += &format!("{:?}{:?};", r.order, r.verdict);
                if r.order != Some(want) {
                    failures.push(format!("{name} m={m} law {li}: order {:?}", r.order));
                }
            }
        }
    }
    // components are exact on finite laws; the zero test itself is Monte Carlo
    let skewed = finite_law(&[-1.0, 0.0, 2.0], &[0.4, 0.4, 0.2]);
    let components = [
        (builtin_kernel("covariance_style", 2)?, 1),
        (builtin_kernel("covariance_style", 2)?, 2),
        (expr("x1*x2 + x1 + x2 + x1^2*x2^2", 2, true), 2),
        // identically zero at level 2 under a centered law
        (expr("x1*x2*x3 + x1^2 + x2^2 + x3^2", 3, true), 2),
        (expr("x1*x2 + x1*x3 + x2*x3 + x1^2 + x2^2 + x3^2", 3, true), 2),
    ];
    let popts = ProjectionOptions::new(inner, seed.derive_str("projection"));
    let mut dopts = DegeneracyOptions::new(inner, outer, seed.derive_str("components"));
    dopts.method = ProjectionMethod::MonteCarlo;
    for (h, c) in &components {
        let k = project_degenerate_level_with(h, *c, &skewed, &popts)?.as_kernel()?;
        let r = check_degeneracy_with(&k, &skewed, &dopts)?;
        fp += &format!("{:?};", r.verdict);
        if r.verdict != Degeneracy::Degenerate {
            failures.push(format!("{} level {c}: {:?}", h.name(), r.verdict));
        }
    }
    Ok(Outcome {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            format!(
                "16 order certifications, {} components degenerate",
                components.len()
            )
        } else {
            failures.join("; ")
        },
        fingerprint: fp,
    })
}

#[allow(clippy::too_many_arguments)]
fn simpson(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * eps {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
}

fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(f, a, b, fa, fm, fb, whole, 1e-14, 50)
}

/// `int_0^1 u^{q-1} P(Y > t u) du`, split at the jumps of the survival function.
fn tail_integral_quadrature(values: &[f64], t: f64, q: f64) -> f64 {
    let m = values.len() as f64;
    let mut cuts: Vec<f64> = values
        .iter()
        .map(|y| y / t)
        .filter(|u| *u > 0.0 && *u < 1.0)
        .collect();
    cuts.extend([0.0, 1.0]);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let survival = values.iter().filter(|y| **y > t * mid).count() as f64 / m;
            survival * integrate(&|u: f64| u.powf(q - 1.0), w[0], w[1])
        })
        .sum()
}

fn tail_functionals() -> Result<Outcome> {
    let mut rng = StreamSeed::new(5).rng(0);
    let mut worst = 0.0f64;
    let mut weak_mismatch = 0;
    for _ in 0..100 {
        let len = rng.random_range(1..60);
        let values: Vec<f64> = (0..len)
            .map(|_| match rng.random_range(0..4) {
                0 => 0.0,
                1 => rng.random_range(0..5) as f64,
                _ => rng.random::<f64>() * 10.0,
            })
            .collect();
        let tail = EmpiricalTail::new(values.clone())?;
        let t = 0.05 + rng.random::<f64>() * 12.0;
        let q = 1.0 + 3.0 * rng.random::<f64>();
        worst = worst.max((tail.tail_integral(t, q)? - tail_integral_quadrature(&values, t, q)).abs());

        let p = 1.0 + rng.random::<f64>();
        let brute = values
            .iter()
            .map(|&v| v.powf(p) * values.iter().filter(|y| **y >= v).count() as f64 / len as f64)
            .fold(0.0, f64::max);
        weak_mismatch += usize::from(brute != tail.weak_lp_norm(p));
    }
    Ok(Outcome {
        pass: worst <= 1e-10 && weak_mismatch == 0,
        detail: format!("tail integral max error {worst:.2e}, weak norm mismatches {weak_mismatch}"),
        fingerprint: format!("{worst:e}/{weak_mismatch}"),
    })
}

const DEVIATION: &str = r#"{"experiment": "deviation", "kernel": {"name": "product", "m": 2 SCALE},
  "distribution": {"family": "rademacher"},
  "params": {"p": 2, "q": 2, "n_grid": [8, 16, 32], "t_grid": TGRID, "t_scale_exponent": 1.0,
             "replications": 10000}}"#;

fn deviation_stability() -> Result<Outcome> {
    let grid = [0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.5];
    let config = |scale: f64| {
        let ts: Vec<f64> = grid.iter().map(|c| c * scale).collect();
        DEVIATION
            .replace("SCALE", &format!(r#", "scale": {scale}"#))
            .replace("TGRID", &serde_json::to_string(&ts).unwrap())
    };
    let base = run(&config(1.0))?;
    let scaled = run(&config(3.0))?;
    let invariance = base
        .points
        .iter()
        .zip(&scaled.points)
        .map(|(a, b)| {
            if a.ratio == b.ratio {
                0.0
            } else {
                (a.ratio - b.ratio).abs() / a.ratio.abs().max(b.ratio.abs())
            }
        })
        .fold(0.0, f64::max);
    let c_hat = base.fitted_constant.unwrap_or(f64::NAN);
    Ok(Outcome {
        pass: base.pass && c_hat.is_finite() && invariance <= 1e-12 && base.points.len() == 24,
        detail: format!(
            "C_hat {c_hat:.4}, stability {:.3} (<= 10), scaling-by-3 deviation {invariance:.1e}",
            base.stability.unwrap_or(f64::NAN)
        ),
        fingerprint: report_fingerprint(&[&base, &scaled]),
    })
}

fn moment_inequality() -> Result<Outcome> {
    let mut reports = Vec::new();
    for p in [1.5, 2.0] {
        reports.push(run(&format!(
            r#"{{"experiment": "moment", "kernel": {{"name": "product", "m": 2}},
                "distribution": {{"family": "rademacher"}},
                "params": {{"p": {p}, "n_grid": [8, 16, 32, 64], "replications": 10000, "stability_threshold": 3}}}}"#
        ))?);
    }
    Ok(Outcome {
        pass: reports.iter().all(|r| r.pass),
        detail: reports
            .iter()
            .map(|r| format!("p={}: spread {:.3}", r.p, r.spread.unwrap_or(f64::NAN)))
            .collect::<Vec<_>>()
            .join(", ")
            + " (<= 3)",
        fingerprint: report_fingerprint(&reports.iter().collect::<Vec<_>>()),
    })
}

fn weak_lp_maximal() -> Result<Outcome> {
    let r = run(r#"{"experiment": "lln", "kernel": {"name": "product", "m": 2},
        "distribution": {"family": "rademacher"},
        "params": {"p": 1.5, "n_grid": [256, 512, 1024], "replications": 4000, "stability_threshold": 3,
                   "alpha": 0.1, "gamma": 0.5, "epsilon": 0.05}}"#)?;
    let medians = match &r.extras {
        banach_ustat::harness::Extras::Lln { terminal_medians, .. } => terminal_medians
            .iter()
            .map(|(_, m)| format!("{m:.4}"))
            .collect::<Vec<_>>()
            .join(" > "),
        _ => String::new(),
    };
    Ok(Outcome {
        pass: r.pass,
        detail: format!(
            "spread {:.3} (<= 3), terminal medians {medians}",
            r.spread.unwrap_or(f64::NAN)
        ),
        fingerprint: report_fingerprint(&[&r]),
    })
}

/// Brute-force Hölder norm over `points + 1` uniform nodes, scanning by lag.
fn holder_grid(path: &PartialSumPath, alpha: f64, points: usize) -> f64 {
    let xs: Vec<f64> = (0..=points)
        .map(|i| path.eval(i as f64 / points as f64))
        .collect();
    let mut best = 0.0f64;
    for lag in 1..=points {
        let w = (lag as f64 / points as f64).powf(-alpha);
        let mut lanes = [0.0f64; 8];
        let (a, b) = (&xs[..=points - lag], &xs[lag..]);
        let mut chunks = a.chunks_exact(8).zip(b.chunks_exact(8));
        for (ca, cb) in &mut chunks {
            for k in 0..8 {
                let d = (cb[k] - ca[k]).abs();
                lanes[k] = if d > lanes[k] { d } else { lanes[k] };
            }
        }
        let tail = a.len() - a.len() % 8;
        for k in tail..a.len() {
            lanes[0] = lanes[0].max((b[k] - a[k]).abs());
        }
        best = best.max(w * lanes.iter().copied().fold(0.0, f64::max));
    }
    xs[0].abs() + best
}

fn holder_correctness() -> Result<Outcome> {
    // segment counts divide the grid so every breakpoint is a grid node
    let grid = 20_000;
    let sizes = [
        2usize, 4, 5, 8, 10, 16, 20, 25, 32, 40, 50, 80, 100, 125, 160, 200, 250, 400, 500,
    ];
    let mut rng = StreamSeed::new(9).rng(0);
    let mut worst = 0.0f64;
    let mut below_grid = 0;
    for case in 0..100 {
        let n = sizes[case % sizes.len()];
        let mut v = vec![0.0];
        for _ in 0..n {
            let step: f64 = rng.random::<f64>() * 2.0 - 1.0;
            v.push(v.last().unwrap() + step);
        }
        let path = PartialSumPath::from_values(v)?;
        let alpha = 0.05 + 0.9 * rng.random::<f64>();
        let exact = holder_norm(&path, alpha)?;
        let brute = holder_grid(&path, alpha, grid);
        worst = worst.max((exact - brute).abs());
        below_grid += usize::from(exact < brute - 1e-12);
    }
    let tent = holder_norm(&PartialSumPath::from_values(vec![0.0, 1.0, 0.0])?, 0.5)?;
    let tent_err = (tent - 2f64.sqrt()).abs();
    Ok(Outcome {
        pass: worst <= 1e-6 && below_grid == 0 && tent_err <= 1e-12,
        detail: format!("100 paths, max |exact - grid| {worst:.2e}; tent error {tent_err:.1e}"),
        fingerprint: format!("{worst:e}/{tent:e}"),
    })
}

fn tightness_diagnostic() -> Result<Outcome> {
    let r = run(r#"{"experiment": "holder", "kernel": {"name": "product", "m": 2},
        "distribution": {"family": "rademacher"},
        "params": {"alpha": 0.3, "n_grid": [1024], "replications": 1000, "j_min": 2, "j_check_max": 6,
                   "epsilon_quantile": 0.9}}"#)?;
    let (curve, epsilon) = match &r.extras {
        banach_ustat::harness::Extras::Holder {
            exceedance, epsilon, ..
        } => (
            exceedance
                .curve
                .iter()
                .filter(|(j, _)| *j <= 6)
                .map(|(_, s)| format!("{s:.3}"))
                .collect::<Vec<_>>()
                .join(" > "),
            *epsilon,
        ),
        _ => (String::new(), f64::NAN),
    };
    let decreasing = r.checks.iter().any(|c| c.name == "tail_sum_decreasing" && c.pass);
    Ok(Outcome {
        pass: decreasing,
        detail: format!("epsilon {epsilon:.4}, tail sums J=2..6: {curve}"),
        fingerprint: report_fingerprint(&[&r]),
    })
}

fn incomplete_designs() -> Result<Outcome> {
    let seed = StreamSeed::new(11);
    let mut fp = String::new();
    // Bernoulli(1) selects every tuple and must reproduce the complete value bit for bit
    let mut bit_exact = true;
    for (i, (name, m, n)) in [("product", 2, 40), ("sum", 3, 25), ("covariance_style", 2, 60)]
        .into_iter()
        .enumerate()
    {
        let h = builtin_kernel(name, m)?;
        let x = sample_iid(&Distribution::gaussian(0.3, 1.7)?, n, &seed, i as u64)?;
        let w = draw_design(&SamplingDesign::Bernoulli { p_n: 1.0 }, n, m, &seed, 0)?;
        let inc = incomplete_ustat(&h, &x, n, &w)?;
        let full = complete_ustat(&h, &x, n)?.value;
        bit_exact &= inc.iter().zip(&full).all(|(a, b)| a.to_bits() == b.to_bits());
        fp += &format!("{inc:?};");
    }

    // inclusion frequencies on Inc^2_8
    let (n, m, reps) = (8usize, 2usize, 20_000u64);
    let cells = 28usize;
    let tally = |design: &SamplingDesign| -> Result<Vec<f64>> {
        let mut counts = vec![0.0; cells];
        for r in 0..reps {
            let w: WeightSet = draw_design(design, n, m, &seed.derive_str("gof"), r)?;
            for (rank, weight) in w.ranks() {
                counts[rank as usize] += weight as f64;
            }
        }
        Ok(counts)
    };
    let p = 0.3;
    let bern = tally(&SamplingDesign::Bernoulli { p_n: p })?;
    let e = reps as f64 * p;
    let chi_bern: f64 = bern.iter().map(|c| (c - e).powi(2) / (e * (1.0 - p))).sum();
    let p_bern = ChiSquared::new(cells as f64).unwrap().sf(chi_bern);
    let draws = 5u64;
    let with = tally(&SamplingDesign::WithReplacement { n_draws: draws })?;
    let e = (reps * draws) as f64 / cells as f64;
    let chi_with: f64 = with.iter().map(|c| (c - e).powi(2) / e).sum();
    let p_with = ChiSquared::new(cells as f64 - 1.0).unwrap().sf(chi_with);
    fp += &format!("{chi_bern:e};{chi_with:e};");

    let ratios = [0.05, 0.1, 0.3]
        .iter()
        .map(|&y| {
            Ok(bernoulli_sum_moment_check(8, 16, y, 2.0, 3.0, 20_000, &seed.derive_str("row-sums"))?.ratio)
        })
        .collect::<Result<Vec<f64>>>()?;
    let spread =
        ratios.iter().copied().fold(f64::MIN, f64::max) / ratios.iter().copied().fold(f64::MAX, f64::min);
    fp += &format!("{ratios:?}");
    Ok(Outcome {
        pass: bit_exact && p_bern > 1e-3 && p_with > 1e-3 && spread <= 3.0,
        detail: format!(
            "Bernoulli(1) bit-exact: {bit_exact}; GOF p-values {p_bern:.3} (bernoulli), {p_with:.3} (with replacement); \
             Bernoulli-sum constant spread {spread:.3} (<= 3)"
        ),
        fingerprint: fp,
    })
}

fn incomplete_moment_growth() -> Result<Outcome> {
    let r = run(
        r#"{"experiment": "incomplete-moment", "kernel": {"name": "product", "m": 2},
        "distribution": {"family": "rademacher"},
        "params": {"p": 2, "q": 2, "n_grid": [32, 64, 128, 256], "p_n_exponents": [1, 2],
                   "replications": 10000, "stability_threshold": 5}}"#,
    )?;
    Ok(Outcome {
        pass: r.pass,
        detail: r
            .checks
            .iter()
            .map(|c| format!("{} {:.3}", c.name, c.value))
            .collect::<Vec<_>>()
            .join(", ")
            + " (<= 5)",
        fingerprint: report_fingerprint(&[&r]),
    })
}

fn main() {
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let all: [Criterion; 12] = [
        (1, "combinatorics oracle", 5.0, combinatorics_oracle),
        (
            2,
            "Hoeffding reconstruction identity",
            30.0,
            reconstruction_identity,
        ),
        (3, "decomposition identity", 60.0, decomposition_identity),
        (4, "degeneracy certification", 60.0, degeneracy_certification),
        (5, "tail functional exactness", 10.0, tail_functionals),
        (6, "deviation inequality stability", 300.0, deviation_stability),
        (7, "moment inequality q = p", 300.0, moment_inequality),
        (8, "weak-L^p maximal bound", 300.0, weak_lp_maximal),
        (9, "Hölder norm correctness", 60.0, holder_correctness),
        (10, "tightness diagnostic", 300.0, tightness_diagnostic),
        (11, "incomplete designs", 120.0, incomplete_designs),
        (12, "incomplete moment growth", 300.0, incomplete_moment_growth),
    ];
    let criteria: Vec<Criterion> = all
        .into_iter()
        .filter(|c| only.is_none_or(|id| id == c.0))
        .collect();
    let single = ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let eight = ThreadPoolBuilder::new().num_threads(8).build().unwrap();
    let mut failed = Vec::new();
    let mut fingerprints = Vec::new();
    for &(id, name, budget, f) in &criteria {
        let start = Instant::now();
        let outcome = single.install(f);
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match &outcome {
            Ok(o) => (o.pass && secs <= budget, o.detail.clone()),
            Err(e) => (false, format!("error: {e}")),
        };
        println!(
            "[{}] {id:>2} {name}: {detail} ({secs:.1} s, budget {budget:.0} s)",
            if pass { "PASS" } else { "FAIL" }
        );
        if !pass {
            failed.push(id);
        }
        fingerprints.push(outcome.map(|o| o.fingerprint).ok());
    }

    let start = Instant::now();
    let mut differing = Vec::new();
    for ((id, _, _, f), fp1) in criteria.iter().zip(&fingerprints) {
        let fp8 = eight.install(f).map(|o| o.fingerprint).ok();
        if fp1.is_none() || *fp1 != fp8 {
            differing.push(id.to_string());
        }
    }
    let pass = differing.is_empty();
    println!(
        "[{}] 13 determinism (1 vs 8 threads): {} ({:.1} s)",
        if pass { "PASS" } else { "FAIL" },
        if pass {
            format!("all {} criteria byte-identical", criteria.len())
        } else {
            format!("differs: {}", differing.join(", "))
        },
        start.elapsed().as_secs_f64()
    );
    if !pass {
        failed.push(13);
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
