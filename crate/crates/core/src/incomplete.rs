//! Incomplete U-statistics `sum_i a_{n;i} h(xi_i)` with random weights.
//!
//! Three designs are supported: a Bernoulli coin per tuple, `N` tuples drawn
//! without replacement and `N` tuples drawn with replacement. Weights are kept
//! sparse, keyed by colex rank, so only the selected tuples cost memory.

use crate::combinatorics::{count_tuples, unrank_tuple, IncreasingTuple};
use crate::error::{Error, Result};
use crate::kernels::{sample_iid, Distribution, Kernel, Point};
use crate::numeric::{mean_se, PointSum};
use crate::rng::StreamSeed;
use crate::ustat::MAX_COMPLETE_TERMS;
use rand::Rng;
use rand_distr::{Binomial, Distribution as _};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplingDesign {
    Bernoulli { p_n: f64 },
    WithoutReplacement { n_draws: u64 },
    WithReplacement { n_draws: u64 },
}

impl SamplingDesign {
    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        match *self {
            SamplingDesign::Bernoulli { p_n } if !(0.0..=1.0).contains(&p_n) => Err(Error::param(
                "design.p_n",
                format!("must lie in [0, 1], got {p_n}"),
            )),
            SamplingDesign::WithoutReplacement { n_draws } => {
                let total = count_tuples(n, m)?;
                if n_draws as u128 > total {
                    return Err(Error::param(
                        "design.n_draws",
                        format!("{n_draws} draws exceed the {total} available tuples"),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Sparse nonnegative integer weights over `Inc^m_n`, keyed by colex rank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WeightSet {
    n: usize,
    m: usize,
    weights: BTreeMap<u128, u64>,
}

impl WeightSet {
    pub fn empty(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            weights: BTreeMap::new(),
        }
    }

    /// Explicit weights; zero weights are dropped.
    pub fn from_tuples(
        n: usize,
        m: usize,
        entries: impl IntoIterator<Item = (IncreasingTuple, u64)>,
    ) -> Result<Self> {
        let mut ws = Self::empty(n, m);
        for (t, w) in entries {
            if t.order() != m {
                return Err(Error::ArityMismatch {
                    expected: m,
                    got: t.order(),
                });
            }
            let rank = crate::combinatorics::rank_tuple(&t, n)?;
            if w > 0 {
                *ws.weights.entry(rank).or_insert(0) += w;
            }
        }
        Ok(ws)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of distinct selected tuples.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total_weight(&self) -> u64 {
        self.weights.values().sum()
    }

    pub fn weight_of_rank(&self, rank: u128) -> u64 {
        self.weights.get(&rank).copied().unwrap_or(0)
    }

    /// `(rank, weight)` in increasing rank order.
    pub fn ranks(&self) -> impl Iterator<Item = (u128, u64)> + '_ {
        self.weights.iter().map(|(r, w)| (*r, *w))
    }

    /// `(tuple, weight)` in colex order.
    pub fn iter(&self) -> impl Iterator<Item = (IncreasingTuple, u64)> + '_ {
        self.weights.iter().map(|(r, w)| {
            (
                unrank_tuple(*r, self.n, self.m).expect("stored ranks are in range"),
                *w,
            )
        })
    }
}

/// `k` distinct uniform values in `[0, total)` (Floyd's algorithm).
fn distinct_ranks(rng: &mut impl Rng, total: u128, k: u128) -> BTreeSet<u128> {
    let mut chosen = BTreeSet::new();
    for j in (total - k)..total {
        let t = rng.random_range(0..=j);
        if !chosen.insert(t) {
            chosen.insert(j);
        }
    }
    chosen
}

fn check_selected(count: u128) -> Result<()> {
    if count > MAX_COMPLETE_TERMS {
        return Err(Error::TooManyTerms {
            terms: count,
            cap: MAX_COMPLETE_TERMS,
        });
    }
    Ok(())
}

/// Draws the weights of one realisation of `design` on `Inc^m_n`, from
/// stream `replication` of `seed`.
pub fn draw_design(
    design: &SamplingDesign,
    n: usize,
    m: usize,
    seed: &StreamSeed,
    replication: u64,
) -> Result<WeightSet> {
    design.validate(n, m)?;
    let total = count_tuples(n, m)?;
    let mut rng = seed.derive_str("design").rng(replication);
    let mut ws = WeightSet::empty(n, m);
    match *design {
        SamplingDesign::Bernoulli { p_n } => {
            let count = if p_n == 1.0 {
                total
            } else if p_n == 0.0 || total == 0 {
                0
            } else {
                let trials = u64::try_from(total)
                    .map_err(|_| Error::param("design", "C(n, m) exceeds 2^64 tuples"))?;
                let b = Binomial::new(trials, p_n).map_err(|e| Error::param("design.p_n", e.to_string()))?;
                b.sample(&mut rng) as u128
            };
            check_selected(count)?;
            if count == total {
                ws.weights = (0..total).map(|r| (r, 1)).collect();
            } else {
                ws.weights = distinct_ranks(&mut rng, total, count)
                    .into_iter()
                    .map(|r| (r, 1))
                    .collect();
            }
        }
        SamplingDesign::WithoutReplacement { n_draws } => {
            check_selected(n_draws as u128)?;
            ws.weights = distinct_ranks(&mut rng, total, n_draws as u128)
                .into_iter()
                .map(|r| (r, 1))
                .collect();
        }
        SamplingDesign::WithReplacement { n_draws } => {
            check_selected(n_draws as u128)?;
            if n_draws > 0 && total == 0 {
                return Err(Error::param("design", "no tuples to draw from"));
            }
            for _ in 0..n_draws {
                *ws.weights.entry(rng.random_range(0..total)).or_insert(0) += 1;
            }
        }
    }
    Ok(ws)
}

/// `sum_i a_{n;i} h(xi_i)` over the first `n` sample values.
///
/// Tuples are grouped by their last index and each group is summed in colex
/// order, exactly as the complete statistic does, so full unit weights give
/// a bit-identical result.
pub fn incomplete_ustat(h: &Kernel, sample: &[f64], n: usize, weights: &WeightSet) -> Result<Point> {
    let m = h.arity();
    if weights.m() != m {
        return Err(Error::ArityMismatch {
            expected: m,
            got: weights.m(),
        });
    }
    if n > sample.len() {
        return Err(Error::param(
            "n",
            format!("n = {n} exceeds the sample length {}", sample.len()),
        ));
    }
    if m == 0 {
        let mut v = vec![0.0; h.dim()];
        h.eval_into(&[], &[], &mut v);
        let w = weights.total_weight() as f64;
        return Ok(v.iter().map(|x| w * x).collect());
    }
    let dim = h.dim();
    let mut groups: Vec<Vec<(IncreasingTuple, u64)>> = vec![Vec::new(); n];
    for (t, w) in weights.iter() {
        let last = *t.indices().last().expect("m >= 1");
        if last >= n {
            return Err(Error::IndexOutOfRange { index: last, n });
        }
        groups[last].push((t, w));
    }
    let eval_block = |group: &Vec<(IncreasingTuple, u64)>| {
        let mut acc = PointSum::new(dim);
        let mut x = vec![0.0; m];
        let mut val = vec![0.0; dim];
        for (t, w) in group {
            for (xj, &i) in x.iter_mut().zip(t.indices()) {
                *xj = sample[i];
            }
            h.eval_into(&x, t.indices(), &mut val);
            acc.add_scaled(*w as f64, &val);
        }
        acc.value()
    };
    let blocks: Vec<Point> = if weights.len() >= 1 << 15 {
        groups.par_iter().map(eval_block).collect()
    } else {
        groups.iter().map(eval_block).collect()
    };
    let mut total = PointSum::new(dim);
    for b in &blocks {
        total.add(b);
    }
    let out = total.value();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("summing `{}`", h.name())));
    }
    Ok(out)
}

/// Monte Carlo estimate of `E[Y^{q/p}]` for `Y = sum_a (sum_b Y_ab)^p` with
/// i.i.d. `Y_ab ~ Bernoulli(y)`, against the three-term shape
/// `|A|^{q/p}|B|^q y^q + |A|^{q/p}|B|^{q/p} y^{q/p} + |A||B| y`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BernoulliMomentCheck {
    pub a: usize,
    pub b: usize,
    pub y: f64,
    pub p: f64,
    pub q: f64,
    pub replications: usize,
    pub estimate: f64,
    pub se: f64,
    pub bound_shape: f64,
    /// `estimate / bound_shape`, the smallest constant that works here.
    pub ratio: f64,
}

pub fn bernoulli_bound_shape(a: usize, b: usize, y: f64, p: f64, q: f64) -> f64 {
    let (a, b) = (a as f64, b as f64);
    let r = q / p;
    a.powf(r) * b.powf(q) * y.powf(q) + a.powf(r) * b.powf(r) * y.powf(r) + a * b * y
}

pub fn bernoulli_sum_moment_check(
    a: usize,
    b: usize,
    y: f64,
    p: f64,
    q: f64,
    replications: usize,
    seed: &StreamSeed,
) -> Result<BernoulliMomentCheck> {
    if !(p > 1.0) || !(q >= p) {
        return Err(Error::param(
            "q",
            format!("need q >= p > 1, got p = {p}, q = {q}"),
        ));
    }
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::param("y", format!("must lie in [0, 1], got {y}")));
    }
    if replications < 2 {
        return Err(Error::param("replications", "must be at least 2"));
    }
    let row = Binomial::new(b as u64, y).map_err(|e| Error::param("y", e.to_string()))?;
    let s = seed.derive_str("bernoulli-moment");
    let draws: Vec<f64> = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = s.rng(r);
            // each row sum is Binomial(|B|, y)
            let total: f64 = (0..a).map(|_| (row.sample(&mut rng) as f64).powf(p)).sum();
            total.powf(q / p)
        })
        .collect();
    let (estimate, se) = mean_se(&draws);
    let bound_shape = bernoulli_bound_shape(a, b, y, p, q);
    let ratio = if bound_shape > 0.0 {
        estimate / bound_shape
    } else {
        0.0
    };
    Ok(BernoulliMomentCheck {
        a,
        b,
        y,
        p,
        q,
        replications,
        estimate,
        se,
        bound_shape,
        ratio,
    })
}

/// `n^{q(m-d) + dq/p} p_n^q + n^{mq/p} p_n^{q/p} + n^m p_n`.
pub fn incomplete_bound_shape(n: usize, m: usize, d: usize, p_n: f64, p: f64, q: f64) -> f64 {
    let nf = n as f64;
    let (m, d) = (m as f64, d as f64);
    nf.powf(q * (m - d) + d * q / p) * p_n.powf(q) + nf.powf(m * q / p) * p_n.powf(q / p) + nf.powf(m) * p_n
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncompleteMomentRow {
    pub n: usize,
    pub p_n: f64,
    pub moment_estimate: f64,
    pub se: f64,
    pub bound_shape: f64,
    pub ratio: f64,
}

/// Parameters of [`incomplete_moment_experiment`].
#[derive(Debug, Clone)]
pub struct IncompleteMomentSpec {
    /// `(n, p_n)` grid.
    pub grid: Vec<(usize, f64)>,
    pub p: f64,
    pub q: f64,
    /// Order of degeneracy of the kernel.
    pub d: usize,
    pub replications: usize,
}

/// `E ||U^inc_n||^q` under Bernoulli(`p_n`) sampling, per grid point, against
/// the three-term shape.
pub fn incomplete_moment_experiment(
    h: &Kernel,
    dist: &Distribution,
    spec: &IncompleteMomentSpec,
    seed: &StreamSeed,
) -> Result<Vec<IncompleteMomentRow>> {
    let m = h.arity();
    if spec.d == 0 || spec.d > m {
        return Err(Error::param("d", format!("must lie in [1, {m}], got {}", spec.d)));
    }
    if spec.replications < 2 {
        return Err(Error::param("replications", "must be at least 2"));
    }
    spec.grid
        .iter()
        .enumerate()
        .map(|(g, &(n, p_n))| {
            let design = SamplingDesign::Bernoulli { p_n };
            design.validate(n, m)?;
            let point_seed = seed.derive_str("incomplete-moment").derive(g as u64);
            let sample_seed = point_seed.derive_str("sample");
            let moments: Vec<f64> = (0..spec.replications as u64)
                .into_par_iter()
                .map(|r| -> Result<f64> {
                    let sample = sample_iid(dist, n, &sample_seed, r)?;
                    let w = draw_design(&design, n, m, &point_seed, r)?;
                    let u = incomplete_ustat(h, &sample, n, &w)?;
                    Ok(h.norm(&u).powf(spec.q))
                })
                .collect::<Result<_>>()?;
            let (moment_estimate, se) = mean_se(&moments);
            let bound_shape = incomplete_bound_shape(n, m, spec.d, p_n, spec.p, spec.q);
            Ok(IncompleteMomentRow {
                n,
                p_n,
                moment_estimate,
                se,
                bound_shape,
                ratio: moment_estimate / bound_shape,
            })
        })
        .collect()
}

/// CSV with columns `n, p_n, moment_estimate, bound_shape, ratio`.
pub fn write_moment_table<W: Write>(rows: &[IncompleteMomentRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "p_n", "moment_estimate", "bound_shape", "ratio"])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            format!("{:.16e}", r.p_n),
            format!("{:.16e}", r.moment_estimate),
            format!("{:.16e}", r.bound_shape),
            format!("{:.16e}", r.ratio),
        ])?;
    }
    w.flush()?;
    Ok(())
}
