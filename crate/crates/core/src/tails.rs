//! Empirical tails and the tail functionals appearing on the right-hand side
//! of the deviation inequalities.

use crate::error::{Error, Result};
use crate::kernels::{Distribution, Kernel};
use crate::numeric::CompensatedSum;
use crate::rng::StreamSeed;
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;
use std::path::Path;

pub const DEFAULT_OUTER: usize = 512;
pub const DEFAULT_INNER: usize = 512;

/// Inner expectations are summed exactly over the support when it has at
/// most this many points.
const MAX_EXACT_INNER: f64 = 1e5;

/// Sorted nonnegative sample `y_(1) <= .. <= y_(M)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalTail {
    values: Vec<f64>,
}

impl EmpiricalTail {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::param(
                "tail",
                format!("sample values must be finite and nonnegative, got {bad}"),
            ));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// `#{y_i > t} / M`.
    pub fn survival(&self, t: f64) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        let below = self.values.partition_point(|&v| v <= t);
        (self.values.len() - below) as f64 / self.values.len() as f64
    }

    /// `int_0^1 u^{q-1} P(Y > t u) du`, which for the empirical law equals
    /// `(1 / (M q)) sum_i min(1, y_i / t)^q`.
    pub fn tail_integral(&self, t: f64, q: f64) -> Result<f64> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::param("t", format!("must be positive, got {t}")));
        }
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::param("q", format!("must be positive, got {q}")));
        }
        if self.values.is_empty() {
            return Ok(0.0);
        }
        let mut acc = CompensatedSum::new();
        // values at or above t all contribute 1
        let saturated = self.values.len() - self.values.partition_point(|&v| v < t);
        for &y in &self.values[..self.values.len() - saturated] {
            if y > 0.0 {
                acc.add((y / t).powf(q));
            }
        }
        acc.add(saturated as f64);
        Ok(acc.value() / (self.values.len() as f64 * q))
    }

    /// `sup_{t > 0} t^p P(Y > t)`, attained as `t` increases to an order
    /// statistic `v`, where it equals `v^p #{y >= v} / M`.
    pub fn weak_lp_norm(&self, p: f64) -> f64 {
        let m = self.values.len();
        let mut best = 0.0f64;
        let mut i = 0;
        while i < m {
            let v = self.values[i];
            if v > 0.0 {
                best = best.max(v.powf(p) * (m - i) as f64 / m as f64);
            }
            while i < m && self.values[i] == v {
                i += 1;
            }
        }
        best
    }

    /// `(1/M) sum y_i^p`.
    pub fn mean_power(&self, p: f64) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        let mut acc = CompensatedSum::new();
        for &y in &self.values {
            acc.add(y.powf(p));
        }
        acc.value() / self.values.len() as f64
    }

    /// Same law with every value multiplied by `c >= 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|v| c * v).collect())
    }

    /// Single `value` column, full precision.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["value"])?;
        for v in &self.values {
            w.write_record([format!("{v:.16e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// What a [`ConditionalMomentProfile`] conditions on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    /// The listed (0-based) positions.
    Subset(Vec<usize>),
    /// Maximum over the levels `k = 0..=m` of conditioning on the first `k` positions.
    MaxOverLevels,
}

/// Tail of `(E[||h||^p | xi_J])^{1/p}` over `outer` draws of `xi_J`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalMomentProfile {
    pub conditioning: Conditioning,
    pub p: f64,
    pub outer: usize,
    pub inner: usize,
    /// Whether inner expectations were summed exactly over the support.
    pub exact_inner: bool,
    pub tail: EmpiricalTail,
}

/// Inner estimator of `E[||h(x)||^p]` over the positions in `free`.
struct InnerMoment<'a> {
    h: &'a Kernel,
    dist: &'a Distribution,
    p: f64,
    inner: usize,
    support: Option<Vec<(f64, f64)>>,
    index: Vec<usize>,
}

impl<'a> InnerMoment<'a> {
    fn new(h: &'a Kernel, dist: &'a Distribution, p: f64, inner: usize) -> Self {
        let m = h.arity();
        let support = dist
            .support()
            .filter(|s| (s.len() as f64).powi(m as i32) <= MAX_EXACT_INNER);
        Self {
            h,
            dist,
            p,
            inner,
            support,
            index: (0..m).collect(),
        }
    }

    fn exact(&self) -> bool {
        self.support.is_some()
    }

    fn norm_p(&self, x: &[f64], val: &mut [f64]) -> f64 {
        self.h.eval_into(x, &self.index, val);
        self.h.norm(val).powf(self.p)
    }

    /// `E[||h(x)||^p]` with `x[free]` integrated out; `rng` feeds the Monte Carlo path.
    fn estimate(&self, x: &mut [f64], free: &[usize], rng: &mut impl rand::Rng) -> f64 {
        let mut val = vec![0.0; self.h.dim()];
        if free.is_empty() {
            return self.norm_p(x, &mut val);
        }
        let mut acc = CompensatedSum::new();
        match &self.support {
            Some(s) => {
                let mut digits = vec![0usize; free.len()];
                loop {
                    let mut w = 1.0;
                    for (d, &pos) in digits.iter().zip(free) {
                        x[pos] = s[*d].0;
                        w *= s[*d].1;
                    }
                    acc.add(w * self.norm_p(x, &mut val));
                    let mut j = 0;
                    while j < digits.len() {
                        digits[j] += 1;
                        if digits[j] < s.len() {
                            break;
                        }
                        digits[j] = 0;
                        j += 1;
                    }
                    if j == digits.len() {
                        return acc.value();
                    }
                }
            }
            None => {
                for _ in 0..self.inner {
                    for &pos in free {
                        x[pos] = self.dist.sample_one(rng);
                    }
                    acc.add(self.norm_p(x, &mut val));
                }
                acc.value() / self.inner as f64
            }
        }
    }
}

fn check_budget(p: f64, outer: usize, inner: usize) -> Result<()> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::param("p", format!("must be positive, got {p}")));
    }
    if outer < 2 {
        return Err(Error::param("outer", "must be at least 2"));
    }
    if inner < 2 {
        return Err(Error::param("inner", "must be at least 2"));
    }
    Ok(())
}

/// Nested Monte Carlo tail of `(E[||h||^p | xi_J])^{1/p}`. For `J = ∅` all
/// inner estimates are pooled into one value (the unconditional moment),
/// repeated `outer` times.
pub fn conditional_moment_tail(
    h: &Kernel,
    dist: &Distribution,
    subset: &[usize],
    p: f64,
    outer: usize,
    inner: usize,
    seed: &StreamSeed,
) -> Result<ConditionalMomentProfile> {
    check_budget(p, outer, inner)?;
    dist.validate()?;
    let m = h.arity();
    if subset.iter().any(|&j| j >= m) || subset.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param(
            "subset",
            format!("{subset:?} is not an increasing subset of [0, {m})"),
        ));
    }
    let free: Vec<usize> = (0..m).filter(|j| !subset.contains(j)).collect();
    let est = InnerMoment::new(h, dist, p, inner);
    let label = subset.iter().fold(0u64, |a, &j| a | 1 << j);
    let s = seed.derive_str("conditional-moment").derive(label);
    let moments: Vec<f64> = (0..outer as u64)
        .into_par_iter()
        .map(|o| {
            let mut rng = s.rng(o);
            let mut x = vec![0.0; m];
            for &j in subset {
                x[j] = dist.sample_one(&mut rng);
            }
            est.estimate(&mut x, &free, &mut rng)
        })
        .collect();
    let roots: Vec<f64> = if subset.is_empty() {
        let pooled = crate::numeric::mean(&moments).powf(1.0 / p);
        vec![pooled; outer]
    } else {
        moments.iter().map(|v| v.powf(1.0 / p)).collect()
    };
    if roots.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("estimating conditional moments".into()));
    }
    Ok(ConditionalMomentProfile {
        conditioning: Conditioning::Subset(subset.to_vec()),
        p,
        outer,
        inner,
        exact_inner: est.exact(),
        tail: EmpiricalTail::new(roots)?,
    })
}

/// Tail of `H_p = max_{0 <= k <= m} (E[||h||^p | xi_1, .., xi_k])^{1/p}`. The
/// same outer draw of `xi` feeds every level; level 0 uses the pooled
/// unconditional moment.
pub fn level_moment_tail(
    h: &Kernel,
    dist: &Distribution,
    p: f64,
    outer: usize,
    inner: usize,
    seed: &StreamSeed,
) -> Result<ConditionalMomentProfile> {
    check_budget(p, outer, inner)?;
    dist.validate()?;
    let m = h.arity();
    let est = InnerMoment::new(h, dist, p, inner);
    let s = seed.derive_str("level-moment");
    let per_draw: Vec<Vec<f64>> = (0..outer as u64)
        .into_par_iter()
        .map(|o| {
            let mut rng = s.rng(o);
            let mut xi = vec![0.0; m];
            dist.fill(&mut rng, &mut xi);
            (0..=m)
                .map(|k| {
                    let mut x = xi.clone();
                    let free: Vec<usize> = (k..m).collect();
                    est.estimate(&mut x, &free, &mut rng)
                })
                .collect()
        })
        .collect();
    let level0: Vec<f64> = per_draw.iter().map(|v| v[0]).collect();
    let pooled = crate::numeric::mean(&level0).powf(1.0 / p);
    let roots: Vec<f64> = per_draw
        .iter()
        .map(|v| v[1..].iter().fold(pooled, |a, b| a.max(b.powf(1.0 / p))))
        .collect();
    if roots.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("estimating conditional moments".into()));
    }
    Ok(ConditionalMomentProfile {
        conditioning: Conditioning::MaxOverLevels,
        p,
        outer,
        inner,
        exact_inner: est.exact(),
        tail: EmpiricalTail::new(roots)?,
    })
}

/// Integrability exponent `q(d, j, gamma, r) =
/// (gamma + j + 1) / (max(d, j) (r - 1)/r - alpha + j/r)`.
pub fn required_integrability(d: usize, j: usize, gamma: f64, r: f64, alpha: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::param("d", "order of degeneracy must be at least 1"));
    }
    if !(r > 1.0 && r <= 2.0) {
        return Err(Error::param("r", format!("must lie in (1, 2], got {r}")));
    }
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::param("gamma", format!("must be nonnegative, got {gamma}")));
    }
    let alpha_max = (r - 1.0) * d as f64 / r;
    if !(alpha > 0.0 && alpha < alpha_max) {
        return Err(Error::param(
            "alpha",
            format!("must lie in (0, {alpha_max}), got {alpha}"),
        ));
    }
    let denom = d.max(j) as f64 * (r - 1.0) / r - alpha + j as f64 / r;
    if !(denom > 0.0) {
        return Err(Error::param("alpha", "integrability exponent is infinite"));
    }
    Ok((gamma + j as f64 + 1.0) / denom)
}
