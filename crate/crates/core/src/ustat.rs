//! Complete U-statistics `U_{m,n} = sum_{i in Inc^m_n} h(xi_i)`.
//!
//! The sum is organised by the last index: with `D_k` the sum over tuples
//! whose largest index is `k`, `U_{m,k+1} = U_{m,k} + D_k`. One pass over the
//! blocks yields every `U_{m,k}` for `k <= n`, hence running maxima and
//! partial-sum paths, at the cost of a single enumeration. Blocks are
//! evaluated in parallel and reduced in index order, so the result does not
//! depend on the number of worker threads.

use crate::combinatorics::{binomial_f64, count_tuples, for_each_tuple};
use crate::error::{Error, Result};
use crate::hoeffding::{
    all_components, project_degenerate_level_with, HoeffdingComponent, ProjectionOptions,
};
use crate::kernels::{Distribution, Kernel, Point};
use crate::numeric::PointSum;
use rayon::prelude::*;
use serde::Serialize;

/// Largest number of kernel evaluations a complete enumeration may perform.
pub const MAX_COMPLETE_TERMS: u128 = 100_000_000;

/// Below this many terms blocks are evaluated on the calling thread.
const PARALLEL_THRESHOLD: u128 = 1 << 15;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UStatResult {
    pub value: Point,
    pub n: usize,
    pub m: usize,
    /// `max_{m <= k <= j} ||U_{m,k}||` for `j = m..=n`.
    pub running_max: Vec<f64>,
}

fn check_sample(sample: &[f64], n: usize) -> Result<()> {
    if n > sample.len() {
        return Err(Error::param(
            "n",
            format!("n = {n} exceeds the sample length {}", sample.len()),
        ));
    }
    Ok(())
}

fn check_cap(n: usize, m: usize) -> Result<u128> {
    let terms = count_tuples(n, m)?;
    if terms > MAX_COMPLETE_TERMS {
        return Err(Error::TooManyTerms {
            terms,
            cap: MAX_COMPLETE_TERMS,
        });
    }
    Ok(terms)
}

/// `D_k = sum` of `h` over the tuples of `Inc^m_{k+1}` ending in `k`.
pub(crate) fn block_increment(h: &Kernel, sample: &[f64], k: usize, out: &mut [f64]) {
    let m = h.arity();
    let dim = h.dim();
    let mut acc = PointSum::new(dim);
    let mut x = vec![0.0; m];
    let mut idx = vec![0usize; m];
    let mut val = vec![0.0; dim];
    x[m - 1] = sample[k];
    idx[m - 1] = k;
    for_each_tuple(k, m - 1, |head| {
        for (j, &i) in head.iter().enumerate() {
            x[j] = sample[i];
            idx[j] = i;
        }
        h.eval_into(&x, &idx, &mut val);
        acc.add(&val);
    });
    acc.write_value(out);
}

/// The blocks `D_0, .., D_{n-1}` (empty blocks included, as zero points).
fn increments(h: &Kernel, sample: &[f64], n: usize, terms: u128) -> Vec<Point> {
    let dim = h.dim();
    let one = |k: usize| {
        let mut out = vec![0.0; dim];
        block_increment(h, sample, k, &mut out);
        out
    };
    if terms >= PARALLEL_THRESHOLD {
        (0..n).into_par_iter().map(one).collect()
    } else {
        (0..n).map(one).collect()
    }
}

/// Folds blocks into the running values `U_{m,0}, .., U_{m,n}`.
pub(crate) fn prefix_values(dim: usize, blocks: &[Point]) -> Vec<Point> {
    let mut acc = PointSum::new(dim);
    let mut out = Vec::with_capacity(blocks.len() + 1);
    out.push(vec![0.0; dim]);
    for b in blocks {
        acc.add(b);
        out.push(acc.value());
    }
    out
}

/// `U_{m,k}` for every `k = 0..=n`; entries with `k < m` are zero.
pub fn running_values(h: &Kernel, sample: &[f64], n: usize) -> Result<Vec<Point>> {
    check_sample(sample, n)?;
    let m = h.arity();
    if m == 0 {
        let mut v = vec![0.0; h.dim()];
        h.eval_into(&[], &[], &mut v);
        return Ok(vec![v; n + 1]);
    }
    let terms = check_cap(n, m)?;
    let blocks = increments(h, sample, n, terms);
    let values = prefix_values(h.dim(), &blocks);
    if values.last().is_some_and(|v| v.iter().any(|x| !x.is_finite())) {
        return Err(Error::NonFinite(format!("summing `{}`", h.name())));
    }
    Ok(values)
}

pub(crate) fn running_max_of(h: &Kernel, values: &[Point]) -> Vec<f64> {
    let m = h.arity();
    values
        .iter()
        .skip(m)
        .scan(0.0f64, |best, v| {
            *best = best.max(h.norm(v));
            Some(*best)
        })
        .collect()
}

/// `U_{m,n}` together with its running maxima.
pub fn complete_ustat(h: &Kernel, sample: &[f64], n: usize) -> Result<UStatResult> {
    let values = running_values(h, sample, n)?;
    let running_max = running_max_of(h, &values);
    Ok(UStatResult {
        value: values[n].clone(),
        n,
        m: h.arity(),
        running_max,
    })
}

/// `max_{m <= k <= j} ||U_{m,k}||` for `j = m..=n_max`.
pub fn running_max_norms(h: &Kernel, sample: &[f64], n_max: usize) -> Result<Vec<f64>> {
    let values = running_values(h, sample, n_max)?;
    Ok(running_max_of(h, &values))
}

/// The arity-`m` kernel `x -> h^I(x_I)`, summing a projection over all of
/// `Inc^m_n`. Index tuples are forwarded for weighted kernels.
pub fn induced_kernel(component: &HoeffdingComponent) -> Kernel {
    let base = component.kernel();
    let m = base.arity();
    let c = component.clone();
    let positions = component.positions().to_vec();
    let name = format!("induced{:?}({})", positions, base.name());
    Kernel::custom(
        name,
        m,
        *base.space(),
        false,
        base.is_weighted(),
        move |x, idx, out| {
            let args: Vec<f64> = positions.iter().map(|&p| x[p]).collect();
            match c.estimate(&args, idx) {
                Ok(e) => out.copy_from_slice(&e.value),
                Err(_) => out.fill(f64::NAN),
            }
        },
    )
}

/// `sum_{i in Inc^m_n} h^I(xi_{i_I})` for every `I ⊆ [0, m)`, indexed by the
/// bitmask of `I`. The entries add up to `U_{m,n}`.
pub fn subset_decomposition(
    h: &Kernel,
    dist: &Distribution,
    sample: &[f64],
    n: usize,
    opts: &ProjectionOptions,
) -> Result<Vec<(Vec<usize>, Point)>> {
    all_components(h, dist, opts)?
        .iter()
        .map(|c| {
            let u = complete_ustat(&induced_kernel(c), sample, n)?;
            Ok((c.positions().to_vec(), u.value))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionCheck {
    pub lhs: Point,
    pub rhs: Point,
    pub deviation: f64,
}

/// Compares `sum_{Inc^m_n} h` with
/// `C(n,m) sum_c C(m,c) C(n,c)^{-1} sum_{Inc^c_n} h^(c)`, levels `c = 0..=m`.
/// Meant for the exact projection path.
pub fn decomposition_identity_check(
    h: &Kernel,
    dist: &Distribution,
    sample: &[f64],
    n: usize,
    opts: &ProjectionOptions,
) -> Result<DecompositionCheck> {
    let m = h.arity();
    let dim = h.dim();
    let lhs = complete_ustat(h, sample, n)?.value;
    let mut rhs = PointSum::new(dim);
    let cnm = binomial_f64(n, m);
    for c in 0..=m.min(n) {
        let comp = project_degenerate_level_with(h, c, dist, opts)?;
        let u = complete_ustat(&comp.as_kernel()?, sample, n)?.value;
        let w = cnm * binomial_f64(m, c) / binomial_f64(n, c);
        rhs.add_scaled(w, &u);
    }
    let rhs = rhs.value();
    let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    Ok(DecompositionCheck {
        deviation: h.norm(&diff),
        lhs,
        rhs,
    })
}

/// Piecewise-linear path through `(k/n, values[k])`, `k = 0..=n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialSumPath {
    n: usize,
    values: Vec<f64>,
    exponent: f64,
}

impl PartialSumPath {
    /// Path through arbitrary values on the uniform grid of `[0, 1]`.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::param("values", "a path needs at least two breakpoints"));
        }
        Ok(Self {
            n: values.len() - 1,
            values,
            exponent: 0.0,
        })
    }

    /// `t -> n^{-exponent} U_{m, floor(nt)}`, linearly interpolated.
    pub fn from_ustat(h: &Kernel, sample: &[f64], n: usize, exponent: f64) -> Result<Self> {
        if h.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: h.dim(),
            });
        }
        if n == 0 {
            return Err(Error::param("n", "a path needs n >= 1"));
        }
        let scale = (n as f64).powf(-exponent);
        let values = running_values(h, sample, n)?
            .into_iter()
            .map(|v| scale * v[0])
            .collect();
        Ok(Self { n, values, exponent })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// Value at `k / n`.
    pub fn at_breakpoint(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn eval(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        let pos = t * self.n as f64;
        let k = (pos.floor() as usize).min(self.n - 1);
        let frac = pos - k as f64;
        if frac == 0.0 {
            return self.values[k];
        }
        self.values[k] + frac * (self.values[k + 1] - self.values[k])
    }

    /// Same path multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            n: self.n,
            values: self.values.iter().map(|v| c * v).collect(),
            exponent: self.exponent,
        }
    }
}
