//! Hölder norms of piecewise-linear paths and the dyadic increment statistic
//! behind Hölderian tightness of partial-sum processes.
//!
//! For a piecewise-linear `x` the ratio `|x(t) - x(s)| / (t - s)^alpha` is
//! quasi-convex in each variable on every linear piece: its sublevel sets are
//! `{convex <= concave}`. The supremum is therefore attained at a pair of
//! breakpoints, and [`holder_norm`] scans exactly those pairs.

use crate::error::{Error, Result};
use crate::ustat::PartialSumPath;
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

/// Largest number of segments accepted by the quadratic pair scan.
pub const MAX_PAIR_SCAN: usize = 8192;

/// Hölder exponent in the functional limit regime `(0, 1/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderParams {
    alpha: f64,
}

impl HolderParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(Error::param(
                "alpha",
                format!("must lie in (0, 1/2), got {alpha}"),
            ));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `p(alpha) = 1 / (1/2 - alpha)`.
    pub fn p_alpha(&self) -> f64 {
        1.0 / (0.5 - self.alpha)
    }
}

/// `|x(0)| + sup_{s<t} |x(t) - x(s)| / (t - s)^alpha` for `alpha` in `(0, 1)`.
pub fn holder_norm(path: &PartialSumPath, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    let n = path.n();
    if n > MAX_PAIR_SCAN {
        return Err(Error::param(
            "n",
            format!("{n} segments exceed the pair-scan limit {MAX_PAIR_SCAN}"),
        ));
    }
    let v = path.values();
    // weight[l] = (l / n)^{-alpha}
    let weight: Vec<f64> = (0..=n)
        .map(|l| {
            if l == 0 {
                0.0
            } else {
                (l as f64 / n as f64).powf(-alpha)
            }
        })
        .collect();
    let row = |i: usize| {
        let vi = v[i];
        v[i + 1..]
            .iter()
            .zip(&weight[1..])
            .fold(0.0f64, |best, (vj, w)| best.max((vj - vi).abs() * w))
    };
    let sup = if n >= 512 {
        (0..n).into_par_iter().map(row).reduce(|| 0.0, f64::max)
    } else {
        (0..n).map(row).fold(0.0, f64::max)
    };
    Ok(v[0].abs() + sup)
}

/// Parameters of the dyadic exceedance statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DyadicSpec {
    pub alpha: f64,
    pub epsilon: f64,
    /// Order of degeneracy; thresholds scale like `n^{d/2}`.
    pub d: usize,
    /// Smallest level `J` reported.
    pub j_min: u32,
    /// Largest level; defaults to `floor(log2 n)`.
    pub j_max: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExceedanceCell {
    pub j: u32,
    pub k: u64,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DyadicExceedance {
    pub n: usize,
    pub replications: usize,
    pub cells: Vec<ExceedanceCell>,
    /// `(J, sum_{j >= J} sum_k frequency)` for `J = j_min..=j_max`.
    pub curve: Vec<(u32, f64)>,
}

impl DyadicExceedance {
    pub fn write_cells_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["j", "k", "frequency"])?;
        for c in &self.cells {
            w.write_record([c.j.to_string(), c.k.to_string(), format!("{:.16e}", c.frequency)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_curve_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["J", "tail_sum"])?;
        for (j, s) in &self.curve {
            w.write_record([j.to_string(), format!("{s:.16e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn floor_log2(n: usize) -> u32 {
    usize::BITS - 1 - n.leading_zeros()
}

/// Raw partial sums `S_k`, undoing the path normalization.
fn raw_sums(path: &PartialSumPath) -> Vec<f64> {
    let scale = (path.n() as f64).powf(path.exponent());
    path.values().iter().map(|v| v * scale).collect()
}

fn common_n(paths: &[PartialSumPath]) -> Result<usize> {
    let n = paths
        .first()
        .ok_or_else(|| Error::param("paths", "need at least one path"))?
        .n();
    if paths.iter().any(|p| p.n() != n) {
        return Err(Error::param("paths", "all paths must share the same n"));
    }
    Ok(n)
}

/// Empirical frequencies of
/// `|S_{floor(n(k+1)2^-j)} - S_{floor(nk2^-j)}| > n^{d/2} 2^{-alpha j} epsilon`
/// over the given replications, with `S_k = n^{exponent} path(k/n)`.
pub fn dyadic_increment_exceedance(paths: &[PartialSumPath], spec: &DyadicSpec) -> Result<DyadicExceedance> {
    let n = common_n(paths)?;
    let top = floor_log2(n);
    let j_max = spec.j_max.unwrap_or(top);
    if j_max > top {
        return Err(Error::param(
            "j_max",
            format!("{j_max} exceeds floor(log2 n) = {top}"),
        ));
    }
    if spec.j_min > j_max {
        return Err(Error::param(
            "j_min",
            format!("{} exceeds j_max = {j_max}", spec.j_min),
        ));
    }
    if !(spec.epsilon > 0.0) {
        return Err(Error::param("epsilon", "must be positive"));
    }
    let sums: Vec<Vec<f64>> = paths.iter().map(raw_sums).collect();
    let base = (n as f64).powf(spec.d as f64 / 2.0) * spec.epsilon;
    let reps = paths.len() as f64;
    let mut cells = Vec::new();
    let mut level_sums = Vec::new();
    for j in spec.j_min..=j_max {
        let threshold = base * 2f64.powf(-spec.alpha * j as f64);
        let mut level = 0.0;
        for k in 0..(1u64 << j) {
            let lo = ((n as u128 * k as u128) >> j) as usize;
            let hi = ((n as u128 * (k as u128 + 1)) >> j) as usize;
            let hits = sums.iter().filter(|s| (s[hi] - s[lo]).abs() > threshold).count();
            let frequency = hits as f64 / reps;
            level += frequency;
            cells.push(ExceedanceCell { j, k, frequency });
        }
        level_sums.push((j, level));
    }
    let mut curve: Vec<(u32, f64)> = Vec::with_capacity(level_sums.len());
    let mut acc = 0.0;
    for (j, s) in level_sums.iter().rev() {
        acc += s;
        curve.push((*j, acc));
    }
    curve.reverse();
    Ok(DyadicExceedance {
        n,
        replications: paths.len(),
        cells,
        curve,
    })
}

/// Per-path `max_k |S_{hi} - S_{lo}| / (n^{d/2} 2^{-alpha j})` at level `j`;
/// a quantile of these calibrates `epsilon`.
pub fn dyadic_scale(paths: &[PartialSumPath], alpha: f64, d: usize, j: u32) -> Result<Vec<f64>> {
    let n = common_n(paths)?;
    if j > floor_log2(n) {
        return Err(Error::param("j", "level exceeds floor(log2 n)"));
    }
    let norm = (n as f64).powf(d as f64 / 2.0) * 2f64.powf(-alpha * j as f64);
    Ok(paths
        .iter()
        .map(|p| {
            let s = raw_sums(p);
            (0..(1u64 << j))
                .map(|k| {
                    let lo = ((n as u128 * k as u128) >> j) as usize;
                    let hi = ((n as u128 * (k as u128 + 1)) >> j) as usize;
                    (s[hi] - s[lo]).abs() / norm
                })
                .fold(0.0, f64::max)
        })
        .collect())
}
