//! Hoeffding projections and degeneracy certification.
//!
//! For `I ⊆ [0, m)` the projection
//!
//! ```text
//! h^I(x_I) = sum_{J ⊆ I} (-1)^{|I|-|J|} E[h(V^{I,J}(x))]
//! ```
//!
//! replaces the coordinates outside `J` by fresh draws. Conditional
//! expectations are computed in one of two ways:
//!
//! - exactly, by summing over the atoms of a finite-support law;
//! - by Monte Carlo, with one shared set of `inner` fresh vectors. Each fresh
//!   vector gives a whole alternating sum, so the standard error is that of
//!   a plain mean and the decomposition `sum_I h^I = h` telescopes draw by
//!   draw.
//!
//! For a symmetric kernel the level component `h^(c)` coincides with the
//! projection onto the first `c` positions.

use crate::error::{Error, Result};
use crate::kernels::{Distribution, Kernel, Point};
use crate::numeric::{mean_se, PointSum};
use crate::rng::StreamSeed;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

pub const DEFAULT_INNER: usize = 1024;
pub const DEFAULT_OUTER: usize = 256;

/// Largest number of support points enumerated for one exact expectation.
const MAX_EXACT_TERMS: f64 = 1e7;

/// Relative tolerance below which an exact conditional mean counts as zero.
pub const ZERO_SCALE_TOLERANCE: f64 = 1e-3;
/// Exact components smaller than this multiple of their absolute term mass
/// are rounding residue and are reported as zero.
const ROUNDING_FLUSH: f64 = 16.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMethod {
    /// Exact when the law has finite support and enumeration is small enough.
    #[default]
    Auto,
    Exact,
    MonteCarlo,
}

/// How conditional expectations are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluationPath {
    Exact,
    MonteCarlo,
}

fn support_terms(dist: &Distribution, free: usize) -> Option<(Vec<(f64, f64)>, f64)> {
    let s = dist.support()?;
    let terms = (s.len() as f64).powi(free as i32);
    Some((s, terms))
}

fn resolve_path(dist: &Distribution, method: ProjectionMethod, m: usize) -> Result<EvaluationPath> {
    let exact_ok = matches!(support_terms(dist, m), Some((_, t)) if t <= MAX_EXACT_TERMS);
    match method {
        ProjectionMethod::Auto if exact_ok => Ok(EvaluationPath::Exact),
        ProjectionMethod::Auto | ProjectionMethod::MonteCarlo => Ok(EvaluationPath::MonteCarlo),
        ProjectionMethod::Exact if exact_ok => Ok(EvaluationPath::Exact),
        ProjectionMethod::Exact => Err(Error::param(
            "method",
            "exact projection needs a finite-support law with a small enough support",
        )),
    }
}

/// `E[h(x)]` over the positions listed in `free`, the other positions of `x`
/// being held fixed. Exact sum over the atoms of `support`.
fn exact_expectation(
    h: &Kernel,
    support: &[(f64, f64)],
    x: &mut [f64],
    free: &[usize],
    index: &[usize],
    out: &mut [f64],
    mut mass: Option<&mut [f64]>,
) {
    let dim = h.dim();
    let mut acc = PointSum::new(dim);
    let mut val = vec![0.0; dim];
    let mut digits = vec![0usize; free.len()];
    let k = support.len();
    loop {
        let mut w = 1.0;
        for (d, &pos) in digits.iter().zip(free) {
            let (v, p) = support[*d];
            x[pos] = v;
            w *= p;
        }
        h.eval_into(x, index, &mut val);
        acc.add_scaled(w, &val);
        if let Some(mass) = mass.as_deref_mut() {
            for (a, v) in mass.iter_mut().zip(&val) {
                *a += w * v.abs();
            }
        }
        // odometer
        let mut j = 0;
        loop {
            if j == digits.len() {
                acc.write_value(out);
                return;
            }
            digits[j] += 1;
            if digits[j] < k {
                break;
            }
            digits[j] = 0;
            j += 1;
        }
    }
}

fn bits(mask: u64, m: usize) -> Vec<usize> {
    (0..m).filter(|k| mask >> k & 1 == 1).collect()
}

fn mask_of(positions: &[usize]) -> u64 {
    positions.iter().fold(0u64, |acc, p| acc | 1 << p)
}

/// Subsets of `mask` (including `mask` and the empty set).
fn submasks(mask: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut s = mask;
    loop {
        out.push(s);
        if s == 0 {
            break;
        }
        s = (s - 1) & mask;
    }
    out
}

/// A value together with its Monte Carlo standard error (0 on the exact path).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub value: Point,
    pub se: f64,
}

/// Which projection a component represents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    /// `h^I` for the listed positions.
    Subset(Vec<usize>),
    /// `h^(c)` of a symmetric kernel.
    Level(usize),
}

/// A projected kernel `h^I` (or `h^(c)`), with its estimation metadata.
#[derive(Clone)]
pub struct HoeffdingComponent {
    kernel: Kernel,
    kind: ComponentKind,
    positions: Vec<usize>,
    path: EvaluationPath,
    support: Arc<Vec<(f64, f64)>>,
    // inner x m fresh values, row-major (Monte Carlo path only)
    draws: Arc<Vec<f64>>,
    inner: usize,
}

impl std::fmt::Debug for HoeffdingComponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HoeffdingComponent")
            .field("kernel", &self.kernel.name())
            .field("kind", &self.kind)
            .field("path", &self.path)
            .field("inner", &self.inner)
            .finish()
    }
}

/// Knobs shared by the projection routines.
#[derive(Debug, Clone, Copy)]
pub struct ProjectionOptions {
    pub method: ProjectionMethod,
    pub inner: usize,
    pub seed: StreamSeed,
}

impl ProjectionOptions {
    pub fn new(inner: usize, seed: StreamSeed) -> Self {
        Self {
            method: ProjectionMethod::Auto,
            inner,
            seed,
        }
    }

    pub fn with_method(mut self, method: ProjectionMethod) -> Self {
        self.method = method;
        self
    }
}

/// Shared fresh draws for the Monte Carlo path.
fn fresh_draws(dist: &Distribution, inner: usize, m: usize, seed: &StreamSeed) -> Vec<f64> {
    let mut rng = seed.derive_str("projection-draws").rng(0);
    let mut v = vec![0.0; inner * m];
    dist.fill(&mut rng, &mut v);
    v
}

impl HoeffdingComponent {
    fn build(
        h: &Kernel,
        positions: Vec<usize>,
        kind: ComponentKind,
        dist: &Distribution,
        opts: &ProjectionOptions,
    ) -> Result<Self> {
        dist.validate()?;
        let m = h.arity();
        if m > 63 {
            return Err(Error::param("m", "arity above 63 is not supported"));
        }
        if positions.iter().any(|&p| p >= m) || positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param(
                "subset",
                format!("{positions:?} is not an increasing subset of [0, {m})"),
            ));
        }
        if opts.inner == 0 {
            return Err(Error::param("inner", "must be at least 1"));
        }
        let path = resolve_path(dist, opts.method, m)?;
        let (support, draws) = match path {
            EvaluationPath::Exact => (dist.support().unwrap_or_default(), Vec::new()),
            EvaluationPath::MonteCarlo => (Vec::new(), fresh_draws(dist, opts.inner, m, &opts.seed)),
        };
        Ok(Self {
            kernel: h.clone(),
            kind,
            positions,
            path,
            support: Arc::new(support),
            draws: Arc::new(draws),
            inner: opts.inner,
        })
    }

    pub fn kind(&self) -> &ComponentKind {
        &self.kind
    }

    /// Positions of the retained arguments.
    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn arity(&self) -> usize {
        self.positions.len()
    }

    pub fn path(&self) -> EvaluationPath {
        self.path
    }

    pub fn is_exact(&self) -> bool {
        self.path == EvaluationPath::Exact
    }

    pub fn inner(&self) -> usize {
        self.inner
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// `h^I` at `args` (one value per retained position). `index` is the full
    /// `m`-tuple handed to a weighted kernel; it may be empty otherwise.
    pub fn estimate(&self, args: &[f64], index: &[usize]) -> Result<Estimate> {
        if args.len() != self.arity() {
            return Err(Error::ArityMismatch {
                expected: self.arity(),
                got: args.len(),
            });
        }
        if self.kernel.is_weighted() && index.len() != self.kernel.arity() {
            return Err(Error::MissingIndex);
        }
        let mut out = vec![0.0; self.kernel.dim()];
        let se = self.estimate_into(args, index, &mut out);
        if out.iter().any(|v| !v.is_finite()) || !se.is_finite() {
            return Err(Error::NonFinite(format!(
                "projecting `{}` onto {:?}",
                self.kernel.name(),
                self.positions
            )));
        }
        Ok(Estimate { value: out, se })
    }

    fn estimate_into(&self, args: &[f64], index: &[usize], out: &mut [f64]) -> f64 {
        let m = self.kernel.arity();
        let dim = self.kernel.dim();
        let full = mask_of(&self.positions);
        let k = self.positions.len();
        match self.path {
            EvaluationPath::Exact => {
                let mut acc = PointSum::new(dim);
                let mut x = vec![0.0; m];
                let mut term = vec![0.0; dim];
                let mut mass = vec![0.0; dim];
                for j in submasks(full) {
                    let sign = if (k - j.count_ones() as usize).is_multiple_of(2) {
                        1.0
                    } else {
                        -1.0
                    };
                    for (a, &p) in args.iter().zip(&self.positions) {
                        x[p] = *a;
                    }
                    let free = bits(!j & ((1u64 << m) - 1), m);
                    exact_expectation(
                        &self.kernel,
                        &self.support,
                        &mut x,
                        &free,
                        index,
                        &mut term,
                        Some(&mut mass),
                    );
                    acc.add_scaled(sign, &term);
                }
                acc.write_value(out);
                // cancellation down to rounding level means an exact zero
                for (o, a) in out.iter_mut().zip(&mass) {
                    if o.abs() <= ROUNDING_FLUSH * a {
                        *o = 0.0;
                    }
                }
                0.0
            }
            EvaluationPath::MonteCarlo => {
                let subs: Vec<(u64, f64)> = submasks(full)
                    .into_iter()
                    .map(|j| {
                        let sign = if (k - j.count_ones() as usize).is_multiple_of(2) {
                            1.0
                        } else {
                            -1.0
                        };
                        (j, sign)
                    })
                    .collect();
                let mut x = vec![0.0; m];
                let mut val = vec![0.0; dim];
                let mut g = vec![0.0; dim];
                let mut per_draw: Vec<Vec<f64>> = vec![Vec::with_capacity(self.inner); dim];
                for r in 0..self.inner {
                    let fresh = &self.draws[r * m..(r + 1) * m];
                    let mut gs = PointSum::new(dim);
                    for &(j, sign) in &subs {
                        x.copy_from_slice(fresh);
                        for (a, &p) in args.iter().zip(&self.positions) {
                            if j >> p & 1 == 1 {
                                x[p] = *a;
                            }
                        }
                        self.kernel.eval_into(&x, index, &mut val);
                        gs.add_scaled(sign, &val);
                    }
                    gs.write_value(&mut g);
                    for (c, v) in per_draw.iter_mut().zip(&g) {
                        c.push(*v);
                    }
                }
                let mut var = 0.0;
                for (o, col) in out.iter_mut().zip(&per_draw) {
                    let (mu, se) = mean_se(col);
                    *o = mu;
                    var += se * se;
                }
                var.sqrt()
            }
        }
    }

    /// The component as a stand-alone kernel of arity `|I|`.
    pub fn as_kernel(&self) -> Result<Kernel> {
        if self.kernel.is_weighted() {
            return Err(Error::param(
                "kernel",
                "projections of index-weighted kernels depend on the full index tuple",
            ));
        }
        let me = self.clone();
        let name = match &self.kind {
            ComponentKind::Subset(s) => format!("({})^{s:?}", self.kernel.name()),
            ComponentKind::Level(c) => format!("({})^({c})", self.kernel.name()),
        };
        let symmetric = self.kernel.is_symmetric();
        let table = self.atom_table();
        Ok(Kernel::custom(
            name,
            self.arity(),
            *self.kernel.space(),
            symmetric,
            false,
            move |x, idx, out| {
                if let Some(t) = &table {
                    if let Some(row) = t.lookup(&me.support, x) {
                        out.copy_from_slice(row);
                        return;
                    }
                }
                me.estimate_into(x, idx, out);
            },
        ))
    }

    /// Values at every tuple of support atoms, for exact components whose
    /// table is small. Samples from the law only ever hit these points.
    fn atom_table(&self) -> Option<AtomTable> {
        let k = self.support.len();
        let c = self.arity();
        if self.path != EvaluationPath::Exact || k == 0 || (k as f64).powi(c as i32) > MAX_ATOM_TABLE {
            return None;
        }
        let dim = self.kernel.dim();
        let cells = k.pow(c as u32);
        let mut values = vec![0.0; cells * dim];
        let mut x = vec![0.0; c];
        for (cell, row) in values.chunks_exact_mut(dim).enumerate() {
            let mut rest = cell;
            for xi in x.iter_mut() {
                *xi = self.support[rest % k].0;
                rest /= k;
            }
            self.estimate_into(&x, &[], row);
        }
        Some(AtomTable { dim, values })
    }
}

/// Largest atom table built by [`HoeffdingComponent::as_kernel`].
const MAX_ATOM_TABLE: f64 = 65_536.0;

struct AtomTable {
    dim: usize,
    values: Vec<f64>,
}

impl AtomTable {
    fn lookup(&self, support: &[(f64, f64)], x: &[f64]) -> Option<&[f64]> {
        let k = support.len();
        let mut cell = 0;
        for xi in x.iter().rev() {
            let a = support.iter().position(|(v, _)| v == xi)?;
            cell = cell * k + a;
        }
        Some(&self.values[cell * self.dim..(cell + 1) * self.dim])
    }
}

/// `h^I` for the positions in `subset` (0-based), by the automatic path.
pub fn project_component(
    h: &Kernel,
    subset: &[usize],
    dist: &Distribution,
    inner: usize,
    seed: &StreamSeed,
) -> Result<HoeffdingComponent> {
    project_component_with(h, subset, dist, &ProjectionOptions::new(inner, *seed))
}

pub fn project_component_with(
    h: &Kernel,
    subset: &[usize],
    dist: &Distribution,
    opts: &ProjectionOptions,
) -> Result<HoeffdingComponent> {
    HoeffdingComponent::build(
        h,
        subset.to_vec(),
        ComponentKind::Subset(subset.to_vec()),
        dist,
        opts,
    )
}

/// `h^(c)` of a symmetric kernel.
pub fn project_degenerate_level(
    h: &Kernel,
    c: usize,
    dist: &Distribution,
    inner: usize,
    seed: &StreamSeed,
) -> Result<HoeffdingComponent> {
    project_degenerate_level_with(h, c, dist, &ProjectionOptions::new(inner, *seed))
}

pub fn project_degenerate_level_with(
    h: &Kernel,
    c: usize,
    dist: &Distribution,
    opts: &ProjectionOptions,
) -> Result<HoeffdingComponent> {
    if !h.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    if c > h.arity() {
        return Err(Error::param(
            "c",
            format!("level {c} exceeds arity {}", h.arity()),
        ));
    }
    HoeffdingComponent::build(h, (0..c).collect(), ComponentKind::Level(c), dist, opts)
}

/// Outcome of a zero test on an estimated conditional mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Zero,
    Nonzero,
    Inconclusive,
}

/// Estimated size of `E[h | xi_C]` for one conditioning set `C`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalMeanStat {
    /// Conditioning positions (0-based).
    pub conditioning: Vec<usize>,
    /// Estimate of `E ||E[h | xi_C]||` (plug-in on the Monte Carlo path).
    pub mean_norm: f64,
    pub mean_norm_se: f64,
    /// Unbiased estimate of `E |E[h | xi_C]|_2^2`.
    pub mean_square: f64,
    pub mean_square_se: f64,
    pub verdict: Verdict,
}

/// Overall degeneracy verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degeneracy {
    Degenerate,
    NotDegenerate,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegeneracyReport {
    pub kernel: String,
    pub arity: usize,
    pub path: EvaluationPath,
    pub inner: usize,
    pub outer: usize,
    /// `E ||h||`, the reference scale for zero tests.
    pub scale: f64,
    /// One entry per left-out coordinate `l0`, conditioning on the others.
    pub leave_one_out: Vec<ConditionalMeanStat>,
    /// One entry per level `k = 0..=m`, conditioning on the first `k` coordinates.
    pub levels: Vec<ConditionalMeanStat>,
    pub verdict: Degeneracy,
    /// Smallest `d >= 1` whose level is nonzero while all lower levels vanish.
    pub order: Option<usize>,
}

impl DegeneracyReport {
    pub fn is_degenerate(&self) -> bool {
        self.verdict == Degeneracy::Degenerate
    }
}

fn exact_conditional_stat(
    h: &Kernel,
    support: &[(f64, f64)],
    cond: &[usize],
    index: &[usize],
    scale: f64,
) -> ConditionalMeanStat {
    let m = h.arity();
    let dim = h.dim();
    let free: Vec<usize> = (0..m).filter(|p| !cond.contains(p)).collect();
    let mut x = vec![0.0; m];
    let mut inner = vec![0.0; dim];
    let mut norm_acc = crate::numeric::CompensatedSum::new();
    let mut sq_acc = crate::numeric::CompensatedSum::new();
    let mut digits = vec![0usize; cond.len()];
    let k = support.len();
    loop {
        let mut w = 1.0;
        for (d, &pos) in digits.iter().zip(cond) {
            let (v, p) = support[*d];
            x[pos] = v;
            w *= p;
        }
        exact_expectation(h, support, &mut x, &free, index, &mut inner, None);
        norm_acc.add(w * h.norm(&inner));
        sq_acc.add(w * inner.iter().map(|v| v * v).sum::<f64>());
        let mut j = 0;
        let done = loop {
            if j == digits.len() {
                break true;
            }
            digits[j] += 1;
            if digits[j] < k {
                break false;
            }
            digits[j] = 0;
            j += 1;
        };
        if done {
            break;
        }
    }
    let mean_norm = norm_acc.value();
    let floor = 1e-12 * scale;
    let verdict = if mean_norm <= 3.0 * floor && mean_norm <= ZERO_SCALE_TOLERANCE * scale {
        Verdict::Zero
    } else if mean_norm >= 5.0 * floor {
        Verdict::Nonzero
    } else {
        Verdict::Inconclusive
    };
    ConditionalMeanStat {
        conditioning: cond.to_vec(),
        mean_norm,
        mean_norm_se: 0.0,
        mean_square: sq_acc.value(),
        mean_square_se: 0.0,
        verdict,
    }
}

#[allow(clippy::too_many_arguments)]
fn mc_conditional_stat(
    h: &Kernel,
    dist: &Distribution,
    cond: &[usize],
    index: &[usize],
    inner: usize,
    outer: usize,
    seed: &StreamSeed,
) -> ConditionalMeanStat {
    let m = h.arity();
    let dim = h.dim();
    let free: Vec<usize> = (0..m).filter(|p| !cond.contains(p)).collect();
    let label = mask_of(cond);
    let outer_seed = seed.derive_str("degeneracy-outer").derive(label);
    let inner_seed = seed.derive_str("degeneracy-inner").derive(label);
    let per_outer: Vec<(f64, f64)> = (0..outer as u64)
        .into_par_iter()
        .map(|o| {
            let mut x = vec![0.0; m];
            let mut ro = outer_seed.rng(o);
            for &p in cond {
                x[p] = dist.sample_one(&mut ro);
            }
            let mut val = vec![0.0; dim];
            if free.is_empty() {
                h.eval_into(&x, index, &mut val);
                return (h.norm(&val), val.iter().map(|v| v * v).sum());
            }
            let mut ri = inner_seed.rng(o);
            let mut total = PointSum::new(dim);
            let mut sum_sq = crate::numeric::CompensatedSum::new();
            for _ in 0..inner {
                for &p in &free {
                    x[p] = dist.sample_one(&mut ri);
                }
                h.eval_into(&x, index, &mut val);
                total.add(&val);
                sum_sq.add(val.iter().map(|v| v * v).sum());
            }
            let t = total.value();
            let kk = inner as f64;
            let mean: Vec<f64> = t.iter().map(|v| v / kk).collect();
            let t_sq: f64 = t.iter().map(|v| v * v).sum();
            let unbiased = (t_sq - sum_sq.value()) / (kk * (kk - 1.0));
            (h.norm(&mean), unbiased)
        })
        .collect();
    let norms: Vec<f64> = per_outer.iter().map(|p| p.0).collect();
    let squares: Vec<f64> = per_outer.iter().map(|p| p.1).collect();
    let (mean_norm, mean_norm_se) = mean_se(&norms);
    let (mean_square, mean_square_se) = mean_se(&squares);
    let verdict = if mean_square <= 3.0 * mean_square_se {
        Verdict::Zero
    } else if mean_square >= 5.0 * mean_square_se {
        Verdict::Nonzero
    } else {
        Verdict::Inconclusive
    };
    ConditionalMeanStat {
        conditioning: cond.to_vec(),
        mean_norm,
        mean_norm_se,
        mean_square,
        mean_square_se,
        verdict,
    }
}

/// Options for [`check_degeneracy_with`].
#[derive(Debug, Clone)]
pub struct DegeneracyOptions {
    pub method: ProjectionMethod,
    pub inner: usize,
    pub outer: usize,
    pub seed: StreamSeed,
    /// Index tuple handed to weighted kernels; defaults to `(0, 1, .., m-1)`.
    pub index: Option<Vec<usize>>,
}

impl DegeneracyOptions {
    pub fn new(inner: usize, outer: usize, seed: StreamSeed) -> Self {
        Self {
            method: ProjectionMethod::Auto,
            inner,
            outer,
            seed,
            index: None,
        }
    }
}

/// Tests every leave-one-out conditional mean (degeneracy) and every
/// first-`k` conditional mean (order of degeneracy).
pub fn check_degeneracy(
    h: &Kernel,
    dist: &Distribution,
    inner: usize,
    outer: usize,
    seed: &StreamSeed,
) -> Result<DegeneracyReport> {
    check_degeneracy_with(h, dist, &DegeneracyOptions::new(inner, outer, *seed))
}

pub fn check_degeneracy_with(
    h: &Kernel,
    dist: &Distribution,
    opts: &DegeneracyOptions,
) -> Result<DegeneracyReport> {
    dist.validate()?;
    let m = h.arity();
    if opts.inner < 2 || opts.outer < 2 {
        return Err(Error::param("inner/outer", "both must be at least 2"));
    }
    let index: Vec<usize> = opts.index.clone().unwrap_or_else(|| (0..m).collect());
    if index.len() != m {
        return Err(Error::ArityMismatch {
            expected: m,
            got: index.len(),
        });
    }
    let path = resolve_path(dist, opts.method, m)?;
    let all: Vec<usize> = (0..m).collect();

    let (leave_one_out, levels, scale) = match path {
        EvaluationPath::Exact => {
            let support = dist.support().unwrap_or_default();
            let scale = exact_conditional_stat(h, &support, &all, &index, 0.0).mean_norm;
            let stat = |c: &[usize]| exact_conditional_stat(h, &support, c, &index, scale);
            let loo: Vec<_> = (0..m)
                .map(|l0| stat(&all.iter().copied().filter(|&p| p != l0).collect::<Vec<_>>()))
                .collect();
            let lv: Vec<_> = (0..=m).map(|k| stat(&all[..k])).collect();
            (loo, lv, scale)
        }
        EvaluationPath::MonteCarlo => {
            let stat =
                |c: &[usize]| mc_conditional_stat(h, dist, c, &index, opts.inner, opts.outer, &opts.seed);
            let loo: Vec<_> = (0..m)
                .map(|l0| stat(&all.iter().copied().filter(|&p| p != l0).collect::<Vec<_>>()))
                .collect();
            let lv: Vec<_> = (0..=m).map(|k| stat(&all[..k])).collect();
            let scale = lv[m].mean_norm;
            (loo, lv, scale)
        }
    };

    if leave_one_out
        .iter()
        .chain(&levels)
        .any(|s| !s.mean_norm.is_finite() || !s.mean_square.is_finite())
    {
        return Err(Error::NonFinite(format!("checking degeneracy of `{}`", h.name())));
    }

    let verdict = if leave_one_out.iter().all(|s| s.verdict == Verdict::Zero) {
        Degeneracy::Degenerate
    } else if leave_one_out.iter().any(|s| s.verdict == Verdict::Nonzero) {
        Degeneracy::NotDegenerate
    } else {
        Degeneracy::Inconclusive
    };

    let mut order = None;
    for k in 1..=m {
        match levels[k].verdict {
            Verdict::Nonzero if levels[..k].iter().all(|s| s.verdict == Verdict::Zero) => {
                order = Some(k);
                break;
            }
            Verdict::Zero => continue,
            _ => break,
        }
    }

    Ok(DegeneracyReport {
        kernel: h.name().to_string(),
        arity: m,
        path,
        inner: opts.inner,
        outer: opts.outer,
        scale,
        leave_one_out,
        levels,
        verdict,
        order,
    })
}

/// Result of checking `sum_I h^I(x_I) = h(x)` on random points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub path: EvaluationPath,
    pub points: usize,
    pub max_deviation: f64,
    /// Largest `sqrt(sum_I se_I^2)` over the test points.
    pub aggregate_se: f64,
}

/// All `2^m` components `h^I`, indexed by the bitmask of `I`.
pub fn all_components(
    h: &Kernel,
    dist: &Distribution,
    opts: &ProjectionOptions,
) -> Result<Vec<HoeffdingComponent>> {
    let m = h.arity();
    (0..1u64 << m)
        .map(|mask| project_component_with(h, &bits(mask, m), dist, opts))
        .collect()
}

/// Evaluates `sum_I h^I(x_I)` and compares with `h(x)` at `points` random
/// points drawn from `dist`.
pub fn reconstruct_identity_check(
    h: &Kernel,
    dist: &Distribution,
    points: usize,
    opts: &ProjectionOptions,
) -> Result<IdentityCheck> {
    let m = h.arity();
    let dim = h.dim();
    let comps = all_components(h, dist, opts)?;
    let path = comps[0].path();
    let mut rng = opts.seed.derive_str("identity-points").rng(0);
    let index: Vec<usize> = (0..m).collect();
    let mut max_dev = 0.0f64;
    let mut agg = 0.0f64;
    let mut x = vec![0.0; m];
    let mut direct = vec![0.0; dim];
    for _ in 0..points {
        dist.fill(&mut rng, &mut x);
        h.eval_into(&x, &index, &mut direct);
        let mut total = PointSum::new(dim);
        let mut var = 0.0;
        for c in &comps {
            let args: Vec<f64> = c.positions().iter().map(|&p| x[p]).collect();
            let e = c.estimate(&args, &index)?;
            total.add(&e.value);
            var += e.se * e.se;
        }
        let diff: Vec<f64> = total.value().iter().zip(&direct).map(|(a, b)| a - b).collect();
        max_dev = max_dev.max(h.norm(&diff));
        agg = agg.max(var.sqrt());
    }
    Ok(IdentityCheck {
        path,
        points,
        max_deviation: max_dev,
        aggregate_se: agg,
    })
}

/// Verdict of [`IdentityCheck`] against its contract: `1e-10` on the exact
/// path, five aggregate standard errors on the Monte Carlo path.
pub fn identity_holds(check: &IdentityCheck) -> bool {
    match check.path {
        EvaluationPath::Exact => check.max_deviation <= 1e-10,
        EvaluationPath::MonteCarlo => check.max_deviation <= (5.0 * check.aggregate_se).max(1e-10),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::builtin_kernel;

    fn seed() -> StreamSeed {
        StreamSeed::new(2024)
    }

    #[test]
    fn alternating_signs_telescope() {
        // sum over I ⊇ J of (-1)^{|I|-|J|} is 1 when J is the full set, else 0
        for m in 0..=6usize {
            let full = (1u64 << m) - 1;
            for j in 0..=full {
                let s: i64 = (0..=full)
                    .filter(|i| i & j == j)
                    .map(|i| {
                        if (i.count_ones() - j.count_ones()) % 2 == 0 {
                            1
                        } else {
                            -1
                        }
                    })
                    .sum();
                assert_eq!(s, i64::from(j == full), "m={m} J={j:b}");
            }
        }
    }

    #[test]
    fn sum_kernel_uniform_projection_is_identity() {
        let h = builtin_kernel("sum", 2).unwrap();
        let u = Distribution::uniform(-1.0, 1.0).unwrap();
        let c = project_component(&h, &[0], &u, 4096, &seed()).unwrap();
        assert_eq!(c.path(), EvaluationPath::MonteCarlo);
        for x in [-0.7, 0.0, 0.4] {
            let e = c.estimate(&[x], &[]).unwrap();
            assert!((e.value[0] - x).abs() <= 3.0 * e.se + 1e-12, "{x}: {e:?}");
        }
    }

    #[test]
    fn empty_subset_is_the_mean() {
        let h = builtin_kernel("product", 2).unwrap();
        let c = project_component(&h, &[], &Distribution::Rademacher, 10, &seed()).unwrap();
        assert!(c.is_exact());
        assert_eq!(c.estimate(&[], &[]).unwrap().value, vec![0.0]);
        let u = Distribution::uniform(-1.0, 1.0).unwrap();
        let c = project_component(&h, &[], &u, 2048, &seed()).unwrap();
        let e = c.estimate(&[], &[]).unwrap();
        assert!(e.value[0].abs() <= 3.0 * e.se);
    }

    #[test]
    fn product_top_component_is_exact() {
        let h = builtin_kernel("product", 2).unwrap();
        let c = project_component(&h, &[0, 1], &Distribution::Rademacher, 10, &seed()).unwrap();
        for (x, y) in [(1.0, -1.0), (0.3, 2.0), (-5.0, -2.0)] {
            assert_eq!(c.estimate(&[x, y], &[]).unwrap().value, vec![x * y]);
        }
    }

    #[test]
    fn sum_kernel_components_match_hand_expansion() {
        let d = Distribution::finite_discrete(vec![0.0, 1.0, 5.0], vec![0.2, 0.5, 0.3]).unwrap();
        let mu = d.mean();
        let h = builtin_kernel("sum", 2).unwrap();
        let opts = ProjectionOptions::new(8, seed());
        let comps = all_components(&h, &d, &opts).unwrap();
        let e0 = comps[0].estimate(&[], &[]).unwrap().value[0];
        assert!((e0 - 2.0 * mu).abs() < 1e-14);
        let e1 = comps[1].estimate(&[3.0], &[]).unwrap().value[0];
        assert!((e1 - (3.0 - mu)).abs() < 1e-14);
        let e2 = comps[2].estimate(&[-1.0], &[]).unwrap().value[0];
        assert!((e2 - (-1.0 - mu)).abs() < 1e-14);
        let e12 = comps[3].estimate(&[3.0, -1.0], &[]).unwrap().value[0];
        assert!(e12.abs() < 1e-14);
    }

    #[test]
    fn level_components() {
        let d = Distribution::finite_discrete(vec![-1.0, 2.0], vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        let mu = d.mean();
        let sum = builtin_kernel("sum", 2).unwrap();
        let c1 = project_degenerate_level(&sum, 1, &d, 8, &seed()).unwrap();
        assert!((c1.estimate(&[0.5], &[]).unwrap().value[0] - (0.5 - mu)).abs() < 1e-14);
        let prod = builtin_kernel("product", 2).unwrap();
        let c0 = project_degenerate_level(&prod, 0, &Distribution::Rademacher, 8, &seed()).unwrap();
        assert_eq!(c0.estimate(&[], &[]).unwrap().value, vec![0.0]);
        let c2 = project_degenerate_level(&prod, 2, &Distribution::Rademacher, 8, &seed()).unwrap();
        assert_eq!(c2.estimate(&[0.5, 3.0], &[]).unwrap().value, vec![1.5]);
        let sign = builtin_kernel("sign", 2).unwrap();
        assert!(matches!(
            project_degenerate_level(&sign, 1, &d, 8, &seed()),
            Err(Error::NotSymmetric)
        ));
    }

    #[test]
    fn degeneracy_of_zoo_kernels() {
        let s = seed();
        let prod = builtin_kernel("product", 3).unwrap();
        let r = check_degeneracy(&prod, &Distribution::Rademacher, 64, 64, &s).unwrap();
        assert_eq!(r.path, EvaluationPath::Exact);
        assert_eq!(r.verdict, Degeneracy::Degenerate);
        assert_eq!(r.order, Some(3));

        let sum = builtin_kernel("sum", 2).unwrap();
        let r = check_degeneracy(&sum, &Distribution::Rademacher, 64, 64, &s).unwrap();
        assert_eq!(r.verdict, Degeneracy::NotDegenerate);
        assert_eq!(r.order, Some(1));

        let d = Distribution::finite_discrete(vec![0.0, 1.0, 4.0], vec![0.5, 0.25, 0.25]).unwrap();
        let cp = crate::kernels::builtin_kernel_with("centered_product", 2, Some(d.mean())).unwrap();
        let r = check_degeneracy(&cp, &d, 64, 64, &s).unwrap();
        assert_eq!(r.verdict, Degeneracy::Degenerate);
        assert_eq!(r.order, Some(2));
    }

    #[test]
    fn monte_carlo_degeneracy() {
        let s = seed();
        let u = Distribution::uniform(-1.0, 1.0).unwrap();
        let prod = builtin_kernel("product", 2).unwrap();
        let r = check_degeneracy(&prod, &u, 256, 128, &s).unwrap();
        assert_eq!(r.path, EvaluationPath::MonteCarlo);
        assert_eq!(r.verdict, Degeneracy::Degenerate, "{r:#?}");
        assert_eq!(r.order, Some(2));
        let sum = builtin_kernel("sum", 2).unwrap();
        let r = check_degeneracy(&sum, &u, 256, 128, &s).unwrap();
        assert_eq!(r.verdict, Degeneracy::NotDegenerate);
        assert_eq!(r.order, Some(1));
    }

    #[test]
    fn identity_on_both_paths() {
        let h = builtin_kernel("product", 3).unwrap();
        let chk = reconstruct_identity_check(
            &h,
            &Distribution::Rademacher,
            20,
            &ProjectionOptions::new(8, seed()),
        )
        .unwrap();
        assert!(identity_holds(&chk), "{chk:?}");

        let h = builtin_kernel("sum", 2).unwrap();
        let d = Distribution::finite_discrete(vec![1.0, 3.0], vec![0.5, 0.5]).unwrap();
        let chk = reconstruct_identity_check(&h, &d, 20, &ProjectionOptions::new(8, seed())).unwrap();
        assert_eq!(chk.max_deviation, 0.0);

        let h = Kernel::from_expr("x1*x2 + x1 + x2", 2, true).unwrap();
        let u = Distribution::uniform(-1.0, 1.0).unwrap();
        let chk = reconstruct_identity_check(&h, &u, 20, &ProjectionOptions::new(512, seed())).unwrap();
        assert_eq!(chk.path, EvaluationPath::MonteCarlo);
        assert!(identity_holds(&chk), "{chk:?}");
    }

    #[test]
    fn projected_components_are_degenerate() {
        let d = Distribution::finite_discrete(vec![-1.0, 0.5, 2.0], vec![0.3, 0.3, 0.4]).unwrap();
        let h = Kernel::from_expr("x1*x2*x2 + exp(x1) - x2", 2, false).unwrap();
        let opts = ProjectionOptions::new(8, seed());
        for comp in all_components(&h, &d, &opts).unwrap().into_iter().skip(1) {
            let k = comp.as_kernel().unwrap();
            let r = check_degeneracy(&k, &d, 8, 8, &seed()).unwrap();
            assert_eq!(
                r.verdict,
                Degeneracy::Degenerate,
                "{:?}: {r:#?}",
                comp.positions()
            );
        }
    }

    #[test]
    fn monte_carlo_error_shrinks_with_inner_size() {
        let d = Distribution::finite_discrete(vec![-1.0, 0.5, 2.0], vec![0.3, 0.3, 0.4]).unwrap();
        let h = Kernel::from_expr("x1*x2 + x1^2", 2, true).unwrap();
        let exact = project_component(&h, &[0], &d, 1, &seed()).unwrap();
        let pts = [-1.0, 0.5, 2.0];
        let mut errs = Vec::new();
        for inner in [100usize, 10_000] {
            let mut total = 0.0;
            for rep in 0..40u64 {
                let opts = ProjectionOptions::new(inner, StreamSeed::new(rep))
                    .with_method(ProjectionMethod::MonteCarlo);
                let mc = project_component_with(&h, &[0], &d, &opts).unwrap();
                for &x in &pts {
                    let a = mc.estimate(&[x], &[]).unwrap().value[0];
                    let b = exact.estimate(&[x], &[]).unwrap().value[0];
                    total += (a - b).abs();
                }
            }
            errs.push(total);
        }
        // 1/sqrt(inner) predicts a factor 10; allow a factor 3 slack
        assert!(errs[1] <= 3.0 * errs[0] / 10.0, "{errs:?}");
    }

    #[test]
    fn weighted_kernels_project_positionally() {
        let h = Kernel::from_expr("x1*x2*i2", 2, false).unwrap();
        let d = Distribution::finite_discrete(vec![0.0, 2.0], vec![0.5, 0.5]).unwrap();
        let c = project_component(&h, &[0], &d, 8, &seed()).unwrap();
        // E[x * xi * i2] - E[xi1 * xi2 * i2] with i2 = 5
        let e = c.estimate(&[3.0], &[0, 4]).unwrap().value[0];
        assert!((e - (3.0 * 1.0 * 5.0 - 1.0 * 5.0)).abs() < 1e-12);
        assert!(c.as_kernel().is_err());
        assert!(matches!(c.estimate(&[3.0], &[]), Err(Error::MissingIndex)));
    }

    #[test]
    fn rounding_residue_is_flushed_and_tables_agree() {
        // mean-zero law: the cubic term lives at level 3, the squares at level 1
        let law = Distribution::finite_discrete(vec![-1.0, 0.0, 2.0], vec![0.4, 0.4, 0.2]).unwrap();
        let h = Kernel::from_expr("x1*x2*x3 + x1^2 + x2^2 + x3^2", 3, true).unwrap();
        let opts = ProjectionOptions::new(64, seed());
        let c2 = project_degenerate_level_with(&h, 2, &law, &opts).unwrap();
        for x in [[-1.0, 2.0], [2.0, 2.0], [0.0, -1.0]] {
            assert_eq!(c2.estimate(&x, &[]).unwrap().value, vec![0.0]);
        }
        let c3 = project_degenerate_level_with(&h, 3, &law, &opts).unwrap();
        let k = c3.as_kernel().unwrap();
        for x in [[-1.0, 2.0, 0.0], [2.0, 2.0, -1.0], [0.5, 2.0, -1.0]] {
            let direct = c3.estimate(&x, &[]).unwrap().value;
            assert_eq!(k.evaluate(&x, None).unwrap(), direct);
        }
    }
}
