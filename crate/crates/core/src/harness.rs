//! End-to-end experiments: simulate the left-hand side of an inequality,
//! assemble its right-hand side from tail functionals, and judge whether the
//! ratio stays bounded over the configured grid.
//!
//! The inequalities carry unspecified constants, so "verification" means the
//! fitted constant (largest ratio) is finite and the ratios stay within a
//! stability factor across thresholds and sample sizes.

use crate::combinatorics::binomial_f64;
use crate::error::{Error, Result};
use crate::hoeffding::{
    check_degeneracy_with, project_degenerate_level_with, Degeneracy, DegeneracyOptions, DegeneracyReport,
    EvaluationPath, ProjectionOptions, DEFAULT_INNER as DEGEN_INNER, DEFAULT_OUTER as DEGEN_OUTER,
};
use crate::holder::{
    dyadic_increment_exceedance, dyadic_scale, holder_norm, DyadicExceedance, DyadicSpec, HolderParams,
};
use crate::incomplete::{
    incomplete_moment_experiment, IncompleteMomentRow, IncompleteMomentSpec, SamplingDesign,
};
use crate::kernels::{sample_iid, Distribution, Kernel, KernelSpec};
use crate::numeric::{mean_se, median, quantile};
use crate::rng::{StreamSeed, DEFAULT_SEED};
use crate::spaces::BanachSpace;
use crate::tails::{
    conditional_moment_tail, level_moment_tail, required_integrability, EmpiricalTail,
    DEFAULT_INNER as TAIL_INNER, DEFAULT_OUTER as TAIL_OUTER,
};
use crate::ustat::{running_values, PartialSumPath};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

pub const DEFAULT_STABILITY_THRESHOLD: f64 = 10.0;
/// Quantile spread allowed for Hölder norms across sample sizes.
pub const DEFAULT_HOLDER_SPREAD: f64 = 2.0;
pub const DEFAULT_TAIL_REPLICATIONS: usize = 10_000;
pub const DEFAULT_MOMENT_REPLICATIONS: usize = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Deviation,
    OrderDDeviation,
    Moment,
    Lln,
    Holder,
    IncompleteMoment,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Deviation,
        ExperimentKind::OrderDDeviation,
        ExperimentKind::Moment,
        ExperimentKind::Lln,
        ExperimentKind::Holder,
        ExperimentKind::IncompleteMoment,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Deviation => "deviation",
            ExperimentKind::OrderDDeviation => "order-d-deviation",
            ExperimentKind::Moment => "moment",
            ExperimentKind::Lln => "lln",
            ExperimentKind::Holder => "holder",
            ExperimentKind::IncompleteMoment => "incomplete-moment",
        }
    }

    fn default_replications(&self) -> usize {
        match self {
            ExperimentKind::Moment | ExperimentKind::Holder => DEFAULT_MOMENT_REPLICATIONS,
            _ => DEFAULT_TAIL_REPLICATIONS,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::config("experiment", format!("unknown experiment `{s}`")))
    }
}

/// Numeric knobs. Every field is optional; unset fields take documented
/// defaults or are rejected by the experiments that need them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentParams {
    /// Moment exponent `p`; defaults to the smoothness `r` of the space
    /// (the midpoint of `(1, r)` for `lln`).
    pub p: Option<f64>,
    /// Tail exponent `q`; defaults to `p`.
    pub q: Option<f64>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub epsilon: Option<f64>,
    /// Threshold multipliers `c`; thresholds are `c * N^{t_scale_exponent}`.
    pub t_grid: Vec<f64>,
    pub t_scale_exponent: f64,
    pub n_grid: Vec<usize>,
    pub replications: Option<usize>,
    /// Degeneracy certification budget.
    pub inner: Option<usize>,
    pub outer: Option<usize>,
    /// Nested Monte Carlo budget for conditional-moment tails.
    pub moment_inner: Option<usize>,
    pub moment_outer: Option<usize>,
    /// Expected order of degeneracy; must agree with the certified order.
    pub d: Option<usize>,
    pub stability_threshold: Option<f64>,
    /// `p_n = n^{-a}` for each listed `a` (incomplete designs).
    pub p_n_exponents: Vec<f64>,
    /// Coarsest dyadic level of the tightness statistic.
    pub j_min: Option<u32>,
    /// The tightness curve must strictly decrease for `J <= j_check_max`.
    pub j_check_max: Option<u32>,
    /// Quantile of the level-`j_min` increment scale used for `epsilon`.
    pub epsilon_quantile: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub kernel: KernelSpec,
    pub distribution: Distribution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<BanachSpace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<SamplingDesign>,
    #[serde(default)]
    pub params: ExperimentParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// One cell of the `(t, N)` grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_n: Option<f64>,
    pub lhs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lhs_se: Option<f64>,
    pub rhs: f64,
    pub ratio: f64,
}

/// A named pass/fail criterion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            pass: value.is_finite() && value <= threshold,
        }
    }

    fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            threshold: 1.0,
            pass: ok,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegeneracySummary {
    pub verdict: Degeneracy,
    pub order: Option<usize>,
    pub path: EvaluationPath,
}

impl From<&DegeneracyReport> for DegeneracySummary {
    fn from(r: &DegeneracyReport) -> Self {
        Self {
            verdict: r.verdict,
            order: r.order,
            path: r.path,
        }
    }
}

/// Finite-horizon surrogate for the summability of
/// `N^gamma P(sup_{n >= N} n^alpha ||U_n|| / C(n, m) > epsilon)`. Heuristic:
/// reported, never judged.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateDiagnostic {
    pub heuristic: bool,
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    /// `(N, N^gamma * frequency, partial sum)` over dyadic `N`.
    pub terms: Vec<(usize, f64, f64)>,
    /// Integrability exponents `q(d, j, gamma, r)` for `j = 1..=m`.
    pub required_integrability: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderQuantiles {
    pub n: usize,
    pub median: f64,
    pub q90: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Extras {
    None,
    Lln {
        /// `(N, median of N^{-m/p} ||U_N||)`.
        terminal_medians: Vec<(usize, f64)>,
        rate: Option<RateDiagnostic>,
    },
    Holder {
        alpha: f64,
        p_alpha: f64,
        d: usize,
        quantiles: Vec<HolderQuantiles>,
        epsilon: f64,
        exceedance: DyadicExceedance,
    },
    IncompleteMoment {
        rows: Vec<IncompleteMomentRow>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub experiment: ExperimentKind,
    pub kernel: String,
    pub m: usize,
    pub seed: u64,
    pub replications: usize,
    pub p: f64,
    pub q: f64,
    pub degeneracy: DegeneracySummary,
    pub points: Vec<GridPoint>,
    /// Largest ratio: the smallest constant that makes every grid point hold.
    pub fitted_constant: Option<f64>,
    /// Largest over median ratio.
    pub stability: Option<f64>,
    /// Largest over smallest ratio.
    pub spread: Option<f64>,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub extras: Extras,
}

impl InequalityReport {
    /// One-line summary for terminals.
    pub fn summary(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
        format!(
            "{} {}: C_hat={} stability={} spread={} checks={}/{} {}",
            self.experiment,
            self.kernel,
            fmt(self.fitted_constant),
            fmt(self.stability),
            fmt(self.spread),
            self.checks.iter().filter(|c| c.pass).count(),
            self.checks.len(),
            if self.pass { "PASS" } else { "FAIL" }
        )
    }

    /// CSV with columns `n, t, p_n, lhs, lhs_se, rhs, ratio`.
    pub fn write_points_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "t", "p_n", "lhs", "lhs_se", "rhs", "ratio"])?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.16e}"));
        for p in &self.points {
            w.write_record([
                p.n.to_string(),
                opt(p.t),
                opt(p.p_n),
                format!("{:.16e}", p.lhs),
                opt(p.lhs_se),
                format!("{:.16e}", p.rhs),
                format!("{:.16e}", p.ratio),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Largest, largest/median and largest/smallest ratio.
fn ratio_stats(ratios: &[f64]) -> (Option<f64>, Option<f64>, Option<f64>) {
    if ratios.is_empty() {
        return (None, None, None);
    }
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let med = median(ratios);
    (Some(max), Some(max / med), Some(max / min))
}

/// Everything an experiment needs once the config is resolved.
struct Setup<'a> {
    config: &'a ExperimentConfig,
    kernel: Kernel,
    dist: &'a Distribution,
    seed: u64,
    master: StreamSeed,
    replications: usize,
    p: f64,
    q: f64,
    threshold: Option<f64>,
}

impl Setup<'_> {
    fn params(&self) -> &ExperimentParams {
        &self.config.params
    }

    fn m(&self) -> usize {
        self.kernel.arity()
    }

    fn r(&self) -> f64 {
        self.kernel.space().smoothness()
    }

    fn certify(&self) -> Result<DegeneracyReport> {
        let opts = DegeneracyOptions::new(
            self.params().inner.unwrap_or(DEGEN_INNER),
            self.params().outer.unwrap_or(DEGEN_OUTER),
            self.master.derive_str("degeneracy"),
        );
        check_degeneracy_with(&self.kernel, self.dist, &opts)
    }

    fn require_degenerate(&self) -> Result<DegeneracyReport> {
        let r = self.certify()?;
        if r.verdict != Degeneracy::Degenerate {
            return Err(Error::NotDegenerate(format!(
                "verdict for `{}` is {:?}",
                self.kernel.name(),
                r.verdict
            )));
        }
        Ok(r)
    }

    /// Certified order, reconciled with `params.d`.
    fn require_order(&self, report: &DegeneracyReport) -> Result<usize> {
        let d = report.order.ok_or_else(|| {
            Error::NotDegenerate(format!(
                "order of `{}` could not be certified",
                self.kernel.name()
            ))
        })?;
        if let Some(claim) = self.params().d {
            if claim != d {
                return Err(Error::config(
                    "params.d",
                    format!("configured order {claim} differs from the certified order {d}"),
                ));
            }
        }
        Ok(d)
    }

    fn n_grid(&self) -> Result<Vec<usize>> {
        let mut g = self.params().n_grid.clone();
        if g.is_empty() {
            return Err(Error::config(
                "params.n_grid",
                "must list at least one sample size",
            ));
        }
        g.sort_unstable();
        g.dedup();
        if g[0] < self.m() {
            return Err(Error::config(
                "params.n_grid",
                format!("sample sizes must be at least m = {}", self.m()),
            ));
        }
        Ok(g)
    }

    fn t_grid(&self) -> Result<Vec<f64>> {
        let g = &self.params().t_grid;
        if g.is_empty() || g.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(Error::config("params.t_grid", "needs positive finite thresholds"));
        }
        Ok(g.clone())
    }

    fn moment_budget(&self) -> (usize, usize) {
        (
            self.params().moment_outer.unwrap_or(TAIL_OUTER),
            self.params().moment_inner.unwrap_or(TAIL_INNER),
        )
    }

    fn threshold_or(&self, default: f64) -> f64 {
        self.threshold.unwrap_or(default)
    }

    /// `||U_{m,n}||` for `n = 0..=n_max`, one vector per replication.
    fn simulate_norms(&self, n_max: usize) -> Result<Vec<Vec<f64>>> {
        let seed = self.master.derive_str("samples");
        (0..self.replications as u64)
            .into_par_iter()
            .map(|r| {
                let sample = sample_iid(self.dist, n_max, &seed, r)?;
                let values = running_values(&self.kernel, &sample, n_max)?;
                Ok(values.iter().map(|v| self.kernel.norm(v)).collect())
            })
            .collect()
    }

    fn report(
        &self,
        degeneracy: &DegeneracyReport,
        points: Vec<GridPoint>,
        mut checks: Vec<Check>,
        extras: Extras,
        judge: Judge,
    ) -> InequalityReport {
        let ratios: Vec<f64> = points.iter().map(|p| p.ratio).collect();
        let (fitted, stability, spread) = ratio_stats(&ratios);
        if ratios.iter().any(|r| !r.is_finite()) {
            checks.push(Check::holds("ratios_finite", false));
        }
        match judge {
            Judge::Stability => checks.push(Check::at_most(
                "stability",
                stability.unwrap_or(f64::INFINITY),
                self.threshold_or(DEFAULT_STABILITY_THRESHOLD),
            )),
            Judge::Spread => checks.push(Check::at_most(
                "spread",
                spread.unwrap_or(f64::INFINITY),
                self.threshold_or(DEFAULT_STABILITY_THRESHOLD),
            )),
            Judge::Custom => {}
        }
        let pass = !checks.is_empty() && checks.iter().all(|c| c.pass);
        InequalityReport {
            experiment: self.config.experiment,
            kernel: self.kernel.name().to_string(),
            m: self.m(),
            seed: self.seed,
            replications: self.replications,
            p: self.p,
            q: self.q,
            degeneracy: degeneracy.into(),
            points,
            fitted_constant: fitted,
            stability,
            spread,
            checks,
            pass,
            extras,
        }
    }
}

#[derive(Clone, Copy)]
enum Judge {
    Stability,
    Spread,
    Custom,
}

fn proper_subsets(m: usize) -> Vec<Vec<usize>> {
    (1..(1u64 << m) - 1)
        .map(|mask| (0..m).filter(|j| mask >> j & 1 == 1).collect())
        .collect()
}

fn frequency(values: impl Iterator<Item = bool>, reps: usize) -> (f64, f64) {
    let hits = values.filter(|b| *b).count() as f64;
    let f = hits / reps as f64;
    (f, (f * (1.0 - f) / reps as f64).sqrt())
}

/// Tails feeding the same-kernel deviation and moment bounds.
struct MomentTails {
    /// Tail of `||h(xi)||`.
    full: EmpiricalTail,
    /// `(J, tail of (E[||h||^p | xi_J])^{1/p})` for proper nonempty `J`.
    partial: Vec<(Vec<usize>, EmpiricalTail)>,
    /// `E ||h||^p`.
    moment_p: f64,
}

fn moment_tails(s: &Setup) -> Result<MomentTails> {
    let m = s.m();
    let (outer, inner) = s.moment_budget();
    let seed = s.master.derive_str("moments");
    let all: Vec<usize> = (0..m).collect();
    let full = conditional_moment_tail(&s.kernel, s.dist, &all, s.p, outer, inner, &seed)?.tail;
    let none = conditional_moment_tail(&s.kernel, s.dist, &[], s.p, outer, inner, &seed)?.tail;
    let moment_p = none.values()[0].powf(s.p);
    let partial = proper_subsets(m)
        .into_iter()
        .map(|j| {
            let t = conditional_moment_tail(&s.kernel, s.dist, &j, s.p, outer, inner, &seed)?.tail;
            Ok((j, t))
        })
        .collect::<Result<_>>()?;
    Ok(MomentTails {
        full,
        partial,
        moment_p,
    })
}

/// Same-kernel deviation bound with unit constant.
fn deviation_rhs(tails: &MomentTails, m: usize, n: usize, t: f64, p: f64, q: f64) -> Result<f64> {
    let nf = n as f64;
    let mut rhs = nf.powi(m as i32) * tails.full.tail_integral(t, q)?;
    for (j, tail) in &tails.partial {
        let scale = nf.powf((m - j.len()) as f64 / p);
        rhs += nf.powi(j.len() as i32) * tail.tail_integral(t / scale, q)?;
    }
    rhs += t.powf(-q) * nf.powf(m as f64 * q / p) * tails.moment_p.powf(q / p);
    Ok(rhs)
}

fn running_max_upto(norms: &[f64], m: usize, n: usize) -> f64 {
    norms[m..=n].iter().copied().fold(0.0, f64::max)
}

fn deviation_experiment(s: &Setup) -> Result<InequalityReport> {
    let degeneracy = s.require_degenerate()?;
    let m = s.m();
    let ns = s.n_grid()?;
    let ts = s.t_grid()?;
    let tails = moment_tails(s)?;
    let norms = s.simulate_norms(*ns.last().unwrap())?;
    let mut points = Vec::new();
    for &n in &ns {
        let maxima: Vec<f64> = norms.iter().map(|v| running_max_upto(v, m, n)).collect();
        for &c in &ts {
            let t = c * (n as f64).powf(s.params().t_scale_exponent);
            let (lhs, se) = frequency(maxima.iter().map(|x| *x > t), s.replications);
            let rhs = deviation_rhs(&tails, m, n, t, s.p, s.q)?;
            points.push(GridPoint {
                n,
                t: Some(t),
                p_n: None,
                lhs,
                lhs_se: Some(se),
                rhs,
                ratio: lhs / rhs,
            });
        }
    }
    Ok(s.report(&degeneracy, points, Vec::new(), Extras::None, Judge::Stability))
}

fn order_d_deviation_experiment(s: &Setup) -> Result<InequalityReport> {
    if !s.kernel.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let degeneracy = s.certify()?;
    let d = s.require_order(&degeneracy)?;
    let m = s.m();
    let ns = s.n_grid()?;
    let ts = s.t_grid()?;
    let (outer, inner) = s.moment_budget();
    let hp = level_moment_tail(
        &s.kernel,
        s.dist,
        s.p,
        outer,
        inner,
        &s.master.derive_str("moments"),
    )?
    .tail;
    let norms = s.simulate_norms(*ns.last().unwrap())?;
    let (p, q) = (s.p, s.q);
    let mut points = Vec::new();
    for &n in &ns {
        let nf = n as f64;
        let maxima: Vec<f64> = norms.iter().map(|v| running_max_upto(v, m, n)).collect();
        let growth = nf.powf(m as f64 - d as f64 + d as f64 / p);
        for &c in &ts {
            let t = c * nf.powf(s.params().t_scale_exponent);
            let (lhs, se) = frequency(maxima.iter().map(|x| *x > t * growth), s.replications);
            let mut rhs = 0.0;
            for j in 0..=m {
                let e = (d.max(j) - d) as f64 * (p - 1.0) / p + j as f64 / p;
                rhs += nf.powi(j as i32) * hp.tail_integral(t * nf.powf(e), q)?;
            }
            points.push(GridPoint {
                n,
                t: Some(t),
                p_n: None,
                lhs,
                lhs_se: Some(se),
                rhs,
                ratio: lhs / rhs,
            });
        }
    }
    Ok(s.report(&degeneracy, points, Vec::new(), Extras::None, Judge::Stability))
}

fn moment_experiment(s: &Setup) -> Result<InequalityReport> {
    if s.q < s.p {
        return Err(Error::config("params.q", "the moment inequality needs q >= p"));
    }
    let degeneracy = s.require_degenerate()?;
    let m = s.m();
    let ns = s.n_grid()?;
    let tails = moment_tails(s)?;
    let norms = s.simulate_norms(*ns.last().unwrap())?;
    let (p, q) = (s.p, s.q);
    let same_exponent = (q - p).abs() <= f64::EPSILON * p;
    let mut points = Vec::new();
    for &n in &ns {
        let nf = n as f64;
        let moments: Vec<f64> = norms.iter().map(|v| running_max_upto(v, m, n).powf(q)).collect();
        let (lhs, se) = mean_se(&moments);
        let rhs = if same_exponent {
            nf.powi(m as i32) * tails.moment_p
        } else {
            let mut r = nf.powi(m as i32) * tails.full.mean_power(q);
            for (j, tail) in &tails.partial {
                r += nf.powi(j.len() as i32) * nf.powf((m - j.len()) as f64 * q / p) * tail.mean_power(q);
            }
            r + (nf.powi(m as i32) * tails.moment_p).powf(q / p)
        };
        points.push(GridPoint {
            n,
            t: None,
            p_n: None,
            lhs,
            lhs_se: Some(se),
            rhs,
            ratio: lhs / rhs,
        });
    }
    Ok(s.report(&degeneracy, points, Vec::new(), Extras::None, Judge::Spread))
}

fn lln_experiment(s: &Setup) -> Result<InequalityReport> {
    let r = s.r();
    if !(s.p > 1.0 && s.p < r) {
        return Err(Error::config(
            "params.p",
            format!("must lie in (1, {r}) for this experiment"),
        ));
    }
    let degeneracy = s.require_degenerate()?;
    let m = s.m();
    let ns = s.n_grid()?;
    let n_max = *ns.last().unwrap();
    let (outer, inner) = s.moment_budget();
    let moment_p = conditional_moment_tail(
        &s.kernel,
        s.dist,
        &[],
        s.p,
        outer,
        inner,
        &s.master.derive_str("moments"),
    )?
    .tail
    .values()[0]
        .powf(s.p);
    let norms = s.simulate_norms(n_max)?;
    let weights: Vec<f64> = (0..=n_max)
        .map(|n| {
            if n == 0 {
                0.0
            } else {
                (n as f64).powf(-(m as f64) / s.p)
            }
        })
        .collect();
    let mut points = Vec::new();
    let mut terminal_medians = Vec::new();
    for &n in &ns {
        let proxy: Vec<f64> = norms
            .iter()
            .map(|v| (m..=n).map(|k| weights[k] * v[k]).fold(0.0, f64::max))
            .collect();
        let weak = EmpiricalTail::new(proxy)?.weak_lp_norm(s.p);
        points.push(GridPoint {
            n,
            t: None,
            p_n: None,
            lhs: weak,
            lhs_se: None,
            rhs: moment_p,
            ratio: weak / moment_p,
        });
        let terminal: Vec<f64> = norms.iter().map(|v| weights[n] * v[n]).collect();
        terminal_medians.push((n, median(&terminal)));
    }
    let decreasing = terminal_medians.windows(2).all(|w| w[1].1 < w[0].1);
    let checks = vec![Check::holds("terminal_median_decreasing", decreasing)];
    let rate = rate_diagnostic(s, &norms, n_max, &degeneracy)?;
    let extras = Extras::Lln {
        terminal_medians,
        rate,
    };
    Ok(s.report(&degeneracy, points, checks, extras, Judge::Spread))
}

fn rate_diagnostic(
    s: &Setup,
    norms: &[Vec<f64>],
    n_max: usize,
    degeneracy: &DegeneracyReport,
) -> Result<Option<RateDiagnostic>> {
    let params = s.params();
    let (Some(alpha), Some(gamma), Some(epsilon)) = (params.alpha, params.gamma, params.epsilon) else {
        return Ok(None);
    };
    let m = s.m();
    let d = degeneracy.order.unwrap_or(m);
    let r = s.r();
    let required = (1..=m)
        .map(|j| Ok((j, required_integrability(d, j, gamma, r, alpha)?)))
        .collect::<Result<Vec<_>>>()?;
    let scaled: Vec<f64> = (0..=n_max)
        .map(|n| {
            if n < m {
                0.0
            } else {
                (n as f64).powf(alpha) / binomial_f64(n, m)
            }
        })
        .collect();
    let mut terms = Vec::new();
    let mut partial = 0.0;
    let mut big_n = m.next_power_of_two();
    while big_n <= n_max {
        let (freq, _) = frequency(
            norms
                .iter()
                .map(|v| (big_n..=n_max).any(|n| scaled[n] * v[n] > epsilon)),
            s.replications,
        );
        let term = (big_n as f64).powf(gamma) * freq;
        partial += term;
        terms.push((big_n, term, partial));
        big_n *= 2;
    }
    Ok(Some(RateDiagnostic {
        heuristic: true,
        alpha,
        gamma,
        epsilon,
        terms,
        required_integrability: required,
    }))
}

fn holder_experiment(s: &Setup) -> Result<InequalityReport> {
    if !s.kernel.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    if s.kernel.dim() != 1 {
        return Err(Error::config("space", "Hölder paths need a real-valued kernel"));
    }
    let alpha = s
        .params()
        .alpha
        .ok_or_else(|| Error::config("params.alpha", "required for the holder experiment"))?;
    let hp = HolderParams::new(alpha).map_err(|_| Error::config("params.alpha", "must lie in (0, 1/2)"))?;
    let degeneracy = s.certify()?;
    let d = s.require_order(&degeneracy)?;
    let m = s.m();
    let ns = s.n_grid()?;
    let exponent = m as f64 - d as f64 / 2.0;
    // the tightness statistic runs on the order-d component
    let component = if d == m {
        None
    } else {
        let opts = ProjectionOptions::new(
            s.params().inner.unwrap_or(DEGEN_INNER),
            s.master.derive_str("projection"),
        );
        Some(project_degenerate_level_with(&s.kernel, d, s.dist, &opts)?.as_kernel()?)
    };
    let j_min = s.params().j_min.unwrap_or(2);
    let j_check = s.params().j_check_max.unwrap_or(6);
    let sample_seed = s.master.derive_str("samples");
    let mut quantiles = Vec::new();
    let mut last_paths = Vec::new();
    for &n in &ns {
        let seed = sample_seed.derive(n as u64);
        let (norms, paths): (Vec<f64>, Vec<PartialSumPath>) = (0..s.replications as u64)
            .into_par_iter()
            .map(|r| {
                let sample = sample_iid(s.dist, n, &seed, r)?;
                let path = PartialSumPath::from_ustat(&s.kernel, &sample, n, exponent)?;
                let norm = holder_norm(&path, alpha)?;
                let stat_path = match &component {
                    None => path,
                    Some(k) => PartialSumPath::from_ustat(k, &sample, n, 0.0)?,
                };
                Ok((norm, stat_path))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip();
        quantiles.push(HolderQuantiles {
            n,
            median: quantile(&norms, 0.5),
            q90: quantile(&norms, 0.9),
        });
        last_paths = paths;
    }
    let epsilon = match s.params().epsilon {
        Some(e) => e,
        None => {
            let level = s.params().epsilon_quantile.unwrap_or(0.9);
            quantile(&dyadic_scale(&last_paths, alpha, d, j_min)?, level)
        }
    };
    let exceedance = dyadic_increment_exceedance(
        &last_paths,
        &DyadicSpec {
            alpha,
            epsilon,
            d,
            j_min,
            j_max: None,
        },
    )?;
    let spread_limit = s.threshold_or(DEFAULT_HOLDER_SPREAD);
    let spread = |f: fn(&HolderQuantiles) -> f64| {
        let v: Vec<f64> = quantiles.iter().map(f).collect();
        v.iter().copied().fold(f64::NEG_INFINITY, f64::max) / v.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let window: Vec<f64> = exceedance
        .curve
        .iter()
        .filter(|(j, _)| *j <= j_check)
        .map(|(_, s)| *s)
        .collect();
    let checks = vec![
        Check::at_most("median_spread", spread(|q| q.median), spread_limit),
        Check::at_most("q90_spread", spread(|q| q.q90), spread_limit),
        Check::holds(
            "tail_sum_decreasing",
            window.len() >= 2 && window.windows(2).all(|w| w[1] < w[0]),
        ),
    ];
    let extras = Extras::Holder {
        alpha,
        p_alpha: hp.p_alpha(),
        d,
        quantiles,
        epsilon,
        exceedance,
    };
    Ok(s.report(&degeneracy, Vec::new(), checks, extras, Judge::Custom))
}

fn incomplete_experiment(s: &Setup) -> Result<InequalityReport> {
    if !s.kernel.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let degeneracy = s.certify()?;
    let d = s.require_order(&degeneracy)?;
    let ns = s.n_grid()?;
    let exps = &s.params().p_n_exponents;
    let mut groups: Vec<Vec<(usize, f64)>> = Vec::new();
    if !exps.is_empty() {
        for &a in exps {
            groups.push(ns.iter().map(|&n| (n, (n as f64).powf(-a))).collect());
        }
    } else if let Some(SamplingDesign::Bernoulli { p_n }) = s.config.design {
        groups.push(ns.iter().map(|&n| (n, p_n)).collect());
    } else {
        return Err(Error::config(
            "params.p_n_exponents",
            "give p_n exponents or a bernoulli design",
        ));
    }
    let (outer, inner) = s.moment_budget();
    let all: Vec<usize> = (0..s.m()).collect();
    let moment_q = conditional_moment_tail(
        &s.kernel,
        s.dist,
        &all,
        s.p,
        outer,
        inner,
        &s.master.derive_str("moments"),
    )?
    .tail
    .mean_power(s.q);
    let threshold = s.threshold_or(DEFAULT_STABILITY_THRESHOLD);
    let mut rows = Vec::new();
    let mut points = Vec::new();
    let mut checks = Vec::new();
    for (g, grid) in groups.into_iter().enumerate() {
        let spec = IncompleteMomentSpec {
            grid,
            p: s.p,
            q: s.q,
            d,
            replications: s.replications,
        };
        let group_rows = incomplete_moment_experiment(
            &s.kernel,
            s.dist,
            &spec,
            &s.master.derive_str("incomplete").derive(g as u64),
        )?;
        let ratios: Vec<f64> = group_rows
            .iter()
            .map(|r| r.moment_estimate / (r.bound_shape * moment_q))
            .collect();
        let (_, _, spread) = ratio_stats(&ratios);
        let label = match exps.get(g) {
            Some(a) => format!("spread[p_n=n^-{a}]"),
            None => "spread".to_string(),
        };
        checks.push(Check::at_most(label, spread.unwrap_or(f64::INFINITY), threshold));
        for (row, ratio) in group_rows.iter().zip(ratios) {
            points.push(GridPoint {
                n: row.n,
                t: None,
                p_n: Some(row.p_n),
                lhs: row.moment_estimate,
                lhs_se: Some(row.se),
                rhs: row.bound_shape * moment_q,
                ratio,
            });
        }
        rows.extend(group_rows);
    }
    Ok(s.report(
        &degeneracy,
        points,
        checks,
        Extras::IncompleteMoment { rows },
        Judge::Custom,
    ))
}

/// Overrides applied on top of a config, typically from the command line.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOverrides {
    pub seed: Option<u64>,
    pub replications: Option<usize>,
}

/// The seed a run will use: override, then config, then the default 0.
pub fn effective_seed(config: &ExperimentConfig, overrides: &RunOverrides) -> u64 {
    overrides.seed.or(config.seed).unwrap_or(DEFAULT_SEED)
}

pub fn run_experiment(config: &ExperimentConfig, overrides: &RunOverrides) -> Result<InequalityReport> {
    config.distribution.validate()?;
    let kernel = config.kernel.build(config.space, Some(&config.distribution))?;
    let seed = effective_seed(config, overrides);
    let params = &config.params;
    let replications = overrides
        .replications
        .or(params.replications)
        .unwrap_or_else(|| config.experiment.default_replications());
    if replications < 2 {
        return Err(Error::config("params.replications", "must be at least 2"));
    }
    let range = kernel.space().admissible_p_range();
    let p = params.p.unwrap_or(match config.experiment {
        ExperimentKind::Lln => 0.5 * (1.0 + range.upper),
        _ => range.upper,
    });
    if !range.contains(p) {
        return Err(Error::config(
            "params.p",
            format!("{p} is outside the admissible range (1, {}]", range.upper),
        ));
    }
    let q = params.q.unwrap_or(p);
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::config("params.q", "must be positive"));
    }
    if let Some(t) = params.stability_threshold {
        if !(t >= 1.0) {
            return Err(Error::config("params.stability_threshold", "must be at least 1"));
        }
    }
    let setup = Setup {
        config,
        kernel,
        dist: &config.distribution,
        seed,
        master: StreamSeed::new(seed),
        replications,
        p,
        q,
        threshold: params.stability_threshold,
    };
    match config.experiment {
        ExperimentKind::Deviation => deviation_experiment(&setup),
        ExperimentKind::OrderDDeviation => order_d_deviation_experiment(&setup),
        ExperimentKind::Moment => moment_experiment(&setup),
        ExperimentKind::Lln => lln_experiment(&setup),
        ExperimentKind::Holder => holder_experiment(&setup),
        ExperimentKind::IncompleteMoment => incomplete_experiment(&setup),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(json: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(json).unwrap()
    }

    #[test]
    fn parses_and_rejects() {
        let c = config(
            r#"{"experiment": "order-d-deviation", "kernel": {"name": "sum", "m": 2},
                "distribution": {"family": "uniform", "a": -1, "b": 1},
                "params": {"n_grid": [16], "t_grid": [1.0]}}"#,
        );
        assert_eq!(c.experiment, ExperimentKind::OrderDDeviation);
        let err = ExperimentConfig::from_json(
            r#"{"experiment": "deviation", "distribution": {"family": "rademacher"}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("kernel"), "{err}");
        let err = ExperimentConfig::from_json(
            r#"{"experiment": "bogus", "kernel": {"name": "sum", "m": 2}, "distribution": {"family": "rademacher"}}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
        assert!("order-d-deviation".parse::<ExperimentKind>().is_ok());
        assert!("nope".parse::<ExperimentKind>().is_err());
    }

    #[test]
    fn deviation_beyond_support_has_zero_ratio() {
        let c = config(
            r#"{"experiment": "deviation", "kernel": {"name": "product", "m": 2},
                "distribution": {"family": "rademacher"},
                "params": {"n_grid": [6], "t_grid": [100.0], "replications": 50}}"#,
        );
        let r = run_experiment(&c, &RunOverrides::default()).unwrap();
        assert_eq!(r.points.len(), 1);
        assert_eq!(r.points[0].lhs, 0.0);
        assert_eq!(r.points[0].ratio, 0.0);
        assert!(r.points[0].rhs > 0.0);
    }

    #[test]
    fn non_degenerate_kernel_is_rejected() {
        let c = config(
            r#"{"experiment": "moment", "kernel": {"name": "sum", "m": 2},
                "distribution": {"family": "rademacher"}, "params": {"n_grid": [8]}}"#,
        );
        assert!(matches!(
            run_experiment(&c, &RunOverrides::default()),
            Err(Error::NotDegenerate(_))
        ));
    }

    #[test]
    fn moment_at_n_equal_m() {
        // N = m: the maximum is ||h|| itself, and the q = p bound is E||h||^p
        let c = config(
            r#"{"experiment": "moment", "kernel": {"name": "product", "m": 2},
                "distribution": {"family": "rademacher"},
                "params": {"n_grid": [2], "p": 2, "replications": 20}}"#,
        );
        let r = run_experiment(&c, &RunOverrides::default()).unwrap();
        assert_eq!(r.points[0].lhs, 1.0);
        assert_eq!(r.points[0].rhs, 4.0);
    }

    #[test]
    fn zero_kernel_has_zero_weak_norm() {
        let c = config(
            r#"{"experiment": "lln", "kernel": {"name": "zero", "m": 2},
                "distribution": {"family": "rademacher"},
                "params": {"n_grid": [8, 16], "p": 1.5, "replications": 10}}"#,
        );
        let r = run_experiment(&c, &RunOverrides::default()).unwrap();
        assert!(r.points.iter().all(|p| p.lhs == 0.0));
    }

    #[test]
    fn seed_precedence() {
        let mut c = config(
            r#"{"experiment": "deviation", "kernel": {"name": "product", "m": 2},
                "distribution": {"family": "rademacher"}, "seed": 5}"#,
        );
        assert_eq!(effective_seed(&c, &RunOverrides::default()), 5);
        assert_eq!(
            effective_seed(
                &c,
                &RunOverrides {
                    seed: Some(9),
                    replications: None
                }
            ),
            9
        );
        c.seed = None;
        assert_eq!(effective_seed(&c, &RunOverrides::default()), 0);
    }
}
