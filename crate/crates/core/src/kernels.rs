//! Sample laws and kernel functions.

use crate::combinatorics::IncreasingTuple;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::rng::StreamSeed;
use crate::spaces::BanachSpace;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// A point of the codomain `R^d`.
pub type Point = Vec<f64>;

/// Law of the i.i.d. real-valued sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", try_from = "RawDistribution")]
pub enum Distribution {
    Rademacher,
    Uniform {
        a: f64,
        b: f64,
    },
    Gaussian {
        mean: f64,
        sd: f64,
    },
    FiniteDiscrete {
        values: Vec<f64>,
        probabilities: Vec<f64>,
    },
}

#[derive(Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
enum RawDistribution {
    Rademacher,
    Uniform {
        a: f64,
        b: f64,
    },
    Gaussian {
        mean: f64,
        sd: f64,
    },
    FiniteDiscrete {
        values: Vec<f64>,
        probabilities: Vec<f64>,
    },
}

impl TryFrom<RawDistribution> for Distribution {
    type Error = Error;
    fn try_from(r: RawDistribution) -> Result<Self> {
        let d = match r {
            RawDistribution::Rademacher => Distribution::Rademacher,
            RawDistribution::Uniform { a, b } => Distribution::Uniform { a, b },
            RawDistribution::Gaussian { mean, sd } => Distribution::Gaussian { mean, sd },
            RawDistribution::FiniteDiscrete {
                values,
                probabilities,
            } => Distribution::FiniteDiscrete {
                values,
                probabilities,
            },
        };
        d.validate()?;
        Ok(d)
    }
}

impl Distribution {
    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        let d = Distribution::Uniform { a, b };
        d.validate()?;
        Ok(d)
    }

    pub fn gaussian(mean: f64, sd: f64) -> Result<Self> {
        let d = Distribution::Gaussian { mean, sd };
        d.validate()?;
        Ok(d)
    }

    pub fn finite_discrete(values: Vec<f64>, probabilities: Vec<f64>) -> Result<Self> {
        let d = Distribution::FiniteDiscrete {
            values,
            probabilities,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Distribution::Rademacher => Ok(()),
            Distribution::Uniform { a, b } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return Err(Error::param(
                        "uniform",
                        format!("need finite a < b, got ({a}, {b})"),
                    ));
                }
                Ok(())
            }
            Distribution::Gaussian { mean, sd } => {
                if !(mean.is_finite() && sd.is_finite() && *sd > 0.0) {
                    return Err(Error::param(
                        "gaussian",
                        format!("need finite mean and sd > 0, got ({mean}, {sd})"),
                    ));
                }
                Ok(())
            }
            Distribution::FiniteDiscrete {
                values,
                probabilities,
            } => {
                if values.is_empty() || values.len() != probabilities.len() {
                    return Err(Error::param(
                        "finite_discrete",
                        "values and probabilities must be non-empty and of equal length",
                    ));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::param("finite_discrete", "values must be finite"));
                }
                if probabilities.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
                    return Err(Error::param(
                        "finite_discrete",
                        "probabilities must be nonnegative",
                    ));
                }
                let total: f64 = probabilities.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::param(
                        "finite_discrete",
                        format!("probabilities sum to {total}, not 1"),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Distribution::Rademacher => 0.0,
            Distribution::Uniform { a, b } => 0.5 * (a + b),
            Distribution::Gaussian { mean, .. } => *mean,
            Distribution::FiniteDiscrete {
                values,
                probabilities,
            } => values.iter().zip(probabilities).map(|(v, p)| v * p).sum(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Distribution::Rademacher => 1.0,
            Distribution::Uniform { a, b } => (b - a) * (b - a) / 12.0,
            Distribution::Gaussian { sd, .. } => sd * sd,
            Distribution::FiniteDiscrete {
                values,
                probabilities,
            } => {
                let mu = self.mean();
                values
                    .iter()
                    .zip(probabilities)
                    .map(|(v, p)| p * (v - mu) * (v - mu))
                    .sum()
            }
        }
    }

    /// Atoms and their masses, for laws with finite support.
    pub fn support(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            Distribution::Rademacher => Some(vec![(-1.0, 0.5), (1.0, 0.5)]),
            Distribution::FiniteDiscrete {
                values,
                probabilities,
            } => Some(
                values
                    .iter()
                    .copied()
                    .zip(probabilities.iter().copied())
                    .filter(|(_, p)| *p > 0.0)
                    .collect(),
            ),
            _ => None,
        }
    }

    #[inline]
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Distribution::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Distribution::Uniform { a, b } => a + (b - a) * rng.random::<f64>(),
            Distribution::Gaussian { mean, sd } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + sd * z
            }
            Distribution::FiniteDiscrete {
                values,
                probabilities,
            } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probabilities) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                // rounding left u above the last partial sum
                *values
                    .iter()
                    .zip(probabilities)
                    .rev()
                    .find(|(_, p)| **p > 0.0)
                    .map(|(v, _)| v)
                    .unwrap_or(&values[values.len() - 1])
            }
        }
    }

    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for o in out {
            *o = self.sample_one(rng);
        }
    }
}

/// `n` i.i.d. draws from `dist` on stream `stream` of `seed`.
pub fn sample_iid(dist: &Distribution, n: usize, seed: &StreamSeed, stream: u64) -> Result<Vec<f64>> {
    dist.validate()?;
    let mut rng = seed.rng(stream);
    let mut out = vec![0.0; n];
    dist.fill(&mut rng, &mut out);
    Ok(out)
}

/// The kernels with hand-derivable Hoeffding decompositions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinKernel {
    /// `prod_j x_j`
    Product,
    /// `sum_j x_j`
    Sum,
    /// `prod_j (x_j - mu)`
    CenteredProduct { mu: f64 },
    /// `(x - y)^2 / 2`
    CovarianceStyle,
    /// `sign(y - x)`
    Sign,
    /// identically zero
    Zero,
}

impl BuiltinKernel {
    fn name(&self) -> &'static str {
        match self {
            BuiltinKernel::Product => "product",
            BuiltinKernel::Sum => "sum",
            BuiltinKernel::CenteredProduct { .. } => "centered_product",
            BuiltinKernel::CovarianceStyle => "covariance",
            BuiltinKernel::Sign => "sign",
            BuiltinKernel::Zero => "zero",
        }
    }

    #[inline]
    fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            BuiltinKernel::Product => x.iter().product(),
            BuiltinKernel::Sum => x.iter().sum(),
            BuiltinKernel::CenteredProduct { mu } => x.iter().map(|v| v - mu).product(),
            BuiltinKernel::CovarianceStyle => 0.5 * (x[0] - x[1]) * (x[0] - x[1]),
            BuiltinKernel::Sign => {
                let d = x[1] - x[0];
                if d > 0.0 {
                    1.0
                } else if d < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            BuiltinKernel::Zero => 0.0,
        }
    }
}

type CustomFn = dyn Fn(&[f64], &[usize], &mut [f64]) + Send + Sync;

#[derive(Clone)]
enum Body {
    Builtin(BuiltinKernel),
    Expr(Arc<Vec<Expr>>),
    Custom(Arc<CustomFn>),
}

/// An `m`-ary kernel `h: R^m -> B`, possibly depending on the index tuple.
#[derive(Clone)]
pub struct Kernel {
    name: String,
    arity: usize,
    space: BanachSpace,
    body: Body,
    symmetric: bool,
    weighted: bool,
    scale: f64,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("name", &self.name)
            .field("arity", &self.arity)
            .field("space", &self.space)
            .field("symmetric", &self.symmetric)
            .field("weighted", &self.weighted)
            .field("scale", &self.scale)
            .finish()
    }
}

impl Kernel {
    pub fn builtin(kind: BuiltinKernel, arity: usize) -> Result<Self> {
        if arity == 0 {
            return Err(Error::param("m", "kernel arity must be at least 1"));
        }
        if matches!(kind, BuiltinKernel::CovarianceStyle | BuiltinKernel::Sign) && arity != 2 {
            return Err(Error::param("m", format!("`{}` kernel has arity 2", kind.name())));
        }
        Ok(Self {
            name: kind.name().to_string(),
            arity,
            space: BanachSpace::real(),
            body: Body::Builtin(kind),
            symmetric: !matches!(kind, BuiltinKernel::Sign),
            weighted: false,
            scale: 1.0,
        })
    }

    /// Real-valued kernel from expression text.
    pub fn from_expr(source: &str, arity: usize, symmetric: bool) -> Result<Self> {
        Self::from_exprs(&[source], arity, BanachSpace::real(), symmetric)
    }

    /// `R^d`-valued kernel, one expression per coordinate.
    pub fn from_exprs<S: AsRef<str>>(
        sources: &[S],
        arity: usize,
        space: BanachSpace,
        symmetric: bool,
    ) -> Result<Self> {
        if arity == 0 {
            return Err(Error::param("m", "kernel arity must be at least 1"));
        }
        if sources.len() != space.dimension() {
            return Err(Error::DimensionMismatch {
                expected: space.dimension(),
                got: sources.len(),
            });
        }
        let exprs = sources
            .iter()
            .map(|s| Expr::parse(s.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        for e in &exprs {
            if e.arity_used() > arity || e.index_arity_used() > arity {
                return Err(Error::param(
                    "expr",
                    format!("`{}` references a variable beyond x{arity}/i{arity}", e.source()),
                ));
            }
        }
        let weighted = exprs.iter().any(|e| e.uses_indices());
        let name = sources.iter().map(|s| s.as_ref()).collect::<Vec<_>>().join("; ");
        Ok(Self {
            name,
            arity,
            space,
            body: Body::Expr(Arc::new(exprs)),
            symmetric,
            weighted,
            scale: 1.0,
        })
    }

    /// Kernel backed by a closure `(values, index, out)`.
    pub fn custom<F>(
        name: impl Into<String>,
        arity: usize,
        space: BanachSpace,
        symmetric: bool,
        weighted: bool,
        f: F,
    ) -> Self
    where
        F: Fn(&[f64], &[usize], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            arity,
            space,
            body: Body::Custom(Arc::new(f)),
            symmetric,
            weighted,
            scale: 1.0,
        }
    }

    /// `c * h`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut k = self.clone();
        k.scale *= c;
        k
    }

    /// `a * h1 + b * h2` for kernels sharing arity and codomain.
    pub fn linear_combination(a: f64, h1: &Kernel, b: f64, h2: &Kernel) -> Result<Self> {
        if h1.arity != h2.arity {
            return Err(Error::ArityMismatch {
                expected: h1.arity,
                got: h2.arity,
            });
        }
        if h1.dim() != h2.dim() {
            return Err(Error::DimensionMismatch {
                expected: h1.dim(),
                got: h2.dim(),
            });
        }
        let (k1, k2) = (h1.clone(), h2.clone());
        let dim = h1.dim();
        Ok(Kernel::custom(
            format!("{a}*({}) + {b}*({})", h1.name, h2.name),
            h1.arity,
            h1.space,
            h1.symmetric && h2.symmetric,
            h1.weighted || h2.weighted,
            move |x, idx, out| {
                let mut tmp = vec![0.0; dim];
                k1.eval_into(x, idx, out);
                k2.eval_into(x, idx, &mut tmp);
                for (o, t) in out.iter_mut().zip(&tmp) {
                    *o = a * *o + b * t;
                }
            },
        ))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn space(&self) -> &BanachSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dimension()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn is_weighted(&self) -> bool {
        self.weighted
    }

    pub fn builtin_kind(&self) -> Option<BuiltinKernel> {
        match self.body {
            Body::Builtin(b) => Some(b),
            _ => None,
        }
    }

    /// Replaces the codomain norm; the dimension must agree.
    pub fn with_space(mut self, space: BanachSpace) -> Result<Self> {
        if space.dimension() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: space.dimension(),
            });
        }
        self.space = space;
        Ok(self)
    }

    /// Evaluates without argument checks. `x.len() == arity`, `out.len() == dim`,
    /// and for weighted kernels `index.len() == arity`.
    #[inline]
    pub fn eval_into(&self, x: &[f64], index: &[usize], out: &mut [f64]) {
        match &self.body {
            Body::Builtin(b) => out[0] = b.eval(x),
            Body::Expr(exprs) => {
                for (o, e) in out.iter_mut().zip(exprs.iter()) {
                    *o = e.eval(x, index);
                }
            }
            Body::Custom(f) => f(x, index, out),
        }
        if self.scale != 1.0 {
            for o in out.iter_mut() {
                *o *= self.scale;
            }
        }
    }

    /// Checked evaluation.
    pub fn evaluate(&self, values: &[f64], index: Option<&IncreasingTuple>) -> Result<Point> {
        if values.len() != self.arity {
            return Err(Error::ArityMismatch {
                expected: self.arity,
                got: values.len(),
            });
        }
        let idx: &[usize] = match index {
            Some(t) => {
                if t.order() != self.arity {
                    return Err(Error::ArityMismatch {
                        expected: self.arity,
                        got: t.order(),
                    });
                }
                t.indices()
            }
            None if self.weighted => return Err(Error::MissingIndex),
            None => &[],
        };
        let mut out = vec![0.0; self.dim()];
        self.eval_into(values, idx, &mut out);
        Ok(out)
    }

    #[inline]
    pub fn norm(&self, point: &[f64]) -> f64 {
        self.space.norm_unchecked(point)
    }

    /// Tests the symmetry claim on `trials` random argument vectors, each
    /// compared against a random permutation of itself. Weighted kernels get
    /// the identity index so only the argument order varies.
    pub fn check_symmetry(&self, dist: &Distribution, trials: usize, seed: &StreamSeed) -> bool {
        let mut rng = seed.derive_str("symmetry").rng(0);
        let m = self.arity;
        let idx: Vec<usize> = (0..m).collect();
        let mut x = vec![0.0; m];
        let mut y = vec![0.0; m];
        let mut a = vec![0.0; self.dim()];
        let mut b = vec![0.0; self.dim()];
        for _ in 0..trials {
            dist.fill(&mut rng, &mut x);
            let mut perm: Vec<usize> = (0..m).collect();
            for i in (1..m).rev() {
                let j = rng.random_range(0..=i);
                perm.swap(i, j);
            }
            for (k, &p) in perm.iter().enumerate() {
                y[k] = x[p];
            }
            self.eval_into(&x, &idx, &mut a);
            self.eval_into(&y, &idx, &mut b);
            for (u, v) in a.iter().zip(&b) {
                if (u - v).abs() > 1e-12 * u.abs().max(v.abs()).max(1.0) {
                    return false;
                }
            }
        }
        true
    }
}

/// Zoo lookup by name.
pub fn builtin_kernel(name: &str, m: usize) -> Result<Kernel> {
    builtin_kernel_with(name, m, None)
}

/// Zoo lookup; `mu` is the centring constant of `centered_product` (default 0).
pub fn builtin_kernel_with(name: &str, m: usize, mu: Option<f64>) -> Result<Kernel> {
    let kind = match name {
        "product" => BuiltinKernel::Product,
        "sum" => BuiltinKernel::Sum,
        "centered_product" | "centered-product" => BuiltinKernel::CenteredProduct {
            mu: mu.unwrap_or(0.0),
        },
        "covariance" | "covariance_style" | "covariance-style" => BuiltinKernel::CovarianceStyle,
        "sign" => BuiltinKernel::Sign,
        "zero" => BuiltinKernel::Zero,
        other => return Err(Error::UnknownKernel(other.to_string())),
    };
    Kernel::builtin(kind, m)
}

/// Expression text for one or several coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExprSpec {
    One(String),
    Many(Vec<String>),
}

/// Kernel description as it appears in JSON configs:
/// `{"name": "product", "m": 2}` or `{"expr": "x1*x2", "m": 2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr: Option<ExprSpec>,
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symmetric: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

impl KernelSpec {
    pub fn named(name: &str, m: usize) -> Self {
        Self {
            name: Some(name.to_string()),
            expr: None,
            m,
            mu: None,
            symmetric: None,
            scale: None,
        }
    }

    pub fn expression(expr: &str, m: usize, symmetric: bool) -> Self {
        Self {
            name: None,
            expr: Some(ExprSpec::One(expr.to_string())),
            m,
            mu: None,
            symmetric: Some(symmetric),
            scale: None,
        }
    }

    /// Builds the kernel. `centered_product` without `mu` centres at the
    /// mean of `dist` when one is given.
    pub fn build(&self, space: Option<BanachSpace>, dist: Option<&Distribution>) -> Result<Kernel> {
        let mut k = match (&self.name, &self.expr) {
            (Some(name), None) => {
                let mu = self.mu.or_else(|| dist.map(|d| d.mean()));
                let k = builtin_kernel_with(name, self.m, mu)?;
                if let Some(claim) = self.symmetric {
                    if claim != k.symmetric {
                        return Err(Error::config(
                            "kernel.symmetric",
                            format!("`{name}` is {}symmetric", if k.symmetric { "" } else { "not " }),
                        ));
                    }
                }
                match space {
                    Some(sp) => k.with_space(sp)?,
                    None => k,
                }
            }
            (None, Some(spec)) => {
                let sources: Vec<String> = match spec {
                    ExprSpec::One(s) => vec![s.clone()],
                    ExprSpec::Many(v) => v.clone(),
                };
                let sp = match space {
                    Some(sp) => sp,
                    None => BanachSpace::new(sources.len(), 2.0)?,
                };
                Kernel::from_exprs(&sources, self.m, sp, self.symmetric.unwrap_or(false))?
            }
            (None, None) => {
                return Err(Error::config("kernel", "needs either `name` or `expr`"));
            }
            (Some(_), Some(_)) => {
                return Err(Error::config("kernel", "give only one of `name` and `expr`"));
            }
        };
        if let Some(c) = self.scale {
            k = k.scaled(c);
        }
        Ok(k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::mean;

    #[test]
    fn builtin_evaluations() {
        let prod = builtin_kernel("product", 2).unwrap();
        assert_eq!(prod.evaluate(&[3.0, -2.0], None).unwrap(), vec![-6.0]);
        let sum = builtin_kernel("sum", 2).unwrap();
        assert_eq!(sum.evaluate(&[1.0, 2.0], None).unwrap(), vec![3.0]);
        let cov = builtin_kernel("covariance", 2).unwrap();
        assert_eq!(cov.evaluate(&[3.0, 1.0], None).unwrap(), vec![2.0]);
        let sign = builtin_kernel("sign", 2).unwrap();
        assert_eq!(sign.evaluate(&[3.0, 1.0], None).unwrap(), vec![-1.0]);
        assert!(!sign.is_symmetric());
        assert!(matches!(builtin_kernel("nope", 2), Err(Error::UnknownKernel(_))));
        assert!(builtin_kernel("sign", 3).is_err());
    }

    #[test]
    fn weighted_expression_kernel() {
        let k = Kernel::from_expr("x1*x2/i2", 2, false).unwrap();
        assert!(k.is_weighted());
        let idx = IncreasingTuple::new(vec![0, 4]).unwrap();
        let v = k.evaluate(&[2.0, 3.0], Some(&idx)).unwrap();
        assert_eq!(v, vec![6.0 / 5.0]);
        assert!(matches!(k.evaluate(&[2.0, 3.0], None), Err(Error::MissingIndex)));
        assert!(matches!(
            k.evaluate(&[2.0], Some(&idx)),
            Err(Error::ArityMismatch { .. })
        ));
    }

    #[test]
    fn expression_arity_is_checked() {
        assert!(Kernel::from_expr("x1*x3", 2, false).is_err());
    }

    #[test]
    fn point_mass_and_determinism() {
        let d = Distribution::finite_discrete(vec![5.0], vec![1.0]).unwrap();
        let seed = StreamSeed::new(1);
        assert_eq!(sample_iid(&d, 3, &seed, 0).unwrap(), vec![5.0, 5.0, 5.0]);
        let g = Distribution::gaussian(0.0, 1.0).unwrap();
        assert_eq!(
            sample_iid(&g, 50, &seed, 9).unwrap(),
            sample_iid(&g, 50, &seed, 9).unwrap()
        );
        assert_ne!(
            sample_iid(&g, 50, &seed, 9).unwrap(),
            sample_iid(&g, 50, &seed, 10).unwrap()
        );
    }

    #[test]
    fn rademacher_mean_is_near_zero() {
        let x = sample_iid(&Distribution::Rademacher, 100_000, &StreamSeed::new(3), 0).unwrap();
        // 3 / sqrt(n) is about 0.0095
        assert!(mean(&x).abs() < 0.02);
        assert!(x.iter().all(|v| *v == 1.0 || *v == -1.0));
    }

    #[test]
    fn invalid_distributions() {
        assert!(Distribution::uniform(1.0, 1.0).is_err());
        assert!(Distribution::gaussian(0.0, 0.0).is_err());
        assert!(Distribution::finite_discrete(vec![1.0, 2.0], vec![0.5, 0.6]).is_err());
        assert!(Distribution::finite_discrete(vec![], vec![]).is_err());
        let bad = r#"{"family": "finite_discrete", "values": [1], "probabilities": [0.9]}"#;
        assert!(serde_json::from_str::<Distribution>(bad).is_err());
        let ok = r#"{"family": "uniform", "a": -1, "b": 1}"#;
        assert_eq!(
            serde_json::from_str::<Distribution>(ok).unwrap(),
            Distribution::Uniform { a: -1.0, b: 1.0 }
        );
    }

    #[test]
    fn moments_of_laws() {
        let d = Distribution::finite_discrete(vec![0.0, 3.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(d.mean(), 1.5);
        assert_eq!(d.variance(), 2.25);
        assert_eq!(Distribution::uniform(-1.0, 1.0).unwrap().variance(), 1.0 / 3.0);
    }

    #[test]
    fn symmetry_flags_are_honest() {
        let seed = StreamSeed::new(11);
        let u = Distribution::uniform(-1.0, 1.0).unwrap();
        for name in ["product", "sum", "centered_product", "covariance", "zero"] {
            for m in [2usize, 3] {
                if name == "covariance" && m == 3 {
                    continue;
                }
                let k = builtin_kernel(name, m).unwrap();
                assert!(k.is_symmetric());
                assert!(k.check_symmetry(&u, 100, &seed), "{name} m={m}");
            }
        }
        let sign = builtin_kernel("sign", 2).unwrap();
        assert!(!sign.check_symmetry(&u, 100, &seed));
        let lying = Kernel::from_expr("x1 - x2", 2, true).unwrap();
        assert!(!lying.check_symmetry(&u, 100, &seed));
    }

    #[test]
    fn specs_build() {
        let spec: KernelSpec = serde_json::from_str(r#"{"expr": "x1*x2", "m": 2}"#).unwrap();
        let k = spec.build(None, None).unwrap();
        assert_eq!(k.evaluate(&[2.0, 4.0], None).unwrap(), vec![8.0]);
        let spec: KernelSpec = serde_json::from_str(r#"{"expr": ["x1", "x2"], "m": 2}"#).unwrap();
        let k = spec.build(None, None).unwrap();
        assert_eq!(k.dim(), 2);
        let d = Distribution::finite_discrete(vec![0.0, 2.0], vec![0.5, 0.5]).unwrap();
        let k = KernelSpec::named("centered_product", 2)
            .build(None, Some(&d))
            .unwrap();
        assert_eq!(k.evaluate(&[2.0, 0.0], None).unwrap(), vec![-1.0]);
        let empty: KernelSpec = serde_json::from_str(r#"{"m": 2}"#).unwrap();
        assert!(empty.build(None, None).is_err());
        let scaled = KernelSpec {
            scale: Some(3.0),
            ..KernelSpec::named("product", 2)
        };
        assert_eq!(
            scaled
                .build(None, None)
                .unwrap()
                .evaluate(&[1.0, 2.0], None)
                .unwrap(),
            vec![6.0]
        );
    }
}
