//! Compensated sums and small statistics helpers.

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Coordinatewise compensated sum of points.
#[derive(Debug, Clone)]
pub struct PointSum {
    parts: Vec<CompensatedSum>,
}

impl PointSum {
    pub fn new(dim: usize) -> Self {
        Self {
            parts: vec![CompensatedSum::new(); dim],
        }
    }

    #[inline]
    pub fn add(&mut self, p: &[f64]) {
        for (a, x) in self.parts.iter_mut().zip(p) {
            a.add(*x);
        }
    }

    #[inline]
    pub fn add_scaled(&mut self, c: f64, p: &[f64]) {
        for (a, x) in self.parts.iter_mut().zip(p) {
            a.add(c * x);
        }
    }

    pub fn value(&self) -> Vec<f64> {
        self.parts.iter().map(|a| a.value()).collect()
    }

    pub fn write_value(&self, out: &mut [f64]) {
        for (o, a) in out.iter_mut().zip(&self.parts) {
            *o = a.value();
        }
    }
}

/// Compensated sum of a slice.
pub fn sum(xs: &[f64]) -> f64 {
    let mut s = CompensatedSum::new();
    for &x in xs {
        s.add(x);
    }
    s.value()
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    sum(xs) / xs.len() as f64
}

/// Mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let m = mean(xs);
    if n == 1 {
        return (m, 0.0);
    }
    let mut ss = CompensatedSum::new();
    for &x in xs {
        ss.add((x - m) * (x - m));
    }
    let var = ss.value() / (n - 1) as f64;
    (m, (var / n as f64).sqrt())
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(xs: &[f64], level: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, level)
}

pub fn quantile_sorted(v: &[f64], level: f64) -> f64 {
    let pos = level.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensation_recovers_small_terms() {
        let mut s = CompensatedSum::new();
        s.add(1e16);
        s.add(1.0);
        s.add(-1e16);
        assert_eq!(s.value(), 1.0);
    }

    #[test]
    fn quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(quantile(&[0.0, 10.0], 0.9), 9.0);
        let (m, se) = mean_se(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-15);
    }
}
