//! Estimates with standard errors and the significance tests the experiment
//! verdicts are built from. Consistency checks use 3 standard errors,
//! separation claims 5; those multipliers are fixed across the crate.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Result, SimError};

/// Multiplier for "estimate agrees with target" checks.
pub const CONSISTENCY_SE: f64 = 3.0;
/// Multiplier for "estimates are separated / sign is resolved" claims.
pub const SEPARATION_SE: f64 = 5.0;

/// Point estimate with a standard error and replication count.
/// `std_error` is 0 when fewer than two replicates back the estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateWithError {
    pub value: f64,
    pub std_error: f64,
    pub n_replicates: u64,
    /// Window width for local-time style estimates.
    pub window: Option<f64>,
    /// Set when the window undercuts the path's spatial resolution.
    pub under_resolved: bool,
}

impl EstimateWithError {
    pub fn exact(value: f64) -> Self {
        EstimateWithError {
            value,
            std_error: 0.0,
            n_replicates: 1,
            window: None,
            under_resolved: false,
        }
    }

    /// Sample mean with standard error `s / sqrt(n)` (ddof 1).
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return EstimateWithError {
                value: f64::NAN,
                std_error: 0.0,
                n_replicates: 0,
                window: None,
                under_resolved: false,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std_error = if n >= 2 {
            let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
            (ss / (n as f64 - 1.0)).sqrt() / (n as f64).sqrt()
        } else {
            0.0
        };
        EstimateWithError {
            value: mean,
            std_error,
            n_replicates: n as u64,
            window: None,
            under_resolved: false,
        }
    }

    /// Binomial proportion with `sqrt(p(1-p)/n)`.
    pub fn from_binomial(successes: u64, n: u64) -> Self {
        assert!(n > 0, "empty binomial sample");
        let p = successes as f64 / n as f64;
        EstimateWithError {
            value: p,
            std_error: (p * (1.0 - p) / n as f64).sqrt(),
            n_replicates: n,
            window: None,
            under_resolved: false,
        }
    }

    pub fn with_window(mut self, window: f64) -> Self {
        self.window = Some(window);
        self
    }

    pub fn flag_under_resolved(mut self, flag: bool) -> Self {
        self.under_resolved = flag;
        self
    }

    /// |value - target| measured in standard errors (infinite when se = 0 and
    /// the values differ).
    pub fn gap_in_se(&self, target: f64) -> f64 {
        let gap = (self.value - target).abs();
        if gap == 0.0 {
            0.0
        } else if self.std_error == 0.0 {
            f64::INFINITY
        } else {
            gap / self.std_error
        }
    }

    pub fn consistent_with(&self, target: f64) -> bool {
        self.gap_in_se(target) <= CONSISTENCY_SE
    }

    pub fn separated_from(&self, target: f64) -> bool {
        self.gap_in_se(target) > SEPARATION_SE
    }
}

fn moments(xs: &[f64], ys: &[f64]) -> (f64, f64, f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "need at least two replicate pairs");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    let d = n - 1.0;
    (mx, my, sxx / d, syy / d, sxy / d)
}

/// Ratio of means `mean(num) / mean(den)` with a delta-method standard error
/// accounting for the pairwise covariance.
pub fn ratio_of_means(num: &[f64], den: &[f64]) -> EstimateWithError {
    let (mx, my, sxx, syy, sxy) = moments(num, den);
    let n = num.len() as f64;
    let r = mx / my;
    let var = (sxx - 2.0 * r * sxy + r * r * syy) / (my * my) / n;
    EstimateWithError {
        value: r,
        std_error: var.max(0.0).sqrt(),
        n_replicates: num.len() as u64,
        window: None,
        under_resolved: false,
    }
}

/// Symmetric relative gap `2 (mean(a) - mean(b)) / (mean(a) + mean(b))` with a
/// delta-method standard error.
pub fn symmetric_gap(a: &[f64], b: &[f64]) -> EstimateWithError {
    let (mx, my, sxx, syy, sxy) = moments(a, b);
    let n = a.len() as f64;
    let s = mx + my;
    let g = 2.0 * (mx - my) / s;
    let gx = 4.0 * my / (s * s);
    let gy = -4.0 * mx / (s * s);
    let var = (gx * gx * sxx + 2.0 * gx * gy * sxy + gy * gy * syy) / n;
    EstimateWithError {
        value: g,
        std_error: var.max(0.0).sqrt(),
        n_replicates: a.len() as u64,
        window: None,
        under_resolved: false,
    }
}

/// Survival function of the Kolmogorov distribution,
/// `Q(x) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 x^2)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let term = (-2.0 * (j as f64) * (j as f64) * x * x).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy)]
pub struct KsResult {
    pub statistic: f64,
    pub n: usize,
    pub m: usize,
    pub p_value: f64,
}

/// Two-sample Kolmogorov-Smirnov test (asymptotic p-value; intended for the
/// sample sizes used here, 1e4 and up).
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(SimError::Config("KS needs at least two points per sample".into()));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.partial_cmp(q).expect("finite samples"));
    ys.sort_by(|p, q| p.partial_cmp(q).expect("finite samples"));
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let t = xs[i].min(ys[j]);
        while i < n && xs[i] <= t {
            i += 1;
        }
        while j < m && ys[j] <= t {
            j += 1;
        }
        let gap = (i as f64 / n as f64 - j as f64 / m as f64).abs();
        d = d.max(gap);
    }
    let n_eff = (n as f64 * m as f64) / (n as f64 + m as f64);
    let p_value = kolmogorov_sf(n_eff.sqrt() * d);
    Ok(KsResult {
        statistic: d,
        n,
        m,
        p_value,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Chi-square goodness of fit of observed bin counts against bin
/// probabilities. Callers choose bins with expected counts >= 5.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> Result<ChiSquareResult> {
    if observed.len() != probs.len() || observed.len() < 2 {
        return Err(SimError::Config("need matching bin counts and probabilities".into()));
    }
    let total_p: f64 = probs.iter().sum();
    if (total_p - 1.0).abs() > 1e-6 {
        return Err(SimError::Config(format!(
            "bin probabilities sum to {total_p}, expected 1"
        )));
    }
    let n: u64 = observed.iter().sum();
    let mut stat = 0.0;
    for (&o, &p) in observed.iter().zip(probs) {
        let e = n as f64 * p;
        if e <= 0.0 {
            return Err(SimError::Config("bin with zero expected count".into()));
        }
        let diff = o as f64 - e;
        stat += diff * diff / e;
    }
    let dof = observed.len() - 1;
    let dist = ChiSquared::new(dof as f64).expect("positive dof");
    Ok(ChiSquareResult {
        statistic: stat,
        dof,
        p_value: dist.sf(stat),
    })
}
