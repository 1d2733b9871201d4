//! Occupation time in sets, the sign-probability identity, and the
//! residence-time threshold in the interface weight.
//!
//! For the motion with skew parameter `alpha` the mean time spent on the plus
//! side by horizon `t` is exactly `t alpha`, for every `t`; the plus side is
//! favored over the minus side exactly when `lambda` exceeds
//! `sqrt(D+) / (sqrt(D+) + sqrt(D-))`.

use crate::batch::{run_batch, Parallelism};
use crate::error::{Result, SimError};
use crate::local_time::Window;
use crate::model::{residence_critical_lambda, InterfaceModel, MediumSpec, SkewParam};
use crate::path::{Path, Scheme, TimeGrid};
use crate::sampler::{simulate_natural_diffusion, simulate_skew_path};
use crate::stats::{EstimateWithError, CONSISTENCY_SE, SEPARATION_SE};

/// Finite union of disjoint intervals.
#[derive(Debug, Clone)]
pub struct Region {
    windows: Vec<Window>,
}

impl Region {
    /// Validates pairwise disjointness (after sorting by lower endpoint).
    pub fn new(mut windows: Vec<Window>) -> Result<Self> {
        windows.retain(|w| !w.is_empty());
        windows.sort_by(|a, b| a.lo().partial_cmp(&b.lo()).expect("finite endpoints"));
        for pair in windows.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let overlapping = a.hi() > b.lo()
                || (a.hi() == b.lo() && a.includes_hi() && b.includes_lo());
            if overlapping {
                return Err(SimError::Config(format!(
                    "intervals ({}, {}) and ({}, {}) overlap",
                    a.lo(),
                    a.hi(),
                    b.lo(),
                    b.hi()
                )));
            }
        }
        Ok(Region { windows })
    }

    pub fn empty() -> Self {
        Region { windows: Vec::new() }
    }

    pub fn all() -> Self {
        Region {
            windows: vec![Window::all()],
        }
    }

    /// The strictly positive half line `(0, inf)`; a position exactly at the
    /// interface is not in it.
    pub fn positive_half() -> Self {
        Region {
            windows: vec![Window::open(0.0, f64::INFINITY)],
        }
    }

    /// `(-inf, 0]`, the complement of [`Region::positive_half`].
    pub fn nonpositive_half() -> Self {
        Region {
            windows: vec![Window::new(f64::NEG_INFINITY, 0.0, false, true)],
        }
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        self.windows.iter().any(|w| w.contains(x))
    }

    pub fn intervals(&self) -> &[Window] {
        &self.windows
    }
}

/// Time the path spends in the region: left-endpoint Riemann sum of
/// `1_G(X_s) ds`. An empty region gives 0.
pub fn natural_occupation(path: &Path, region: &Region) -> f64 {
    let xs = path.positions();
    let grid = path.grid();
    let mut acc = 0.0;
    for k in 0..grid.n_steps() {
        if region.contains(xs[k]) {
            acc += grid.dt(k);
        }
    }
    acc
}

/// Exact means `(t alpha, t (1 - alpha))` of the plus/minus occupation times.
pub fn mean_occupation_closed_form(model: &InterfaceModel, t: f64) -> (f64, f64) {
    assert!(t >= 0.0 && t.is_finite(), "horizon must be finite and >= 0");
    let a = model.alpha().value();
    (t * a, t * (1.0 - a))
}

/// Monte Carlo estimate of `P(B_t > 0)` for the motion with the given skew
/// parameter; equals `alpha` for every `t`. An endpoint exactly at the
/// interface counts as not positive. With the exact-step scheme the whole
/// horizon may be taken in one step (`dt = t`), since the one-step law is the
/// exact marginal.
pub fn sign_probability(
    alpha: SkewParam,
    t: f64,
    dt: f64,
    n_paths: u64,
    seed: u64,
    scheme: Scheme,
    parallelism: Parallelism,
) -> Result<EstimateWithError> {
    if n_paths == 0 {
        return Err(SimError::Config("need at least one path".into()));
    }
    let grid = uniform_grid(t, dt)?;
    let positives: Vec<bool> = run_batch(n_paths, parallelism, |i| {
        let path = simulate_skew_path(alpha, scheme, &grid, 0.0, seed, i)
            .expect("validated grid and interface start");
        path.endpoint() > 0.0
    });
    let successes = positives.iter().filter(|&&p| p).count() as u64;
    Ok(EstimateWithError::from_binomial(successes, n_paths))
}

/// Plus/minus occupation estimates for one model.
#[derive(Debug, Clone, Copy)]
pub struct OccupationReport {
    pub t_horizon: f64,
    pub gamma_plus: EstimateWithError,
    pub gamma_minus: EstimateWithError,
    pub alpha_used: SkewParam,
}

impl OccupationReport {
    /// Exact means the estimates should match.
    pub fn expected(&self) -> (f64, f64) {
        let a = self.alpha_used.value();
        (self.t_horizon * a, self.t_horizon * (1.0 - a))
    }
}

/// Monte Carlo plus/minus occupation for the model's diffusion from the
/// interface. Per path the minus time is `t` minus the plus time, so
/// complementarity holds exactly by construction.
pub fn batch_occupation(
    model: &InterfaceModel,
    t: f64,
    dt: f64,
    n_paths: u64,
    seed: u64,
    scheme: Scheme,
    parallelism: Parallelism,
) -> Result<OccupationReport> {
    if n_paths < 2 {
        return Err(SimError::Config("batch estimates need at least two paths".into()));
    }
    let grid = uniform_grid(t, dt)?;
    let plus_region = Region::positive_half();
    let plus: Vec<f64> = run_batch(n_paths, parallelism, |i| {
        let path = simulate_natural_diffusion(model, scheme, &grid, 0.0, seed, i)
            .expect("validated grid and interface start");
        natural_occupation(&path, &plus_region)
    });
    let minus: Vec<f64> = plus.iter().map(|p| t - p).collect();
    Ok(OccupationReport {
        t_horizon: t,
        gamma_plus: EstimateWithError::from_samples(&plus),
        gamma_minus: EstimateWithError::from_samples(&minus),
        alpha_used: model.alpha(),
    })
}

/// Which side the mean residence favors, as resolved by the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidenceVerdict {
    /// Plus-side mean larger by more than the separation threshold.
    PlusFavored,
    /// Minus-side mean larger by more than the separation threshold.
    MinusFavored,
    /// Gap within the consistency band around zero.
    Balanced,
    /// Neither separated nor consistent with zero.
    Unresolved,
}

/// One row of the residence threshold scan.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdRow {
    pub lambda: f64,
    pub alpha: SkewParam,
    pub gamma_plus: EstimateWithError,
    pub gamma_minus: EstimateWithError,
    /// `mean(plus) - mean(minus)` with its standard error.
    pub mean_gap: EstimateWithError,
    /// Exact gap `t (2 alpha - 1)`.
    pub analytic_gap: f64,
    pub verdict: ResidenceVerdict,
}

/// Scans the interface weight across `lambda_grid` and reports which side the
/// occupation mean favors. The crossover sits at
/// `lambda_c = sqrt(D+) / (sqrt(D+) + sqrt(D-))`: above it the plus side is
/// favored, below it the minus side, with equality exactly at the threshold.
pub fn residence_threshold_test(
    medium: MediumSpec,
    lambda_grid: &[f64],
    t: f64,
    dt: f64,
    n_paths: u64,
    seed: u64,
    parallelism: Parallelism,
) -> Result<Vec<ThresholdRow>> {
    let mut rows = Vec::with_capacity(lambda_grid.len());
    for (j, &lambda) in lambda_grid.iter().enumerate() {
        let model = InterfaceModel::from_lambda(medium, lambda)?;
        // per-lambda seed: distinct streams, deterministic in (seed, position)
        let report = batch_occupation(
            &model,
            t,
            dt,
            n_paths,
            seed.wrapping_add(j as u64),
            Scheme::ExactStep,
            parallelism,
        )?;
        let gap_value = report.gamma_plus.value - report.gamma_minus.value;
        // gap_i = 2 plus_i - t, so se(gap) = 2 se(plus)
        let gap = EstimateWithError {
            value: gap_value,
            std_error: 2.0 * report.gamma_plus.std_error,
            n_replicates: report.gamma_plus.n_replicates,
            window: None,
            under_resolved: false,
        };
        let verdict = if gap.value.abs() > SEPARATION_SE * gap.std_error {
            if gap.value > 0.0 {
                ResidenceVerdict::PlusFavored
            } else {
                ResidenceVerdict::MinusFavored
            }
        } else if gap.value.abs() <= CONSISTENCY_SE * gap.std_error {
            ResidenceVerdict::Balanced
        } else {
            ResidenceVerdict::Unresolved
        };
        rows.push(ThresholdRow {
            lambda,
            alpha: model.alpha(),
            gamma_plus: report.gamma_plus,
            gamma_minus: report.gamma_minus,
            mean_gap: gap,
            analytic_gap: t * (2.0 * model.alpha().value() - 1.0),
            verdict,
        });
    }
    Ok(rows)
}

/// The analytic crossover weight for the medium; re-exported here next to the
/// scan that verifies it.
pub fn critical_lambda(medium: MediumSpec) -> f64 {
    residence_critical_lambda(medium)
}

fn uniform_grid(t: f64, dt: f64) -> Result<TimeGrid> {
    if !(t.is_finite() && t > 0.0 && dt.is_finite() && dt > 0.0) {
        return Err(SimError::Grid(format!("bad horizon/step pair t = {t}, dt = {dt}")));
    }
    let n = (t / dt).round();
    if n < 1.0 || ((n * dt - t) / t).abs() > 1e-9 {
        return Err(SimError::Grid(format!("horizon {t} is not a multiple of dt {dt}")));
    }
    TimeGrid::uniform(t, n as usize)
}
