//! Breakthrough (first-passage) statistics across the interface and the
//! lattice absorption oracle for hitting probabilities.
//!
//! Passage detection is discrete: a path registers arrival at the first grid
//! time its position reaches or crosses the target. That systematically
//! overestimates passage times by the unobserved excursion beyond the target
//! within a step; the bias is controlled by the dt-refinement checks, never
//! corrected. Paths that do not arrive by the horizon are right-censored and
//! reported as censored mass, never imputed.

use crate::batch::{run_batch, Parallelism};
use crate::error::{Result, SimError};
use crate::model::{sigma_inverse, InterfaceModel, MediumSpec, SkewParam};
use crate::rng::{CounterRng, StreamChannel};
use crate::sampler::skew_step;
use crate::stats::EstimateWithError;
use crate::tridiag::solve_tridiagonal;

/// Shape of a passage experiment: horizon, step, and the number of survival
/// grid points at which the curve is reported.
#[derive(Debug, Clone, Copy)]
pub struct PassageConfig {
    pub horizon: f64,
    pub dt: f64,
    pub n_grid: usize,
}

impl PassageConfig {
    pub fn new(horizon: f64, dt: f64, n_grid: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0 && dt.is_finite() && dt > 0.0 && dt <= horizon) {
            return Err(SimError::Config(format!(
                "need 0 < dt <= horizon, got dt = {dt}, horizon = {horizon}"
            )));
        }
        if n_grid < 2 {
            return Err(SimError::Config("survival grid needs at least two points".into()));
        }
        Ok(PassageConfig {
            horizon,
            dt,
            n_grid,
        })
    }

    fn n_steps(&self) -> u64 {
        (self.horizon / self.dt).ceil() as u64
    }
}

/// One path's outcome: passage time capped at the horizon, and whether it
/// actually arrived.
#[derive(Debug, Clone, Copy)]
pub struct PassageSample {
    pub capped_time: f64,
    pub arrived: bool,
}

/// Empirical survival function of the passage time, with censoring accounting.
#[derive(Debug, Clone)]
pub struct SurvivalCurve {
    pub t_grid: Vec<f64>,
    pub survival: Vec<EstimateWithError>,
    pub start: f64,
    pub target: f64,
    pub n_paths: u64,
    /// Mass with passage time beyond the horizon.
    pub censored_fraction: EstimateWithError,
    /// Mean of `min(T, horizon)`; always defined, unlike the raw mean.
    pub restricted_mean: EstimateWithError,
    /// Raw mean over arrived paths only; reported when censoring is under 1%.
    pub uncensored_mean: Option<EstimateWithError>,
    /// Empirical median passage time when more than half the mass arrived.
    pub median: Option<f64>,
}

impl SurvivalCurve {
    pub fn survival_at(&self, t: f64) -> Option<&EstimateWithError> {
        self.t_grid
            .iter()
            .position(|&g| (g - t).abs() <= 1e-9 * t.abs().max(1.0))
            .map(|i| &self.survival[i])
    }
}

/// Streams one path in interface coordinates until it reaches the target side
/// or the step budget runs out. `x_target` and the direction are precomputed.
fn stream_passage(
    alpha: f64,
    x_start: f64,
    x_target: f64,
    dt: f64,
    n_steps: u64,
    seed: u64,
    path_index: u64,
) -> Option<u64> {
    let upward = x_target > x_start;
    let mut x = x_start;
    for k in 0..n_steps {
        let mut rng = CounterRng::for_step(seed, StreamChannel::Motion, path_index, k);
        x = skew_step(x, dt, alpha, &mut rng);
        let hit = if upward { x >= x_target } else { x <= x_target };
        if hit {
            return Some(k + 1);
        }
    }
    None
}

/// First-passage Monte Carlo for the model's diffusion from `start` to
/// `target`. The motion runs in interface coordinates: `Y` reaches `target`
/// exactly when the driving motion reaches `sigma_inverse(target)`, since the
/// space map is strictly increasing.
pub fn first_passage_times(
    model: &InterfaceModel,
    start: f64,
    target: f64,
    cfg: &PassageConfig,
    n_paths: u64,
    seed: u64,
    parallelism: Parallelism,
) -> Result<SurvivalCurve> {
    if start == target {
        return Err(SimError::Config("start and target coincide".into()));
    }
    if n_paths < 2 {
        return Err(SimError::Config("survival estimates need at least two paths".into()));
    }
    let medium = model.medium();
    let d_max = medium.d_minus().max(medium.d_plus());
    let expected_steps = (start - target) * (start - target) / d_max / cfg.dt;
    if expected_steps < 100.0 {
        return Err(SimError::Config(format!(
            "dt = {} too coarse for |start - target| = {}: ~{:.0} steps expected to passage, need >= 100",
            cfg.dt,
            (start - target).abs(),
            expected_steps
        )));
    }
    let alpha = model.alpha().value();
    let x_start = sigma_inverse(medium, start);
    let x_target = sigma_inverse(medium, target);
    let n_steps = cfg.n_steps();
    let dt = cfg.dt;
    let samples: Vec<PassageSample> = run_batch(n_paths, parallelism, |i| {
        match stream_passage(alpha, x_start, x_target, dt, n_steps, seed, i) {
            Some(k) => PassageSample {
                capped_time: (k as f64 * dt).min(cfg.horizon),
                arrived: true,
            },
            None => PassageSample {
                capped_time: cfg.horizon,
                arrived: false,
            },
        }
    });
    Ok(build_curve(&samples, start, target, cfg))
}

fn build_curve(
    samples: &[PassageSample],
    start: f64,
    target: f64,
    cfg: &PassageConfig,
) -> SurvivalCurve {
    let n = samples.len() as u64;
    let t_grid: Vec<f64> = (1..=cfg.n_grid)
        .map(|j| cfg.horizon * j as f64 / cfg.n_grid as f64)
        .collect();
    let survival = t_grid
        .iter()
        .map(|&t| {
            let alive = samples
                .iter()
                .filter(|s| !s.arrived || s.capped_time > t)
                .count() as u64;
            EstimateWithError::from_binomial(alive, n)
        })
        .collect();
    let censored = samples.iter().filter(|s| !s.arrived).count() as u64;
    let capped: Vec<f64> = samples.iter().map(|s| s.capped_time).collect();
    let censored_fraction = EstimateWithError::from_binomial(censored, n);
    let uncensored_mean = if censored_fraction.value < 0.01 {
        let arrived: Vec<f64> = samples
            .iter()
            .filter(|s| s.arrived)
            .map(|s| s.capped_time)
            .collect();
        Some(EstimateWithError::from_samples(&arrived))
    } else {
        None
    };
    let median = if censored_fraction.value < 0.5 {
        let mut sorted = capped.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
        let m = sorted[sorted.len() / 2];
        (m < cfg.horizon).then_some(m)
    } else {
        None
    };
    SurvivalCurve {
        t_grid,
        survival,
        start,
        target,
        n_paths: n,
        censored_fraction,
        restricted_mean: EstimateWithError::from_samples(&capped),
        uncensored_mean,
        median,
    }
}

/// Both breakthrough directions over one medium, with the printed bound and
/// the two-sided envelope tracked pointwise on the survival grid.
#[derive(Debug, Clone)]
pub struct BreakthroughReport {
    /// Start `-y`, target `+y`.
    pub minus_to_plus: SurvivalCurve,
    /// Start `+y`, target `-y`.
    pub plus_to_minus: SurvivalCurve,
    /// `sqrt(D-) / sqrt(D+)`.
    pub bound_factor: f64,
    /// Grid points where `S_minus_to_plus > factor * S_plus_to_minus + 3 SE`,
    /// the bound as printed.
    pub stated_bound_violations: usize,
    /// Grid points outside the two-sided envelope
    /// `factor * S_plus_to_minus - 3 SE <= S_minus_to_plus <= S_plus_to_minus + 3 SE`.
    pub envelope_violations: usize,
    /// Restricted-mean difference `plus_to_minus - minus_to_plus`.
    pub mean_gap: EstimateWithError,
    pub lambda: f64,
    pub is_physical_lambda: bool,
}

/// Runs both directions `-y -> +y` and `+y -> -y` from symmetric offsets.
/// The printed inequality is only meaningful for the flux-continuity weight;
/// the runner accepts any `lambda` so the reversal cases stay demonstrable.
pub fn breakthrough_experiment(
    medium: MediumSpec,
    lambda: f64,
    y: f64,
    cfg: &PassageConfig,
    n_paths: u64,
    seed: u64,
    parallelism: Parallelism,
) -> Result<BreakthroughReport> {
    if !(y.is_finite() && y > 0.0) {
        return Err(SimError::ParameterDomain {
            name: "y",
            value: y,
            constraint: "finite and > 0",
        });
    }
    let model = InterfaceModel::from_lambda(medium, lambda)?;
    let minus_to_plus =
        first_passage_times(&model, -y, y, cfg, n_paths, seed, parallelism)?;
    let plus_to_minus = first_passage_times(
        &model,
        y,
        -y,
        cfg,
        n_paths,
        seed.wrapping_add(0x9e37),
        parallelism,
    )?;
    let factor = medium.sqrt_d_minus() / medium.sqrt_d_plus();
    let mut stated = 0usize;
    let mut envelope = 0usize;
    for (sf, sc) in minus_to_plus.survival.iter().zip(&plus_to_minus.survival) {
        let se_scaled = (sf.std_error * sf.std_error
            + factor * factor * sc.std_error * sc.std_error)
            .sqrt();
        if sf.value > factor * sc.value + 3.0 * se_scaled {
            stated += 1;
        }
        let se_pair = (sf.std_error * sf.std_error + sc.std_error * sc.std_error).sqrt();
        let above = sf.value > sc.value + 3.0 * se_pair;
        let below = sf.value < factor * sc.value - 3.0 * se_scaled;
        if above || below {
            envelope += 1;
        }
    }
    let gap = plus_to_minus.restricted_mean.value - minus_to_plus.restricted_mean.value;
    let gap_se = (plus_to_minus.restricted_mean.std_error.powi(2)
        + minus_to_plus.restricted_mean.std_error.powi(2))
    .sqrt();
    let physical = (lambda - crate::model::physical_lambda(medium)).abs() <= 1e-12;
    Ok(BreakthroughReport {
        minus_to_plus,
        plus_to_minus,
        bound_factor: factor,
        stated_bound_violations: stated,
        envelope_violations: envelope,
        mean_gap: EstimateWithError {
            value: gap,
            std_error: gap_se,
            n_replicates: n_paths,
            window: None,
            under_resolved: false,
        },
        lambda,
        is_physical_lambda: physical,
    })
}

/// Closed form and lattice solve for `P_0(hit +a before -b)`.
#[derive(Debug, Clone, Copy)]
pub struct HittingOracle {
    pub closed_form: f64,
    pub lattice_solve: f64,
}

/// `P_0(hit +a before -b) = alpha b / (alpha b + (1 - alpha) a)` for the
/// motion with skew parameter `alpha`, checked against the absorbed lattice
/// walk on spacing `epsilon`. The walk's harmonic function is piecewise
/// linear, so the two agree to rounding for lattice-aligned `a`, `b`.
pub fn hitting_probability_oracle(
    alpha: SkewParam,
    a: f64,
    b: f64,
    epsilon: f64,
) -> Result<HittingOracle> {
    let na = lattice_count("a", a, epsilon)?;
    let nb = lattice_count("b", b, epsilon)?;
    let aa = alpha.value();
    let closed_form = aa * b / (aa * b + (1.0 - aa) * a);

    // interior sites -nb+1 ..= na-1; absorbing h(-nb) = 0, h(na) = 1
    let n = na + nb - 1;
    let mut lower = vec![0.0; n];
    let mut diag = vec![1.0; n];
    let mut upper = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        let m = i as i64 - (nb as i64 - 1);
        let (up, down) = if m == 0 { (aa, 1.0 - aa) } else { (0.5, 0.5) };
        if i + 1 < n {
            upper[i] = -up;
        } else {
            rhs[i] += up; // couples to h(na) = 1
        }
        if i > 0 {
            lower[i] = -down;
        }
    }
    solve_tridiagonal(&lower, &mut diag, &upper, &mut rhs);
    let lattice_solve = rhs[nb - 1]; // site 0
    Ok(HittingOracle {
        closed_form,
        lattice_solve,
    })
}

fn lattice_count(name: &'static str, value: f64, epsilon: f64) -> Result<usize> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(SimError::ParameterDomain {
            name: "epsilon",
            value: epsilon,
            constraint: "finite and > 0",
        });
    }
    if !(value.is_finite() && value > 0.0) {
        return Err(SimError::ParameterDomain {
            name,
            value,
            constraint: "finite and > 0",
        });
    }
    let m = (value / epsilon).round();
    if m < 1.0 || (m * epsilon - value).abs() > 1e-9 * value {
        return Err(SimError::Alignment(format!(
            "{name} = {value} is not a positive multiple of epsilon = {epsilon}"
        )));
    }
    Ok(m as usize)
}

/// Monte Carlo estimate of `P_0(hit +a before -b)` by exact-step simulation
/// until either side registers. Discrete detection only delays registration
/// (the path keeps running until a sample actually lands beyond a threshold),
/// so the side estimate carries only a boundary-layer bias of order sqrt(dt).
pub fn simulate_hitting_probability(
    alpha: SkewParam,
    a: f64,
    b: f64,
    dt: f64,
    n_paths: u64,
    seed: u64,
    parallelism: Parallelism,
) -> Result<EstimateWithError> {
    for (name, v) in [("a", a), ("b", b), ("dt", dt)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(SimError::ParameterDomain {
                name,
                value: v,
                constraint: "finite and > 0",
            });
        }
    }
    if n_paths == 0 {
        return Err(SimError::Config("need at least one path".into()));
    }
    // exit is almost sure; the cap is dozens of exit-time scales deep
    let cap_steps = ((200.0 * (a + b) * (a + b)) / dt).ceil() as u64;
    let aval = alpha.value();
    let hits: Vec<bool> = run_batch(n_paths, parallelism, |i| {
        let mut x = 0.0;
        for k in 0..cap_steps {
            let mut rng = CounterRng::for_step(seed, StreamChannel::Motion, i, k);
            x = skew_step(x, dt, aval, &mut rng);
            if x >= a {
                return true;
            }
            if x <= -b {
                return false;
            }
        }
        unreachable!("no exit from ({}, {}) within {} steps", -b, a, cap_steps)
    });
    let plus = hits.iter().filter(|&&h| h).count() as u64;
    Ok(EstimateWithError::from_binomial(plus, n_paths))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample(t: f64, arrived: bool) -> PassageSample {
        PassageSample {
            capped_time: t,
            arrived,
        }
    }

    #[test]
    fn curve_accounting_by_hand() {
        let cfg = PassageConfig::new(4.0, 0.5, 4).unwrap();
        let samples = vec![
            sample(0.5, true),
            sample(1.5, true),
            sample(2.5, true),
            sample(4.0, false),
        ];
        let c = build_curve(&samples, -1.0, 1.0, &cfg);
        assert_eq!(c.t_grid, vec![1.0, 2.0, 3.0, 4.0]);
        // arrival exactly at a grid time counts as arrived by it
        let s: Vec<f64> = c.survival.iter().map(|e| e.value).collect();
        assert_eq!(s, vec![0.75, 0.5, 0.25, 0.25]);
        assert_relative_eq!(c.censored_fraction.value, 0.25);
        assert_relative_eq!(c.restricted_mean.value, (0.5 + 1.5 + 2.5 + 4.0) / 4.0);
        assert!(c.uncensored_mean.is_none());
        assert_eq!(c.median, Some(2.5));
        for w in s.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn median_undefined_when_mostly_censored() {
        let cfg = PassageConfig::new(2.0, 0.5, 2).unwrap();
        let samples = vec![sample(0.5, true), sample(2.0, false), sample(2.0, false)];
        let c = build_curve(&samples, 0.0, 1.0, &cfg);
        assert_eq!(c.median, None);
        assert!(c.uncensored_mean.is_none());
    }

    #[test]
    fn passage_rejects_coarse_step() {
        let medium = MediumSpec::new(1.0, 4.0).unwrap();
        let model = InterfaceModel::physical(medium);
        let cfg = PassageConfig::new(20.0, 0.05, 10).unwrap();
        let err = first_passage_times(
            &model,
            -1.0,
            1.0,
            &cfg,
            10,
            0,
            Parallelism::Sequential,
        );
        assert!(err.is_err());
        assert!(first_passage_times(
            &model,
            1.0,
            1.0,
            &PassageConfig::new(1.0, 1e-4, 4).unwrap(),
            10,
            0,
            Parallelism::Sequential
        )
        .is_err());
    }

    #[test]
    fn hitting_oracle_examples() {
        let half = SkewParam::new(0.5).unwrap();
        let o = hitting_probability_oracle(half, 1.0, 2.0, 0.25).unwrap();
        assert_relative_eq!(o.closed_form, 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(o.lattice_solve, o.closed_form, epsilon = 1e-10);

        let skew = SkewParam::new(2.0 / 3.0).unwrap();
        let o2 = hitting_probability_oracle(skew, 1.0, 2.0, 0.5).unwrap();
        assert_relative_eq!(o2.closed_form, 0.8, max_relative = 1e-15);
        assert_relative_eq!(o2.lattice_solve, 0.8, epsilon = 1e-10);

        // a = b reduces to alpha
        let o3 = hitting_probability_oracle(skew, 1.5, 1.5, 0.1).unwrap();
        assert_relative_eq!(o3.closed_form, 2.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(o3.lattice_solve, 2.0 / 3.0, epsilon = 1e-10);
    }

    #[test]
    fn hitting_oracle_alignment_errors() {
        let a = SkewParam::new(0.4).unwrap();
        assert!(hitting_probability_oracle(a, 1.05, 2.0, 0.5).is_err());
        assert!(hitting_probability_oracle(a, 1.0, 2.0, 0.0).is_err());
        assert!(hitting_probability_oracle(a, -1.0, 2.0, 0.5).is_err());
    }

    #[test]
    fn simulated_hitting_matches_oracle() {
        let alpha = SkewParam::new(2.0 / 3.0).unwrap();
        let est = simulate_hitting_probability(
            alpha,
            1.0,
            2.0,
            1e-3,
            4_000,
            21,
            Parallelism::Sequential,
        )
        .unwrap();
        assert!(
            (est.value - 0.8).abs() < 3.5 * est.std_error + 0.01,
            "estimate {} +- {}",
            est.value,
            est.std_error
        );
    }

    #[test]
    fn breakthrough_symmetric_medium_balances() {
        let medium = MediumSpec::uniform(1.0).unwrap();
        let cfg = PassageConfig::new(6.0, 2e-3, 12).unwrap();
        let r = breakthrough_experiment(
            medium,
            0.5,
            1.0,
            &cfg,
            1_500,
            5,
            Parallelism::Sequential,
        )
        .unwrap();
        assert_relative_eq!(r.bound_factor, 1.0);
        assert!(r.is_physical_lambda);
        assert_eq!(r.envelope_violations, 0);
        assert_eq!(r.stated_bound_violations, 0);
        assert!(
            r.mean_gap.value.abs() <= 4.0 * r.mean_gap.std_error,
            "gap {:?}",
            r.mean_gap
        );
    }
}
