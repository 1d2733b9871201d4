//! Local time through shrinking-window occupation estimators.
//!
//! Two weightings of the same window occupation:
//!
//! - mathematical: weight `D(X_s) dt` (quadratic variation), units of length;
//! - natural: weight `dt` (elapsed time), units of time per length.
//!
//! One-sided windows at level `a` are `[a, a + eps)` and `(a - eps, a]`, with
//! a position exactly at `a` assigned to the minus side only, matching the
//! `sgn(0) = -1` convention used everywhere in the crate. The window width
//! `eps` is always explicit in the API and is recorded on every estimate.

use crate::error::{Result, SimError};
use crate::model::{InterfaceModel, MediumSpec};
use crate::path::{Path, Scheme, TimeGrid};
use crate::sampler::simulate_natural_diffusion;
use crate::stats::{ratio_of_means, symmetric_gap, EstimateWithError};

/// Interval with explicit endpoint membership.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    lo: f64,
    hi: f64,
    include_lo: bool,
    include_hi: bool,
}

impl Window {
    pub fn new(lo: f64, hi: f64, include_lo: bool, include_hi: bool) -> Self {
        Window {
            lo,
            hi,
            include_lo,
            include_hi,
        }
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Window::new(lo, hi, false, false)
    }

    pub fn all() -> Self {
        Window::new(f64::NEG_INFINITY, f64::INFINITY, false, false)
    }

    /// Plus-side window at `a`: `[a, a + eps)` minus the point `a` itself,
    /// which belongs to the minus side.
    pub fn plus_of(a: f64, eps: f64) -> Self {
        Window::open(a, a + eps)
    }

    /// Minus-side window at `a`: `(a - eps, a]`.
    pub fn minus_of(a: f64, eps: f64) -> Self {
        Window::new(a - eps, a, false, true)
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        let above = if self.include_lo { x >= self.lo } else { x > self.lo };
        let below = if self.include_hi { x <= self.hi } else { x < self.hi };
        above && below
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !(self.include_lo && self.include_hi))
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo).max(0.0)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn includes_lo(&self) -> bool {
        self.include_lo
    }

    pub fn includes_hi(&self) -> bool {
        self.include_hi
    }
}

/// Weighting of the occupation integrand.
#[derive(Debug, Clone, Copy)]
pub enum OccupationWeight {
    /// `dt`: plain elapsed time.
    Time,
    /// `D(X_s) dt`: quadratic-variation clock of the medium.
    QuadraticVariation(MediumSpec),
}

impl OccupationWeight {
    #[inline]
    fn at(&self, x: f64) -> f64 {
        match self {
            OccupationWeight::Time => 1.0,
            OccupationWeight::QuadraticVariation(m) => m.diffusivity_at(x),
        }
    }
}

/// Left-endpoint Riemann sum of `1_window(X_s)` under the chosen weight.
/// An empty window gives 0.
pub fn occupation_measure(path: &Path, window: Window, weight: OccupationWeight) -> f64 {
    if window.is_empty() {
        return 0.0;
    }
    let xs = path.positions();
    let grid = path.grid();
    let mut acc = 0.0;
    for k in 0..grid.n_steps() {
        let x = xs[k];
        if window.contains(x) {
            acc += weight.at(x) * grid.dt(k);
        }
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalTimeKind {
    Mathematical,
    Natural,
}

/// One-sided local time estimates sharing a window width.
#[derive(Debug, Clone, Copy)]
pub struct LocalTimePair {
    pub plus: EstimateWithError,
    pub minus: EstimateWithError,
    pub kind: LocalTimeKind,
}

impl LocalTimePair {
    /// `(plus + minus) / 2`, the two-sided local time.
    pub fn combined_value(&self) -> f64 {
        0.5 * (self.plus.value + self.minus.value)
    }

    pub fn ratio_value(&self) -> f64 {
        self.plus.value / self.minus.value
    }

    pub fn window(&self) -> Option<f64> {
        self.plus.window
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(SimError::ParameterDomain {
            name: "window_eps",
            value: eps,
            constraint: "finite and > 0",
        });
    }
    Ok(())
}

fn max_dt(grid: &TimeGrid) -> f64 {
    (0..grid.n_steps()).map(|k| grid.dt(k)).fold(0.0, f64::max)
}

fn one_sided(path: &Path, a: f64, eps: f64, weight: OccupationWeight) -> (f64, f64) {
    let plus = occupation_measure(path, Window::plus_of(a, eps), weight) / eps;
    let minus = occupation_measure(path, Window::minus_of(a, eps), weight) / eps;
    (plus, minus)
}

fn single_path_pair(
    path: &Path,
    a: f64,
    eps: f64,
    weight: OccupationWeight,
    resolution: f64,
    kind: LocalTimeKind,
) -> LocalTimePair {
    let (p, m) = one_sided(path, a, eps, weight);
    let flag = eps < resolution;
    let wrap = |v: f64| {
        EstimateWithError::exact(v)
            .with_window(eps)
            .flag_under_resolved(flag)
    };
    LocalTimePair {
        plus: wrap(p),
        minus: wrap(m),
        kind,
    }
}

/// Quadratic-variation-weighted window estimate of the one-sided local times
/// of a single path at level `a`. Single-path standard errors are 0; batch
/// estimators carry the across-path errors.
pub fn mathematical_local_time(
    path: &Path,
    a: f64,
    eps: f64,
    medium: MediumSpec,
) -> Result<LocalTimePair> {
    check_eps(eps)?;
    let resolution = (medium.d_minus().max(medium.d_plus()) * max_dt(path.grid())).sqrt();
    Ok(single_path_pair(
        path,
        a,
        eps,
        OccupationWeight::QuadraticVariation(medium),
        resolution,
        LocalTimeKind::Mathematical,
    ))
}

/// Time-weighted window estimate of the one-sided natural local times of a
/// single path at level `a`. The resolution flag uses the unit-diffusivity
/// yardstick `sqrt(dt)` since no medium is supplied.
pub fn natural_local_time(path: &Path, a: f64, eps: f64) -> Result<LocalTimePair> {
    check_eps(eps)?;
    let resolution = max_dt(path.grid()).sqrt();
    Ok(single_path_pair(
        path,
        a,
        eps,
        OccupationWeight::Time,
        resolution,
        LocalTimeKind::Natural,
    ))
}

/// Across-path local time summary: one-sided means, their combined value, the
/// plus/minus ratio, and the symmetric gap `2(plus - minus)/(plus + minus)`.
/// Ratio and gap standard errors account for the per-path covariance.
#[derive(Debug, Clone, Copy)]
pub struct LocalTimeBatch {
    pub pair: LocalTimePair,
    pub combined: EstimateWithError,
    pub ratio: EstimateWithError,
    pub gap: EstimateWithError,
}

fn grid_for(t: f64, dt: f64) -> Result<TimeGrid> {
    if !(dt.is_finite() && dt > 0.0 && t.is_finite() && t > 0.0) {
        return Err(SimError::Grid(format!("bad horizon/step pair t = {t}, dt = {dt}")));
    }
    let n = (t / dt).round();
    if n < 1.0 || ((n * dt - t) / t).abs() > 1e-9 {
        return Err(SimError::Grid(format!("horizon {t} is not a multiple of dt {dt}")));
    }
    TimeGrid::uniform(t, n as usize)
}

/// Batch local-time estimate at level `a` for paths of the model's diffusion
/// started at the interface, `n_paths` independent paths on a uniform grid.
pub fn batch_local_time(
    kind: LocalTimeKind,
    model: &InterfaceModel,
    a: f64,
    t: f64,
    dt: f64,
    eps: f64,
    n_paths: u64,
    seed: u64,
    parallelism: crate::batch::Parallelism,
) -> Result<LocalTimeBatch> {
    check_eps(eps)?;
    if n_paths < 2 {
        return Err(SimError::Config("batch estimates need at least two paths".into()));
    }
    let grid = grid_for(t, dt)?;
    let medium = model.medium();
    let weight = match kind {
        LocalTimeKind::Mathematical => OccupationWeight::QuadraticVariation(medium),
        LocalTimeKind::Natural => OccupationWeight::Time,
    };
    let samples = crate::batch::run_batch(n_paths, parallelism, |i| {
        let path = simulate_natural_diffusion(model, Scheme::ExactStep, &grid, 0.0, seed, i)
            .expect("validated grid and start");
        one_sided(&path, a, eps, weight)
    });
    let plus_v: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let minus_v: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let combined_v: Vec<f64> = samples.iter().map(|s| 0.5 * (s.0 + s.1)).collect();
    let flag = eps < (medium.d_minus().max(medium.d_plus()) * dt).sqrt();
    let dress = |e: EstimateWithError| e.with_window(eps).flag_under_resolved(flag);
    Ok(LocalTimeBatch {
        pair: LocalTimePair {
            plus: dress(EstimateWithError::from_samples(&plus_v)),
            minus: dress(EstimateWithError::from_samples(&minus_v)),
            kind,
        },
        combined: dress(EstimateWithError::from_samples(&combined_v)),
        ratio: dress(ratio_of_means(&plus_v, &minus_v)),
        gap: dress(symmetric_gap(&plus_v, &minus_v)),
    })
}

/// Relative plus/minus defect of the natural local time at the interface,
/// `2 (l+ - l-) / (l+ + l-)`. Zero (within error) exactly for the
/// flux-continuity interface `lambda = D+ / (D+ + D-)`.
pub fn local_time_continuity_gap(
    model: &InterfaceModel,
    t: f64,
    dt: f64,
    eps: f64,
    n_paths: u64,
    seed: u64,
    parallelism: crate::batch::Parallelism,
) -> Result<EstimateWithError> {
    batch_local_time(
        LocalTimeKind::Natural,
        model,
        0.0,
        t,
        dt,
        eps,
        n_paths,
        seed,
        parallelism,
    )
    .map(|b| b.gap)
}

/// Piecewise-constant function: `values[i]` on `(breakpoints[i-1], breakpoints[i]]`,
/// first value below, last value above. A point exactly at a breakpoint takes
/// the left piece, consistent with the minus-side window convention.
#[derive(Debug, Clone)]
pub struct StepFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return Err(SimError::Config(format!(
                "{} values for {} breakpoints, need one more value than breakpoints",
                values.len(),
                breakpoints.len()
            )));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(SimError::Config("non-finite breakpoint".into()));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SimError::Config("breakpoints must be strictly increasing".into()));
        }
        Ok(StepFunction {
            breakpoints,
            values,
        })
    }

    pub fn constant(c: f64) -> Self {
        StepFunction {
            breakpoints: Vec::new(),
            values: vec![c],
        }
    }

    /// `1` strictly above `threshold`, `0` at and below it.
    pub fn indicator_above(threshold: f64) -> Self {
        StepFunction {
            breakpoints: vec![threshold],
            values: vec![0.0, 1.0],
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let idx = self.breakpoints.partition_point(|&b| b < x);
        self.values[idx]
    }
}

/// Both sides of the occupation-time identity evaluated on one path:
/// the direct weighted occupation `sum g(X) D(X) dt` and the level-space sum
/// `sum g(bin center) * (quadratic-variation mass of bin)` over origin-aligned
/// bins `(k b, (k+1) b]` of width `bin_width`. The two agree up to the
/// variation of `g` within bins.
pub fn occupation_localtime_consistency(
    path: &Path,
    g: &StepFunction,
    medium: MediumSpec,
    bin_width: f64,
) -> Result<(f64, f64)> {
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(SimError::ParameterDomain {
            name: "bin_width",
            value: bin_width,
            constraint: "finite and > 0",
        });
    }
    let xs = path.positions();
    let grid = path.grid();
    let mut lhs = 0.0;
    let mut bins: std::collections::HashMap<i64, f64> = std::collections::HashMap::new();
    for k in 0..grid.n_steps() {
        let x = xs[k];
        let w = medium.diffusivity_at(x) * grid.dt(k);
        lhs += g.eval(x) * w;
        // bin (k b, (k+1) b]: exact edge goes left
        let idx = (x / bin_width).ceil() as i64 - 1;
        *bins.entry(idx).or_insert(0.0) += w;
    }
    let rhs = bins
        .iter()
        .map(|(&idx, &mass)| g.eval((idx as f64 + 0.5) * bin_width) * mass)
        .sum();
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InterfaceModel;
    use crate::path::Scheme;
    use approx::assert_relative_eq;

    fn constant_path(level: f64, horizon: f64, n: usize) -> Path {
        let grid = TimeGrid::uniform(horizon, n).unwrap();
        let positions = vec![level; n + 1];
        Path::new(grid, positions, 0, 0, Scheme::ExactStep).unwrap()
    }

    #[test]
    fn constant_path_occupation_examples() {
        let p = constant_path(5.0, 2.0, 8);
        let w = Window::open(4.0, 6.0);
        assert_relative_eq!(occupation_measure(&p, w, OccupationWeight::Time), 2.0);
        let medium = MediumSpec::new(1.0, 3.0).unwrap();
        assert_relative_eq!(
            occupation_measure(&p, w, OccupationWeight::QuadraticVariation(medium)),
            6.0
        );
        assert_relative_eq!(occupation_measure(&p, Window::all(), OccupationWeight::Time), 2.0);
    }

    #[test]
    fn degenerate_window_gives_zero() {
        let p = constant_path(0.0, 1.0, 4);
        assert_eq!(
            occupation_measure(&p, Window::plus_of(0.0, 0.0), OccupationWeight::Time),
            0.0
        );
        assert_eq!(
            occupation_measure(&p, Window::open(3.0, 1.0), OccupationWeight::Time),
            0.0
        );
    }

    #[test]
    fn point_at_level_counts_minus_side_only() {
        let p = constant_path(0.0, 1.0, 4);
        let (plus, minus) = one_sided(&p, 0.0, 0.1, OccupationWeight::Time);
        assert_eq!(plus, 0.0);
        assert_relative_eq!(minus, 10.0); // 1 / eps
    }

    #[test]
    fn window_membership_flags() {
        let w = Window::minus_of(0.0, 0.5);
        assert!(w.contains(0.0));
        assert!(w.contains(-0.4));
        assert!(!w.contains(-0.5));
        assert!(!w.contains(0.1));
        let p = Window::plus_of(0.0, 0.5);
        assert!(!p.contains(0.0));
        assert!(p.contains(0.3));
        assert!(!p.contains(0.5));
    }

    #[test]
    fn occupation_additive_over_time_split() {
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let xs = vec![0.0, 0.3, -0.2, 0.4, 0.1];
        let whole = Path::new(grid, xs.clone(), 0, 0, Scheme::ExactStep).unwrap();
        let half = TimeGrid::uniform(0.5, 2).unwrap();
        let first = Path::new(half.clone(), xs[0..3].to_vec(), 0, 0, Scheme::ExactStep).unwrap();
        let second = Path::new(half, xs[2..5].to_vec(), 0, 0, Scheme::ExactStep).unwrap();
        let w = Window::open(0.0, 1.0);
        let total = occupation_measure(&whole, w, OccupationWeight::Time);
        let split = occupation_measure(&first, w, OccupationWeight::Time)
            + occupation_measure(&second, w, OccupationWeight::Time);
        assert_eq!(total, split);
    }

    #[test]
    fn unit_medium_mathematical_equals_natural() {
        let grid = TimeGrid::uniform(1.0, 100).unwrap();
        let xs: Vec<f64> = (0..=100).map(|k| ((k * 37) % 13) as f64 / 13.0 - 0.5).collect();
        let p = Path::new(grid, xs, 0, 0, Scheme::ExactStep).unwrap();
        let m = mathematical_local_time(&p, 0.0, 0.2, MediumSpec::uniform(1.0).unwrap()).unwrap();
        let n = natural_local_time(&p, 0.0, 0.2).unwrap();
        assert_eq!(m.plus.value, n.plus.value);
        assert_eq!(m.minus.value, n.minus.value);
        assert_eq!(m.kind, LocalTimeKind::Mathematical);
        assert_eq!(n.kind, LocalTimeKind::Natural);
    }

    #[test]
    fn never_visiting_window_gives_zero_pair() {
        let p = constant_path(3.0, 1.0, 10);
        let pair = natural_local_time(&p, 0.0, 0.01).unwrap();
        assert_eq!(pair.plus.value, 0.0);
        assert_eq!(pair.minus.value, 0.0);
    }

    #[test]
    fn under_resolved_flag() {
        let p = constant_path(0.0, 1.0, 10); // dt = 0.1, resolution ~ 0.32
        let pair = natural_local_time(&p, 0.0, 0.01).unwrap();
        assert!(pair.plus.under_resolved);
        let wide = natural_local_time(&p, 0.0, 1.0).unwrap();
        assert!(!wide.plus.under_resolved);
        assert!(natural_local_time(&p, 0.0, 0.0).is_err());
    }

    #[test]
    fn step_function_conventions() {
        let g = StepFunction::indicator_above(0.0);
        assert_eq!(g.eval(0.0), 0.0);
        assert_eq!(g.eval(-1.0), 0.0);
        assert_eq!(g.eval(1e-12), 1.0);
        let s = StepFunction::new(vec![-1.0, 1.0], vec![5.0, 7.0, 9.0]).unwrap();
        assert_eq!(s.eval(-1.0), 5.0);
        assert_eq!(s.eval(0.0), 7.0);
        assert_eq!(s.eval(1.0), 7.0);
        assert_eq!(s.eval(1.5), 9.0);
        assert!(StepFunction::new(vec![1.0, 1.0], vec![0.0, 1.0, 2.0]).is_err());
        assert!(StepFunction::new(vec![0.0], vec![1.0]).is_err());
    }

    #[test]
    fn consistency_exact_for_constant_weight() {
        let grid = TimeGrid::uniform(1.0, 64).unwrap();
        let xs: Vec<f64> = (0..=64).map(|k| (k as f64 * 0.17).sin()).collect();
        let p = Path::new(grid, xs, 0, 0, Scheme::ExactStep).unwrap();
        let medium = MediumSpec::new(2.0, 3.0).unwrap();
        let (lhs, rhs) =
            occupation_localtime_consistency(&p, &StepFunction::constant(1.0), medium, 0.25)
                .unwrap();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
        let direct = occupation_measure(
            &p,
            Window::all(),
            OccupationWeight::QuadraticVariation(medium),
        );
        assert_relative_eq!(lhs, direct, max_relative = 1e-12);
    }

    #[test]
    fn consistency_bins_respect_edge_convention() {
        // single step sitting exactly at 0: bin (-b, 0], center negative
        let grid = TimeGrid::uniform(1.0, 1).unwrap();
        let p = Path::new(grid, vec![0.0, 0.0], 0, 0, Scheme::ExactStep).unwrap();
        let g = StepFunction::indicator_above(0.0);
        let medium = MediumSpec::uniform(1.0).unwrap();
        let (lhs, rhs) = occupation_localtime_consistency(&p, &g, medium, 0.5).unwrap();
        assert_eq!(lhs, 0.0);
        assert_eq!(rhs, 0.0);
    }

    #[test]
    fn batch_smoke_and_flags() {
        let model = InterfaceModel::physical(MediumSpec::new(1.0, 4.0).unwrap());
        let b = batch_local_time(
            LocalTimeKind::Natural,
            &model,
            0.0,
            0.25,
            1.0 / 512.0,
            0.2,
            64,
            42,
            crate::batch::Parallelism::Sequential,
        )
        .unwrap();
        assert!(b.pair.plus.value > 0.0);
        assert!(b.pair.plus.std_error > 0.0);
        assert_eq!(b.pair.plus.n_replicates, 64);
        assert_eq!(b.pair.window(), Some(0.2));
        assert!(!b.ratio.under_resolved);
        assert!(b.ratio.value > 0.0);
        assert_relative_eq!(
            b.gap.value,
            2.0 * (b.pair.plus.value - b.pair.minus.value)
                / (b.pair.plus.value + b.pair.minus.value),
            max_relative = 1e-12
        );
        assert!(batch_local_time(
            LocalTimeKind::Natural,
            &model,
            0.0,
            0.25,
            0.3,
            0.2,
            64,
            42,
            crate::batch::Parallelism::Sequential,
        )
        .is_err());
    }
}
