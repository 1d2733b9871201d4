//! Path generators for the excursion-sign-flip motion.
//!
//! Three interchangeable schemes target the same law:
//!
//! - [`simulate_excursion_flip`]: reflect a simple lattice walk, then give each
//!   excursion away from the origin an independent sign, positive with
//!   probability `alpha`. This is the defining construction.
//! - [`simulate_skew_walk`]: lattice walk stepping `+-eps` with probability
//!   1/2 away from the origin and `alpha` / `1 - alpha` out of it, on time
//!   steps `eps^2` (unit-diffusivity scaling).
//! - [`simulate_skew_bm_exact`]: samples the continuum transition law exactly
//!   on an arbitrary grid. From `x` over a step of length `dt`:
//!
//!   ```text
//!   y0 = x + sqrt(dt) Z                       free Gaussian endpoint
//!   crossed with probability exp(-2 x y0 / dt)  (>= 1 when signs differ,
//!                                                so opposite-sign moves and
//!                                                moves out of 0 always cross)
//!   not crossed -> y0
//!   crossed     -> +|y0| with probability alpha, else -|y0|
//!   ```
//!
//!   The crossing weight is the probability that a Brownian bridge from `x` to
//!   `y0` touches 0; conditional on touching, the endpoint magnitude `|y0|` is
//!   the tail of a fresh excursion whose sign is an independent `alpha` flip.
//!   The resulting one-step density is [`transition_density`].
//!
//! The natural diffusion over a two-sided medium is the image of this motion
//! under the piecewise-linear space map; see [`simulate_natural_diffusion`].

use crate::error::{Result, SimError};
use crate::model::{sigma_inverse, sigma_map, InterfaceModel, SkewParam};
use crate::path::{Path, Scheme, TimeGrid};
use crate::rng::{CounterRng, StreamChannel};

/// Lattice walk shape: `n_steps` steps on the lattice `eps Z`, each advancing
/// time by `eps^2`.
#[derive(Debug, Clone, Copy)]
pub struct WalkConfig {
    epsilon: f64,
    n_steps: usize,
}

impl WalkConfig {
    pub fn new(epsilon: f64, n_steps: usize) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(SimError::ParameterDomain {
                name: "epsilon",
                value: epsilon,
                constraint: "finite and > 0",
            });
        }
        if n_steps == 0 {
            return Err(SimError::Config("walk needs at least one step".into()));
        }
        Ok(WalkConfig { epsilon, n_steps })
    }

    /// Lattice spacing and step count reproducing a uniform grid: requires
    /// `dt = eps^2`, i.e. `eps = sqrt(dt)`.
    pub fn matching_grid(grid: &TimeGrid) -> Result<Self> {
        let dt = grid.uniform_dt().ok_or_else(|| {
            SimError::Grid("lattice schemes need a uniform time grid".into())
        })?;
        WalkConfig::new(dt.sqrt(), grid.n_steps())
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn time_step(&self) -> f64 {
        self.epsilon * self.epsilon
    }

    pub fn horizon(&self) -> f64 {
        self.time_step() * self.n_steps as f64
    }

    fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::uniform(self.horizon(), self.n_steps)
    }
}

/// Probability that the lattice walk steps up from integer site `m`.
/// Biased only at the interface site.
#[inline]
pub fn walk_up_probability(m: i64, alpha: SkewParam) -> f64 {
    if m == 0 {
        alpha.value()
    } else {
        0.5
    }
}

/// One exact transition over `dt`; see the module doc for the rule.
#[inline]
pub fn skew_step(x: f64, dt: f64, alpha: f64, rng: &mut CounterRng) -> f64 {
    let y0 = x + dt.sqrt() * rng.standard_normal();
    let log_weight = -2.0 * x * y0 / dt;
    let crossed = if log_weight >= 0.0 {
        true
    } else if log_weight < -60.0 {
        // weight below 1e-26: beyond uniform resolution
        false
    } else {
        rng.uniform() < log_weight.exp()
    };
    if crossed {
        if rng.uniform() < alpha {
            y0.abs()
        } else {
            -y0.abs()
        }
    } else {
        y0
    }
}

/// One-step transition density of the motion; reference for histogram tests.
/// Discontinuous in `y` at 0 unless `alpha = 1/2`.
pub fn transition_density(x: f64, y: f64, t: f64, alpha: f64) -> f64 {
    let phi = |z: f64| (-z * z / (2.0 * t)).exp() / (2.0 * std::f64::consts::PI * t).sqrt();
    if x >= 0.0 {
        if y > 0.0 {
            phi(y - x) + (2.0 * alpha - 1.0) * phi(y + x)
        } else {
            2.0 * (1.0 - alpha) * phi(y - x)
        }
    } else if y < 0.0 {
        phi(y - x) + (1.0 - 2.0 * alpha) * phi(y + x)
    } else {
        2.0 * alpha * phi(y - x)
    }
}

/// Brownian motion with diffusivity `d` from `x0` on an arbitrary grid.
pub fn simulate_bm(
    d: f64,
    grid: &TimeGrid,
    x0: f64,
    seed: u64,
    path_index: u64,
) -> Result<Path> {
    if !(d.is_finite() && d > 0.0) {
        return Err(SimError::ParameterDomain {
            name: "d",
            value: d,
            constraint: "finite and > 0",
        });
    }
    let mut positions = Vec::with_capacity(grid.len());
    positions.push(x0);
    let mut x = x0;
    for k in 0..grid.n_steps() {
        let mut rng = CounterRng::for_step(seed, StreamChannel::Motion, path_index, k as u64);
        x += (d * grid.dt(k)).sqrt() * rng.standard_normal();
        positions.push(x);
    }
    Path::new(grid.clone(), positions, seed, path_index, Scheme::ExactStep)
}

/// Exact-transition sampling of the motion from `x0` on an arbitrary grid.
pub fn simulate_skew_bm_exact(
    alpha: SkewParam,
    grid: &TimeGrid,
    x0: f64,
    seed: u64,
    path_index: u64,
) -> Result<Path> {
    let a = alpha.value();
    let mut positions = Vec::with_capacity(grid.len());
    positions.push(x0);
    let mut x = x0;
    for k in 0..grid.n_steps() {
        let mut rng = CounterRng::for_step(seed, StreamChannel::Motion, path_index, k as u64);
        x = skew_step(x, grid.dt(k), a, &mut rng);
        positions.push(x);
    }
    Path::new(grid.clone(), positions, seed, path_index, Scheme::ExactStep)
}

fn walk_sites(
    alpha: SkewParam,
    cfg: &WalkConfig,
    m0: i64,
    seed: u64,
    path_index: u64,
) -> Vec<i64> {
    let mut sites = Vec::with_capacity(cfg.n_steps + 1);
    sites.push(m0);
    let mut m = m0;
    for k in 0..cfg.n_steps {
        let mut rng = CounterRng::for_step(seed, StreamChannel::Motion, path_index, k as u64);
        let up = rng.uniform() < walk_up_probability(m, alpha);
        m += if up { 1 } else { -1 };
        sites.push(m);
    }
    sites
}

/// Lattice walk from the interface: up with probability `alpha` out of 0,
/// 1/2 elsewhere. Positions lie on `eps Z`; times on `k eps^2`.
pub fn simulate_skew_walk(
    alpha: SkewParam,
    cfg: &WalkConfig,
    seed: u64,
    path_index: u64,
) -> Result<Path> {
    let sites = walk_sites(alpha, cfg, 0, seed, path_index);
    let positions = sites.iter().map(|&m| m as f64 * cfg.epsilon).collect();
    Path::new(cfg.grid()?, positions, seed, path_index, Scheme::SkewWalk)
}

/// The defining construction on the lattice: reflect a simple symmetric walk,
/// then sign each excursion independently, positive with probability `alpha`.
/// Walk increments and excursion signs come from separate stream channels, so
/// the signs are independent of the reflected shape.
pub fn simulate_excursion_flip(
    alpha: SkewParam,
    cfg: &WalkConfig,
    seed: u64,
    path_index: u64,
) -> Result<Path> {
    let mut positions = Vec::with_capacity(cfg.n_steps + 1);
    positions.push(0.0);
    let mut w: i64 = 0;
    let mut sign = 1.0;
    let mut excursion: u64 = 0;
    for k in 0..cfg.n_steps {
        let mut rng = CounterRng::for_step(seed, StreamChannel::Motion, path_index, k as u64);
        let prev = w;
        w += if rng.uniform() < 0.5 { 1 } else { -1 };
        if prev == 0 {
            // leaving the interface opens a new excursion of |w|
            let mut sign_rng =
                CounterRng::for_step(seed, StreamChannel::ExcursionSign, path_index, excursion);
            sign = if sign_rng.uniform() < alpha.value() { 1.0 } else { -1.0 };
            excursion += 1;
        }
        positions.push(sign * (w.abs() as f64) * cfg.epsilon);
    }
    Path::new(cfg.grid()?, positions, seed, path_index, Scheme::ExcursionFlip)
}

/// Scheme dispatcher for the unit-diffusivity motion. Lattice schemes demand a
/// uniform grid (`eps = sqrt(dt)`) and a lattice-aligned start; the excursion
/// construction additionally starts at the interface.
pub fn simulate_skew_path(
    alpha: SkewParam,
    scheme: Scheme,
    grid: &TimeGrid,
    x0: f64,
    seed: u64,
    path_index: u64,
) -> Result<Path> {
    match scheme {
        Scheme::ExactStep => simulate_skew_bm_exact(alpha, grid, x0, seed, path_index),
        Scheme::SkewWalk => {
            let cfg = WalkConfig::matching_grid(grid)?;
            let m0 = lattice_site(x0, cfg.epsilon())?;
            let sites = walk_sites(alpha, &cfg, m0, seed, path_index);
            let positions = sites.iter().map(|&m| m as f64 * cfg.epsilon()).collect();
            Path::new(cfg.grid()?, positions, seed, path_index, Scheme::SkewWalk)
        }
        Scheme::ExcursionFlip => {
            if x0 != 0.0 {
                return Err(SimError::Alignment(format!(
                    "excursion construction starts at the interface, got x0 = {x0}"
                )));
            }
            let cfg = WalkConfig::matching_grid(grid)?;
            simulate_excursion_flip(alpha, &cfg, seed, path_index)
        }
    }
}

fn lattice_site(x0: f64, eps: f64) -> Result<i64> {
    let m = (x0 / eps).round();
    if (m * eps - x0).abs() > 1e-9 * x0.abs().max(1.0) {
        return Err(SimError::Alignment(format!(
            "start {x0} is not on the lattice with spacing {eps}"
        )));
    }
    Ok(m as i64)
}

/// Diffusion over the two-sided medium: the image under the space map of the
/// unit-diffusivity motion with the model's skew parameter, started at
/// `sigma_inverse(y0)`. Its quadratic variation accrues at rate `D(Y)`.
pub fn simulate_natural_diffusion(
    model: &InterfaceModel,
    scheme: Scheme,
    grid: &TimeGrid,
    y0: f64,
    seed: u64,
    path_index: u64,
) -> Result<Path> {
    let medium = model.medium();
    let x0 = sigma_inverse(medium, y0);
    let base = simulate_skew_path(model.alpha(), scheme, grid, x0, seed, path_index)?;
    let positions = base
        .positions()
        .iter()
        .map(|&x| sigma_map(medium, x))
        .collect();
    Path::new(
        base.grid().clone(),
        positions,
        seed,
        path_index,
        scheme,
    )
}
