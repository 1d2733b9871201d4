//! Finite-difference solver for `dc/dt = (1/2) D(x) d2c/dx2` with the
//! weighted derivative-matching condition
//! `lambda c_x(0+) = (1 - lambda) c_x(0-)` at the interface, plus the two
//! stochastic cross-checks: the expectation representation of the solution
//! and the martingale drift test.
//!
//! Time stepping is Crank-Nicolson on each half line; the interface node
//! carries no PDE row, only the algebraic matching condition built from
//! second-order one-sided 3-point derivative stencils, imposed at the new
//! time level. The resulting matrix is tridiagonal per side plus one coupled
//! row, solved by eliminating the interface value: each half solve is Thomas,
//! and the interface unknown satisfies a scalar equation assembled from
//! cached response vectors.

use crate::batch::{run_batch, Parallelism};
use crate::error::{Result, SimError};
use crate::model::{alpha_of_lambda, sigma_inverse, sigma_map, InterfaceModel, MediumSpec};
use crate::rng::{CounterRng, StreamChannel};
use crate::sampler::skew_step;
use crate::stats::EstimateWithError;
use crate::testfn::TestFunction;
use crate::tridiag::solve_tridiagonal;

pub const TRANSMISSION_TOL: f64 = 1e-12;

/// Far-field closure of the truncated domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// Absorbing edges: `c = 0`.
    DirichletZero,
    /// Reflecting edges: zero flux via mirror ghost nodes.
    NeumannZero,
}

/// Spatial grid with a node exactly at the interface and uniform spacing on
/// each side, plus the time step that goes with it.
#[derive(Debug, Clone)]
pub struct Grid1D {
    x_nodes: Vec<f64>,
    i0: usize,
    dx_left: f64,
    dx_right: f64,
    dt: f64,
}

impl Grid1D {
    /// `[-half_width, half_width]` with `n_per_side` cells per side.
    pub fn symmetric(half_width: f64, n_per_side: usize, dt: f64) -> Result<Self> {
        Grid1D::two_sided(-half_width, half_width, n_per_side, n_per_side, dt)
    }

    /// `[x_min, x_max]` around 0 with the given cell counts per side. Nodes
    /// are laid out as exact multiples of the side spacings, so the interface
    /// node is exactly 0 and refinement by an integer factor nests.
    pub fn two_sided(
        x_min: f64,
        x_max: f64,
        n_left: usize,
        n_right: usize,
        dt: f64,
    ) -> Result<Self> {
        if !(x_min < 0.0 && x_max > 0.0 && x_min.is_finite() && x_max.is_finite()) {
            return Err(SimError::Grid(format!(
                "domain must straddle the interface, got [{x_min}, {x_max}]"
            )));
        }
        if n_left < 3 || n_right < 3 {
            return Err(SimError::Grid(
                "need at least three cells per side for the one-sided stencils".into(),
            ));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(SimError::Grid(format!("time step must be positive, got {dt}")));
        }
        let dx_left = -x_min / n_left as f64;
        let dx_right = x_max / n_right as f64;
        let x_nodes: Vec<f64> = (-(n_left as i64)..=n_right as i64)
            .map(|k| {
                if k < 0 {
                    k as f64 * dx_left
                } else {
                    k as f64 * dx_right
                }
            })
            .collect();
        Ok(Grid1D {
            x_nodes,
            i0: n_left,
            dx_left,
            dx_right,
            dt,
        })
    }

    /// Same domain with every spacing and the time step divided by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(SimError::Grid("refinement factor must be >= 1".into()));
        }
        Grid1D::two_sided(
            self.x_nodes[0],
            *self.x_nodes.last().unwrap(),
            self.i0 * factor,
            (self.x_nodes.len() - 1 - self.i0) * factor,
            self.dt / factor as f64,
        )
    }

    pub fn nodes(&self) -> &[f64] {
        &self.x_nodes
    }

    pub fn interface_index(&self) -> usize {
        self.i0
    }

    pub fn dx_left(&self) -> f64 {
        self.dx_left
    }

    pub fn dx_right(&self) -> f64 {
        self.dx_right
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Trapezoid quadrature weight of node `i`.
    fn mass_weight(&self, i: usize) -> f64 {
        let n = self.x_nodes.len();
        if i == 0 {
            0.5 * self.dx_left
        } else if i == n - 1 {
            0.5 * self.dx_right
        } else if i < self.i0 {
            self.dx_left
        } else if i > self.i0 {
            self.dx_right
        } else {
            0.5 * (self.dx_left + self.dx_right)
        }
    }
}

/// Final concentration snapshot with conservation and positivity diagnostics
/// accumulated over the whole run.
#[derive(Debug, Clone)]
pub struct PdeSolution {
    pub grid: Grid1D,
    pub boundary: BoundaryKind,
    pub t_final: f64,
    pub values: Vec<f64>,
    pub mass_initial: f64,
    pub mass_final: f64,
    /// Largest single-step change of the discrete mass.
    pub max_mass_step_drift: f64,
    /// Smallest value seen at any node at any step.
    pub min_value: f64,
}

impl PdeSolution {
    /// Linear interpolation on the final snapshot; `None` outside the domain.
    pub fn sample_at(&self, x: f64) -> Option<f64> {
        let nodes = self.grid.nodes();
        if x < nodes[0] || x > *nodes.last().unwrap() {
            return None;
        }
        let j = match nodes.binary_search_by(|n| n.partial_cmp(&x).unwrap()) {
            Ok(exact) => return Some(self.values[exact]),
            Err(j) => j,
        };
        let (x0, x1) = (nodes[j - 1], nodes[j]);
        let w = (x - x0) / (x1 - x0);
        Some(self.values[j - 1] * (1.0 - w) + self.values[j] * w)
    }

    /// One-sided derivatives at the interface from the same 3-point stencils
    /// the solver imposes.
    pub fn one_sided_derivatives(&self) -> (f64, f64) {
        let i0 = self.grid.interface_index();
        let c = &self.values;
        let minus = (3.0 * c[i0] - 4.0 * c[i0 - 1] + c[i0 - 2]) / (2.0 * self.grid.dx_left());
        let plus = (-3.0 * c[i0] + 4.0 * c[i0 + 1] - c[i0 + 2]) / (2.0 * self.grid.dx_right());
        (minus, plus)
    }

    /// `lambda c_x(0+) - (1 - lambda) c_x(0-)`; roundoff-level by construction.
    pub fn interface_condition_residual(&self, lambda: f64) -> f64 {
        let (minus, plus) = self.one_sided_derivatives();
        lambda * plus - (1.0 - lambda) * minus
    }

    /// `D+ c_x(0+) - D- c_x(0-)`; vanishes for the flux-continuity weight.
    pub fn flux_residual(&self, medium: MediumSpec) -> f64 {
        let (minus, plus) = self.one_sided_derivatives();
        medium.d_plus() * plus - medium.d_minus() * minus
    }
}

struct HalfSystem {
    /// `1 + 2 s` on the diagonal, `-s` off it, boundary row per kind.
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    /// Cached response to a unit interface value: `M^-1 (s e_edge)`.
    response: Vec<f64>,
}

enum Side {
    Left,
    Right,
}

fn build_half(
    n: usize,
    s: f64,
    boundary: BoundaryKind,
    side: Side,
) -> HalfSystem {
    // Left block nodes run outward-edge..interface-1, right block
    // interface+1..outward-edge; the interface-adjacent entry is last for the
    // left side, first for the right side.
    let mut lower = vec![-s; n];
    let mut diag = vec![1.0 + 2.0 * s; n];
    let mut upper = vec![-s; n];
    let (edge, inward_of_edge): (usize, usize) = match side {
        Side::Left => (0, 1),
        Side::Right => (n - 1, n - 2),
    };
    match boundary {
        BoundaryKind::DirichletZero => {
            diag[edge] = 1.0;
            if n > 1 {
                if edge == 0 {
                    upper[edge] = 0.0;
                } else {
                    lower[edge] = 0.0;
                }
            }
        }
        BoundaryKind::NeumannZero => {
            // mirror ghost: the single neighbor appears twice
            if edge == 0 {
                upper[edge] = -2.0 * s;
            } else {
                lower[edge] = -2.0 * s;
            }
            let _ = inward_of_edge;
        }
    }
    let mut sys = HalfSystem {
        lower,
        diag,
        upper,
        response: vec![0.0; n],
    };
    let mut rhs = vec![0.0; n];
    match side {
        Side::Left => rhs[n - 1] = s,
        Side::Right => rhs[0] = s,
    }
    sys.solve(&mut rhs);
    sys.response = rhs;
    sys
}

impl HalfSystem {
    fn solve(&self, rhs: &mut [f64]) {
        let mut diag = self.diag.clone();
        solve_tridiagonal(&self.lower, &mut diag, &self.upper, rhs);
    }
}

/// Explicit Crank-Nicolson half step for one side, writing `b` for the block.
/// `c` is the full current snapshot; the block spans `range`.
#[allow(clippy::too_many_arguments)]
fn explicit_half(
    c: &[f64],
    range: std::ops::Range<usize>,
    s: f64,
    boundary: BoundaryKind,
    side: Side,
    b: &mut [f64],
) {
    let n = b.len();
    let edge_entry = match side {
        Side::Left => 0,
        Side::Right => n - 1,
    };
    for (bi, i) in range.clone().enumerate() {
        if bi == edge_entry {
            continue;
        }
        b[bi] = (1.0 - 2.0 * s) * c[i] + s * (c[i - 1] + c[i + 1]);
    }
    match side {
        Side::Left => {
            // outward edge is the first block entry, node index range.start
            let i = range.start;
            b[0] = match boundary {
                BoundaryKind::DirichletZero => 0.0,
                BoundaryKind::NeumannZero => (1.0 - 2.0 * s) * c[i] + 2.0 * s * c[i + 1],
            };
        }
        Side::Right => {
            let i = range.end - 1;
            b[n - 1] = match boundary {
                BoundaryKind::DirichletZero => 0.0,
                BoundaryKind::NeumannZero => (1.0 - 2.0 * s) * c[i] + 2.0 * s * c[i - 1],
            };
        }
    }
}

/// Crank-Nicolson solve of the interface equation from initial data `c0`
/// (required to lie in the transmission class for `lambda`).
pub fn solve_interface_pde(
    c0: &TestFunction,
    medium: MediumSpec,
    lambda: f64,
    grid: &Grid1D,
    t_final: f64,
    boundary: BoundaryKind,
) -> Result<PdeSolution> {
    alpha_of_lambda(medium, lambda)?;
    if !c0.in_transmission_class(lambda, TRANSMISSION_TOL) {
        return Err(SimError::DomainClass(format!(
            "initial data {} violates lambda f'(0+) = (1 - lambda) f'(0-) for lambda = {lambda}",
            c0.name()
        )));
    }
    if !(t_final.is_finite() && t_final > 0.0) {
        return Err(SimError::Config(format!("t_final must be positive, got {t_final}")));
    }
    let dt = grid.dt();
    let steps_f = (t_final / dt).round();
    if steps_f < 1.0 || ((steps_f * dt - t_final) / t_final).abs() > 1e-9 {
        return Err(SimError::Grid(format!(
            "t_final = {t_final} is not a multiple of dt = {dt}"
        )));
    }
    let n_steps = steps_f as usize;

    let i0 = grid.interface_index();
    let nodes = grid.nodes();
    let n_total = nodes.len();
    let n_left = i0; // nodes 0..i0
    let n_right = n_total - 1 - i0;
    let s_left = dt * medium.d_minus() / (4.0 * grid.dx_left() * grid.dx_left());
    let s_right = dt * medium.d_plus() / (4.0 * grid.dx_right() * grid.dx_right());
    let left = build_half(n_left, s_left, boundary, Side::Left);
    let right = build_half(n_right, s_right, boundary, Side::Right);

    // interface row coefficients: aL2 c[-2] + aL1 c[-1] + a0 c0 + aR1 c[1] + aR2 c[2] = 0
    let (hl, hr) = (2.0 * grid.dx_left(), 2.0 * grid.dx_right());
    let a_l2 = -(1.0 - lambda) / hl;
    let a_l1 = 4.0 * (1.0 - lambda) / hl;
    let a_0 = -3.0 * lambda / hr - 3.0 * (1.0 - lambda) / hl;
    let a_r1 = 4.0 * lambda / hr;
    let a_r2 = -lambda / hr;
    let denom = a_0
        + a_l1 * left.response[n_left - 1]
        + a_l2 * left.response[n_left - 2]
        + a_r1 * right.response[0]
        + a_r2 * right.response[1];
    if !denom.is_finite() || denom.abs() < 1e-300 {
        return Err(SimError::Grid("degenerate interface coupling".into()));
    }

    let mut c: Vec<f64> = nodes.iter().map(|&x| c0.value(x)).collect();
    let mass = |c: &[f64]| -> f64 {
        c.iter()
            .enumerate()
            .map(|(i, v)| v * grid.mass_weight(i))
            .sum()
    };
    let mass_initial = mass(&c);
    let mut prev_mass = mass_initial;
    let mut max_drift = 0.0f64;
    let mut min_value = c.iter().cloned().fold(f64::INFINITY, f64::min);

    let mut b_left = vec![0.0; n_left];
    let mut b_right = vec![0.0; n_right];
    for _ in 0..n_steps {
        explicit_half(&c, 0..i0, s_left, boundary, Side::Left, &mut b_left);
        explicit_half(
            &c,
            i0 + 1..n_total,
            s_right,
            boundary,
            Side::Right,
            &mut b_right,
        );
        left.solve(&mut b_left);
        right.solve(&mut b_right);
        let numer = a_l1 * b_left[n_left - 1]
            + a_l2 * b_left[n_left - 2]
            + a_r1 * b_right[0]
            + a_r2 * b_right[1];
        let c_interface = -numer / denom;
        for i in 0..n_left {
            c[i] = b_left[i] + c_interface * left.response[i];
        }
        c[i0] = c_interface;
        for i in 0..n_right {
            c[i0 + 1 + i] = b_right[i] + c_interface * right.response[i];
        }
        let m = mass(&c);
        max_drift = max_drift.max((m - prev_mass).abs());
        prev_mass = m;
        min_value = c.iter().cloned().fold(min_value, f64::min);
    }

    Ok(PdeSolution {
        grid: grid.clone(),
        boundary,
        t_final,
        values: c,
        mass_initial,
        mass_final: prev_mass,
        max_mass_step_drift: max_drift,
        min_value,
    })
}

/// Closed-form solution of the uniform-medium equation
/// `dc/dt = (d/2) c_xx` from Gaussian initial data
/// `exp(-(x - center)^2 / (2 width^2))`: the width grows to
/// `sqrt(width^2 + d t)` and the amplitude shrinks to match.
pub fn gaussian_heat_solution(center: f64, width: f64, d: f64, t: f64, x: f64) -> f64 {
    let v = width * width + d * t;
    let z = x - center;
    width / v.sqrt() * (-0.5 * z * z / v).exp()
}

/// Monte Carlo estimate of `E_x c0(Y_t)` using one exact transition per path
/// (the one-step law is the exact marginal, so no time grid is needed).
pub fn feynman_kac_estimate(
    c0: &TestFunction,
    model: &InterfaceModel,
    x: f64,
    t: f64,
    n_paths: u64,
    seed: u64,
    parallelism: Parallelism,
) -> Result<EstimateWithError> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(SimError::Config(format!("t must be finite and >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(EstimateWithError::exact(c0.value(x)));
    }
    if n_paths < 2 {
        return Err(SimError::Config("need at least two paths".into()));
    }
    let medium = model.medium();
    let alpha = model.alpha().value();
    let x0 = sigma_inverse(medium, x);
    let values: Vec<f64> = run_batch(n_paths, parallelism, |i| {
        let mut rng = CounterRng::for_step(seed, StreamChannel::Motion, i, 0);
        let b_t = skew_step(x0, t, alpha, &mut rng);
        c0.value(sigma_map(medium, b_t))
    });
    Ok(EstimateWithError::from_samples(&values))
}

/// Estimates the martingale defect `E[f(Y_t) - f(Y_0) - (1/2) int D(Y) f''(Y) du]`
/// for paths driven by the model's skew parameter, started at the interface.
/// The model's `alpha` may be deliberately mismatched to `lambda`
/// (via the override constructor); the defect is zero exactly when they match.
/// The time integral is a trapezoid along the path; at a node exactly on the
/// interface both `D` and `f''` read their minus-side values.
pub fn martingale_drift_test(
    model: &InterfaceModel,
    f: &TestFunction,
    t: f64,
    dt: f64,
    n_paths: u64,
    seed: u64,
    parallelism: Parallelism,
) -> Result<EstimateWithError> {
    if !f.in_transmission_class(model.lambda(), TRANSMISSION_TOL) {
        return Err(SimError::DomainClass(format!(
            "test function {} is outside the transmission class for lambda = {}",
            f.name(),
            model.lambda()
        )));
    }
    if n_paths < 2 {
        return Err(SimError::Config("need at least two paths".into()));
    }
    let steps_f = (t / dt).round();
    if !(t > 0.0 && dt > 0.0) || steps_f < 1.0 || ((steps_f * dt - t) / t).abs() > 1e-9 {
        return Err(SimError::Grid(format!("horizon {t} is not a multiple of dt {dt}")));
    }
    let n_steps = steps_f as u64;
    let medium = model.medium();
    let alpha = model.alpha().value();
    let integrand = |y: f64| medium.diffusivity_at(y) * f.second(y);
    let f0 = f.value(0.0);
    let g0 = integrand(0.0);
    let drifts: Vec<f64> = run_batch(n_paths, parallelism, |i| {
        let mut x = 0.0f64;
        let mut g_prev = g0;
        let mut integral = 0.0f64;
        for k in 0..n_steps {
            let mut rng = CounterRng::for_step(seed, StreamChannel::Motion, i, k);
            x = skew_step(x, dt, alpha, &mut rng);
            let g = integrand(sigma_map(medium, x));
            integral += 0.5 * (g_prev + g) * dt;
            g_prev = g;
        }
        f.value(sigma_map(medium, x)) - f0 - 0.5 * integral
    });
    Ok(EstimateWithError::from_samples(&drifts))
}

/// Drift estimates across a grid of motion parameters for a fixed class
/// weight, with the linearly interpolated zero crossing if the sign changes.
#[derive(Debug, Clone)]
pub struct DriftScan {
    pub points: Vec<(f64, EstimateWithError)>,
    pub zero_crossing: Option<f64>,
}

pub fn martingale_drift_scan(
    medium: MediumSpec,
    lambda: f64,
    f: &TestFunction,
    alpha_grid: &[f64],
    t: f64,
    dt: f64,
    n_paths: u64,
    seed: u64,
    parallelism: Parallelism,
) -> Result<DriftScan> {
    if alpha_grid.len() < 2 {
        return Err(SimError::Config("scan needs at least two alpha values".into()));
    }
    let mut points = Vec::with_capacity(alpha_grid.len());
    for (j, &a) in alpha_grid.iter().enumerate() {
        let alpha = crate::model::SkewParam::new(a)?;
        let model = InterfaceModel::with_alpha_override(medium, lambda, alpha)?;
        let drift = martingale_drift_test(
            &model,
            f,
            t,
            dt,
            n_paths,
            seed.wrapping_add(j as u64),
            parallelism,
        )?;
        points.push((a, drift));
    }
    let mut zero_crossing = None;
    for w in points.windows(2) {
        let (a0, d0) = (w[0].0, w[0].1.value);
        let (a1, d1) = (w[1].0, w[1].1.value);
        if d0 == 0.0 {
            zero_crossing = Some(a0);
            break;
        }
        if d0 * d1 < 0.0 {
            zero_crossing = Some(a0 - d0 * (a1 - a0) / (d1 - d0));
            break;
        }
    }
    if let Some((last_a, last_d)) = points.last().map(|p| (p.0, p.1.value)) {
        if zero_crossing.is_none() && last_d == 0.0 {
            zero_crossing = Some(last_a);
        }
    }
    Ok(DriftScan {
        points,
        zero_crossing,
    })
}

/// Sup-norm self-convergence check: errors of the base grid and its 2x
/// refinement, both measured against a `reference_factor`-times-refined solve
/// sampled at the coarser nodes. Returns `(err_base, err_half, ratio)`.
pub fn pde_self_convergence(
    c0: &TestFunction,
    medium: MediumSpec,
    lambda: f64,
    grid: &Grid1D,
    t_final: f64,
    boundary: BoundaryKind,
    reference_factor: usize,
) -> Result<(f64, f64, f64)> {
    if reference_factor < 4 {
        return Err(SimError::Config("reference must refine by at least 4".into()));
    }
    let base = solve_interface_pde(c0, medium, lambda, grid, t_final, boundary)?;
    let half = solve_interface_pde(c0, medium, lambda, &grid.refined(2)?, t_final, boundary)?;
    let reference = solve_interface_pde(
        c0,
        medium,
        lambda,
        &grid.refined(reference_factor)?,
        t_final,
        boundary,
    )?;
    let err = |sol: &PdeSolution| -> f64 {
        sol.grid
            .nodes()
            .iter()
            .zip(&sol.values)
            .map(|(&x, &v)| {
                let r = reference.sample_at(x).expect("nested domains");
                (v - r).abs()
            })
            .fold(0.0, f64::max)
    };
    let err_base = err(&base);
    let err_half = err(&half);
    Ok((err_base, err_half, err_base / err_half))
}
