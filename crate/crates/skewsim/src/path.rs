//! Sampled trajectories: time grids, path containers, serialization.

use std::io::{BufRead, Read, Write};
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Result, SimError};

/// Strictly increasing sample times starting at 0, shared across a batch.
#[derive(Debug, Clone)]
pub struct TimeGrid {
    times: Arc<[f64]>,
}

impl TimeGrid {
    /// `n_steps` equal steps covering `[0, horizon]`; `times[k] = horizon k / n`.
    pub fn uniform(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(SimError::Grid(format!("horizon {horizon} must be finite and > 0")));
        }
        if n_steps == 0 {
            return Err(SimError::Grid("need at least one step".into()));
        }
        let n = n_steps as f64;
        let times: Vec<f64> = (0..=n_steps).map(|k| horizon * k as f64 / n).collect();
        Ok(TimeGrid { times: times.into() })
    }

    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(SimError::Grid("need at least two sample times".into()));
        }
        if times[0] != 0.0 {
            return Err(SimError::Grid(format!("times must start at 0, got {}", times[0])));
        }
        for w in times.windows(2) {
            if !(w[1].is_finite() && w[1] > w[0]) {
                return Err(SimError::Grid(format!(
                    "times must be finite and strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(TimeGrid { times: times.into() })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of grid points (steps + 1).
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn dt(&self, k: usize) -> f64 {
        self.times[k + 1] - self.times[k]
    }

    /// `Some(dt)` when all steps agree within a relative 1e-9.
    pub fn uniform_dt(&self) -> Option<f64> {
        let dt0 = self.dt(0);
        for k in 1..self.n_steps() {
            if (self.dt(k) - dt0).abs() > 1e-9 * dt0 {
                return None;
            }
        }
        Some(dt0)
    }
}

/// Path generator family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Reflected lattice walk with independently signed excursions.
    ExcursionFlip,
    /// Lattice walk, biased only at the origin.
    SkewWalk,
    /// Exact transition sampling of the continuum law.
    ExactStep,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::ExcursionFlip => "excursion-flip",
            Scheme::SkewWalk => "skew-walk",
            Scheme::ExactStep => "exact-step",
        }
    }

    fn code(self) -> u8 {
        match self {
            Scheme::ExcursionFlip => 0,
            Scheme::SkewWalk => 1,
            Scheme::ExactStep => 2,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Scheme::ExcursionFlip),
            1 => Ok(Scheme::SkewWalk),
            2 => Ok(Scheme::ExactStep),
            other => Err(SimError::Format(format!("unknown scheme code {other}"))),
        }
    }
}

impl FromStr for Scheme {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "excursion-flip" => Ok(Scheme::ExcursionFlip),
            "skew-walk" => Ok(Scheme::SkewWalk),
            "exact-step" => Ok(Scheme::ExactStep),
            other => Err(SimError::Config(format!(
                "unknown scheme `{other}` (expected excursion-flip, skew-walk, or exact-step)"
            ))),
        }
    }
}

/// One sampled trajectory with its provenance key.
#[derive(Debug, Clone)]
pub struct Path {
    grid: TimeGrid,
    positions: Vec<f64>,
    origin: f64,
    seed: u64,
    path_index: u64,
    scheme: Scheme,
}

impl Path {
    pub fn new(
        grid: TimeGrid,
        positions: Vec<f64>,
        seed: u64,
        path_index: u64,
        scheme: Scheme,
    ) -> Result<Self> {
        if positions.len() != grid.len() {
            return Err(SimError::Grid(format!(
                "{} positions for {} sample times",
                positions.len(),
                grid.len()
            )));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(SimError::Grid("non-finite position".into()));
        }
        let origin = positions[0];
        Ok(Path {
            grid,
            positions,
            origin,
            seed,
            path_index,
            scheme,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        self.grid.times()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn endpoint(&self) -> f64 {
        *self.positions.last().unwrap()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn horizon(&self) -> f64 {
        self.grid.horizon()
    }

    /// Two-column CSV with a `t,x` header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,x")?;
        for (t, x) in self.times().iter().zip(self.positions.iter()) {
            writeln!(w, "{t},{x}")?;
        }
        Ok(())
    }
}

const BATCH_MAGIC: &[u8; 8] = b"IFDPATH1";
const DT_POLICY_UNIFORM: u8 = 0;
const DT_POLICY_EXPLICIT: u8 = 1;

/// Compact binary container for a batch of paths sharing one grid, seed, and
/// scheme. Layout, all little endian:
///
/// ```text
/// magic [8]  n_paths u64  n_points u64  dt_policy u8  scheme u8  seed u64
/// dt f64                     (uniform policy)
/// times f64 * n_points       (explicit policy)
/// per path: path_index u64, positions f64 * n_points
/// ```
///
/// Positions round-trip bit for bit. With the uniform policy the times are
/// regenerated as `k * dt` on read.
pub fn write_path_batch<W: Write>(mut w: W, paths: &[Path]) -> Result<()> {
    let first = paths
        .first()
        .ok_or_else(|| SimError::Format("empty batch".into()))?;
    let n_points = first.grid.len();
    for p in paths {
        if p.grid.len() != n_points || p.seed != first.seed || p.scheme != first.scheme {
            return Err(SimError::Format(
                "batch paths must share grid shape, seed, and scheme".into(),
            ));
        }
    }
    w.write_all(BATCH_MAGIC)?;
    w.write_all(&(paths.len() as u64).to_le_bytes())?;
    w.write_all(&(n_points as u64).to_le_bytes())?;
    let uniform = first.grid.uniform_dt();
    w.write_all(&[
        if uniform.is_some() { DT_POLICY_UNIFORM } else { DT_POLICY_EXPLICIT },
        first.scheme.code(),
    ])?;
    w.write_all(&first.seed.to_le_bytes())?;
    match uniform {
        Some(dt) => w.write_all(&dt.to_le_bytes())?,
        None => {
            for t in first.times() {
                w.write_all(&t.to_le_bytes())?;
            }
        }
    }
    for p in paths {
        w.write_all(&p.path_index.to_le_bytes())?;
        for x in &p.positions {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_path_batch<R: Read>(mut r: R) -> Result<Vec<Path>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != BATCH_MAGIC {
        return Err(SimError::Format("bad magic".into()));
    }
    let n_paths = read_u64(&mut r)? as usize;
    let n_points = read_u64(&mut r)? as usize;
    if n_points < 2 {
        return Err(SimError::Format("batch needs at least two points per path".into()));
    }
    let mut policy_scheme = [0u8; 2];
    r.read_exact(&mut policy_scheme)?;
    let scheme = Scheme::from_code(policy_scheme[1])?;
    let seed = read_u64(&mut r)?;
    let grid = match policy_scheme[0] {
        DT_POLICY_UNIFORM => {
            let dt = read_f64(&mut r)?;
            let times: Vec<f64> = (0..n_points).map(|k| k as f64 * dt).collect();
            TimeGrid::from_times(times)?
        }
        DT_POLICY_EXPLICIT => {
            let mut times = Vec::with_capacity(n_points);
            for _ in 0..n_points {
                times.push(read_f64(&mut r)?);
            }
            TimeGrid::from_times(times)?
        }
        other => return Err(SimError::Format(format!("unknown dt policy {other}"))),
    };
    let mut paths = Vec::with_capacity(n_paths);
    for _ in 0..n_paths {
        let path_index = read_u64(&mut r)?;
        let mut positions = Vec::with_capacity(n_points);
        for _ in 0..n_points {
            positions.push(read_f64(&mut r)?);
        }
        paths.push(Path::new(grid.clone(), positions, seed, path_index, scheme)?);
    }
    Ok(paths)
}

/// Reads a `t,x` CSV produced by [`Path::write_csv`] back into columns.
/// Mainly for tests and external tooling round-trips.
pub fn read_path_csv<R: BufRead>(r: R) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut times = Vec::new();
    let mut xs = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != "t,x" {
                return Err(SimError::Format(format!("expected header `t,x`, got `{line}`")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(2, ',');
        let t = parse_float(parts.next(), i)?;
        let x = parse_float(parts.next(), i)?;
        times.push(t);
        xs.push(x);
    }
    Ok((times, xs))
}

fn parse_float(field: Option<&str>, line: usize) -> Result<f64> {
    field
        .and_then(|s| s.trim().parse::<f64>().ok())
        .ok_or_else(|| SimError::Format(format!("bad float on line {line}")))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}
