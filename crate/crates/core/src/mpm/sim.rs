//! Explicit MLS-MPM integrator with quadratic B-spline weights and APIC
//! affine transfer.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::constitutive::{
    hencky_stress, neo_hookean_stress, newtonian_stress, stvk_hencky_stress,
};
use super::material::{MaterialKind, MaterialSpec};
use super::plasticity::{
    return_map_drucker_prager, return_map_viscoplastic, return_map_von_mises,
};
use crate::error::{GicError, Result};
use crate::geometry::GicParticleSet;
use crate::{Mat3, Vec3};

/// Grid nodes this close to the domain walls get separating wall conditions.
pub const WALL_CELLS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub x: Vec3,
    pub v: Vec3,
    /// Deformation gradient; fluids keep `J^{1/3} I` so only `det F` matters.
    pub f: Mat3,
    /// APIC affine velocity matrix.
    pub c: Mat3,
    pub mass: f64,
    /// Rest volume.
    pub volume: f64,
}

/// Background grid: nodes sit at `origin + index * spacing`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: Vec3,
    pub spacing: f64,
    pub dims: [usize; 3],
}

impl GridSpec {
    /// Smallest grid with the given spacing covering `[lo, hi]`.
    pub fn covering(lo: Vec3, hi: Vec3, spacing: f64) -> Self {
        let mut dims = [0; 3];
        for a in 0..3 {
            dims[a] = ((hi[a] - lo[a]) / spacing).ceil() as usize + 1;
        }
        Self {
            origin: lo,
            spacing,
            dims,
        }
    }

    pub fn node_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    pub fn node_position(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64, j as f64, k as f64) * self.spacing
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub particles: Vec<Particle>,
    pub grid: GridSpec,
    /// Simulated time (s).
    pub time: f64,
    /// Substeps taken so far.
    pub steps: usize,
}

impl SimState {
    /// Continuum particles at rest volume `(2 s)³` where `s` is their splat
    /// scale (the scale is half the continuum spacing).
    pub fn from_gic(gic: &GicParticleSet, mat: &MaterialSpec, grid: GridSpec) -> Result<Self> {
        if gic.is_empty() {
            return Err(GicError::invalid("cannot simulate an empty particle set"));
        }
        let particles = gic
            .particles
            .iter()
            .map(|p| {
                let volume = (2.0 * p.scale).powi(3);
                Particle {
                    x: p.position,
                    v: mat.v0,
                    f: Mat3::identity(),
                    c: Mat3::zeros(),
                    mass: mat.density * volume,
                    volume,
                }
            })
            .collect();
        Ok(Self {
            particles,
            grid,
            time: 0.0,
            steps: 0,
        })
    }

    pub fn total_mass(&self) -> f64 {
        self.particles.iter().map(|p| p.mass).sum()
    }

    pub fn total_momentum(&self) -> Vec3 {
        self.particles.iter().map(|p| p.v * p.mass).sum()
    }

    pub fn max_speed(&self) -> f64 {
        self.particles.iter().map(|p| p.v.norm()).fold(0.0, f64::max)
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.particles.iter().map(|p| p.x).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ground {
    /// Height of the plane along +y (m).
    pub height: f64,
    /// Coulomb friction coefficient for tangential grid velocity.
    pub friction: f64,
}

impl Default for Ground {
    fn default() -> Self {
        Self {
            height: 0.0,
            friction: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Largest allowed substep (s).
    pub dt: f64,
    /// Time between recorded frames (s); substeps are snapped to divide it.
    pub frame_dt: f64,
    pub gravity: Vec3,
    /// `None` disables ground contact.
    pub ground: Option<Ground>,
    /// Separating walls at the grid boundary.
    pub walls: bool,
    /// Lower and upper corner of the simulation domain (m).
    pub domain_min: Vec3,
    pub domain_max: Vec3,
    /// Grid spacing h (m).
    pub grid_spacing: f64,
    /// CFL number: a substep may move a particle at most this many cells.
    pub cfl: f64,
    /// Density band defining surface particles at frame 0.
    pub surface_band: [f64; 2],
    /// Per-thread grid buffers merged in fixed order (bit-reproducible)
    /// instead of atomic accumulation.
    pub deterministic: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            frame_dt: 1.0 / 30.0,
            gravity: Vec3::new(0.0, -9.8, 0.0),
            ground: Some(Ground::default()),
            walls: true,
            domain_min: Vec3::new(-1.0, -0.1, -1.0),
            domain_max: Vec3::new(1.0, 1.9, 1.0),
            grid_spacing: 0.02,
            cfl: 0.5,
            surface_band: [0.5, 0.8],
            deterministic: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.frame_dt > 0.0) {
            return Err(GicError::invalid("dt and frame_dt must be positive"));
        }
        if !(self.grid_spacing > 0.0) {
            return Err(GicError::invalid("grid spacing must be positive"));
        }
        if (0..3).any(|a| !(self.domain_max[a] > self.domain_min[a])) {
            return Err(GicError::invalid("domain_max must exceed domain_min on every axis"));
        }
        if !(self.cfl > 0.0) {
            return Err(GicError::invalid("CFL number must be positive"));
        }
        Ok(())
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec::covering(self.domain_min, self.domain_max, self.grid_spacing)
    }

    /// Substeps per frame and the snapped substep length.
    pub fn substeps_per_frame(&self, dt: f64) -> (usize, f64) {
        let n = ((self.frame_dt / dt) - 1e-9).ceil().max(1.0) as usize;
        (n, self.frame_dt / n as f64)
    }

    /// A substep length that resolves elastic waves and viscous diffusion
    /// of `mat` on this grid, capped at `self.dt`.
    pub fn stable_dt(&self, mat: &MaterialSpec) -> f64 {
        let h = self.grid_spacing;
        let mut dt = self.dt.min(0.4 * h / mat.wave_speed().max(1e-12));
        let viscosity = match mat.kind {
            MaterialKind::Newtonian => 0.5 * mat.fluid_viscosity,
            _ => 0.0,
        };
        if viscosity > 0.0 {
            dt = dt.min(0.4 * mat.density * h * h / (6.0 * viscosity));
        }
        dt
    }
}

#[derive(Clone, Default)]
struct GridBuffer {
    mass: Vec<f64>,
    momentum: Vec<Vec3>,
}

impl GridBuffer {
    fn reset(&mut self, n: usize) {
        self.mass.clear();
        self.mass.resize(n, 0.0);
        self.momentum.clear();
        self.momentum.resize(n, Vec3::zeros());
    }
}

/// Quadratic B-spline stencil of one particle.
struct Stencil {
    base: [usize; 3],
    frac: Vec3,
    weights: [[f64; 3]; 3],
}

impl Stencil {
    #[inline]
    fn new(x: &Vec3, grid: &GridSpec) -> Option<Self> {
        let xi = (x - grid.origin) / grid.spacing;
        let mut base = [0usize; 3];
        let mut frac = Vec3::zeros();
        let mut weights = [[0.0; 3]; 3];
        for a in 0..3 {
            let b = (xi[a] - 0.5).floor();
            if !(b >= 0.0) || b as usize + 2 >= grid.dims[a] {
                return None;
            }
            base[a] = b as usize;
            let fx = xi[a] - b;
            frac[a] = fx;
            weights[a] = [
                0.5 * (1.5 - fx).powi(2),
                0.75 - (fx - 1.0).powi(2),
                0.5 * (fx - 0.5).powi(2),
            ];
        }
        Some(Self {
            base,
            frac,
            weights,
        })
    }

    #[inline]
    fn for_each(&self, grid: &GridSpec, mut f: impl FnMut(usize, f64, Vec3)) {
        for i in 0..3 {
            for j in 0..3 {
                let wij = self.weights[0][i] * self.weights[1][j];
                for k in 0..3 {
                    let w = wij * self.weights[2][k];
                    let offset = Vec3::new(i as f64, j as f64, k as f64) - self.frac;
                    let idx = grid.index(self.base[0] + i, self.base[1] + j, self.base[2] + k);
                    f(idx, w, offset);
                }
            }
        }
    }
}

fn atomic_add(cell: &AtomicU64, value: f64) {
    let mut cur = cell.load(Ordering::Relaxed);
    loop {
        let next = (f64::from_bits(cur) + value).to_bits();
        match cell.compare_exchange_weak(cur, next, Ordering::Relaxed, Ordering::Relaxed) {
            Ok(_) => break,
            Err(actual) => cur = actual,
        }
    }
}

/// Reusable integrator for one material and configuration.
pub struct Simulator {
    mat: MaterialSpec,
    cfg: SimConfig,
    mu: f64,
    lambda: f64,
    buffers: Vec<GridBuffer>,
    grid: GridBuffer,
    stresses: Vec<Mat3>,
}

impl Simulator {
    pub fn new(mat: &MaterialSpec, cfg: &SimConfig) -> Result<Self> {
        mat.validate()?;
        cfg.validate()?;
        let (mu, lambda) = match mat.kind {
            MaterialKind::Elastic | MaterialKind::Plasticine | MaterialKind::Granular => mat.lame()?,
            MaterialKind::Newtonian => (mat.fluid_viscosity, 0.0),
            MaterialKind::NonNewtonian => (mat.shear_modulus, 0.0),
        };
        Ok(Self {
            mat: mat.clone(),
            cfg: cfg.clone(),
            mu,
            lambda,
            buffers: Vec::new(),
            grid: GridBuffer::default(),
            stresses: Vec::new(),
        })
    }

    pub fn material(&self) -> &MaterialSpec {
        &self.mat
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    fn kirchhoff(&self, p: &Particle) -> Result<Mat3> {
        let m = &self.mat;
        match m.kind {
            MaterialKind::Elastic => neo_hookean_stress(&p.f, self.mu, self.lambda),
            MaterialKind::Plasticine | MaterialKind::Granular => {
                stvk_hencky_stress(&p.f, self.mu, self.lambda)
            }
            MaterialKind::Newtonian => {
                newtonian_stress(&p.c, p.f.determinant(), m.fluid_viscosity, m.bulk_modulus)
            }
            MaterialKind::NonNewtonian => hencky_stress(&p.f, m.shear_modulus, m.bulk_modulus),
        }
    }

    fn update_deformation(&self, p: &mut Particle, dt: f64) -> Result<()> {
        let m = &self.mat;
        let trial = (Mat3::identity() + p.c * dt) * p.f;
        p.f = match m.kind {
            MaterialKind::Elastic => trial,
            MaterialKind::Plasticine => return_map_von_mises(&trial, self.mu, m.yield_stress)?,
            MaterialKind::Granular => {
                return_map_drucker_prager(&trial, self.mu, self.lambda, m.friction_angle)?
            }
            MaterialKind::Newtonian => {
                let j = p.f.determinant() * (1.0 + dt * p.c.trace());
                Mat3::identity() * j.cbrt()
            }
            MaterialKind::NonNewtonian => return_map_viscoplastic(
                &trial,
                m.shear_modulus,
                m.yield_stress,
                m.plastic_viscosity,
                dt,
            )?,
        };
        Ok(())
    }

    /// Advances `state` by one substep of length `dt`.
    pub fn substep(&mut self, state: &mut SimState, dt: f64) -> Result<()> {
        let grid = state.grid;
        let h = grid.spacing;
        let limit = self.cfg.cfl * h / state.max_speed().max(1e-300);
        if dt > limit {
            return Err(GicError::Cfl { dt, limit });
        }
        let step_index = state.steps;

        // stresses
        let stresses: Vec<Mat3> = state
            .particles
            .par_iter()
            .map(|p| self.kirchhoff(p))
            .collect::<Result<_>>()
            .map_err(|e| GicError::Diverged {
                step: step_index,
                reason: e.to_string(),
            })?;
        self.stresses = stresses;

        // particle to grid
        let n_nodes = grid.node_count();
        let stress_scale = -dt * 4.0 / (h * h);
        let out_of_domain = || GicError::Diverged {
            step: step_index,
            reason: "particle left the simulation domain".into(),
        };
        let scatter = |p: &Particle, stress: &Mat3, buf: &mut GridBuffer| -> Result<()> {
            let st = Stencil::new(&p.x, &grid).ok_or_else(out_of_domain)?;
            let affine = stress * (stress_scale * p.volume) + p.c * p.mass;
            let mv = p.v * p.mass;
            st.for_each(&grid, |idx, w, offset| {
                buf.mass[idx] += w * p.mass;
                buf.momentum[idx] += (mv + affine * (offset * h)) * w;
            });
            Ok(())
        };

        if self.cfg.deterministic {
            let chunks = rayon::current_num_threads().max(1);
            let chunk_len = state.particles.len().div_ceil(chunks).max(1);
            let n_chunks = state.particles.len().div_ceil(chunk_len);
            self.buffers.resize_with(n_chunks, GridBuffer::default);
            self.buffers
                .par_iter_mut()
                .zip(state.particles.par_chunks(chunk_len))
                .zip(self.stresses.par_chunks(chunk_len))
                .try_for_each(|((buf, ps), ss)| {
                    buf.reset(n_nodes);
                    ps.iter().zip(ss).try_for_each(|(p, s)| scatter(p, s, buf))
                })?;
            self.grid.reset(n_nodes);
            for buf in &self.buffers[..n_chunks] {
                for (m, bm) in self.grid.mass.iter_mut().zip(&buf.mass) {
                    *m += bm;
                }
                for (m, bm) in self.grid.momentum.iter_mut().zip(&buf.momentum) {
                    *m += bm;
                }
            }
        } else {
            let mass: Vec<AtomicU64> = (0..n_nodes).map(|_| AtomicU64::new(0)).collect();
            let mom: Vec<AtomicU64> = (0..3 * n_nodes).map(|_| AtomicU64::new(0)).collect();
            state
                .particles
                .par_iter()
                .zip(self.stresses.par_iter())
                .try_for_each(|(p, stress)| {
                    let st = Stencil::new(&p.x, &grid).ok_or_else(out_of_domain)?;
                    let affine = stress * (stress_scale * p.volume) + p.c * p.mass;
                    let mv = p.v * p.mass;
                    st.for_each(&grid, |idx, w, offset| {
                        atomic_add(&mass[idx], w * p.mass);
                        let m = (mv + affine * (offset * h)) * w;
                        for a in 0..3 {
                            atomic_add(&mom[3 * idx + a], m[a]);
                        }
                    });
                    Ok(())
                })?;
            self.grid.mass = mass.into_iter().map(|a| f64::from_bits(a.into_inner())).collect();
            let mom: Vec<f64> = mom.into_iter().map(|a| f64::from_bits(a.into_inner())).collect();
            self.grid.momentum = mom.chunks(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
        }

        // grid update: momentum becomes velocity
        let gravity = self.cfg.gravity;
        let walls = self.cfg.walls;
        let ground = self.cfg.ground;
        let [nx, ny, nz] = grid.dims;
        self.grid
            .momentum
            .par_iter_mut()
            .zip(self.grid.mass.par_iter())
            .enumerate()
            .for_each(|(idx, (mom, &m))| {
                if m <= 0.0 {
                    *mom = Vec3::zeros();
                    return;
                }
                let mut v = *mom / m + gravity * dt;
                let k = idx % nz;
                let j = (idx / nz) % ny;
                let i = idx / (ny * nz);
                if walls {
                    for (a, c, n) in [(0, i, nx), (1, j, ny), (2, k, nz)] {
                        if c < WALL_CELLS && v[a] < 0.0 {
                            v[a] = 0.0;
                        }
                        if c + WALL_CELLS >= n && v[a] > 0.0 {
                            v[a] = 0.0;
                        }
                    }
                }
                if let Some(g) = ground {
                    let y = grid.origin.y + j as f64 * h;
                    if y <= g.height && v.y < 0.0 {
                        let vn = v.y;
                        v.y = 0.0;
                        let vt = v.norm();
                        if vt > 0.0 {
                            let scale = (vt + g.friction * vn).max(0.0) / vt;
                            v *= scale;
                        }
                    }
                }
                *mom = v;
            });

        // grid to particle
        let velocity = &self.grid.momentum;
        let inv_h2 = 4.0 / (h * h);
        let this = &*self;
        state.particles.par_iter_mut().try_for_each(|p| {
            let st = Stencil::new(&p.x, &grid).ok_or_else(out_of_domain)?;
            let mut v = Vec3::zeros();
            let mut c = Mat3::zeros();
            st.for_each(&grid, |idx, w, offset| {
                let vi = velocity[idx];
                v += vi * w;
                c += vi * (offset * h).transpose() * (w * inv_h2);
            });
            p.v = v;
            p.c = c;
            p.x += v * dt;
            this.update_deformation(p, dt).map_err(|e| GicError::Diverged {
                step: step_index,
                reason: e.to_string(),
            })?;
            if !(p.x.iter().all(|c| c.is_finite()) && p.v.iter().all(|c| c.is_finite())) {
                return Err(GicError::Diverged {
                    step: step_index,
                    reason: "non-finite particle state".into(),
                });
            }
            let det = p.f.determinant();
            if !(det > 0.0) || !det.is_finite() {
                return Err(GicError::Diverged {
                    step: step_index,
                    reason: format!("det(F) = {det}"),
                });
            }
            Ok(())
        })?;
        state.time += dt;
        state.steps += 1;
        Ok(())
    }

    /// Advances by `duration`, splitting into equal substeps of at most
    /// `dt`, and further subdividing any substep that would violate CFL.
    pub fn advance(&mut self, state: &mut SimState, duration: f64, dt: f64) -> Result<()> {
        let n = ((duration / dt) - 1e-9).ceil().max(1.0) as usize;
        let sub = duration / n as f64;
        for _ in 0..n {
            self.cfl_substep(state, sub, 0)?;
        }
        Ok(())
    }

    fn cfl_substep(&mut self, state: &mut SimState, dt: f64, depth: usize) -> Result<()> {
        let limit = self.cfg.cfl * state.grid.spacing / state.max_speed().max(1e-300);
        if dt <= limit {
            return self.substep(state, dt);
        }
        if depth > 8 {
            return Err(GicError::Diverged {
                step: state.steps,
                reason: format!("velocity {} needs a substep below {limit}", state.max_speed()),
            });
        }
        let split = (dt / limit).ceil() as usize;
        for _ in 0..split {
            self.cfl_substep(state, dt / split as f64, depth + 1)?;
        }
        Ok(())
    }
}

/// One substep of length `cfg.dt`.
pub fn step(state: &SimState, mat: &MaterialSpec, cfg: &SimConfig) -> Result<SimState> {
    let mut sim = Simulator::new(mat, cfg)?;
    let mut next = state.clone();
    sim.substep(&mut next, cfg.dt)?;
    Ok(next)
}

/// Per-frame particle positions of a rollout plus the surface subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub positions: Vec<Vec<crate::Vec3>>,
    /// Indices of surface particles, fixed at frame 0.
    pub surface: Vec<usize>,
}

impl Trajectory {
    pub fn frame_count(&self) -> usize {
        self.times.len()
    }

    pub fn surface_at(&self, frame: usize) -> crate::geometry::ParticleCloud {
        crate::geometry::ParticleCloud::new(
            self.surface.iter().map(|&i| self.positions[frame][i]).collect(),
        )
    }

    pub fn is_surface(&self) -> Vec<bool> {
        let n = self.positions.first().map_or(0, Vec::len);
        let mut flags = vec![false; n];
        for &i in &self.surface {
            flags[i] = true;
        }
        flags
    }
}

/// Rolls out `frames` frames (the first is the initial state) spaced by
/// `cfg.frame_dt`.
pub fn simulate(
    initial: &GicParticleSet,
    mat: &MaterialSpec,
    cfg: &SimConfig,
    frames: usize,
) -> Result<Trajectory> {
    let dt = cfg.stable_dt(mat);
    simulate_with_dt(initial, mat, cfg, frames, dt)
}

/// [`simulate`] with an explicit substep bound.
pub fn simulate_with_dt(
    initial: &GicParticleSet,
    mat: &MaterialSpec,
    cfg: &SimConfig,
    frames: usize,
    dt: f64,
) -> Result<Trajectory> {
    let mut sim = Simulator::new(mat, cfg)?;
    let mut state = SimState::from_gic(initial, mat, cfg.grid())?;
    let surface = initial.surface_indices(cfg.surface_band[0], cfg.surface_band[1]);
    let (_, sub) = cfg.substeps_per_frame(dt);
    let mut traj = Trajectory {
        times: Vec::with_capacity(frames),
        positions: Vec::with_capacity(frames),
        surface,
    };
    for frame in 0..frames {
        if frame > 0 {
            sim.advance(&mut state, cfg.frame_dt, sub)?;
        }
        traj.times.push(frame as f64 * cfg.frame_dt);
        traj.positions.push(state.positions());
    }
    Ok(traj)
}

/// Kinetic, gravitational potential and stored elastic energy (J) of a
/// Neo-Hookean state, with potential measured from `y = 0`.
pub fn energy_audit(state: &SimState, mat: &MaterialSpec, gravity: &Vec3) -> Result<(f64, f64, f64)> {
    let (mu, lambda) = mat.lame()?;
    let mut kinetic = 0.0;
    let mut potential = 0.0;
    let mut elastic = 0.0;
    for p in &state.particles {
        kinetic += 0.5 * p.mass * p.v.norm_squared();
        potential -= p.mass * gravity.dot(&p.x);
        let j = p.f.determinant();
        let log_j = j.ln();
        let psi = 0.5 * mu * ((p.f.transpose() * p.f).trace() - 3.0) - mu * log_j
            + 0.5 * lambda * log_j * log_j;
        elastic += p.volume * psi;
    }
    Ok((kinetic, potential, elastic))
}
