use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::loss::{rollout_loss, LossBreakdown, Observation, ObservedFrame};
use crate::error::{GicError, Result};
use crate::geometry::GicParticleSet;
use crate::mpm::{simulate_with_dt, MaterialKind, MaterialSpec, ParamId, SimConfig, Trajectory};
use crate::splat::{render_mask, Camera};
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    /// Step for log10-domain parameters (decades).
    pub lr_log: f64,
    /// Step for Poisson's ratio.
    pub lr_poisson: f64,
    /// Step for the friction angle (degrees).
    pub lr_friction: f64,
    /// Step for initial-velocity components (m/s).
    pub lr_velocity: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// When an iterate is worse than the best so far, the search returns to
    /// the best one and multiplies the learning rates by this factor.
    pub backoff: f64,
    /// Iterations of the material stage.
    pub iterations: usize,
    /// Iterations of the velocity stage.
    pub velocity_iterations: usize,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr_log: 0.05,
            lr_poisson: 0.01,
            lr_friction: 1.0,
            lr_velocity: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            backoff: 0.5,
            iterations: 50,
            velocity_iterations: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdentConfig {
    pub sim: SimConfig,
    pub adam: AdamConfig,
    /// Bounds on log10 of stiffness-like parameters.
    pub bounds_log10: [f64; 2],
    pub bounds_poisson: [f64; 2],
    /// Friction angle bounds (degrees).
    pub bounds_friction: [f64; 2],
    /// Bounds on each initial-velocity component (m/s).
    pub bounds_velocity: [f64; 2],
    pub fd_step_log: f64,
    pub fd_step_poisson: f64,
    pub fd_step_friction: f64,
    pub fd_step_velocity: f64,
    /// Leading frames used to estimate the initial velocity; 0 skips the stage.
    pub velocity_frames: usize,
    /// Weight of the mask term; 0 disables mask supervision.
    pub mask_weight: f64,
    /// Starting point; defaults to the per-material initial guess.
    pub init: Option<MaterialSpec>,
    pub density: f64,
    /// Uniform jitter of the starting point, as a fraction of each bound range.
    pub init_jitter: f64,
    pub seed: u64,
}

impl Default for IdentConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            adam: AdamConfig::default(),
            bounds_log10: [1.0, 8.0],
            bounds_poisson: [0.05, 0.45],
            bounds_friction: [5.0, 85.0],
            bounds_velocity: [-10.0, 10.0],
            fd_step_log: 0.02,
            fd_step_poisson: 0.005,
            fd_step_friction: 0.5,
            fd_step_velocity: 0.01,
            velocity_frames: 3,
            mask_weight: 1.0,
            init: None,
            density: 1000.0,
            init_jitter: 0.0,
            seed: 0,
        }
    }
}

impl IdentConfig {
    fn setting(&self, id: ParamId) -> ([f64; 2], f64, f64) {
        match id {
            ParamId::PoissonRatio => (self.bounds_poisson, self.adam.lr_poisson, self.fd_step_poisson),
            ParamId::FrictionAngle => (self.bounds_friction, self.adam.lr_friction, self.fd_step_friction),
            _ => (self.bounds_log10, self.adam.lr_log, self.fd_step_log),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        for b in [self.bounds_log10, self.bounds_poisson, self.bounds_friction, self.bounds_velocity] {
            if !(b[0].is_finite() && b[1].is_finite() && b[0] < b[1]) {
                return Err(GicError::invalid(format!("invalid parameter bounds {b:?}")));
            }
        }
        for s in [self.fd_step_log, self.fd_step_poisson, self.fd_step_friction, self.fd_step_velocity] {
            if !(s > 0.0) {
                return Err(GicError::invalid(format!("fd step must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

/// One evaluated iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub iteration: usize,
    pub total: f64,
    pub chamfer: f64,
    pub mask: f64,
    /// Parameter values in natural units, keyed by name.
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentResult {
    pub material: MaterialKind,
    pub theta_init: MaterialSpec,
    pub theta_hat: MaterialSpec,
    pub v0_hat: Vec3,
    /// Loss of the velocity stage's best iterate, when that stage ran.
    pub velocity_loss: Option<f64>,
    pub loss_history: Vec<LossRecord>,
    pub best_iteration: usize,
    pub wall_time_s: f64,
    pub seed: u64,
    /// `|estimate − truth| × 100`, log10 for stiffness-like parameters.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mae_x100: Option<BTreeMap<String, f64>>,
}

impl IdentResult {
    pub fn best_loss(&self) -> f64 {
        self.loss_history
            .iter()
            .find(|r| r.iteration == self.best_iteration)
            .map_or(f64::INFINITY, |r| r.total)
    }

    pub fn initial_loss(&self) -> f64 {
        self.loss_history.first().map_or(f64::INFINITY, |r| r.total)
    }

    /// Fills `mae_x100` against ground truth.
    pub fn score_against(&mut self, truth: &MaterialSpec) {
        self.mae_x100 = Some(mae_x100(&self.theta_hat, truth));
    }
}

/// Per-parameter `|estimate − truth| × 100` in the optimization domain,
/// plus the initial-velocity components.
pub fn mae_x100(estimate: &MaterialSpec, truth: &MaterialSpec) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for &id in estimate.kind.identified_params() {
        let (a, b) = (id.get(estimate), id.get(truth));
        let err = if id.is_log_scaled() {
            (a.log10() - b.log10()).abs()
        } else {
            (a - b).abs()
        };
        let key = if id.is_log_scaled() {
            format!("log10_{}", id.name())
        } else {
            id.name().to_string()
        };
        out.insert(key, err * 100.0);
    }
    for (axis, name) in ["v0_x", "v0_y", "v0_z"].iter().enumerate() {
        out.insert(name.to_string(), (estimate.v0[axis] - truth.v0[axis]).abs() * 100.0);
    }
    out
}

/// Central finite-difference gradient. Probes are clamped to `bounds` when
/// given, and the difference is taken over the actual probe spacing. All
/// `2 n` probes run concurrently.
pub fn fd_gradient<F>(
    loss: F,
    theta: &[f64],
    steps: &[f64],
    bounds: Option<(&[f64], &[f64])>,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if steps.len() != theta.len() {
        return Err(GicError::invalid("one fd step per coordinate required"));
    }
    let probes: Vec<(usize, f64)> = (0..theta.len())
        .flat_map(|i| {
            let (mut lo, mut hi) = (theta[i] - steps[i], theta[i] + steps[i]);
            if let Some((lb, ub)) = bounds {
                lo = lo.max(lb[i]);
                hi = hi.min(ub[i]);
            }
            [(i, lo), (i, hi)]
        })
        .collect();
    let values: Vec<f64> = probes
        .par_iter()
        .map(|&(i, x)| {
            let mut p = theta.to_vec();
            p[i] = x;
            let diverged = || GicError::DivergedProbe {
                coordinate: i,
                name: format!("x[{i}] = {x}"),
            };
            match loss(&p) {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(_) => Err(diverged()),
                Err(e) if e.is_divergence() => Err(diverged()),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    Ok((0..theta.len())
        .map(|i| {
            let (lo, hi) = (probes[2 * i].1, probes[2 * i + 1].1);
            if hi > lo {
                (values[2 * i + 1] - values[2 * i]) / (hi - lo)
            } else {
                0.0
            }
        })
        .collect())
}

/// Simulates a material and renders soft masks to build an observation
/// whose frames share the simulator's timestamps.
pub fn synthesize_observation(
    gic: &GicParticleSet,
    mat: &MaterialSpec,
    sim: &SimConfig,
    cameras: &[Camera],
    frames: usize,
    binarize_masks: bool,
) -> Result<(Observation, Trajectory)> {
    let traj = rollout(gic, mat, sim, frames, sim.stable_dt(mat))?;
    let mut out = Vec::with_capacity(frames);
    for k in 0..traj.frame_count() {
        let moved = gic.with_positions(&traj.positions[k])?;
        let masks = cameras
            .iter()
            .map(|cam| {
                let m = render_mask(&moved, cam);
                if binarize_masks {
                    m.into_iter().map(|a| if a > 0.5 { 1.0 } else { 0.0 }).collect()
                } else {
                    m
                }
            })
            .collect();
        out.push(ObservedFrame {
            time: traj.times[k],
            surface: traj.surface_at(k),
            masks,
        });
    }
    Ok((
        Observation {
            cameras: cameras.to_vec(),
            frames: out,
        },
        traj,
    ))
}

fn rollout(gic: &GicParticleSet, mat: &MaterialSpec, sim: &SimConfig, frames: usize, dt: f64) -> Result<Trajectory> {
    simulate_with_dt(gic, mat, sim, frames, dt)
}

/// Evaluates the identification loss of a material on an observation.
pub fn evaluate_loss(
    obs: &Observation,
    gic: &GicParticleSet,
    mat: &MaterialSpec,
    sim: &SimConfig,
    mask_weight: f64,
) -> Result<LossBreakdown> {
    evaluate_with_dt(obs, gic, mat, sim, mask_weight, sim.stable_dt(mat))
}

fn evaluate_with_dt(
    obs: &Observation,
    gic: &GicParticleSet,
    mat: &MaterialSpec,
    sim: &SimConfig,
    mask_weight: f64,
    dt: f64,
) -> Result<LossBreakdown> {
    let traj = rollout(gic, mat, sim, obs.frames.len(), dt)?;
    rollout_loss(&traj, gic, obs, mask_weight)
}

/// Maps between a material and its vector of optimized coordinates.
struct ParamSpace {
    ids: Vec<ParamId>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    lr: Vec<f64>,
    fd: Vec<f64>,
}

impl ParamSpace {
    fn new(kind: MaterialKind, cfg: &IdentConfig) -> Self {
        let ids = kind.identified_params().to_vec();
        let mut s = Self {
            ids: ids.clone(),
            lo: Vec::new(),
            hi: Vec::new(),
            lr: Vec::new(),
            fd: Vec::new(),
        };
        for id in ids {
            let (b, lr, fd) = cfg.setting(id);
            s.lo.push(b[0]);
            s.hi.push(b[1]);
            s.lr.push(lr);
            s.fd.push(fd);
        }
        s
    }

    fn encode(&self, m: &MaterialSpec) -> Vec<f64> {
        self.ids
            .iter()
            .map(|id| {
                let v = id.get(m);
                if id.is_log_scaled() {
                    v.log10()
                } else {
                    v
                }
            })
            .collect()
    }

    fn decode(&self, x: &[f64], base: &MaterialSpec) -> MaterialSpec {
        let mut m = base.clone();
        for (id, &v) in self.ids.iter().zip(x) {
            id.set(&mut m, if id.is_log_scaled() { 10f64.powf(v) } else { v });
        }
        m
    }

    fn project(&self, x: &mut [f64]) {
        for i in 0..x.len() {
            x[i] = x[i].clamp(self.lo[i], self.hi[i]);
        }
    }

    fn named(&self, m: &MaterialSpec) -> BTreeMap<String, f64> {
        self.ids.iter().map(|id| (id.name().to_string(), id.get(m))).collect()
    }
}

/// Initial velocity implied by the centroid displacement between the first
/// two observed surfaces under free fall with `gravity`.
pub fn centroid_velocity(obs: &Observation, gravity: &Vec3) -> Result<Vec3> {
    if obs.frames.len() < 2 {
        return Err(GicError::invalid("velocity warm start needs two frames"));
    }
    let (a, b) = (&obs.frames[0], &obs.frames[1]);
    let ca = a.surface.centroid().ok_or_else(|| GicError::invalid("empty surface"))?;
    let cb = b.surface.centroid().ok_or_else(|| GicError::invalid("empty surface"))?;
    let dt = b.time - a.time;
    Ok((cb - ca) / dt - gravity * (0.5 * dt))
}

/// Estimates the initial velocity from the leading `cfg.velocity_frames`
/// frames with the material held at `mat_guess`. Starts from the centroid
/// displacement and refines with Adam; returns the best iterate and its loss.
pub fn estimate_velocity(
    obs: &Observation,
    gic: &GicParticleSet,
    mat_guess: &MaterialSpec,
    cfg: &IdentConfig,
) -> Result<(Vec3, f64)> {
    let n = cfg.velocity_frames;
    if n < 2 || obs.frames.len() < n {
        return Err(GicError::invalid(format!(
            "velocity estimation needs {n} >= 2 frames, observation has {}",
            obs.frames.len()
        )));
    }
    let sub = obs.truncated(n);
    let [lo, hi] = cfg.bounds_velocity;
    let mut v = centroid_velocity(&sub, &cfg.sim.gravity)?;
    let mut x: Vec<f64> = v.iter().map(|c| c.clamp(lo, hi)).collect();
    let dt = cfg.sim.stable_dt(mat_guess);
    let loss = |x: &[f64]| -> Result<f64> {
        let m = mat_guess.clone().with_velocity(Vec3::new(x[0], x[1], x[2]));
        Ok(evaluate_with_dt(&sub, gic, &m, &cfg.sim, cfg.mask_weight, dt)?.total)
    };
    let mut adam = Adam::new(vec![cfg.adam.lr_velocity; 3], cfg.adam.beta1, cfg.adam.beta2);
    let steps = [cfg.fd_step_velocity; 3];
    let (lb, ub) = ([lo; 3], [hi; 3]);
    let mut best = (x.clone(), loss(&x)?);
    let mut previous = best.1;
    for it in 0..cfg.adam.velocity_iterations {
        let current = if it == 0 { best.1 } else { loss(&x)? };
        if current < best.1 {
            best = (x.clone(), current);
        }
        if current > previous {
            adam.scale *= cfg.adam.backoff;
        }
        previous = current;
        let grad = fd_gradient(loss, &x, &steps, Some((&lb, &ub)))?;
        adam.step(&mut x, &grad);
        x.iter_mut().for_each(|c| *c = c.clamp(lo, hi));
    }
    if cfg.adam.velocity_iterations > 0 {
        let last = loss(&x)?;
        if last < best.1 {
            best = (x, last);
        }
    }
    v = Vec3::new(best.0[0], best.0[1], best.0[2]);
    Ok((v, best.1))
}

/// Two-stage physical parameter estimation: initial velocity from the
/// leading frames, then Adam on finite-difference gradients of the
/// full-horizon loss. Returns the best iterate seen.
pub fn identify(
    obs: &Observation,
    gic: &GicParticleSet,
    kind: MaterialKind,
    cfg: &IdentConfig,
) -> Result<IdentResult> {
    let started = Instant::now();
    obs.validate()?;
    cfg.validate()?;
    if gic.is_empty() {
        return Err(GicError::invalid("empty particle set"));
    }
    let space = ParamSpace::new(kind, cfg);

    let mut init = cfg.init.clone().unwrap_or_else(|| MaterialSpec::initial_guess(kind));
    if init.kind != kind {
        return Err(GicError::invalid(format!(
            "initial guess is {:?} but {:?} was requested",
            init.kind, kind
        )));
    }
    init.density = cfg.density;
    if cfg.init_jitter > 0.0 {
        let mut rng = crate::rng::substream(cfg.seed, "init");
        let mut x = space.encode(&init);
        for i in 0..x.len() {
            x[i] += cfg.init_jitter * (space.hi[i] - space.lo[i]) * rng.gen_range(-1.0..1.0);
        }
        space.project(&mut x);
        init = space.decode(&x, &init);
    }
    init.validate()?;

    // stage 1
    let mut velocity_loss = None;
    if cfg.velocity_frames >= 2 && obs.frames.len() >= cfg.velocity_frames {
        let (v0, l) = estimate_velocity(obs, gic, &init, cfg)?;
        init.v0 = v0;
        velocity_loss = Some(l);
    }

    // stage 2
    let mut x = space.encode(&init);
    space.project(&mut x);
    let base = init.clone();
    let mut lr_scale = 1.0;
    let mut adam = Adam::new(space.lr.clone(), cfg.adam.beta1, cfg.adam.beta2);
    let mut history = Vec::new();
    let mut best: Option<(Vec<f64>, f64, usize)> = None;

    let evaluate = |x: &[f64], dt: f64| -> Result<LossBreakdown> {
        evaluate_with_dt(obs, gic, &space.decode(x, &base), &cfg.sim, cfg.mask_weight, dt)
    };
    let record = |it: usize, x: &[f64], l: &LossBreakdown| LossRecord {
        iteration: it,
        total: l.total,
        chamfer: l.chamfer,
        mask: l.mask,
        params: space.named(&space.decode(x, &base)),
    };

    // gradient at the best iterate, reused when a step is rejected
    let mut best_grad: Option<Vec<f64>> = None;
    // The substep only ever shrinks: letting it follow every iterate makes
    // the per-frame substep count jump, which shows up as loss noise.
    let mut dt = cfg.sim.stable_dt(&init);
    for it in 0..=cfg.adam.iterations {
        let needed = cfg.sim.stable_dt(&space.decode(&x, &base));
        if needed < dt {
            dt = needed;
            // losses at the old substep are not comparable
            if let Some(b) = best.as_mut() {
                if let Ok(l) = evaluate(&b.0, dt) {
                    b.1 = l.total;
                }
                best_grad = None;
            }
        }
        let l = match evaluate(&x, dt) {
            Ok(l) if l.total.is_finite() => Some(l),
            Ok(_) | Err(GicError::Diverged { .. }) | Err(GicError::Cfl { .. }) if best.is_some() => None,
            Ok(_) => {
                return Err(GicError::IdentificationFailed(
                    "loss at the initial guess is not finite".into(),
                ))
            }
            Err(e) if e.is_divergence() => {
                return Err(GicError::IdentificationFailed(format!(
                    "rollout at the initial guess diverged: {e}"
                )))
            }
            Err(e) => return Err(e),
        };
        let improved = match (&l, &best) {
            (Some(l), Some(b)) => l.total < b.1,
            (Some(_), None) => true,
            (None, _) => false,
        };
        if let Some(l) = &l {
            history.push(record(it, &x, l));
        }
        if improved {
            best = Some((x.clone(), l.expect("improved").total, it));
            best_grad = None;
        } else {
            // reject the step: back to the best iterate with a shorter stride
            x = best.as_ref().expect("set on first iterate").0.clone();
            lr_scale *= cfg.adam.backoff;
            adam.reset();
        }
        if it == cfg.adam.iterations {
            break;
        }
        let g = match best_grad.clone().filter(|_| !improved) {
            Some(g) => g,
            None => {
                // probes share the center's substep so differences are not dt noise
                match fd_gradient(
                    |p: &[f64]| Ok(evaluate(p, dt)?.total),
                    &x,
                    &space.fd,
                    Some((&space.lo, &space.hi)),
                ) {
                    Ok(g) => g,
                    Err(GicError::DivergedProbe { .. }) => {
                        // shrink the stride and retry from the same point
                        lr_scale *= cfg.adam.backoff;
                        adam.reset();
                        continue;
                    }
                    Err(e) => return Err(e),
                }
            }
        };
        if improved {
            best_grad = Some(g.clone());
        }
        adam.scale = lr_scale;
        adam.step(&mut x, &g);
        space.project(&mut x);
    }

    let (bx, _, best_iteration) =
        best.ok_or_else(|| GicError::IdentificationFailed("no iterate could be evaluated".into()))?;
    Ok(IdentResult {
        material: kind,
        theta_init: init.clone(),
        theta_hat: space.decode(&bx, &base),
        v0_hat: init.v0,
        velocity_loss,
        loss_history: history,
        best_iteration,
        wall_time_s: started.elapsed().as_secs_f64(),
        seed: cfg.seed,
        mae_x100: None,
    })
}

/// Mean and standard deviation of each parameter over repeated runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub runs: usize,
    pub mean: BTreeMap<String, f64>,
    pub std: BTreeMap<String, f64>,
}

/// Runs [`identify`] once per seed and summarizes the estimates.
pub fn identify_repeated(
    obs: &Observation,
    gic: &GicParticleSet,
    kind: MaterialKind,
    cfg: &IdentConfig,
    seeds: &[u64],
) -> Result<(Vec<IdentResult>, RunSummary)> {
    let results = seeds
        .iter()
        .map(|&seed| {
            let mut c = cfg.clone();
            c.seed = seed;
            identify(obs, gic, kind, &c)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in &results {
        for &id in kind.identified_params() {
            values.entry(id.name().to_string()).or_default().push(id.get(&r.theta_hat));
        }
    }
    let n = results.len().max(1) as f64;
    let mean: BTreeMap<String, f64> = values.iter().map(|(k, v)| (k.clone(), v.iter().sum::<f64>() / n)).collect();
    let std = values
        .iter()
        .map(|(k, v)| {
            let m = mean[k];
            (k.clone(), (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
        })
        .collect();
    Ok((
        results,
        RunSummary {
            runs: seeds.len(),
            mean,
            std,
        },
    ))
}
