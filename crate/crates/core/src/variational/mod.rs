//! Ground-state search: alternating gradient descent on the Rayleigh
//! quotient or on the overlap with a target, and imaginary time evolution.

mod ite;

pub use ite::{
    apply_gate, imaginary_time, imaginary_time_observed, trotter_gate, truncation_sweep, weighted_truncate, EnergyMethod,
    IteRow, ItePlan, SweepRow,
};

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contraction::env::{DenseEnvironment, Sandwich};
use crate::contraction::BtnsEmbedding;
use crate::error::{bail, Error, Result};
use crate::graph::{snake_path, GraphKind};
use crate::models::Hamiltonian;
use crate::network::{random_map, ring_map_to_canonical, tns_evaluate, BtnsRep, Observable};
use crate::tensor::{inner, Tensor, C64};

/// Function minimized by [`gradient_descent`].
#[derive(Clone, Debug)]
pub enum Objective {
    /// Rayleigh quotient `⟨ψ|H|ψ⟩ / ⟨ψ|ψ⟩`.
    Energy(Hamiltonian),
    /// `1 − |⟨t|ψ⟩|² / ⟨ψ|ψ⟩` for a normalized target `t`.
    NegOverlap(Tensor),
}

impl Objective {
    /// Overlap objective; the target is normalized here.
    pub fn neg_overlap(target: &Tensor) -> Result<Self> {
        let n = target.norm();
        if n == 0.0 || !n.is_finite() {
            bail!(DegenerateState, "overlap target has zero norm");
        }
        Ok(Objective::NegOverlap(target.scale_real(1.0 / n)))
    }

    fn check(&self, rep: &BtnsRep) -> Result<()> {
        let shape = rep.shape();
        match self {
            Objective::Energy(h) => {
                if !h.shape().same_graph(shape) {
                    bail!(Argument, "Hamiltonian and representation live on different graphs");
                }
            }
            Objective::NegOverlap(t) => {
                if t.shape() != vec![shape.phys_dim(); shape.vertex_count()].as_slice() {
                    bail!(Dimension, "target shape {:?} does not match the network", t.shape());
                }
            }
        }
        Ok(())
    }

    /// Value and the dense vector `Y` with `∂f/∂conj(ψ) = Y`.
    fn value_and_direction(&self, psi: &Tensor) -> Result<(f64, Tensor)> {
        let n = psi.norm_sqr();
        if n == 0.0 || !n.is_finite() {
            bail!(DegenerateState, "state norm is {n}");
        }
        match self {
            Objective::Energy(h) => {
                let hpsi = h.apply(psi)?;
                let f = inner(psi, &hpsi)?.re / n;
                let mut y = hpsi;
                y.axpy(C64::new(-f, 0.0), psi)?;
                Ok((f, y.scale_real(1.0 / n)))
            }
            Objective::NegOverlap(t) => {
                let ov = inner(t, psi)?;
                let q = ov.norm_sqr() / n;
                let mut y = t.scale(-ov);
                y.axpy(C64::new(q, 0.0), psi)?;
                Ok((1.0 - q, y.scale_real(1.0 / n)))
            }
        }
    }

    fn value(&self, psi: &Tensor) -> Result<f64> {
        let n = psi.norm_sqr();
        if n == 0.0 || !n.is_finite() {
            bail!(DegenerateState, "state norm is {n}");
        }
        match self {
            Objective::Energy(h) => Ok(inner(psi, &h.apply(psi)?)?.re / n),
            Objective::NegOverlap(t) => Ok(1.0 - inner(t, psi)?.norm_sqr() / n),
        }
    }
}

/// Evaluates an objective and its gradient through the path embedding.
struct Engine<'a> {
    embedding: BtnsEmbedding,
    objective: &'a Objective,
}

impl<'a> Engine<'a> {
    fn new(rep: &BtnsRep, objective: &'a Objective) -> Result<Self> {
        objective.check(rep)?;
        let path = snake_path(rep.shape())?;
        let embedding = BtnsEmbedding::new(rep.shape(), rep.a(), rep.dloc(), &path)?;
        Ok(Engine { embedding, objective })
    }

    fn value(&self, rep: &BtnsRep) -> Result<f64> {
        let tns = self.embedding.embed(rep)?;
        if let Objective::Energy(h) = self.objective {
            let (energy, norm) = Sandwich::new(&tns, h)?.energy_and_norm()?;
            if norm == 0.0 || !norm.is_finite() {
                bail!(DegenerateState, "state norm is {norm}");
            }
            return Ok(energy / norm);
        }
        self.objective.value(&tns_evaluate(&tns)?)
    }

    /// Value and packed real gradients `∂f/∂Re B + i ∂f/∂Im B` for the
    /// requested vertices.
    fn value_and_gradient(&self, rep: &BtnsRep, vertices: &[usize]) -> Result<(f64, Vec<Tensor>)> {
        let tns = self.embedding.embed(rep)?;
        if let Objective::Energy(h) = self.objective {
            let (f, holes) = Sandwich::new(&tns, h)?.energy_holes()?;
            let grads = vertices
                .iter()
                .map(|&v| Ok(self.embedding.pullback(v, &holes[v])?.scale_real(2.0)))
                .collect::<Result<Vec<_>>>()?;
            return Ok((f, grads));
        }
        let env = DenseEnvironment::new(&tns)?;
        let (f, y) = self.objective.value_and_direction(env.state())?;
        let grads = vertices
            .iter()
            .map(|&v| Ok(self.embedding.pullback(v, &env.hole(v, &y)?)?.scale_real(2.0)))
            .collect::<Result<Vec<_>>>()?;
        Ok((f, grads))
    }
}

/// Objective value at `rep`.
pub fn objective_value(rep: &BtnsRep, objective: &Objective) -> Result<f64> {
    Engine::new(rep, objective)?.value(rep)
}

/// Objective value and per-vertex gradients.
///
/// Each gradient packs the real gradient with respect to the real and
/// imaginary parts of the map entries as `∂f/∂Re + i ∂f/∂Im`, so the
/// directional derivative along `V` is `Re Σ conj(G)·V`.
pub fn objective_and_gradient(rep: &BtnsRep, objective: &Objective) -> Result<(f64, Vec<Tensor>)> {
    let all: Vec<usize> = (0..rep.shape().vertex_count()).collect();
    Engine::new(rep, objective)?.value_and_gradient(rep, &all)
}

/// `E/N` and its gradient for a Hamiltonian; see [`objective_and_gradient`].
pub fn energy_and_gradient(rep: &BtnsRep, h: &Hamiltonian) -> Result<(f64, Vec<Tensor>)> {
    objective_and_gradient(rep, &Objective::Energy(h.clone()))
}

/// Gradient with respect to the shared `[phys, left, right, η]` map of a
/// translation-invariant ring representation.
pub fn translation_invariant_gradient(rep: &BtnsRep, per_vertex: &[Tensor]) -> Result<Tensor> {
    let mut total: Option<Tensor> = None;
    for (v, g) in per_vertex.iter().enumerate() {
        let c = ring_map_to_canonical(rep.shape(), v, g)?;
        match total.as_mut() {
            None => total = Some(c),
            Some(t) => t.axpy(C64::new(1.0, 0.0), &c)?,
        }
    }
    total.ok_or_else(|| Error::Argument("no vertices".into()))
}

/// Loop controls for [`gradient_descent`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    /// Initial trial step of the line search.
    pub step_size: f64,
    /// Backtracking factor in `(0, 1)`.
    pub armijo_factor: f64,
    /// Sufficient-decrease constant.
    pub armijo_c1: f64,
    pub max_halvings: usize,
    pub grad_tol: f64,
    /// Stop when an iteration changes the objective by less than this
    /// fraction of its magnitude.
    pub energy_rel_tol: f64,
    /// Seeds reinitialization of degenerate vertices.
    pub seed: u64,
    /// Optimize the single shared map of a ring.
    pub translation_invariant: bool,
    /// Start each line search from twice the last accepted step.
    pub adaptive_step: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iters: 200,
            step_size: 0.1,
            armijo_factor: 0.5,
            armijo_c1: 1e-4,
            max_halvings: 30,
            grad_tol: 1e-8,
            energy_rel_tol: 1e-12,
            seed: 0,
            translation_invariant: false,
            adaptive_step: true,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.armijo_factor > 0.0 && self.armijo_factor < 1.0) {
            bail!(Argument, "armijo_factor must lie in (0, 1)");
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            bail!(Argument, "step_size must be positive");
        }
        if !(self.grad_tol > 0.0 && self.energy_rel_tol > 0.0 && self.armijo_c1 > 0.0) {
            bail!(Argument, "tolerances must be positive");
        }
        Ok(())
    }
}

/// One row of an optimization trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub wall_ms: f64,
}

/// Rescales by the power of two nearest to `1/‖t‖`, which leaves every
/// scale-invariant objective bit-identical.
fn normalized(t: &Tensor) -> Tensor {
    let n = t.norm();
    if n > 0.0 && n.is_finite() {
        t.scale_real((-n.log2().round()).exp2())
    } else {
        t.clone()
    }
}

/// Armijo backtracking along `−g` from `x`; returns the accepted point,
/// its value and the step, or `None` when no trial decreases enough.
fn line_search(
    cfg: &OptimizerConfig,
    x: &Tensor,
    g: &Tensor,
    f0: f64,
    mut step: f64,
    mut eval: impl FnMut(&Tensor) -> Result<f64>,
) -> Result<Option<(Tensor, f64, f64)>> {
    let g2 = g.norm_sqr();
    for _ in 0..=cfg.max_halvings {
        let mut trial = x.clone();
        trial.axpy(C64::new(-step, 0.0), g)?;
        match eval(&trial) {
            Ok(f) if f.is_finite() && f <= f0 - cfg.armijo_c1 * step * g2 => return Ok(Some((trial, f, step))),
            Ok(_) | Err(Error::DegenerateState(_)) => {}
            Err(e) => return Err(e),
        }
        step *= cfg.armijo_factor;
    }
    Ok(None)
}

fn shared_map(rep: &BtnsRep) -> Result<Tensor> {
    let shape = rep.shape();
    if !matches!(shape.kind(), GraphKind::Ring { .. }) {
        bail!(Unsupported, "translation-invariant descent needs a ring");
    }
    let canon = ring_map_to_canonical(shape, 0, rep.map(0))?;
    let scale = canon.max_abs().max(f64::MIN_POSITIVE);
    for v in 1..shape.vertex_count() {
        let c = ring_map_to_canonical(shape, v, rep.map(v))?;
        if c.shape() != canon.shape() || c.sub(&canon)?.max_abs() > 1e-12 * scale {
            bail!(Argument, "representation is not translation invariant (vertex {v} differs)");
        }
    }
    Ok(canon)
}

fn with_shared_map(rep: &BtnsRep, canon: &Tensor) -> Result<BtnsRep> {
    BtnsRep::translation_invariant(rep.shape().clone(), rep.a(), rep.dloc(), canon)
}

fn converged(cfg: &OptimizerConfig, before: f64, after: f64) -> bool {
    (before - after).abs() <= cfg.energy_rel_tol * after.abs().max(f64::MIN_POSITIVE)
}

const MAX_REINITS: usize = 8;

/// Alternating gradient descent with Armijo backtracking.
///
/// Without translation invariance one iteration is a sweep of single-vertex
/// line searches; with it, each iteration updates the shared map using the
/// sum of the per-vertex gradients. Row 0 of the trace is the starting point.
pub fn gradient_descent(
    rep0: &BtnsRep,
    objective: &Objective,
    cfg: &OptimizerConfig,
) -> Result<(BtnsRep, Vec<TraceRow>)> {
    gradient_descent_observed(rep0, objective, cfg, &mut |_| {})
}

/// [`gradient_descent`] that hands each trace row to `observe` as soon as
/// it is recorded.
pub fn gradient_descent_observed(
    rep0: &BtnsRep,
    objective: &Objective,
    cfg: &OptimizerConfig,
    observe: &mut dyn FnMut(&TraceRow),
) -> Result<(BtnsRep, Vec<TraceRow>)> {
    cfg.validate()?;
    let engine = Engine::new(rep0, objective)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    if cfg.translation_invariant {
        descend_shared(rep0, &engine, cfg, &mut rng, observe)
    } else {
        descend_sweeps(rep0, &engine, cfg, &mut rng, observe)
    }
}

fn descend_shared(
    rep0: &BtnsRep,
    engine: &Engine,
    cfg: &OptimizerConfig,
    rng: &mut ChaCha8Rng,
    observe: &mut dyn FnMut(&TraceRow),
) -> Result<(BtnsRep, Vec<TraceRow>)> {
    let start = Instant::now();
    let n = rep0.shape().vertex_count();
    let all: Vec<usize> = (0..n).collect();
    let mut canon = normalized(&shared_map(rep0)?);
    let mut rep = with_shared_map(rep0, &canon)?;
    let mut reinits = 0;
    let (mut f, mut g) = loop {
        match engine.value_and_gradient(&rep, &all) {
            Ok((f, grads)) => break (f, translation_invariant_gradient(&rep, &grads)?),
            Err(Error::DegenerateState(msg)) if reinits < MAX_REINITS => {
                log::warn!("degenerate starting map ({msg}); reinitializing");
                reinits += 1;
                let fresh = random_map(rep.shape(), 1, rep.dloc(), rng);
                canon = normalized(&ring_map_to_canonical(rep.shape(), 1, &fresh)?);
                rep = with_shared_map(rep0, &canon)?;
            }
            Err(e) => return Err(e),
        }
    };
    let mut trace = vec![TraceRow { iter: 0, objective: f, grad_norm: g.norm(), wall_ms: 0.0 }];
    observe(&trace[0]);
    let mut step = cfg.step_size;
    for iter in 1..=cfg.max_iters {
        if g.norm() < cfg.grad_tol {
            break;
        }
        let found = line_search(cfg, &canon, &g, f, step, |c| engine.value(&with_shared_map(rep0, c)?))?;
        let Some((next, fnext, accepted)) = found else {
            log::debug!("line search found no decrease at iteration {iter}");
            break;
        };
        canon = normalized(&next);
        rep = with_shared_map(rep0, &canon)?;
        step = if cfg.adaptive_step { 2.0 * accepted } else { cfg.step_size };
        let before = f;
        let (_, grads) = engine.value_and_gradient(&rep, &all)?;
        f = fnext;
        g = translation_invariant_gradient(&rep, &grads)?;
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        trace.push(TraceRow { iter, objective: f, grad_norm: g.norm(), wall_ms });
        observe(trace.last().expect("just pushed"));
        if converged(cfg, before, f) {
            break;
        }
    }
    Ok((rep, trace))
}

fn descend_sweeps(
    rep0: &BtnsRep,
    engine: &Engine,
    cfg: &OptimizerConfig,
    rng: &mut ChaCha8Rng,
    observe: &mut dyn FnMut(&TraceRow),
) -> Result<(BtnsRep, Vec<TraceRow>)> {
    let start = Instant::now();
    let n = rep0.shape().vertex_count();
    let mut rep = rep0.clone();
    for v in 0..n {
        rep.set_map(v, normalized(rep.map(v)))?;
    }
    let all: Vec<usize> = (0..n).collect();
    let mut reinits = 0;
    let (mut f, grads) = loop {
        match engine.value_and_gradient(&rep, &all) {
            Ok(x) => break x,
            Err(Error::DegenerateState(msg)) if reinits < MAX_REINITS => {
                reinits += 1;
                let v = reinits % n;
                log::warn!("degenerate state ({msg}); reinitializing vertex {v}");
                rep.set_map(v, normalized(&random_map(rep.shape(), v, rep.dloc(), rng)))?;
            }
            Err(e) => return Err(e),
        }
    };
    let norm = |gs: &[Tensor]| gs.iter().map(|g| g.norm_sqr()).sum::<f64>().sqrt();
    let mut trace = vec![TraceRow { iter: 0, objective: f, grad_norm: norm(&grads), wall_ms: 0.0 }];
    observe(&trace[0]);
    let mut steps = vec![cfg.step_size; n];
    for iter in 1..=cfg.max_iters {
        let before = f;
        let mut sweep_sq = 0.0;
        let mut moved = false;
        for v in 0..n {
            let gv = match engine.value_and_gradient(&rep, &[v]) {
                Ok((_, mut gs)) => gs.remove(0),
                Err(Error::DegenerateState(msg)) => {
                    log::warn!("degenerate state ({msg}); reinitializing vertex {v}");
                    rep.set_map(v, normalized(&random_map(rep.shape(), v, rep.dloc(), rng)))?;
                    f = engine.value(&rep).unwrap_or(f64::INFINITY);
                    continue;
                }
                Err(e) => return Err(e),
            };
            sweep_sq += gv.norm_sqr();
            if gv.norm() < cfg.grad_tol {
                continue;
            }
            let current = rep.map(v).clone();
            let mut trial_rep = rep.clone();
            let found = line_search(cfg, &current, &gv, f, steps[v], |m| {
                trial_rep.set_map(v, m.clone())?;
                engine.value(&trial_rep)
            })?;
            if let Some((next, fnext, accepted)) = found {
                rep.set_map(v, normalized(&next))?;
                f = fnext;
                moved = true;
                steps[v] = if cfg.adaptive_step { 2.0 * accepted } else { cfg.step_size };
            }
        }
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        let grad_norm = sweep_sq.sqrt();
        trace.push(TraceRow { iter, objective: f, grad_norm, wall_ms });
        observe(trace.last().expect("just pushed"));
        if !moved || grad_norm < cfg.grad_tol || converged(cfg, before, f) {
            break;
        }
    }
    Ok((rep, trace))
}

#[cfg(test)]
mod tests;
