//! Imaginary time evolution with Trotterized two-site gates and truncation
//! in the weight-graded Frobenius norm.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::contraction::{border_rank_expectation, mps_strategy_expectation, InterpolationPlan};
use crate::error::{bail, Result};
use crate::graph::snake_path;
use crate::labeled::{Labeled, Leg};
use crate::linalg::{check_hermitian, expm_hermitian};
use crate::models::Hamiltonian;
use crate::network::{btns_evaluate, BtnsRep, Observable};
use crate::tensor::{inner, svd, Tensor, C64, ZERO};

/// Operator-Schmidt factors `(X_l, Y_l)` with `Σ X_l ⊗ Y_l = exp(−dt·H)`.
///
/// `h_edge` acts on `d²` states ordered (first site, second site). Each pair
/// is phase-fixed so the largest entry of `X_l` is real and positive.
pub fn trotter_gate(h_edge: &Tensor, dt: f64) -> Result<Vec<(Tensor, Tensor)>> {
    check_hermitian(h_edge, 1e-10)?;
    let n = h_edge.shape()[0];
    let d = (n as f64).sqrt().round() as usize;
    if d * d != n {
        bail!(Dimension, "edge operator of size {n} is not two-site");
    }
    let gate = expm_hermitian(h_edge, dt)?;
    // (i1 i2, j1 j2) -> (i1 j1, i2 j2)
    let shuffled = gate.reshape(&[d, d, d, d])?.permute(&[0, 2, 1, 3]).into_reshaped(&[d * d, d * d])?;
    let s = svd(&shuffled, &[0], &[1], None, 1e-14)?;
    let mut out = Vec::with_capacity(s.rank());
    for l in 0..s.rank() {
        let root = s.singular_values[l].sqrt();
        let mut x = Tensor::from_fn(&[d, d], |i| s.left.get(&[i[0] * d + i[1], l]) * root);
        let mut y = Tensor::from_fn(&[d, d], |i| s.right.get(&[l, i[0] * d + i[1]]) * root);
        let pivot = x.data().iter().copied().fold(ZERO, |best, z| if z.norm() > best.norm() + 1e-12 { z } else { best });
        if pivot.norm() > 0.0 {
            let phase = pivot / pivot.norm();
            x.scale_mut(phase.conj());
            y.scale_mut(phase);
        }
        out.push((x, y));
    }
    Ok(out)
}

fn map_legs(rep: &BtnsRep, v: usize) -> Vec<Leg> {
    let mut legs = vec![Leg::Phys(v)];
    legs.extend(rep.shape().incident_edges(v).iter().map(|&e| Leg::KetBond(e)));
    legs.push(Leg::Weight(v));
    legs
}

/// Absorbs the factors into the two endpoint maps of `edge`; the edge's
/// bond grows by the number of factor pairs.
pub fn apply_gate(rep: &BtnsRep, edge: usize, factors: &[(Tensor, Tensor)]) -> Result<BtnsRep> {
    let shape = rep.shape();
    if edge >= shape.edge_count() {
        bail!(Argument, "edge {edge} out of range");
    }
    let d = shape.phys_dim();
    if factors.is_empty() || factors.iter().any(|(x, y)| x.shape() != [d, d] || y.shape() != [d, d]) {
        bail!(Dimension, "gate factors must be nonempty {d}x{d} pairs");
    }
    let r = factors.len();
    let (u, v) = shape.edge(edge);
    let stack = |pick: &dyn Fn(&(Tensor, Tensor)) -> &Tensor| {
        Tensor::from_fn(&[r, d, d], |i| pick(&factors[i[0]]).get(&[i[1], i[2]]))
    };
    let xs = stack(&|p| &p.0);
    let ys = stack(&|p| &p.1);
    let mut maps = rep.maps().to_vec();
    for (w, ops) in [(u, &xs), (v, &ys)] {
        let map = rep.map(w);
        // [l, i, bonds..., η] with the operator applied on the physical index
        let applied = crate::tensor::contract(ops, map, &[(2, 0)])?;
        let slot = shape.bond_slot(w, edge).expect("endpoint");
        let k = map.rank();
        let mut perm = vec![1];
        for b in 0..k - 1 {
            perm.push(b + 2);
            if b == slot {
                perm.push(0);
            }
        }
        let moved = applied.permute(&perm);
        let mut new_shape = map.shape().to_vec();
        new_shape[1 + slot] *= r;
        maps[w] = moved.into_reshaped(&new_shape)?;
    }
    let mut bonds = shape.bond_dims().to_vec();
    bonds[edge] *= r;
    let mut out = rep.clone();
    out.replace(shape.with_bond_dims(bonds)?, maps)?;
    Ok(out)
}

/// Truncates the bond of `edge` to `target` by an SVD of the contracted
/// pair in which every entry is first scaled by `p^{η_u + η_v}`.
///
/// Exactly `min(target, rows, cols)` singular values are kept (zero padded
/// when the pair has lower rank). A target at or above the current bond
/// returns the input unchanged.
pub fn weighted_truncate(rep: &BtnsRep, edge: usize, target: usize, p: f64) -> Result<BtnsRep> {
    Ok(truncate_pair(rep, edge, target, p, false)?.0)
}

/// [`weighted_truncate`] that also returns the kept singular values of the
/// rescaled pair, zero padded to `target`; `None` when nothing was cut.
///
/// With `drop_excess`, entries whose two weight indices sum past `a` are
/// zeroed first. They never reach the state, so the cut spends no rank on
/// them.
fn truncate_pair(
    rep: &BtnsRep,
    edge: usize,
    target: usize,
    p: f64,
    drop_excess: bool,
) -> Result<(BtnsRep, Option<Vec<f64>>)> {
    let shape = rep.shape();
    if edge >= shape.edge_count() {
        bail!(Argument, "edge {edge} out of range");
    }
    if !(p > 0.0 && p <= 1.0) {
        bail!(Argument, "weight parameter p = {p} must lie in (0, 1]");
    }
    if target == 0 {
        bail!(Argument, "target bond must be positive");
    }
    if target >= shape.bond_dim(edge) {
        return Ok((rep.clone(), None));
    }
    let (u, v) = shape.edge(edge);
    let lu = Labeled::new(rep.map(u).clone(), map_legs(rep, u));
    let lv = Labeled::new(rep.map(v).clone(), map_legs(rep, v));
    let theta = lu.contract(&lv)?;
    let u_legs: Vec<Leg> = map_legs(rep, u).into_iter().filter(|&l| l != Leg::KetBond(edge)).collect();
    let v_legs: Vec<Leg> = map_legs(rep, v).into_iter().filter(|&l| l != Leg::KetBond(edge)).collect();
    let order: Vec<Leg> = u_legs.iter().chain(&v_legs).copied().collect();
    let mut theta = theta.into_order(&order);
    let (nu, nv) = (u_legs.len(), v_legs.len());
    let scale = |eta: usize| p.powi(eta as i32);
    // weight indices are last on each side
    let dims = theta.shape().to_vec();
    let mut idx = vec![0usize; dims.len()];
    for z in theta.data_mut() {
        let eta = idx[nu - 1] + idx[nu + nv - 1];
        *z *= if drop_excess && eta > rep.a() { 0.0 } else { scale(eta) };
        crate::tensor::increment(&mut idx, &dims);
    }
    let rows: Vec<usize> = (0..nu).collect();
    let cols: Vec<usize> = (nu..nu + nv).collect();
    let s = svd(&theta, &rows, &cols, Some(target), 0.0)?;
    let rank = s.rank();
    let left_ext = &dims[..nu];
    let right_ext = &dims[nu..];
    let a = Tensor::from_fn(&[left_ext, &[target][..]].concat(), |i| {
        let k = i[nu];
        if k >= rank {
            return ZERO;
        }
        let mut li = i[..nu].to_vec();
        li.push(k);
        s.left.get(&li) * (s.singular_values[k].sqrt() / scale(i[nu - 1]))
    });
    let b = Tensor::from_fn(&[&[target][..], right_ext].concat(), |i| {
        let k = i[0];
        if k >= rank {
            return ZERO;
        }
        s.right.get(i) * (s.singular_values[k].sqrt() / scale(i[nv]))
    });
    let mut legs_a = u_legs.clone();
    legs_a.push(Leg::KetBond(edge));
    let mut legs_b = vec![Leg::KetBond(edge)];
    legs_b.extend(v_legs.iter().copied());
    let new_u = Labeled::new(a, legs_a).into_order(&map_legs(rep, u));
    let new_v = Labeled::new(b, legs_b).into_order(&map_legs(rep, v));
    let mut maps = rep.maps().to_vec();
    maps[u] = new_u;
    maps[v] = new_v;
    let mut bonds = shape.bond_dims().to_vec();
    bonds[edge] = target;
    let mut out = rep.clone();
    out.replace(shape.with_bond_dims(bonds)?, maps)?;
    let mut kept = s.singular_values.clone();
    kept.resize(target, 0.0);
    Ok((out, Some(kept)))
}

/// Multiplies the map of `v` along the bond of `edge` by `w`.
fn scale_bond(rep: &BtnsRep, v: usize, edge: usize, w: &[f64]) -> Tensor {
    let axis = 1 + rep.shape().bond_slot(v, edge).expect("incident edge");
    let mut m = rep.map(v).clone();
    let dims = m.shape().to_vec();
    let mut idx = vec![0usize; dims.len()];
    for z in m.data_mut() {
        *z *= w[idx[axis]];
        crate::tensor::increment(&mut idx, &dims);
    }
    m
}

/// Truncates `edge` with the spectra of the neighbouring bonds taken into
/// account. Maps are kept in the symmetric gauge, each carrying `√λ` on
/// every bond, so one more `√λ` on the outer bonds gives the pair its full
/// bond weights; the factor is removed again after the cut.
pub(crate) fn weighted_simple_update(
    rep: &BtnsRep,
    edge: usize,
    target: usize,
    p: f64,
    lambdas: &mut [Vec<f64>],
) -> Result<BtnsRep> {
    let (u, v) = rep.shape().edge(edge);
    let outer = |x: usize| -> Vec<usize> { rep.shape().incident_edges(x).iter().copied().filter(|&f| f != edge).collect() };
    let sqrt = |l: &[f64]| -> Vec<f64> { l.iter().map(|x| x.sqrt()).collect() };
    let inv_sqrt = |l: &[f64]| -> Vec<f64> {
        let top = l.iter().cloned().fold(0.0, f64::max);
        l.iter().map(|&x| if x > LAMBDA_FLOOR * top { 1.0 / x.sqrt() } else { 0.0 }).collect()
    };
    let mut work = rep.clone();
    for x in [u, v] {
        for f in outer(x) {
            let m = scale_bond(&work, x, f, &sqrt(&lambdas[f]));
            work.set_map(x, m)?;
        }
    }
    let (mut out, kept) = truncate_pair(&work, edge, target, p, true)?;
    for x in [u, v] {
        for f in outer(x) {
            let m = scale_bond(&out, x, f, &inv_sqrt(&lambdas[f]));
            out.set_map(x, m)?;
        }
    }
    lambdas[edge] = match kept {
        Some(s) => {
            let top = s.iter().cloned().fold(0.0, f64::max);
            if top > 0.0 {
                s.iter().map(|x| x / top).collect()
            } else {
                s
            }
        }
        None => vec![1.0; out.shape().bond_dim(edge)],
    };
    Ok(out)
}

/// How [`imaginary_time`] evaluates energies and norms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyMethod {
    /// Dense state.
    #[default]
    Exact,
    MpsStrategy,
    BorderRank,
}

/// One row of [`truncation_sweep`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub p: f64,
    /// `|⟨ψ|ψ_p⟩|² / (‖ψ‖²‖ψ_p‖²)`, zero when the truncated state vanishes.
    pub fidelity: f64,
    pub norm_ratio: f64,
}

/// Truncates `edge` to `target` for each `p` and compares the result with
/// the untruncated state, so the best weighting can be picked per case.
pub fn truncation_sweep(rep: &BtnsRep, edge: usize, target: usize, ps: &[f64]) -> Result<Vec<SweepRow>> {
    let psi = btns_evaluate(rep)?;
    let n0 = psi.norm();
    if n0 == 0.0 {
        bail!(DegenerateState, "cannot compare against a zero state");
    }
    ps.iter()
        .map(|&p| {
            let out = btns_evaluate(&weighted_truncate(rep, edge, target, p)?)?;
            let n = out.norm();
            let fidelity = if n > 0.0 { inner(&psi, &out)?.norm_sqr() / (n0 * n0 * n * n) } else { 0.0 };
            Ok(SweepRow { p, fidelity, norm_ratio: n / n0 })
        })
        .collect()
}

/// Imaginary time evolution schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItePlan {
    pub dt: f64,
    pub sweeps: usize,
    pub target_bond: usize,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_true")]
    pub renormalize: bool,
    #[serde(default)]
    pub energy_method: EnergyMethod,
    /// Weight each truncation by the spectra of the neighbouring bonds
    /// (simple update). Off gives the bare pair truncation.
    #[serde(default = "default_true")]
    pub bond_weights: bool,
}

fn default_p() -> f64 {
    0.9
}

fn default_true() -> bool {
    true
}

impl ItePlan {
    pub fn new(dt: f64, sweeps: usize, target_bond: usize, p: f64) -> Result<Self> {
        let plan = ItePlan {
            dt,
            sweeps,
            target_bond,
            p,
            renormalize: true,
            energy_method: EnergyMethod::Exact,
            bond_weights: true,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            bail!(Argument, "time step must be positive");
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            bail!(Argument, "weight parameter p must lie in (0, 1]");
        }
        if self.target_bond == 0 {
            bail!(Argument, "target bond must be positive");
        }
        Ok(())
    }
}

/// One row of an imaginary-time trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IteRow {
    pub sweep: usize,
    pub energy: f64,
    pub bond_max: usize,
    pub wall_ms: f64,
}

/// `(⟨ψ|H|ψ⟩, ⟨ψ|ψ⟩)` by the chosen method.
fn energy_and_norm(rep: &BtnsRep, h: &Hamiltonian, method: EnergyMethod) -> Result<(f64, f64)> {
    let (e, n) = match method {
        EnergyMethod::Exact => {
            let psi = btns_evaluate(rep)?;
            (inner(&psi, &h.apply(&psi)?)?, C64::new(psi.norm_sqr(), 0.0))
        }
        EnergyMethod::MpsStrategy => {
            let path = snake_path(rep.shape())?;
            (mps_strategy_expectation(rep, &path, Some(h))?, mps_strategy_expectation(rep, &path, None)?)
        }
        EnergyMethod::BorderRank => {
            let plan = InterpolationPlan::for_rep(rep);
            (border_rank_expectation(rep, Some(h), &plan)?, border_rank_expectation(rep, None, &plan)?)
        }
    };
    Ok((e.re, n.re))
}

const COLLAPSE: f64 = 1e-30;
/// Bond weights below this fraction of the largest are treated as zero
/// when the simple-update gauge is undone.
const LAMBDA_FLOOR: f64 = 1e-12;

/// First-order Trotterized imaginary time evolution.
///
/// Each sweep applies `exp(−dt·h_e)` on every edge in ascending order, each
/// followed by a weighted truncation back to the target bond. Row 0 of the
/// trace is the starting state.
pub fn imaginary_time(rep0: &BtnsRep, h: &Hamiltonian, plan: &ItePlan) -> Result<(BtnsRep, Vec<IteRow>)> {
    imaginary_time_observed(rep0, h, plan, &mut |_| {})
}

/// [`imaginary_time`] that hands each trace row to `observe` as soon as it
/// is recorded.
pub fn imaginary_time_observed(
    rep0: &BtnsRep,
    h: &Hamiltonian,
    plan: &ItePlan,
    observe: &mut dyn FnMut(&IteRow),
) -> Result<(BtnsRep, Vec<IteRow>)> {
    plan.validate()?;
    if !h.shape().same_graph(rep0.shape()) {
        bail!(Argument, "Hamiltonian and representation live on different graphs");
    }
    if !h.is_edge_local() {
        bail!(Unsupported, "imaginary time evolution needs two-site terms on edges");
    }
    let start = Instant::now();
    let gates = (0..h.shape().edge_count())
        .map(|e| trotter_gate(&h.edge_matrix(e)?, plan.dt))
        .collect::<Result<Vec<_>>>()?;
    let mut rep = rep0.clone();
    let mut lambdas: Vec<Vec<f64>> = rep.shape().bond_dims().iter().map(|&d| vec![1.0; d]).collect();
    let measure = |rep: &BtnsRep| -> Result<(f64, f64)> {
        let (e, n) = energy_and_norm(rep, h, plan.energy_method)?;
        if !(n > COLLAPSE) || !n.is_finite() {
            bail!(Collapse, "state norm² {n:e} collapsed");
        }
        Ok((e / n, n))
    };
    let (e0, _) = measure(&rep)?;
    let mut trace = vec![IteRow { sweep: 0, energy: e0, bond_max: rep.shape().max_bond(), wall_ms: 0.0 }];
    observe(&trace[0]);
    for sweep in 1..=plan.sweeps {
        for (e, factors) in gates.iter().enumerate() {
            rep = apply_gate(&rep, e, factors)?;
            rep = if plan.bond_weights {
                weighted_simple_update(&rep, e, plan.target_bond, plan.p, &mut lambdas)?
            } else {
                weighted_truncate(&rep, e, plan.target_bond, plan.p)?
            };
        }
        let (energy, norm_sq) = measure(&rep)?;
        if plan.renormalize {
            let m = rep.map(0).scale_real(1.0 / norm_sq.sqrt());
            rep.set_map(0, m)?;
        }
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        trace.push(IteRow { sweep, energy, bond_max: rep.shape().max_bond(), wall_ms });
        observe(trace.last().expect("just pushed"));
    }
    Ok((rep, trace))
}
