//! Expectation values of augmented networks: the path embedding, the
//! border-rank interpolation, and transfer matrices for rings and chains.

mod embed;
pub(crate) mod env;

pub use embed::{embed_mps_strategy, BtnsEmbedding};

use rayon::prelude::*;

use crate::error::{bail, Result};
use crate::graph::{GraphKind, PathCover};
use crate::labeled::{Labeled, Leg};
use crate::models::{Hamiltonian, LocalTerm};
use crate::network::{to_line_form, BtnsRep, TnsRep};
use crate::tensor::{contract, Tensor, C64, ZERO};

/// Sample points for recovering `p(0)` from values on the unit circle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InterpolationPlan {
    k: usize,
    degree_bound: usize,
    scale_degree: usize,
}

impl InterpolationPlan {
    pub fn new(k: usize, degree_bound: usize, scale_degree: usize) -> Result<Self> {
        if k < degree_bound + 1 {
            bail!(Argument, "{k} nodes cannot resolve a polynomial of degree {degree_bound}");
        }
        Ok(InterpolationPlan { k, degree_bound, scale_degree })
    }

    /// Smallest plan for `rep`: degree bound `2(L·dloc − a)`, scale `2a`.
    pub fn for_rep(rep: &BtnsRep) -> Self {
        let degree_bound = 2 * (rep.shape().vertex_count() * rep.dloc() - rep.a());
        InterpolationPlan { k: degree_bound + 1, degree_bound, scale_degree: 2 * rep.a() }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn degree_bound(&self) -> usize {
        self.degree_bound
    }

    pub fn scale_degree(&self) -> usize {
        self.scale_degree
    }

    /// `exp(2πij/k)` for `j = 0..k`.
    pub fn nodes(&self) -> Vec<C64> {
        roots_of_unity(self.k)
    }
}

fn roots_of_unity(k: usize) -> Vec<C64> {
    (0..k).map(|j| C64::from_polar(1.0, std::f64::consts::TAU * j as f64 / k as f64)).collect()
}

/// `(1/k) Σ_j z_j^{−scale_degree} c_j` over the `k = samples.len()` roots of unity.
///
/// For samples of `z^{scale} p(z)` with `deg p < k` this is `p(0)`, and noisy
/// samples within `δ` give a result within `δ`.
pub fn stable_interpolate(samples: &[C64], scale_degree: usize) -> C64 {
    let k = samples.len();
    if k == 0 {
        return ZERO;
    }
    let sum: C64 = samples
        .iter()
        .enumerate()
        .map(|(j, &c)| {
            let power = (j * scale_degree) % k;
            c * C64::from_polar(1.0, -std::f64::consts::TAU * power as f64 / k as f64)
        })
        .sum();
    sum / k as f64
}

fn site_legs(rep: &TnsRep, v: usize, phys: Leg, bond: fn(usize) -> Leg) -> Vec<Leg> {
    let mut legs = vec![phys];
    legs.extend(rep.shape().incident_edges(v).iter().map(|&e| bond(e)));
    legs
}

/// `⟨bra|O|ket⟩` for a local term `O` (identity when `None`), contracting
/// the sandwich network vertex by vertex without forming the state.
pub fn tns_sandwich(bra: &TnsRep, ket: &TnsRep, term: Option<&LocalTerm>) -> Result<C64> {
    let (bs, ks) = (bra.shape(), ket.shape());
    if !bs.same_graph(ks) {
        bail!(Argument, "bra and ket live on different graphs");
    }
    let n = ks.vertex_count();
    let d = ks.phys_dim();
    let support: &[usize] = term.map(|t| t.support.as_slice()).unwrap_or(&[]);
    if support.iter().any(|&s| s >= n) {
        bail!(Argument, "term support {support:?} out of range");
    }
    let anchor = support.iter().copied().min();
    let mut acc = Labeled::scalar_one();
    for v in 0..n {
        acc = acc.contract(&Labeled::new(ket.map(v).clone(), site_legs(ket, v, Leg::Phys(v), Leg::KetBond)))?;
        if anchor == Some(v) {
            let term = term.expect("anchor implies term");
            let k = support.len();
            let op = term.matrix.reshape(&vec![d; 2 * k])?;
            let mut legs: Vec<Leg> = support.iter().map(|&s| Leg::Out(s)).collect();
            legs.extend(support.iter().map(|&s| Leg::Phys(s)));
            acc = acc.contract(&Labeled::new(op, legs))?;
        }
        let phys = if support.contains(&v) { Leg::Out(v) } else { Leg::Phys(v) };
        acc = acc.contract(&Labeled::new(bra.map(v).conj(), site_legs(bra, v, phys, Leg::BraBond)))?;
    }
    acc.t.as_scalar().ok_or_else(|| crate::error::Error::Internal("sandwich left open legs".into()))
}

/// `⟨bra|H|ket⟩` (or `⟨bra|ket⟩`) summed term by term.
pub fn tns_expectation(bra: &TnsRep, ket: &TnsRep, obs: Option<&Hamiltonian>) -> Result<C64> {
    match obs {
        None => tns_sandwich(bra, ket, None),
        Some(h) => {
            let parts: Vec<C64> =
                h.terms().par_iter().map(|t| tns_sandwich(bra, ket, Some(t))).collect::<Result<_>>()?;
            Ok(parts.into_iter().sum())
        }
    }
}

/// Unnormalized `⟨ψ|O|ψ⟩` of an augmented network through its path embedding.
pub fn mps_strategy_expectation(rep: &BtnsRep, path: &PathCover, obs: Option<&Hamiltonian>) -> Result<C64> {
    let tns = embed_mps_strategy(rep, path)?;
    tns_expectation(&tns, &tns, obs)
}

/// `(−1)^{a−j} C(a, j) / a!` for `j = 0..=a`.
fn curve_coefficients(a: usize) -> Vec<f64> {
    let fact: f64 = (1..=a).map(|k| k as f64).product();
    let mut binom = 1.0;
    (0..=a)
        .map(|j| {
            if j > 0 {
                binom = binom * (a + 1 - j) as f64 / j as f64;
            }
            let sign = if (a - j) % 2 == 0 { 1.0 } else { -1.0 };
            sign * binom / fact
        })
        .collect()
}

fn phi(x: C64, dloc: usize) -> Vec<C64> {
    (0..=dloc).map(|i| x.powi(i as i32)).collect()
}

/// Unnormalized `⟨ψ|O|ψ⟩` by interpolating `ε^{−2a}⟨φ(ε̄)|Oφ(ε)⟩` over
/// the plan's nodes, where `φ(ε)` replaces the weight state by its
/// border-rank curve of `a + 1` product terms.
pub fn border_rank_expectation(rep: &BtnsRep, obs: Option<&Hamiltonian>, plan: &InterpolationPlan) -> Result<C64> {
    let needed = InterpolationPlan::for_rep(rep);
    if plan.k() < needed.degree_bound() + 1 {
        bail!(Argument, "plan has {} nodes; this representation needs at least {}", plan.k(), needed.k());
    }
    if plan.scale_degree() != needed.scale_degree() {
        bail!(Argument, "plan scale degree {} does not match 2a = {}", plan.scale_degree(), needed.scale_degree());
    }
    let a = rep.a();
    let n = rep.shape().vertex_count();
    let coeff = curve_coefficients(a);
    let product = |x: C64| rep.contract_weight(&vec![phi(x, rep.dloc()); n]);
    let samples: Vec<C64> = plan
        .nodes()
        .par_iter()
        .map(|&z| {
            let kets: Vec<TnsRep> = (0..=a).map(|j| product(z * j as f64)).collect();
            let bras: Vec<TnsRep> = (0..=a).map(|j| product(z.conj() * j as f64)).collect();
            let mut total = ZERO;
            for (j, bra) in bras.iter().enumerate() {
                for (jp, ket) in kets.iter().enumerate() {
                    total += coeff[j] * coeff[jp] * tns_expectation(bra, ket, obs)?;
                }
            }
            Ok(total)
        })
        .collect::<Result<_>>()?;
    Ok(stable_interpolate(&samples, plan.scale_degree()))
}

/// Transfer operator `Σ conj(B[i', l', r']) O[i', i] K[i, l, r]` as a
/// `(l l') x (r r')` matrix.
fn transfer(bra: &Tensor, ket: &Tensor, op: Option<&Tensor>) -> Result<Tensor> {
    let ket = match op {
        Some(o) => contract(o, ket, &[(1, 0)])?,
        None => ket.clone(),
    };
    let e = contract(&bra.conj(), &ket, &[(0, 0)])?; // [l', r', l, r]
    let (lb, rb, lk, rk) = (bra.shape()[1], bra.shape()[2], ket.shape()[1], ket.shape()[2]);
    e.permute(&[2, 0, 3, 1]).into_reshaped(&[lk * lb, rk * rb])
}

/// `⟨bra|⊗O_v|ket⟩` for networks on rings or chains by multiplying transfer
/// matrices in vertex order; `ops[v]` is a `d x d` matrix.
pub fn transfer_matrix_overlap(bra: &TnsRep, ket: &TnsRep, ops: Option<&[Tensor]>) -> Result<C64> {
    let (bs, ks) = (bra.shape(), ket.shape());
    if !bs.same_graph(ks) {
        bail!(Argument, "bra and ket shapes are incompatible");
    }
    if !matches!(ks.kind(), GraphKind::Ring { .. } | GraphKind::Chain { .. }) {
        bail!(Unsupported, "transfer matrices need a ring or chain");
    }
    let n = ks.vertex_count();
    let d = ks.phys_dim();
    if let Some(ops) = ops {
        if ops.len() != n || ops.iter().any(|o| o.shape() != [d, d]) {
            bail!(Dimension, "need one {d}x{d} operator per site");
        }
    }
    let mut acc: Option<Tensor> = None;
    for v in 0..n {
        let t = transfer(&to_line_form(bs, v, bra.map(v))?, &to_line_form(ks, v, ket.map(v))?, ops.map(|o| &o[v]))?;
        acc = Some(match acc {
            None => t,
            Some(m) => contract(&m, &t, &[(1, 0)])?,
        });
    }
    let m = acc.expect("at least one vertex");
    Ok((0..m.shape()[0]).map(|i| m.get(&[i, i])).sum())
}

/// `⟨φ|ψ⟩ / ‖φ‖‖ψ‖` helper used by callers that need normalized fidelities.
pub fn fidelity(a: &Tensor, b: &Tensor) -> Result<f64> {
    let ov = crate::tensor::inner(a, b)?;
    let n = a.norm() * b.norm();
    if n == 0.0 {
        bail!(DegenerateState, "fidelity with a zero state");
    }
    Ok((ov.norm() / n).powi(2))
}
