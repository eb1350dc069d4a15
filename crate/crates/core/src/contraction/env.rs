//! Environments of a plain network: the state with one map removed,
//! contracted against a dense vector or against the conjugate network.

use crate::error::{bail, Error, Result};
use crate::labeled::{Labeled, Leg};
use crate::models::{Hamiltonian, LocalTerm};
use crate::network::{TnsRep, DEFAULT_STATE_CAP};
use crate::tensor::{Tensor, C64};

/// Prefix and suffix contractions of a plain network in vertex order.
pub(crate) struct DenseEnvironment {
    legs: Vec<Vec<Leg>>,
    prefix: Vec<Labeled>,
    suffix: Vec<Labeled>,
    state: Tensor,
}

impl DenseEnvironment {
    pub fn new(rep: &TnsRep) -> Result<Self> {
        let shape = rep.shape();
        let n = shape.vertex_count();
        if shape.state_len().is_none_or(|s| s > DEFAULT_STATE_CAP) {
            bail!(Resource, "dense environments need at most {DEFAULT_STATE_CAP} amplitudes");
        }
        let legs: Vec<Vec<Leg>> = (0..n)
            .map(|v| {
                let mut l = vec![Leg::Phys(v)];
                l.extend(shape.incident_edges(v).iter().map(|&e| Leg::KetBond(e)));
                l
            })
            .collect();
        let site = |v: usize| Labeled::new(rep.map(v).clone(), legs[v].clone());
        let mut prefix = vec![Labeled::scalar_one()];
        for v in 0..n {
            let next = prefix[v].contract(&site(v))?;
            prefix.push(next);
        }
        let mut suffix = vec![Labeled::scalar_one()];
        for v in (0..n).rev() {
            let next = site(v).contract(suffix.last().expect("nonempty"))?;
            suffix.push(next);
        }
        suffix.reverse();
        let order: Vec<Leg> = (0..n).map(Leg::Phys).collect();
        let state = prefix[n].clone().into_order(&order);
        for p in prefix.iter_mut().chain(suffix.iter_mut()) {
            p.t = p.t.conj();
        }
        Ok(DenseEnvironment { legs, prefix, suffix, state })
    }

    pub fn state(&self) -> &Tensor {
        &self.state
    }

    /// `Σ conj(env_v) · y` over every physical index but `v`, shaped like map `v`.
    pub fn hole(&self, v: usize, y: &Tensor) -> Result<Tensor> {
        let n = self.state.rank();
        let y = Labeled::new(y.clone(), (0..n).map(Leg::Phys).collect());
        let h = y.contract(&self.prefix[v])?.contract(&self.suffix[v + 1])?;
        Ok(h.into_order(&self.legs[v]))
    }
}

/// Vertex-order contraction of `⟨ψ|H|ψ⟩` for every term at once.
///
/// Plain prefixes and suffixes are shared; a term only needs its own
/// partial contractions across the vertex span `[min, max]` of its support,
/// after which it is folded into a running sum with plain legs.
pub(crate) struct Sandwich<'a> {
    rep: &'a TnsRep,
    terms: Vec<(&'a LocalTerm, Labeled, usize, usize)>,
}

fn add(acc: &mut Option<Labeled>, x: Labeled) -> Result<()> {
    match acc {
        None => *acc = Some(x),
        Some(a) => {
            let x = x.into_order(&a.legs);
            a.t.axpy(C64::new(1.0, 0.0), &x)?;
        }
    }
    Ok(())
}

impl<'a> Sandwich<'a> {
    pub fn new(rep: &'a TnsRep, h: &'a Hamiltonian) -> Result<Self> {
        let n = rep.shape().vertex_count();
        let d = rep.shape().phys_dim();
        let terms = h
            .terms()
            .iter()
            .map(|t| {
                let (lo, hi) = match (t.support.iter().min(), t.support.iter().max()) {
                    (Some(&lo), Some(&hi)) if hi < n => (lo, hi),
                    _ => bail!(Argument, "term support {:?} out of range", t.support),
                };
                let mut legs: Vec<Leg> = t.support.iter().map(|&s| Leg::Out(s)).collect();
                legs.extend(t.support.iter().map(|&s| Leg::Phys(s)));
                let op = Labeled::new(t.matrix.reshape(&vec![d; 2 * t.support.len()])?, legs);
                Ok((t, op, lo, hi))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Sandwich { rep, terms })
    }

    fn ket(&self, v: usize) -> Labeled {
        let legs = std::iter::once(Leg::Phys(v))
            .chain(self.rep.shape().incident_edges(v).iter().map(|&e| Leg::KetBond(e)))
            .collect();
        Labeled::new(self.rep.map(v).clone(), legs)
    }

    fn bra_legs(&self, v: usize, support: &[usize]) -> Vec<Leg> {
        let phys = if support.contains(&v) { Leg::Out(v) } else { Leg::Phys(v) };
        std::iter::once(phys).chain(self.rep.shape().incident_edges(v).iter().map(|&e| Leg::BraBond(e))).collect()
    }

    fn bra(&self, v: usize, support: &[usize]) -> Labeled {
        Labeled::new(self.rep.map(v).conj(), self.bra_legs(v, support))
    }

    fn plain_prefixes(&self) -> Result<Vec<Labeled>> {
        let n = self.rep.shape().vertex_count();
        let mut p = vec![Labeled::scalar_one()];
        for v in 0..n {
            let next = p[v].contract(&self.ket(v))?.contract(&self.bra(v, &[]))?;
            p.push(next);
        }
        Ok(p)
    }

    fn plain_suffixes(&self) -> Result<Vec<Labeled>> {
        let n = self.rep.shape().vertex_count();
        let mut q = vec![Labeled::scalar_one()];
        for v in (0..n).rev() {
            let next = q.last().expect("nonempty").contract(&self.ket(v))?.contract(&self.bra(v, &[]))?;
            q.push(next);
        }
        q.reverse();
        Ok(q)
    }

    /// `x[v]` for `v` in `lo + 1..=hi + 1`: the prefix through vertex `v − 1`
    /// with term `k` inserted, indexed from `lo + 1`.
    fn term_prefixes(&self, k: usize, p: &[Labeled]) -> Result<Vec<Labeled>> {
        let (t, op, lo, hi) = &self.terms[k];
        let mut x = vec![p[*lo].contract(&self.ket(*lo))?.contract(op)?.contract(&self.bra(*lo, &t.support))?];
        for v in lo + 1..=*hi {
            let next = x.last().expect("nonempty").contract(&self.ket(v))?.contract(&self.bra(v, &t.support))?;
            x.push(next);
        }
        Ok(x)
    }

    /// `z[v]` for `v` in `lo..=hi`: the suffix from vertex `v` with the
    /// term's bra labels, holding the operator only when `v = lo`; indexed
    /// from `lo`.
    fn term_suffixes(&self, k: usize, q: &[Labeled]) -> Result<Vec<Labeled>> {
        let (t, op, lo, hi) = &self.terms[k];
        let mut z = Vec::with_capacity(hi - lo + 1);
        let mut acc = q[hi + 1].clone();
        for v in (lo + 1..=*hi).rev() {
            acc = acc.contract(&self.ket(v))?.contract(&self.bra(v, &t.support))?;
            z.push(acc.clone());
        }
        z.push(acc.contract(&self.ket(*lo))?.contract(op)?.contract(&self.bra(*lo, &t.support))?);
        z.reverse();
        Ok(z)
    }

    /// Running sums of term-inserted prefixes whose terms close before `v`.
    fn energy_prefixes(&self, xs: &[Vec<Labeled>]) -> Result<Vec<Option<Labeled>>> {
        let n = self.rep.shape().vertex_count();
        let mut se: Vec<Option<Labeled>> = vec![None];
        for v in 0..n {
            let mut next = match &se[v] {
                Some(s) => Some(s.contract(&self.ket(v))?.contract(&self.bra(v, &[]))?),
                None => None,
            };
            for (k, (_, _, lo, hi)) in self.terms.iter().enumerate() {
                if *hi == v {
                    add(&mut next, xs[k][hi - lo].clone())?;
                }
            }
            se.push(next);
        }
        Ok(se)
    }

    fn scalar(x: &Labeled) -> Result<f64> {
        Ok(x.t.as_scalar().ok_or_else(|| Error::Internal("sandwich left open legs".into()))?.re)
    }

    /// `(⟨ψ|H|ψ⟩, ⟨ψ|ψ⟩)`.
    pub fn energy_and_norm(&self) -> Result<(f64, f64)> {
        let p = self.plain_prefixes()?;
        let xs = (0..self.terms.len()).map(|k| self.term_prefixes(k, &p)).collect::<Result<Vec<_>>>()?;
        let se = self.energy_prefixes(&xs)?;
        let n = self.rep.shape().vertex_count();
        let energy = match &se[n] {
            Some(x) => Self::scalar(x)?,
            None => 0.0,
        };
        Ok((energy, Self::scalar(&p[n])?))
    }

    /// `f = E/N` and, for each vertex, `∂f/∂conj(map v)`.
    pub fn energy_holes(&self) -> Result<(f64, Vec<Tensor>)> {
        let n = self.rep.shape().vertex_count();
        let p = self.plain_prefixes()?;
        let q = self.plain_suffixes()?;
        let norm = Self::scalar(&p[n])?;
        if norm == 0.0 || !norm.is_finite() {
            bail!(DegenerateState, "state norm is {norm}");
        }
        let xs = (0..self.terms.len()).map(|k| self.term_prefixes(k, &p)).collect::<Result<Vec<_>>>()?;
        let zs = (0..self.terms.len()).map(|k| self.term_suffixes(k, &q)).collect::<Result<Vec<_>>>()?;
        let se = self.energy_prefixes(&xs)?;
        let energy = match &se[n] {
            Some(x) => Self::scalar(x)?,
            None => 0.0,
        };
        // Running sums of term-inserted suffixes whose terms open after `v`.
        let mut qe: Vec<Option<Labeled>> = vec![None; n + 1];
        for v in (0..n).rev() {
            let mut next = match &qe[v + 1] {
                Some(s) => Some(s.contract(&self.ket(v))?.contract(&self.bra(v, &[]))?),
                None => None,
            };
            for (k, (_, _, lo, _)) in self.terms.iter().enumerate() {
                if *lo == v {
                    add(&mut next, zs[k][0].clone())?;
                }
            }
            qe[v] = next;
        }
        let f = energy / norm;
        (0..n)
            .map(|v| {
                let plain = self.bra_legs(v, &[]);
                let ket = self.ket(v);
                let mut hole = p[v].contract(&ket)?.contract(&q[v + 1])?.into_order(&plain).scale_real(-f);
                if let Some(s) = &se[v] {
                    hole.axpy(C64::new(1.0, 0.0), &s.contract(&ket)?.contract(&q[v + 1])?.into_order(&plain))?;
                }
                if let Some(s) = &qe[v + 1] {
                    hole.axpy(C64::new(1.0, 0.0), &p[v].contract(&ket)?.contract(s)?.into_order(&plain))?;
                }
                for (k, (t, op, lo, hi)) in self.terms.iter().enumerate() {
                    if v < *lo || v > *hi {
                        continue;
                    }
                    let left = if v == *lo { p[v].contract(&ket)?.contract(op)? } else { xs[k][v - lo - 1].contract(&ket)? };
                    let right = if v == *hi { &q[v + 1] } else { &zs[k][v + 1 - lo] };
                    let part = left.contract(right)?.into_order(&self.bra_legs(v, &t.support));
                    hole.axpy(C64::new(1.0, 0.0), &part)?;
                }
                Ok(hole.scale_real(1.0 / norm))
            })
            .collect::<Result<Vec<_>>>()
            .map(|holes| (f, holes))
    }
}
