//! Lays the weight-state MPS along a covering path so an augmented network
//! becomes a plain one with enlarged bonds.

use crate::error::{bail, Result};
use crate::graph::{NetworkShape, PathCover};
use crate::labeled::{Labeled, Leg};
use crate::network::{BtnsRep, TnsRep};
use crate::tensor::Tensor;
use crate::weight::{weight_mps, WeightSpec};

/// Index bookkeeping for the path embedding of one network structure.
///
/// Built once per `(shape, a, dloc, path)`; maps can then be embedded and
/// environments pulled back repeatedly.
#[derive(Clone, Debug)]
pub struct BtnsEmbedding {
    shape: NetworkShape,
    out_shape: NetworkShape,
    a: usize,
    dloc: usize,
    /// Per vertex: the weight-MPS factor with legs `[Weight(v), Aux(t)...]`.
    weights: Vec<Labeled>,
    /// Per vertex: unfused leg order `[Phys, KetBond(e), Aux(t)..., ...]`.
    legs: Vec<Vec<Leg>>,
    unfused: Vec<Vec<usize>>,
}

impl BtnsEmbedding {
    pub fn new(shape: &NetworkShape, a: usize, dloc: usize, path: &PathCover) -> Result<Self> {
        let n = shape.vertex_count();
        if n < 2 {
            bail!(Argument, "path embedding needs at least two vertices");
        }
        if dloc > a {
            bail!(Argument, "local degree {dloc} exceeds a = {a}");
        }
        // revalidate against this shape
        let path = PathCover::new(shape, path.vertices().to_vec())?;
        let walk = path.vertices();
        let mut first = vec![usize::MAX; n];
        let mut order = Vec::with_capacity(n);
        for (t, &v) in walk.iter().enumerate() {
            if first[v] == usize::MAX {
                first[v] = t;
                order.push(t);
            }
        }
        let steps = order[n - 1] + 1;
        let walk = &walk[..steps];

        let chain = weight_mps(WeightSpec::new(a, a, n)?)?;
        let site: Vec<Tensor> =
            chain.maps().iter().map(|m| m.truncate_axis(0, dloc + 1)).collect::<Result<_>>()?;
        let link = a + 1;
        let mut weights: Vec<Labeled> = (0..n).map(|_| Labeled::scalar_one()).collect();
        let mut aux_on_edge: Vec<Vec<usize>> = vec![Vec::new(); shape.edge_count()];
        let mut rank = 0;
        for (t, &v) in walk.iter().enumerate() {
            let factor = if first[v] == t {
                let legs = if rank == 0 {
                    vec![Leg::Weight(v), Leg::Aux(t)]
                } else if rank + 1 == n {
                    vec![Leg::Weight(v), Leg::Aux(t - 1)]
                } else {
                    vec![Leg::Weight(v), Leg::Aux(t - 1), Leg::Aux(t)]
                };
                rank += 1;
                Labeled::new(site[rank - 1].clone(), legs)
            } else {
                Labeled::new(Tensor::identity(link), vec![Leg::Aux(t - 1), Leg::Aux(t)])
            };
            weights[v] = weights[v].contract(&factor)?;
            if t + 1 < steps {
                let e = shape.edge_between(v, walk[t + 1]).expect("validated path");
                aux_on_edge[e].push(t);
            }
        }

        let mut bonds = shape.bond_dims().to_vec();
        for (e, aux) in aux_on_edge.iter().enumerate() {
            bonds[e] *= link.pow(aux.len() as u32);
        }
        let out_shape = shape.with_bond_dims(bonds)?;
        let mut legs = Vec::with_capacity(n);
        let mut unfused = Vec::with_capacity(n);
        for v in 0..n {
            let mut l = vec![Leg::Phys(v)];
            let mut u = vec![shape.phys_dim()];
            for &e in shape.incident_edges(v) {
                l.push(Leg::KetBond(e));
                u.push(shape.bond_dim(e));
                for &t in &aux_on_edge[e] {
                    l.push(Leg::Aux(t));
                    u.push(link);
                }
            }
            legs.push(l);
            unfused.push(u);
        }
        Ok(BtnsEmbedding { shape: shape.clone(), out_shape, a, dloc, weights, legs, unfused })
    }

    /// Shape of the embedded plain network.
    pub fn shape(&self) -> &NetworkShape {
        &self.out_shape
    }

    fn check(&self, rep: &BtnsRep) -> Result<()> {
        if !rep.shape().same_structure(&self.shape)
            || rep.shape().bond_dims() != self.shape.bond_dims()
            || rep.a() != self.a
            || rep.dloc() != self.dloc
        {
            bail!(Argument, "representation does not match the embedding");
        }
        Ok(())
    }

    fn map_legs(&self, v: usize) -> Vec<Leg> {
        let mut legs = vec![Leg::Phys(v)];
        legs.extend(self.shape.incident_edges(v).iter().map(|&e| Leg::KetBond(e)));
        legs.push(Leg::Weight(v));
        legs
    }

    /// Embedded map of vertex `v` for the augmented map `map`.
    pub fn embed_map(&self, v: usize, map: &Tensor) -> Result<Tensor> {
        let b = Labeled::new(map.clone(), self.map_legs(v));
        let fused = b.contract(&self.weights[v])?.into_order(&self.legs[v]);
        fused.into_reshaped(&self.out_shape.map_shape(v))
    }

    pub fn embed(&self, rep: &BtnsRep) -> Result<TnsRep> {
        self.check(rep)?;
        let maps = (0..self.shape.vertex_count()).map(|v| self.embed_map(v, rep.map(v))).collect::<Result<_>>()?;
        TnsRep::new(self.out_shape.clone(), maps)
    }

    /// Transposes a linear functional on embedded map `v` back to the
    /// augmented map: the result has the augmented map's shape.
    pub fn pullback(&self, v: usize, hole: &Tensor) -> Result<Tensor> {
        let h = Labeled::new(hole.reshape(&self.unfused[v])?, self.legs[v].clone());
        Ok(h.contract(&self.weights[v])?.into_order(&self.map_legs(v)))
    }
}

/// Plain network equal to the augmented one, obtained by laying the
/// weight-state MPS along `path`.
pub fn embed_mps_strategy(rep: &BtnsRep, path: &PathCover) -> Result<TnsRep> {
    BtnsEmbedding::new(rep.shape(), rep.a(), rep.dloc(), path)?.embed(rep)
}
