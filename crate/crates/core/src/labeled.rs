//! Tensors whose indices carry labels; contraction sums over shared labels.

use crate::error::Result;
use crate::tensor::{contract, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) enum Leg {
    /// Physical index of a vertex (ket side, or bra side off the operator support).
    Phys(usize),
    /// Bra-side physical index of a vertex inside an operator's support.
    Out(usize),
    KetBond(usize),
    BraBond(usize),
    Weight(usize),
    Aux(usize),
}

#[derive(Clone, Debug)]
pub(crate) struct Labeled {
    pub legs: Vec<Leg>,
    pub t: Tensor,
}

impl Labeled {
    pub fn new(t: Tensor, legs: Vec<Leg>) -> Self {
        assert_eq!(t.rank(), legs.len(), "one label per index");
        Labeled { legs, t }
    }

    pub fn scalar_one() -> Self {
        Labeled { legs: Vec::new(), t: Tensor::scalar(crate::tensor::ONE) }
    }

    pub fn position(&self, leg: Leg) -> Option<usize> {
        self.legs.iter().position(|&l| l == leg)
    }

    /// Contracts every label present in both operands.
    pub fn contract(&self, other: &Labeled) -> Result<Labeled> {
        let pairs: Vec<(usize, usize)> = self
            .legs
            .iter()
            .enumerate()
            .filter_map(|(i, l)| other.position(*l).map(|j| (i, j)))
            .collect();
        let t = contract(&self.t, &other.t, &pairs)?;
        let legs = self
            .legs
            .iter()
            .filter(|l| other.position(**l).is_none())
            .chain(other.legs.iter().filter(|l| self.position(**l).is_none()))
            .copied()
            .collect();
        Ok(Labeled { legs, t })
    }

    /// Tensor with indices reordered to `order`, which must list every label.
    pub fn into_order(self, order: &[Leg]) -> Tensor {
        assert_eq!(order.len(), self.legs.len(), "order must name every leg");
        let perm: Vec<usize> = order
            .iter()
            .map(|l| self.position(*l).unwrap_or_else(|| panic!("missing leg {l:?}")))
            .collect();
        self.t.permute(&perm)
    }
}
