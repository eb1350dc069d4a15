//! Weight states: uniform superpositions of basis states with a fixed digit sum.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::graph::{build_graph, GraphKind, NetworkShape};
use crate::network::{TnsRep, DEFAULT_STATE_CAP};
use crate::tensor::{increment, Tensor, C64, ONE, ZERO};

/// Parameters of a weight state: digit sum `a`, digit cap `dloc`, `sites` sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub a: usize,
    pub dloc: usize,
    pub sites: usize,
}

impl WeightSpec {
    pub fn new(a: usize, dloc: usize, sites: usize) -> Result<Self> {
        if sites == 0 {
            bail!(Argument, "weight state needs at least one site");
        }
        Ok(WeightSpec { a, dloc, sites })
    }

    pub fn local_dim(&self) -> usize {
        self.dloc + 1
    }

    /// True when no digit string reaches the weight.
    pub fn is_zero(&self) -> bool {
        self.a > self.dloc * self.sites
    }
}

/// Dense weight state: entry 1 where the digits sum to `a` and none exceeds `dloc`.
pub fn build_weight_state(spec: WeightSpec) -> Result<Tensor> {
    let shape = vec![spec.local_dim(); spec.sites];
    let len = shape.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n));
    match len {
        Some(n) if n <= DEFAULT_STATE_CAP => {}
        _ => bail!(Resource, "weight state on {} sites of dimension {} is too large", spec.sites, spec.local_dim()),
    }
    Ok(Tensor::from_fn(&shape, |idx| {
        if idx.iter().sum::<usize>() == spec.a {
            ONE
        } else {
            ZERO
        }
    }))
}

fn binomial(n: usize, k: usize) -> BigInt {
    let mut r = BigInt::one();
    for i in 0..k {
        r = r * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    r
}

/// `c_{α,a} = Σ_j (−1)^{a−j} C(a,j) j^α`, exactly.
pub fn weight_coefficient(alpha: u32, a: u32) -> BigInt {
    let mut total = BigInt::zero();
    for j in 0..=a {
        let term = binomial(a as usize, j as usize) * BigInt::from(j).pow(alpha);
        if (a - j) % 2 == 0 {
            total += term;
        } else {
            total -= term;
        }
    }
    total
}

/// Polynomial in ε with complex coefficients, lowest power first.
pub type Poly = Vec<C64>;

fn poly_eval(p: &[C64], eps: C64) -> C64 {
    p.iter().rev().fold(ZERO, |acc, &c| acc * eps + c)
}

/// One product term: a scalar polynomial times a tensor product of
/// per-site vector polynomials.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveTerm {
    pub coefficient: Poly,
    /// `sites[s][i]` is the polynomial giving component `i` of site `s`.
    pub sites: Vec<Vec<Poly>>,
}

impl CurveTerm {
    pub fn coefficient_at(&self, eps: C64) -> C64 {
        poly_eval(&self.coefficient, eps)
    }

    pub fn site_vector(&self, site: usize, eps: C64) -> Vec<C64> {
        self.sites[site].iter().map(|p| poly_eval(p, eps)).collect()
    }
}

/// Sum of product terms with an overall `ε^{-scale_degree}` prefactor.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductCurve {
    pub local_dim: usize,
    pub sites: usize,
    pub terms: Vec<CurveTerm>,
    pub scale_degree: usize,
}

impl ProductCurve {
    /// `ε^{-a} Σ_t c_t(ε) ⊗_s v_{t,s}(ε)` as a dense tensor.
    pub fn evaluate(&self, eps: C64) -> Result<Tensor> {
        if eps == ZERO && self.scale_degree > 0 {
            bail!(Argument, "curve cannot be evaluated at ε = 0");
        }
        let shape = vec![self.local_dim; self.sites];
        let mut out = Tensor::zeros(&shape);
        let scale = eps.powi(-(self.scale_degree as i32));
        for term in &self.terms {
            let vecs: Vec<Vec<C64>> = (0..self.sites).map(|s| term.site_vector(s, eps)).collect();
            let c = term.coefficient_at(eps) * scale;
            let mut idx = vec![0usize; self.sites];
            for slot in out.data_mut() {
                let mut prod = c;
                for (s, &i) in idx.iter().enumerate() {
                    prod *= vecs[s][i];
                }
                *slot += prod;
                increment(&mut idx, &shape);
            }
        }
        Ok(out)
    }
}

/// Site polynomial vector for `φ(tε) = Σ_{i ≤ dloc} (tε)^i |i⟩`.
fn scaled_phi(t: C64, dloc: usize) -> Vec<Poly> {
    (0..=dloc)
        .map(|i| {
            let mut p = vec![ZERO; i + 1];
            p[i] = t.powi(i as i32);
            p
        })
        .collect()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `ε^{-a} Σ_j (−1)^{a−j} C(a,j)/a! · φ(jε)^{⊗L}`, which tends to the weight state.
pub fn border_rank_curve(spec: WeightSpec) -> ProductCurve {
    let a = spec.a;
    let fact = factorial(a);
    let terms = (0..=a)
        .map(|j| {
            let sign = if (a - j) % 2 == 0 { 1.0 } else { -1.0 };
            let binom = binomial(a, j).to_string().parse::<f64>().unwrap_or(f64::INFINITY);
            let site = scaled_phi(C64::new(j as f64, 0.0), spec.dloc);
            CurveTerm { coefficient: vec![C64::new(sign * binom / fact, 0.0)], sites: vec![site; spec.sites] }
        })
        .collect();
    ProductCurve { local_dim: spec.local_dim(), sites: spec.sites, terms, scale_degree: a }
}

/// Open-chain MPS of the weight state with `dloc = a` and bond `a + 1`.
///
/// The bond index carries the running digit sum: the first site emits its
/// digit, bulk sites add theirs, and the last site accepts only the
/// complement that completes the sum to `a`.
pub fn weight_mps(spec: WeightSpec) -> Result<TnsRep> {
    if spec.dloc != spec.a {
        bail!(Argument, "weight_mps needs dloc = a (got dloc = {}, a = {})", spec.dloc, spec.a);
    }
    let n = spec.a + 1;
    if spec.sites == 1 {
        let shape = NetworkShape::custom(1, Vec::new(), Vec::new(), n)?;
        return TnsRep::new(shape, vec![Tensor::basis_vector(n, spec.a)]);
    }
    let shape = build_graph(GraphKind::Chain { len: spec.sites }, n, n)?;
    let delta = |b: bool| if b { ONE } else { ZERO };
    let maps = (0..spec.sites)
        .map(|v| {
            if v == 0 {
                Tensor::from_fn(&[n, n], |i| delta(i[1] == i[0]))
            } else if v + 1 == spec.sites {
                Tensor::from_fn(&[n, n], |i| delta(i[1] + i[0] == spec.a))
            } else {
                Tensor::from_fn(&[n, n, n], |i| delta(i[2] == i[1] + i[0]))
            }
        })
        .collect();
    TnsRep::new(shape, maps)
}

/// Applies `Σ_{k ≤ dloc} |k⟩⟨k|` on every index; the shape is unchanged.
pub fn project_local_degree(t: &Tensor, dloc: usize) -> Tensor {
    let mut out = t.clone();
    let shape = t.shape().to_vec();
    let mut idx = vec![0usize; shape.len()];
    for slot in out.data_mut() {
        if idx.iter().any(|&i| i > dloc) {
            *slot = ZERO;
        }
        increment(&mut idx, &shape);
    }
    out
}

/// Sample weights `w_m` at nodes `t_m` with `Σ_m w_m t_m^α = δ_{α,a}` for `α < N`.
fn stencil(a: usize, n: usize) -> Result<(Vec<C64>, Vec<C64>)> {
    let nodes: Vec<C64> = (0..n).map(|m| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * m as f64 / n as f64)).collect();
    let vander = DMatrix::from_fn(n, n, |alpha, m| nodes[m].powi(alpha as i32));
    let rhs = DVector::from_fn(n, |alpha, _| if alpha == a { ONE } else { ZERO });
    let Some(w) = vander.clone().lu().solve(&rhs) else {
        bail!(Internal, "stencil system is singular for a = {a}, N = {n}");
    };
    let residual = (&vander * &w - &rhs).norm();
    if residual > 1e-8 {
        bail!(Internal, "stencil order conditions violated by {residual:e}");
    }
    Ok((nodes, w.iter().copied().collect()))
}

/// Symmetric finite-difference curve for the weight state `χ_{a,a,L}`.
///
/// Uses `N = 2⌊(a+1)/2⌋ + 2k` samples `Γ(t_m ε) = φ(t_m ε)^{⊗L}` at the
/// N-th roots of unity (raised to `a + 1` when that count would not exceed
/// `a`). Every ε-power congruent to `a` modulo N except `a` itself is at
/// least `a + N`, so the error of the rescaled curve is `O(ε^N)`.
pub fn central_difference_curve(a: usize, k: usize, sites: usize) -> Result<ProductCurve> {
    if a == 0 {
        bail!(Argument, "central differences need a >= 1");
    }
    if sites == 0 {
        bail!(Argument, "central differences need at least one site");
    }
    let n = (2 * ((a + 1) / 2) + 2 * k).max(a + 1);
    let (nodes, weights) = stencil(a, n)?;
    let terms = nodes
        .iter()
        .zip(&weights)
        .map(|(&t, &w)| CurveTerm { coefficient: vec![w], sites: vec![scaled_phi(t, a); sites] })
        .collect();
    Ok(ProductCurve { local_dim: a + 1, sites, terms, scale_degree: a })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::tns_evaluate;
    use proptest::prelude::*;

    fn spec(a: usize, d: usize, l: usize) -> WeightSpec {
        WeightSpec::new(a, d, l).unwrap()
    }

    fn count_nonzero(t: &Tensor) -> usize {
        t.data().iter().filter(|z| z.norm() > 0.0).count()
    }

    #[test]
    fn w_state_entries() {
        let w = build_weight_state(spec(1, 1, 3)).unwrap();
        assert_eq!(count_nonzero(&w), 3);
        for idx in [[0, 0, 1], [0, 1, 0], [1, 0, 0]] {
            assert_eq!(w.get(&idx), ONE);
        }
    }

    #[test]
    fn weight_zero_is_all_zeros_product() {
        let t = build_weight_state(spec(0, 0, 4)).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.get(&[0, 0, 0, 0]), ONE);
    }

    #[test]
    fn compositions_of_two_into_three_parts() {
        let t = build_weight_state(spec(2, 2, 3)).unwrap();
        let mut expected = 0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    if i + j + k == 2 {
                        expected += 1;
                        assert_eq!(t.get(&[i, j, k]), ONE);
                    }
                }
            }
        }
        assert_eq!(expected, 6);
        assert_eq!(count_nonzero(&t), 6);
    }

    #[test]
    fn unreachable_weight_gives_zero_tensor() {
        let s = spec(5, 1, 3);
        assert!(s.is_zero());
        assert_eq!(build_weight_state(s).unwrap().norm(), 0.0);
    }

    #[test]
    fn coefficients() {
        assert_eq!(weight_coefficient(1, 2), BigInt::from(0));
        assert_eq!(weight_coefficient(2, 2), BigInt::from(2));
        // 3: (-1)^2 C(2,0) 0 - C(2,1) 1 + C(2,2) 8
        assert_eq!(weight_coefficient(3, 2), BigInt::from(-2 + 8));
        assert_eq!(weight_coefficient(0, 0), BigInt::from(1));
    }

    #[test]
    fn coefficient_vanishing_pattern() {
        for a in 0..=8u32 {
            for alpha in 0..a {
                assert!(weight_coefficient(alpha, a).is_zero());
            }
            let fact: BigInt = (1..=a).map(BigInt::from).product();
            assert_eq!(weight_coefficient(a, a), fact);
        }
    }

    #[test]
    fn border_rank_limit_for_w() {
        let s = spec(1, 1, 3);
        let eps = C64::new(1e-3, 0.0);
        let approx = border_rank_curve(s).evaluate(eps).unwrap();
        let w = build_weight_state(s).unwrap();
        assert!(approx.sub(&w).unwrap().norm() <= 4e-3);
    }

    #[test]
    fn border_rank_curve_weight_zero() {
        let c = border_rank_curve(spec(0, 0, 3));
        assert_eq!(c.terms.len(), 1);
        let t = c.evaluate(C64::new(0.3, 0.0)).unwrap();
        assert_eq!(t, build_weight_state(spec(0, 0, 3)).unwrap());
    }

    #[test]
    fn border_rank_first_order() {
        let s = spec(2, 2, 4);
        let chi = build_weight_state(s).unwrap();
        let c = border_rank_curve(s);
        let err = |e: f64| c.evaluate(C64::new(e, 0.0)).unwrap().sub(&chi).unwrap().norm();
        let ratio = err(1e-2) / err(1e-3);
        assert!((ratio - 10.0).abs() < 0.5, "ratio {ratio}");
    }

    #[test]
    fn evaluation_at_zero_is_rejected() {
        assert!(border_rank_curve(spec(1, 1, 3)).evaluate(ZERO).is_err());
    }

    #[test]
    fn weight_mps_small_cases() {
        let w = tns_evaluate(&weight_mps(spec(1, 1, 3)).unwrap()).unwrap();
        assert_eq!(w, build_weight_state(spec(1, 1, 3)).unwrap());
        let z = tns_evaluate(&weight_mps(spec(0, 0, 5)).unwrap()).unwrap();
        assert_eq!(z, build_weight_state(spec(0, 0, 5)).unwrap());
        let t = tns_evaluate(&weight_mps(spec(3, 3, 6)).unwrap()).unwrap();
        assert_eq!(t, build_weight_state(spec(3, 3, 6)).unwrap());
    }

    #[test]
    fn weight_mps_preconditions() {
        assert!(weight_mps(spec(2, 1, 4)).is_err());
    }

    #[test]
    fn single_site_weight_mps_is_a_basis_vector() {
        let w = tns_evaluate(&weight_mps(spec(2, 2, 1)).unwrap()).unwrap();
        assert_eq!(w, build_weight_state(spec(2, 2, 1)).unwrap());
    }

    #[test]
    fn bulk_matrices_multiply_by_adding_digits() {
        let a = 3;
        let rep = weight_mps(spec(a, a, 4)).unwrap();
        let bulk = rep.map(1);
        let mat = |j: usize| bulk.slice_axis(0, j).unwrap();
        for j in 0..=a {
            for jp in 0..=a {
                let prod = crate::tensor::contract(&mat(j), &mat(jp), &[(1, 0)]).unwrap();
                let expected = if j + jp <= a { mat(j + jp) } else { Tensor::zeros(&[a + 1, a + 1]) };
                assert_eq!(prod, expected);
            }
        }
    }

    #[test]
    fn projection_examples() {
        let chi = build_weight_state(spec(2, 2, 3)).unwrap();
        let p = project_local_degree(&chi, 1);
        assert_eq!(count_nonzero(&p), 3);
        for idx in [[0, 1, 1], [1, 0, 1], [1, 1, 0]] {
            assert_eq!(p.get(&idx), ONE);
        }
        assert_eq!(project_local_degree(&chi, 2), chi);
        let w = build_weight_state(spec(1, 1, 3)).unwrap();
        assert_eq!(project_local_degree(&w, 0).norm(), 0.0);
    }

    #[test]
    fn projection_matches_capped_state() {
        let chi = build_weight_state(spec(3, 3, 4)).unwrap();
        let mut p = project_local_degree(&chi, 1);
        for axis in 0..4 {
            p = p.truncate_axis(axis, 2).unwrap();
        }
        assert_eq!(p, build_weight_state(spec(3, 1, 4)).unwrap());
    }

    #[test]
    fn flattening_rank_is_a_plus_one() {
        for a in 1..=3 {
            let chi = build_weight_state(spec(a, a, 4)).unwrap();
            let svd = crate::tensor::svd(&chi, &[0], &[1, 2, 3], None, 1e-12).unwrap();
            assert_eq!(svd.rank(), a + 1);
        }
    }

    #[test]
    fn central_difference_term_counts() {
        assert_eq!(central_difference_curve(1, 0, 4).unwrap().terms.len(), 2);
        assert_eq!(central_difference_curve(2, 1, 4).unwrap().terms.len(), 4);
        assert!(central_difference_curve(0, 0, 4).is_err());
    }

    #[test]
    fn central_difference_for_w_is_two_sided() {
        let c = central_difference_curve(1, 0, 4).unwrap();
        let w: Vec<f64> = c.terms.iter().map(|t| t.coefficient[0].re).collect();
        assert!((w[0] - 0.5).abs() < 1e-14 && (w[1] + 0.5).abs() < 1e-14);
        let chi = build_weight_state(spec(1, 1, 4)).unwrap();
        let err = |e: f64| c.evaluate(C64::new(e, 0.0)).unwrap().sub(&chi).unwrap().norm();
        let ratio = err(2e-2) / err(1e-2);
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn central_difference_fourth_order() {
        let c = central_difference_curve(2, 1, 4).unwrap();
        let chi = build_weight_state(spec(2, 2, 4)).unwrap();
        let err = |e: f64| c.evaluate(C64::new(e, 0.0)).unwrap().sub(&chi).unwrap().norm();
        let slope = (err(0.1) / err(0.05)).log2();
        assert!((slope - 4.0).abs() < 0.2, "slope {slope}");
    }

    proptest! {
        #[test]
        fn weight_mps_is_exact(a in 0usize..4, l in 1usize..8) {
            let s = spec(a, a, l);
            prop_assert_eq!(tns_evaluate(&weight_mps(s).unwrap()).unwrap(), build_weight_state(s).unwrap());
        }

        #[test]
        fn border_rank_error_shrinks_linearly(a in 1usize..4, l in 2usize..6) {
            let s = spec(a, a, l);
            let chi = build_weight_state(s).unwrap();
            let c = border_rank_curve(s);
            let e1 = c.evaluate(C64::new(1e-2, 0.0)).unwrap().sub(&chi).unwrap().norm();
            let e2 = c.evaluate(C64::new(1e-3, 0.0)).unwrap().sub(&chi).unwrap().norm();
            prop_assert!((e1 / e2).log10() >= 0.9);
        }
    }
}
