//! Tensor network states, their weight-augmented variant, and degeneration curves.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};
use crate::graph::{GraphKind, NetworkShape};
use crate::labeled::{Labeled, Leg};
use crate::tensor::{inner, Tensor, C64, ZERO};
use crate::weight::WeightSpec;

/// Largest number of amplitudes a dense state may have.
pub const DEFAULT_STATE_CAP: usize = 1 << 20;

fn check_maps(shape: &NetworkShape, maps: &[Tensor], extra: Option<usize>) -> Result<()> {
    if maps.len() != shape.vertex_count() {
        bail!(Dimension, "{} maps for {} vertices", maps.len(), shape.vertex_count());
    }
    for (v, m) in maps.iter().enumerate() {
        let mut expected = shape.map_shape(v);
        expected.extend(extra);
        if m.shape() != expected.as_slice() {
            bail!(Dimension, "map {v} has shape {:?}, expected {:?}", m.shape(), expected);
        }
        if !m.is_finite() {
            bail!(Numeric, "map {v} has non-finite entries");
        }
    }
    Ok(())
}

/// Plain tensor network state: one map per vertex, indices `[phys, bonds by edge id]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TnsJson", into = "TnsJson")]
pub struct TnsRep {
    shape: NetworkShape,
    maps: Vec<Tensor>,
}

#[derive(Serialize, Deserialize)]
struct TnsJson {
    shape: NetworkShape,
    maps: Vec<Tensor>,
}

impl TryFrom<TnsJson> for TnsRep {
    type Error = Error;
    fn try_from(j: TnsJson) -> Result<Self> {
        TnsRep::new(j.shape, j.maps)
    }
}

impl From<TnsRep> for TnsJson {
    fn from(r: TnsRep) -> Self {
        TnsJson { shape: r.shape, maps: r.maps }
    }
}

impl TnsRep {
    pub fn new(shape: NetworkShape, maps: Vec<Tensor>) -> Result<Self> {
        check_maps(&shape, &maps, None)?;
        Ok(TnsRep { shape, maps })
    }

    pub fn shape(&self) -> &NetworkShape {
        &self.shape
    }

    pub fn maps(&self) -> &[Tensor] {
        &self.maps
    }

    pub fn map(&self, v: usize) -> &Tensor {
        &self.maps[v]
    }

    pub fn into_maps(self) -> Vec<Tensor> {
        self.maps
    }

    /// Every map as a bond-only tensor viewed as `[phys, left, right]`
    /// along a ring or chain (missing chain ends get extent 1).
    pub fn chain_matrices(&self) -> Result<Vec<Tensor>> {
        (0..self.shape.vertex_count()).map(|v| to_line_form(&self.shape, v, &self.maps[v])).collect()
    }
}

/// Tensor network state augmented with a weight index of extent `dloc + 1`,
/// contracted against the weight state of weight `a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BtnsJson", into = "BtnsJson")]
pub struct BtnsRep {
    shape: NetworkShape,
    a: usize,
    dloc: usize,
    maps: Vec<Tensor>,
}

#[derive(Serialize, Deserialize)]
struct BtnsJson {
    shape: NetworkShape,
    a: usize,
    dloc: usize,
    maps: Vec<Tensor>,
}

impl TryFrom<BtnsJson> for BtnsRep {
    type Error = Error;
    fn try_from(j: BtnsJson) -> Result<Self> {
        BtnsRep::new(j.shape, j.a, j.dloc, j.maps)
    }
}

impl From<BtnsRep> for BtnsJson {
    fn from(r: BtnsRep) -> Self {
        BtnsJson { shape: r.shape, a: r.a, dloc: r.dloc, maps: r.maps }
    }
}

impl BtnsRep {
    pub fn new(shape: NetworkShape, a: usize, dloc: usize, maps: Vec<Tensor>) -> Result<Self> {
        if dloc > a {
            bail!(Argument, "local degree {dloc} exceeds weight {a}");
        }
        check_maps(&shape, &maps, Some(dloc + 1))?;
        Ok(BtnsRep { shape, a, dloc, maps })
    }

    /// Plain network as the `a = dloc = 0` special case.
    pub fn from_tns(rep: &TnsRep) -> Self {
        let maps = rep.maps.iter().map(|m| Tensor::stack_last(std::slice::from_ref(m)).expect("one part")).collect();
        BtnsRep { shape: rep.shape.clone(), a: 0, dloc: 0, maps }
    }

    /// Same map at every ring vertex; `canonical` is `[phys, left, right, weight]`.
    pub fn translation_invariant(shape: NetworkShape, a: usize, dloc: usize, canonical: &Tensor) -> Result<Self> {
        let maps = (0..shape.vertex_count())
            .map(|v| ring_map_from_canonical(&shape, v, canonical))
            .collect::<Result<Vec<_>>>()?;
        BtnsRep::new(shape, a, dloc, maps)
    }

    pub fn shape(&self) -> &NetworkShape {
        &self.shape
    }

    pub fn a(&self) -> usize {
        self.a
    }

    pub fn dloc(&self) -> usize {
        self.dloc
    }

    pub fn maps(&self) -> &[Tensor] {
        &self.maps
    }

    pub fn map(&self, v: usize) -> &Tensor {
        &self.maps[v]
    }

    pub fn into_maps(self) -> Vec<Tensor> {
        self.maps
    }

    pub fn weight_spec(&self) -> WeightSpec {
        WeightSpec { a: self.a, dloc: self.dloc, sites: self.shape.vertex_count() }
    }

    pub fn set_map(&mut self, v: usize, map: Tensor) -> Result<()> {
        let mut expected = self.shape.map_shape(v);
        expected.push(self.dloc + 1);
        if map.shape() != expected.as_slice() {
            bail!(Dimension, "map {v} must have shape {:?}, got {:?}", expected, map.shape());
        }
        self.maps[v] = map;
        Ok(())
    }

    /// Replaces the shape and all maps together (used when bond dims change).
    pub(crate) fn replace(&mut self, shape: NetworkShape, maps: Vec<Tensor>) -> Result<()> {
        check_maps(&shape, &maps, Some(self.dloc + 1))?;
        self.shape = shape;
        self.maps = maps;
        Ok(())
    }

    /// Number of complex parameters.
    pub fn parameter_count(&self) -> usize {
        self.maps.iter().map(|m| m.len()).sum()
    }

    /// Plain network whose maps are the weight-`η_v` slices.
    pub fn slice(&self, etas: &[usize]) -> Result<TnsRep> {
        let maps = self
            .maps
            .iter()
            .zip(etas)
            .map(|(m, &eta)| m.slice_axis(m.rank() - 1, eta))
            .collect::<Result<Vec<_>>>()?;
        TnsRep::new(self.shape.clone(), maps)
    }

    /// Contracts the weight index of every map with `vectors[v]`.
    pub fn contract_weight(&self, vectors: &[Vec<C64>]) -> TnsRep {
        let maps = self
            .maps
            .iter()
            .zip(vectors)
            .map(|(m, w)| {
                let wt = Tensor::new(vec![w.len()], w.clone()).expect("weight vector");
                crate::tensor::contract(m, &wt, &[(m.rank() - 1, 0)]).expect("weight extent")
            })
            .collect();
        TnsRep { shape: self.shape.clone(), maps }
    }
}

/// All digit strings of length `n` with digits `≤ cap` summing to `total`.
pub(crate) fn compositions(n: usize, total: usize, cap: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, left: usize, cap: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let slots = n - cur.len() - 1;
        for x in 0..=cap.min(left) {
            if left - x <= slots * cap {
                cur.push(x);
                rec(n, left - x, cap, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(n, total, cap, &mut Vec::with_capacity(n), &mut out);
    out
}

fn check_cap(shape: &NetworkShape, cap: usize) -> Result<()> {
    match shape.state_len() {
        Some(n) if n <= cap => Ok(()),
        _ => bail!(
            Resource,
            "state with {} sites of dimension {} exceeds the {cap}-amplitude cap",
            shape.vertex_count(),
            shape.phys_dim()
        ),
    }
}

/// Dense state of a plain network, with the default amplitude cap.
pub fn tns_evaluate(rep: &TnsRep) -> Result<Tensor> {
    tns_evaluate_with_cap(rep, DEFAULT_STATE_CAP)
}

/// Contracts every edge's maximally entangled pair between its two maps.
pub fn tns_evaluate_with_cap(rep: &TnsRep, cap: usize) -> Result<Tensor> {
    let shape = &rep.shape;
    check_cap(shape, cap)?;
    let mut acc = Labeled::scalar_one();
    for v in 0..shape.vertex_count() {
        let mut legs = vec![Leg::Phys(v)];
        legs.extend(shape.incident_edges(v).iter().map(|&e| Leg::KetBond(e)));
        acc = acc.contract(&Labeled::new(rep.maps[v].clone(), legs))?;
    }
    let order: Vec<Leg> = (0..shape.vertex_count()).map(Leg::Phys).collect();
    Ok(acc.into_order(&order))
}

/// Dense state of an augmented network: the sum over weight configurations
/// of the plain networks built from the matching weight slices.
pub fn btns_evaluate(rep: &BtnsRep) -> Result<Tensor> {
    check_cap(&rep.shape, DEFAULT_STATE_CAP)?;
    let n = rep.shape.vertex_count();
    let shape = vec![rep.shape.phys_dim(); n];
    let mut out = Tensor::zeros(&shape);
    for etas in compositions(n, rep.a, rep.dloc) {
        let part = tns_evaluate(&rep.slice(&etas)?)?;
        out.axpy(C64::new(1.0, 0.0), &part)?;
    }
    Ok(out)
}

/// Polynomial family of local maps `𝒜^v(ε) = Σ_η ε^η 𝒜^{v,η}`.
#[derive(Clone, Debug, PartialEq)]
pub struct DegenerationCurve {
    shape: NetworkShape,
    a: usize,
    coefficients: Vec<Vec<Tensor>>,
}

impl DegenerationCurve {
    pub fn new(shape: NetworkShape, a: usize, coefficients: Vec<Vec<Tensor>>) -> Result<Self> {
        if coefficients.len() != shape.vertex_count() {
            bail!(Dimension, "{} coefficient lists for {} vertices", coefficients.len(), shape.vertex_count());
        }
        let count = coefficients[0].len();
        if count == 0 || coefficients.iter().any(|c| c.len() != count) {
            bail!(Argument, "every vertex needs the same non-zero number of coefficients");
        }
        for eta in 0..count {
            let layer: Vec<Tensor> = coefficients.iter().map(|c| c[eta].clone()).collect();
            check_maps(&shape, &layer, None)?;
        }
        Ok(DegenerationCurve { shape, a, coefficients })
    }

    /// Same coefficients on every ring vertex, each given as `[phys, left, right]`.
    pub fn translation_invariant(shape: NetworkShape, a: usize, canonical: &[Tensor]) -> Result<Self> {
        let coefficients = (0..shape.vertex_count())
            .map(|v| canonical.iter().map(|c| ring_map_from_canonical(&shape, v, c)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        DegenerationCurve::new(shape, a, coefficients)
    }

    pub fn shape(&self) -> &NetworkShape {
        &self.shape
    }

    /// Approximation degree.
    pub fn a(&self) -> usize {
        self.a
    }

    /// Local polynomial degree.
    pub fn dloc(&self) -> usize {
        self.coefficients[0].len() - 1
    }

    pub fn coefficients(&self, v: usize) -> &[Tensor] {
        &self.coefficients[v]
    }

    /// Upper bound on the ε-degree of the evaluated state.
    pub fn degree_bound(&self) -> usize {
        self.dloc() * self.shape.vertex_count()
    }

    /// Error degree: highest ε-power with a non-negligible coefficient, minus `a`.
    pub fn error_degree(&self) -> Result<usize> {
        let coeffs = self.expansion()?;
        let top = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let last = coeffs.iter().rposition(|c| c.norm() > 1e-12 * top).unwrap_or(0);
        Ok(last.saturating_sub(self.a))
    }

    /// ε-power coefficients `ψ_0, ψ_1, …` of the evaluated state.
    ///
    /// Samples at roots of unity and applies a discrete Fourier transform;
    /// the fit is verified at an off-grid point and re-sampled with up to five
    /// extra nodes before giving up.
    pub fn expansion(&self) -> Result<Vec<Tensor>> {
        let degree = self.degree_bound();
        let probe = C64::new(0.37, 0.21);
        let direct = tns_evaluate(&degeneration_evaluate(self, probe)?)?;
        for nodes in degree + 1..=degree + 6 {
            let coeffs = self.fourier_coefficients(nodes)?;
            let mut approx = Tensor::zeros(direct.shape());
            let mut pow = C64::new(1.0, 0.0);
            for c in &coeffs {
                approx.axpy(pow, c)?;
                pow *= probe;
            }
            let err = approx.sub(&direct)?.norm();
            if err <= 1e-9 * direct.norm().max(1e-300) || err <= 1e-14 {
                return Ok(coeffs);
            }
        }
        bail!(Numeric, "ε-expansion fit did not reproduce the curve within 1e-9")
    }

    fn fourier_coefficients(&self, nodes: usize) -> Result<Vec<Tensor>> {
        let samples: Vec<Tensor> = (0..nodes)
            .map(|m| {
                let z = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * m as f64 / nodes as f64);
                tns_evaluate(&degeneration_evaluate(self, z)?)
            })
            .collect::<Result<_>>()?;
        let mut coeffs = Vec::with_capacity(nodes);
        for n in 0..nodes {
            let mut acc = Tensor::zeros(samples[0].shape());
            for (m, s) in samples.iter().enumerate() {
                let phase = C64::from_polar(1.0 / nodes as f64, -2.0 * std::f64::consts::PI * ((n * m) % nodes) as f64 / nodes as f64);
                acc.axpy(phase, s)?;
            }
            coeffs.push(acc);
        }
        Ok(coeffs)
    }
}

/// Substitutes ε into every local polynomial map.
pub fn degeneration_evaluate(curve: &DegenerationCurve, eps: C64) -> Result<TnsRep> {
    if eps == ZERO {
        bail!(Argument, "degeneration curves are not evaluated at ε = 0; use the augmented form");
    }
    let maps = curve
        .coefficients
        .iter()
        .map(|coeffs| {
            let mut m = coeffs[0].clone();
            let mut pow = eps;
            for c in &coeffs[1..] {
                m.axpy(pow, c)?;
                pow *= eps;
            }
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    TnsRep::new(curve.shape.clone(), maps)
}

/// Stacks the coefficients along a trailing weight index, dropping `η > a`.
pub fn degeneration_to_btns(curve: &DegenerationCurve) -> Result<BtnsRep> {
    let dloc = curve.dloc().min(curve.a);
    let maps = curve
        .coefficients
        .iter()
        .map(|c| Tensor::stack_last(&c[..=dloc]))
        .collect::<Result<Vec<_>>>()?;
    BtnsRep::new(curve.shape.clone(), curve.a, dloc, maps)
}

/// Linear operator acting on dense states.
pub trait Observable {
    fn apply(&self, state: &Tensor) -> Result<Tensor>;
}

/// A dense operator, either a `N x N` matrix or a tensor whose first half
/// of indices are outputs and second half inputs.
impl Observable for Tensor {
    fn apply(&self, state: &Tensor) -> Result<Tensor> {
        let n = state.len();
        if self.len() != n * n {
            bail!(Dimension, "operator with {} entries cannot act on {n} amplitudes", self.len());
        }
        let m = self.reshape(&[n, n])?;
        let v = state.reshape(&[n])?;
        crate::tensor::contract(&m, &v, &[(1, 0)])?.into_reshaped(state.shape())
    }
}

/// Applies a matrix on `d^k` to the sites `support` of a dense state.
pub fn apply_local(state: &Tensor, support: &[usize], matrix: &Tensor) -> Result<Tensor> {
    let r = state.rank();
    let k = support.len();
    let dims: Vec<usize> = support.iter().map(|&s| state.shape()[s]).collect();
    let block: usize = dims.iter().product();
    if matrix.shape() != [block, block] {
        bail!(Dimension, "local matrix {:?} does not act on {block} states", matrix.shape());
    }
    if support.iter().any(|&s| s >= r) {
        bail!(Argument, "support {:?} out of range", support);
    }
    let mut perm: Vec<usize> = support.to_vec();
    perm.extend((0..r).filter(|i| !support.contains(i)));
    let moved = state.permute(&perm);
    let rest = state.len() / block;
    let flat = moved.into_reshaped(&[block, rest])?;
    let out = crate::tensor::contract(matrix, &flat, &[(1, 0)])?;
    let moved_shape: Vec<usize> = perm.iter().map(|&p| state.shape()[p]).collect();
    let out = out.into_reshaped(&moved_shape)?;
    let mut inv = vec![0; r];
    for (pos, &p) in perm.iter().enumerate() {
        inv[p] = pos;
    }
    debug_assert_eq!(k, support.len());
    Ok(out.permute(&inv))
}

/// `⟨ψ|O|ψ⟩ / ⟨ψ|ψ⟩`, checked to be real.
pub fn expectation_exact(state: &Tensor, obs: &dyn Observable) -> Result<f64> {
    let n = state.norm_sqr();
    if n == 0.0 || !n.is_finite() {
        bail!(DegenerateState, "expectation value of a zero state");
    }
    let o = inner(state, &obs.apply(state)?)? / n;
    if o.im.abs() > 1e-10 * o.re.abs().max(1.0) {
        bail!(Numeric, "expectation value has imaginary part {:e}; observable not Hermitian?", o.im);
    }
    Ok(o.re)
}

/// Complex Gaussian with `E|z|² = 1`.
pub(crate) fn gaussian(rng: &mut ChaCha8Rng) -> C64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * s, im * s)
}

pub(crate) fn random_map(shape: &NetworkShape, v: usize, dloc: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let mut s = shape.map_shape(v);
    s.push(dloc + 1);
    Tensor::from_fn(&s, |_| gaussian(rng))
}

/// Augmented network with i.i.d. complex Gaussian entries from a seeded generator.
pub fn random_init(shape: &NetworkShape, a: usize, dloc: usize, seed: u64) -> Result<BtnsRep> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let maps = (0..shape.vertex_count()).map(|v| random_map(shape, v, dloc, &mut rng)).collect();
    BtnsRep::new(shape.clone(), a, dloc, maps)
}

/// Translation-invariant variant of [`random_init`] on a ring.
pub fn random_init_ti(shape: &NetworkShape, a: usize, dloc: usize, seed: u64) -> Result<BtnsRep> {
    if !matches!(shape.kind(), GraphKind::Ring { .. }) {
        bail!(Unsupported, "translation-invariant maps need a ring");
    }
    let dim = shape.bond_dim(0);
    if shape.bond_dims().iter().any(|&b| b != dim) {
        bail!(Argument, "translation-invariant maps need uniform bonds");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let canonical = Tensor::from_fn(&[shape.phys_dim(), dim, dim, dloc + 1], |_| gaussian(&mut rng));
    BtnsRep::translation_invariant(shape.clone(), a, dloc, &canonical)
}

/// Maps a `[phys, left, right, ...]` tensor to the index order of ring vertex `v`.
///
/// Vertex 0's incident edges are `[0, L−1]`, i.e. right before left, so its
/// two bond indices are swapped; every other vertex already lists left first.
pub fn ring_map_from_canonical(shape: &NetworkShape, v: usize, canonical: &Tensor) -> Result<Tensor> {
    if !matches!(shape.kind(), GraphKind::Ring { .. }) {
        bail!(Unsupported, "ring layout requested on a non-ring graph");
    }
    if canonical.rank() < 3 {
        bail!(Dimension, "canonical ring map needs at least 3 indices");
    }
    Ok(if v == 0 { swap_bonds(canonical) } else { canonical.clone() })
}

/// Inverse of [`ring_map_from_canonical`].
pub fn ring_map_to_canonical(shape: &NetworkShape, v: usize, map: &Tensor) -> Result<Tensor> {
    ring_map_from_canonical(shape, v, map)
}

fn swap_bonds(t: &Tensor) -> Tensor {
    let mut perm: Vec<usize> = (0..t.rank()).collect();
    perm.swap(1, 2);
    t.permute(&perm)
}

/// `[phys, left, right]` view of a ring or chain map (extent-1 ends on chains).
pub(crate) fn to_line_form(shape: &NetworkShape, v: usize, map: &Tensor) -> Result<Tensor> {
    match shape.kind() {
        GraphKind::Ring { .. } => ring_map_to_canonical(shape, v, map),
        GraphKind::Chain { len } => {
            let s = map.shape();
            if len == 1 {
                map.reshape(&[s[0], 1, 1])
            } else if v == 0 {
                map.reshape(&[s[0], 1, s[1]])
            } else if v + 1 == len {
                map.reshape(&[s[0], s[1], 1])
            } else {
                Ok(map.clone())
            }
        }
        _ => bail!(Unsupported, "line form needs a ring or chain"),
    }
}
