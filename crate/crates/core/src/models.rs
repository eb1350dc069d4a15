//! Reference Hamiltonians and states, exact diagonalization, and the
//! approximation-versus-ε analysis of degeneration curves.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{bail, Result};
use crate::graph::{build_graph, GraphKind, NetworkShape};
use crate::linalg::{check_hermitian, eigh_dense};
use crate::network::{
    apply_local, degeneration_evaluate, degeneration_to_btns, ring_map_from_canonical, tns_evaluate, BtnsRep,
    DegenerationCurve, Observable, DEFAULT_STATE_CAP,
};
use crate::tensor::{increment, Tensor, C64, ONE, ZERO};

/// Hermitian operator acting on the sites `support` (in that order).
#[derive(Clone, Debug, PartialEq)]
pub struct LocalTerm {
    pub support: Vec<usize>,
    /// `d^k x d^k` matrix, row index = output.
    pub matrix: Tensor,
}

/// Sum of local terms on a network shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian {
    shape: NetworkShape,
    terms: Vec<LocalTerm>,
}

impl Hamiltonian {
    pub fn new(shape: NetworkShape, terms: Vec<LocalTerm>) -> Result<Self> {
        let d = shape.phys_dim();
        for (t, term) in terms.iter().enumerate() {
            let k = term.support.len();
            if k == 0 {
                bail!(Argument, "term {t} has empty support");
            }
            for (i, &s) in term.support.iter().enumerate() {
                if s >= shape.vertex_count() || term.support[..i].contains(&s) {
                    bail!(Argument, "term {t} has invalid support {:?}", term.support);
                }
            }
            let n = d.pow(k as u32);
            if term.matrix.shape() != [n, n] {
                bail!(Dimension, "term {t} matrix {:?} does not act on {n} states", term.matrix.shape());
            }
            check_hermitian(&term.matrix, 1e-12)?;
        }
        Ok(Hamiltonian { shape, terms })
    }

    pub fn shape(&self) -> &NetworkShape {
        &self.shape
    }

    pub fn terms(&self) -> &[LocalTerm] {
        &self.terms
    }

    /// Sum of the terms acting on exactly the endpoints of edge `e`, as a
    /// `d² x d²` matrix ordered like the edge's endpoints.
    pub fn edge_matrix(&self, e: usize) -> Result<Tensor> {
        let (u, v) = self.shape.edge(e);
        let d = self.shape.phys_dim();
        let mut out = Tensor::zeros(&[d * d, d * d]);
        for term in &self.terms {
            match term.support.as_slice() {
                [x, y] if (*x, *y) == (u, v) => out.axpy(ONE, &term.matrix)?,
                [x, y] if (*x, *y) == (v, u) => out.axpy(ONE, &swap_sites(&term.matrix, d)?)?,
                _ => {}
            }
        }
        Ok(out)
    }

    /// True when every term is a two-site term on an edge.
    pub fn is_edge_local(&self) -> bool {
        self.terms.iter().all(|t| t.support.len() == 2 && self.shape.edge_between(t.support[0], t.support[1]).is_some())
    }

    /// Nonzero matrix elements `(row, col, value)` over the full basis.
    pub fn sparse_entries(&self) -> Result<Vec<(usize, usize, C64)>> {
        let n = self.shape.state_len().filter(|&n| n <= DEFAULT_STATE_CAP);
        let Some(n) = n else {
            bail!(Resource, "Hamiltonian on {} sites is too large to assemble", self.shape.vertex_count());
        };
        let d = self.shape.phys_dim();
        let l = self.shape.vertex_count();
        let strides = crate::tensor::strides(&vec![d; l]);
        let mut acc: HashMap<(usize, usize), C64> = HashMap::new();
        let mut digits = vec![0usize; l];
        for col in 0..n {
            for term in &self.terms {
                let k = term.support.len();
                let m = d.pow(k as u32);
                let local_in = term.support.iter().fold(0, |x, &s| x * d + digits[s]);
                let base = col - term.support.iter().map(|&s| digits[s] * strides[s]).sum::<usize>();
                for local_out in 0..m {
                    let val = term.matrix.get(&[local_out, local_in]);
                    if val == ZERO {
                        continue;
                    }
                    let mut row = base;
                    let mut rest = local_out;
                    for &s in term.support.iter().rev() {
                        row += (rest % d) * strides[s];
                        rest /= d;
                    }
                    *acc.entry((row, col)).or_insert(ZERO) += val;
                }
            }
            increment(&mut digits, &vec![d; l]);
        }
        let mut out: Vec<_> = acc.into_iter().filter(|(_, v)| *v != ZERO).map(|((r, c), v)| (r, c, v)).collect();
        out.sort_by_key(|&(r, c, _)| (r, c));
        Ok(out)
    }

    /// Dense `d^L x d^L` matrix.
    pub fn dense_matrix(&self) -> Result<Tensor> {
        let n = self.shape.state_len().unwrap_or(usize::MAX);
        if n > 1 << 13 {
            bail!(Resource, "dense matrix of dimension {n} is too large");
        }
        let mut m = Tensor::zeros(&[n, n]);
        for (r, c, v) in self.sparse_entries()? {
            m.set(&[r, c], v);
        }
        Ok(m)
    }
}

fn swap_sites(m: &Tensor, d: usize) -> Result<Tensor> {
    m.reshape(&[d, d, d, d])?.permute(&[1, 0, 3, 2]).into_reshaped(&[d * d, d * d])
}

impl Observable for Hamiltonian {
    fn apply(&self, state: &Tensor) -> Result<Tensor> {
        let mut out = Tensor::zeros(state.shape());
        for term in &self.terms {
            out.axpy(ONE, &apply_local(state, &term.support, &term.matrix)?)?;
        }
        Ok(out)
    }
}

fn pauli() -> [Tensor; 3] {
    let c = |re: f64, im: f64| C64::new(re, im);
    [
        Tensor::new(vec![2, 2], vec![c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]).expect("x"),
        Tensor::new(vec![2, 2], vec![c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]).expect("y"),
        Tensor::new(vec![2, 2], vec![c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]).expect("z"),
    ]
}

fn kron(a: &Tensor, b: &Tensor) -> Tensor {
    let (n, m) = (a.shape()[0], b.shape()[0]);
    Tensor::from_fn(&[n * m, n * m], |i| {
        a.get(&[i[0] / m, i[1] / m]) * b.get(&[i[0] % m, i[1] % m])
    })
}

fn ring_terms(len: usize, phys: usize, edge: &Tensor) -> Result<Hamiltonian> {
    let shape = build_graph(GraphKind::Ring { len }, 1, phys)?;
    let terms = (0..len).map(|i| LocalTerm { support: vec![i, (i + 1) % len], matrix: edge.clone() }).collect();
    Hamiltonian::new(shape, terms)
}

/// `σˣσˣ + σʸσʸ + σᶻσᶻ` on every ring edge.
pub fn heisenberg_ring(len: usize) -> Result<Hamiltonian> {
    if len < 3 {
        bail!(Argument, "Heisenberg ring needs L >= 3");
    }
    let [x, y, z] = pauli();
    let mut edge = kron(&x, &x);
    edge.axpy(ONE, &kron(&y, &y))?;
    edge.axpy(ONE, &kron(&z, &z))?;
    ring_terms(len, 2, &edge)
}

/// Frustration-free-like ring model on qutrits whose translation-invariant
/// ground state is `psi_l(L)`: each edge `(i, i+1)` carries
/// `I − P + |2⟩⟨2|_i / (2L)` with
/// `P = |01⟩⟨01| + |10⟩⟨10| + |02⟩⟨02| + |21⟩⟨21|`.
pub fn separation_hamiltonian(len: usize) -> Result<Hamiltonian> {
    if len < 5 || len % 2 == 0 {
        bail!(Argument, "separation model needs odd L >= 5, got {len}");
    }
    let idx = |i: usize, j: usize| i * 3 + j;
    let edge = Tensor::from_fn(&[9, 9], |k| {
        if k[0] != k[1] {
            return ZERO;
        }
        let i = k[0] / 3;
        let in_p = [idx(0, 1), idx(1, 0), idx(0, 2), idx(2, 1)].contains(&k[0]);
        let mut val = if in_p { 0.0 } else { 1.0 };
        if i == 2 {
            val += 1.0 / (2.0 * len as f64);
        }
        C64::new(val, 0.0)
    });
    ring_terms(len, 3, &edge)
}

/// How a recorded bond value is known.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    Exact,
    AtLeast,
    AtMost,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BondRecord {
    pub value: usize,
    pub bound: Bound,
    pub translation_invariant: bool,
    pub note: String,
}

/// A named reference state with optional exact representations.
#[derive(Clone, Debug)]
pub struct KnownState {
    pub name: String,
    /// Normalized.
    pub state: Tensor,
    pub shape: NetworkShape,
    pub border_bond: Vec<BondRecord>,
    pub bond: Vec<BondRecord>,
    pub degeneration: Option<DegenerationCurve>,
    pub btns: Option<BtnsRep>,
}

fn record(value: usize, bound: Bound, ti: bool, note: &str) -> BondRecord {
    BondRecord { value, bound, translation_invariant: ti, note: note.to_string() }
}

fn normalized(t: Tensor) -> Tensor {
    let n = t.norm();
    t.scale_real(1.0 / n)
}

/// `Σ_k S^k |2 1 0 1 0 … 1 0⟩ / √L` on an odd ring of qutrits, with its
/// translation-invariant `a = 1` degeneration of bond 2.
pub fn psi_l(len: usize) -> Result<KnownState> {
    if len < 5 || len % 2 == 0 {
        bail!(Argument, "psi_L needs odd L >= 5, got {len}");
    }
    let mut state = Tensor::zeros(&vec![3; len]);
    for k in 0..len {
        let digits: Vec<usize> = (0..len)
            .map(|v| {
                let r = (v + len - k) % len;
                if r == 0 {
                    2
                } else if r % 2 == 1 {
                    1
                } else {
                    0
                }
            })
            .collect();
        state.set(&digits, ONE);
    }
    let shape = build_graph(GraphKind::Ring { len }, 2, 3)?;
    let curve = DegenerationCurve::translation_invariant(shape.clone(), 1, &psi_l_coefficients())?;
    let btns = degeneration_to_btns(&curve)?;
    Ok(KnownState {
        name: "separation".into(),
        state: normalized(state),
        shape,
        border_bond: vec![record(2, Bound::Exact, true, "a = 1 degeneration with bond 2 shipped as `degeneration`")],
        bond: vec![
            record(3, Bound::AtLeast, true, "no translation-invariant bond-2 representation exists on any ring"),
            record(0, Bound::AtLeast, true, "grows at least like L^(1/3) / log L"),
        ],
        degeneration: Some(curve),
        btns: Some(btns),
    })
}

/// `[phys, left, right]` coefficients of the `psi_l` degeneration: digits
/// 0 and 1 alternate the bond at ε⁰, digit 2 sits on bond 0 at ε¹.
pub fn psi_l_coefficients() -> Vec<Tensor> {
    let a0 = Tensor::from_fn(&[3, 2, 2], |i| match (i[0], i[1], i[2]) {
        (0, 1, 0) | (1, 0, 1) => ONE,
        _ => ZERO,
    });
    let a1 = Tensor::from_fn(&[3, 2, 2], |i| if i == [2, 0, 0] { ONE } else { ZERO });
    vec![a0, a1]
}

/// Bond-4 translation-invariant representation of `psi_l` padded with two
/// bond states that only the weight-one map reaches, so every configuration
/// through them has weight at least two and drops out.
pub fn psi_l_padded(len: usize) -> Result<BtnsRep> {
    if len < 5 || len % 2 == 0 {
        bail!(Argument, "psi_L needs odd L >= 5, got {len}");
    }
    let two = C64::new(2.0, 0.0);
    let canonical = Tensor::from_fn(&[3, 4, 4, 2], |i| match (i[0], i[1], i[2], i[3]) {
        (0, 1, 0, 0) | (1, 0, 1, 0) | (2, 0, 0, 1) => ONE,
        (2, 2, 2, 1) | (2, 3, 3, 1) => two,
        _ => ZERO,
    });
    BtnsRep::translation_invariant(build_graph(GraphKind::Ring { len }, 4, 3)?, 1, 1, &canonical)
}

/// Amplitude support of the 17-term three-party state on `C^9`.
pub const T_TERMS: [[usize; 3]; 17] = [
    [0, 0, 5],
    [0, 1, 6],
    [0, 4, 0],
    [1, 2, 6],
    [1, 6, 0],
    [2, 2, 7],
    [2, 5, 1],
    [2, 6, 2],
    [3, 3, 8],
    [3, 7, 3],
    [3, 8, 4],
    [4, 3, 0],
    [5, 0, 1],
    [6, 3, 2],
    [7, 0, 3],
    [7, 1, 4],
    [8, 2, 4],
];

/// Entries `(left, right, phys)` of a bond-3 matrix-valued map.
fn bond3_map(entries: &[(usize, usize, usize)]) -> Tensor {
    let mut t = Tensor::zeros(&[9, 3, 3]);
    for &(l, r, p) in entries {
        t.set(&[p, l, r], ONE);
    }
    t
}

/// The 17-term state on a ring of three `C^9` sites, with an `a = 1`
/// degeneration of bond 3.
pub fn t_state() -> Result<KnownState> {
    let mut state = Tensor::zeros(&[9, 9, 9]);
    for t in T_TERMS {
        state.set(&t, ONE);
    }
    let shape = build_graph(GraphKind::Ring { len: 3 }, 3, 9)?;
    let a0_12 = bond3_map(&[(0, 0, 0), (0, 1, 1), (1, 1, 2), (2, 2, 3)]);
    let a0_3 = bond3_map(&[(0, 1, 1), (0, 2, 3), (1, 2, 4), (2, 0, 0), (2, 1, 2)]);
    let a1_12 = bond3_map(&[(0, 2, 4), (1, 0, 5), (1, 2, 6), (2, 0, 7), (2, 1, 8)]);
    let a1_3 = bond3_map(&[(0, 0, 5), (1, 0, 6), (1, 1, 7), (2, 2, 8)]);
    let canonical = [vec![a0_12.clone(), a1_12.clone()], vec![a0_12, a1_12], vec![a0_3, a1_3]];
    let coefficients = canonical
        .iter()
        .enumerate()
        .map(|(v, cs)| cs.iter().map(|c| ring_map_from_canonical(&shape, v, c)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let curve = DegenerationCurve::new(shape.clone(), 1, coefficients)?;
    let btns = degeneration_to_btns(&curve)?;
    Ok(KnownState {
        name: "tstate".into(),
        state: normalized(state),
        shape,
        border_bond: vec![record(3, Bound::Exact, false, "a = 1 degeneration with bond 3 shipped as `degeneration`")],
        bond: vec![
            record(4, Bound::AtLeast, false, "no bond-3 representation exists"),
            record(9, Bound::AtMost, false, "explicit bond-9 representation exists"),
        ],
        degeneration: Some(curve),
        btns: Some(btns),
    })
}

/// `[phys, left, right]` coefficients of the W degeneration on a ring of `len`:
/// `diag(1, e^{iπ/L})` on digit 0 at ε⁰ and `diag(1, 0)` on digit 1 at ε¹.
pub fn w_degeneration_coefficients(len: usize) -> Vec<Tensor> {
    let phase = C64::from_polar(1.0, std::f64::consts::PI / len as f64);
    let a0 = Tensor::from_fn(&[2, 2, 2], |i| match (i[0], i[1], i[2]) {
        (0, 0, 0) => ONE,
        (0, 1, 1) => phase,
        _ => ZERO,
    });
    let a1 = Tensor::from_fn(&[2, 2, 2], |i| if i == [1, 0, 0] { ONE } else { ZERO });
    vec![a0, a1]
}

/// Normalized W state on a ring of qubits with its bond-2 degeneration.
pub fn w_state(len: usize) -> Result<KnownState> {
    if len < 3 {
        bail!(Argument, "W state needs L >= 3");
    }
    let chi = crate::weight::build_weight_state(crate::weight::WeightSpec::new(1, 1, len)?)?;
    let shape = build_graph(GraphKind::Ring { len }, 2, 2)?;
    let curve = DegenerationCurve::translation_invariant(shape.clone(), 1, &w_degeneration_coefficients(len))?;
    let btns = degeneration_to_btns(&curve)?;
    Ok(KnownState {
        name: "wstate".into(),
        state: normalized(chi),
        shape,
        border_bond: vec![record(2, Bound::Exact, true, "a = 1 degeneration with bond 2 shipped as `degeneration`")],
        bond: Vec::new(),
        degeneration: Some(curve),
        btns: Some(btns),
    })
}

/// Level-three GHZ state on a ring of three qutrits.
pub fn ghz3() -> Result<KnownState> {
    let mut state = Tensor::zeros(&[3, 3, 3]);
    for i in 0..3 {
        state.set(&[i, i, i], ONE);
    }
    Ok(KnownState {
        name: "ghz3".into(),
        state: normalized(state),
        shape: build_graph(GraphKind::Ring { len: 3 }, 2, 3)?,
        border_bond: vec![record(2, Bound::Exact, false, "border rank of the 3x3 matrix multiplication-like tensor")],
        bond: vec![record(3, Bound::Exact, false, "no bond-2 representation on the triangle")],
        degeneration: None,
        btns: None,
    })
}

/// Names accepted by [`model_hamiltonian`] and [`model_state`].
pub const MODEL_NAMES: [&str; 5] = ["heisenberg", "separation", "tstate", "wstate", "ghz3"];

pub fn model_description(name: &str) -> Option<&'static str> {
    Some(match name {
        "heisenberg" => "isotropic Heisenberg ring (Pauli couplings), qubits, any L >= 3",
        "separation" => "qutrit ring with a unique translation-invariant ground state, odd L >= 5",
        "tstate" => "17-term state on three C^9 sites with a bond-3 degeneration",
        "wstate" => "W state on a qubit ring with a bond-2 degeneration",
        "ghz3" => "level-three GHZ state on three qutrits",
        _ => return None,
    })
}

/// Hamiltonian of a registry model, where one exists.
pub fn model_hamiltonian(name: &str, len: usize) -> Result<Hamiltonian> {
    match name {
        "heisenberg" => heisenberg_ring(len),
        "separation" => separation_hamiltonian(len),
        "tstate" | "wstate" | "ghz3" => bail!(Unsupported, "model {name:?} has no Hamiltonian"),
        _ => bail!(Argument, "unknown model {name:?}"),
    }
}

/// Reference state of a registry model (the exact ground state for Hamiltonians
/// without a closed form).
pub fn model_state(name: &str, len: usize) -> Result<KnownState> {
    match name {
        "separation" => psi_l(len),
        "tstate" => t_state(),
        "wstate" => w_state(len),
        "ghz3" => ghz3(),
        "heisenberg" => {
            let h = heisenberg_ring(len)?;
            let ed = ed_ground_state(&h)?;
            Ok(KnownState {
                name: name.into(),
                state: ed.state,
                shape: h.shape().clone(),
                border_bond: Vec::new(),
                bond: Vec::new(),
                degeneration: None,
                btns: None,
            })
        }
        _ => bail!(Argument, "unknown model {name:?}"),
    }
}

/// Result of exact diagonalization.
#[derive(Clone, Debug)]
pub struct EdResult {
    pub energy: f64,
    /// Normalized; the translation-invariant one when it is unique.
    pub state: Tensor,
    /// The cyclic shift fixes exactly one direction of the ground space.
    pub ti_unique: bool,
    pub ground_degeneracy: usize,
    /// All eigenvalues, ascending.
    pub spectrum: Vec<f64>,
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut y = x;
    while parent[y] != r {
        let next = parent[y];
        parent[y] = r;
        y = next;
    }
    r
}

/// Ground state by block-diagonalizing the assembled matrix.
///
/// Basis states are grouped into connected components of the matrix's
/// sparsity graph and every block is solved densely.
pub fn ed_ground_state(h: &Hamiltonian) -> Result<EdResult> {
    let entries = h.sparse_entries()?;
    let n = h.shape().state_len().expect("checked by sparse_entries");
    let mut parent: Vec<usize> = (0..n).collect();
    for &(r, c, _) in &entries {
        let (a, b) = (find(&mut parent, r), find(&mut parent, c));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut blocks: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        blocks.entry(root).or_default().push(i);
    }
    let mut by_row: Vec<Vec<(usize, C64)>> = vec![Vec::new(); n];
    for &(r, c, v) in &entries {
        by_row[r].push((c, v));
    }
    let mut roots: Vec<usize> = blocks.keys().copied().collect();
    roots.sort_unstable();
    let mut spectrum = Vec::with_capacity(n);
    let mut vectors: Vec<(f64, Vec<(usize, C64)>)> = Vec::new();
    let mut local = vec![usize::MAX; n];
    for root in roots {
        let members = &blocks[&root];
        for (k, &i) in members.iter().enumerate() {
            local[i] = k;
        }
        let m = members.len();
        let mut mat = DMatrix::<C64>::zeros(m, m);
        for (k, &i) in members.iter().enumerate() {
            for &(c, v) in &by_row[i] {
                mat[(k, local[c])] += v;
            }
        }
        let (vals, vecs) = eigh_dense(mat)?;
        for (j, &e) in vals.iter().enumerate() {
            spectrum.push(e);
            vectors.push((e, members.iter().enumerate().map(|(k, &i)| (i, vecs[(k, j)])).collect()));
        }
    }
    spectrum.sort_by(f64::total_cmp);
    let energy = spectrum[0];
    let tol = 1e-8 * energy.abs().max(1.0);
    let ground: Vec<Tensor> = vectors
        .iter()
        .filter(|(e, _)| *e <= energy + tol)
        .map(|(_, v)| {
            let mut t = Tensor::zeros(&vec![h.shape().phys_dim(); h.shape().vertex_count()]);
            for &(i, c) in v {
                t.data_mut()[i] = c;
            }
            t
        })
        .collect();
    let degeneracy = ground.len();
    let (ti_unique, state) = translation_invariant_part(h.shape(), &ground)?;
    Ok(EdResult { energy, state, ti_unique, ground_degeneracy: degeneracy, spectrum })
}

/// Cyclic shift `(Sψ)[i_0, …, i_{L−1}] = ψ[i_{L−1}, i_0, …, i_{L−2}]`.
pub fn cyclic_shift(state: &Tensor) -> Tensor {
    let l = state.rank();
    let perm: Vec<usize> = (0..l).map(|k| (k + 1) % l).collect();
    state.permute(&perm)
}

fn translation_invariant_part(shape: &NetworkShape, ground: &[Tensor]) -> Result<(bool, Tensor)> {
    if !matches!(shape.kind(), GraphKind::Ring { .. }) {
        return Ok((false, ground[0].clone()));
    }
    let g = ground.len();
    let shifted: Vec<Tensor> = ground.iter().map(cyclic_shift).collect();
    let mut m = DMatrix::<C64>::zeros(g, g);
    for i in 0..g {
        for j in 0..g {
            m[(i, j)] = crate::tensor::inner(&ground[i], &shifted[j])?;
        }
    }
    let herm = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    let (vals, vecs) = eigh_dense(herm)?;
    let fixed: Vec<usize> = (0..g).filter(|&k| (vals[k] - 1.0).abs() < 1e-8).collect();
    if fixed.len() != 1 {
        return Ok((false, ground[0].clone()));
    }
    let k = fixed[0];
    let mut state = Tensor::zeros(ground[0].shape());
    for (i, gi) in ground.iter().enumerate() {
        state.axpy(vecs[(i, k)], gi)?;
    }
    Ok((true, normalized(state)))
}

/// One row of [`approximation_tradeoff`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TradeoffRow {
    pub eps: f64,
    pub norm: f64,
    pub tau: f64,
    pub distance: f64,
    pub bound: f64,
    /// `τ ≤ 1/2`, so the bound applies.
    pub bound_applies: bool,
}

impl TradeoffRow {
    pub fn within_bound(&self) -> bool {
        !self.bound_applies || self.distance <= self.bound
    }
}

/// Distance between the normalized curve state at each ε and its limit,
/// against the bound `4τ(ε)` with `τ(ε) = Σ_{l≥1} ε^l ‖ψ_{a+l}‖ / ‖ψ_a‖`.
pub fn approximation_tradeoff(curve: &DegenerationCurve, eps_grid: &[f64]) -> Result<Vec<TradeoffRow>> {
    let coeffs = curve.expansion()?;
    let a = curve.a();
    let lead = coeffs.get(a).map(|c| c.norm()).unwrap_or(0.0);
    if lead == 0.0 {
        bail!(DegenerateState, "curve has no ε^{a} term");
    }
    let phi0 = coeffs[a].scale_real(1.0 / lead);
    let rel: Vec<f64> = coeffs[a + 1..].iter().map(|c| c.norm() / lead).collect();
    eps_grid
        .iter()
        .map(|&eps| {
            if eps <= 0.0 || !eps.is_finite() {
                bail!(Argument, "ε grid values must be positive, got {eps}");
            }
            let psi = tns_evaluate(&degeneration_evaluate(curve, C64::new(eps, 0.0))?)?;
            let norm = psi.norm();
            let distance = psi.scale_real(1.0 / norm).sub(&phi0)?.norm();
            let tau: f64 = rel.iter().enumerate().map(|(l, r)| eps.powi(l as i32 + 1) * r).sum();
            Ok(TradeoffRow { eps, norm, tau, distance, bound: 4.0 * tau, bound_applies: tau <= 0.5 })
        })
        .collect()
}

/// Closed form of the squared distance between the normalized W-degeneration
/// state and the normalized W state: `2(√X − √L ε)/√X`, `X = (1+ε²)^L − 1`.
pub fn w_distance_sq_closed_form(len: usize, eps: f64) -> f64 {
    let x = (1.0 + eps * eps).powi(len as i32) - 1.0;
    2.0 * (x.sqrt() - (len as f64).sqrt() * eps) / x.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{btns_evaluate, expectation_exact};
    use crate::tensor::inner;

    #[test]
    fn heisenberg_edge_spectrum() {
        let h = heisenberg_ring(4).unwrap();
        assert_eq!(h.terms().len(), 4);
        let (vals, _) = crate::linalg::eigh(&h.terms()[0].matrix).unwrap();
        let expected = [-3.0, 1.0, 1.0, 1.0];
        for (v, e) in vals.iter().zip(expected) {
            assert!((v - e).abs() < 1e-12);
        }
    }

    #[test]
    fn heisenberg_ed_matches_dense_solve() {
        let h = heisenberg_ring(4).unwrap();
        let ed = ed_ground_state(&h).unwrap();
        // second assembly path: Kronecker products of the full operator
        let [x, y, z] = pauli();
        let id = Tensor::identity(2);
        let mut full = Tensor::zeros(&[16, 16]);
        for i in 0..4 {
            for p in [&x, &y, &z] {
                let mut op = Tensor::scalar(ONE).reshape(&[1, 1]).unwrap();
                for s in 0..4 {
                    let f = if s == i || s == (i + 1) % 4 { p } else { &id };
                    op = kron(&op, f);
                }
                full.axpy(ONE, &op).unwrap();
            }
        }
        let (vals, _) = crate::linalg::eigh(&full).unwrap();
        assert!((ed.energy - vals[0]).abs() < 1e-10);
        assert!((ed.energy + 8.0).abs() < 1e-10);
    }

    #[test]
    fn separation_model_ground_state() {
        let h = separation_hamiltonian(5).unwrap();
        let ed = ed_ground_state(&h).unwrap();
        assert!((ed.energy - 0.1).abs() < 1e-12);
        assert!(ed.ti_unique);
        assert_eq!(ed.ground_degeneracy, 5);
        let psi = psi_l(5).unwrap();
        let ov = inner(&psi.state, &ed.state).unwrap().norm();
        assert!(ov > 1.0 - 1e-10);
        assert!((expectation_exact(&psi.state, &h).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn separation_hamiltonian_is_diagonal_with_quantized_spectrum() {
        let h = separation_hamiltonian(5).unwrap();
        assert!(h.sparse_entries().unwrap().iter().all(|&(r, c, _)| r == c));
        let ed = ed_ground_state(&h).unwrap();
        for e in ed.spectrum {
            let m = (e * 10.0).round();
            assert!((e - m / 10.0).abs() < 1e-9);
        }
    }

    #[test]
    fn even_rings_are_rejected() {
        assert!(separation_hamiltonian(6).is_err());
        assert!(psi_l(4).is_err());
    }

    #[test]
    fn identity_sum_energy_counts_terms() {
        let shape = build_graph(GraphKind::Chain { len: 3 }, 1, 2).unwrap();
        let terms = vec![
            LocalTerm { support: vec![0, 1], matrix: Tensor::identity(4) },
            LocalTerm { support: vec![1, 2], matrix: Tensor::identity(4) },
        ];
        let ed = ed_ground_state(&Hamiltonian::new(shape, terms).unwrap()).unwrap();
        assert!((ed.energy - 2.0).abs() < 1e-12);
        assert_eq!(ed.ground_degeneracy, 8);
    }

    #[test]
    fn non_hermitian_terms_are_rejected() {
        let shape = build_graph(GraphKind::Chain { len: 2 }, 1, 2).unwrap();
        let m = Tensor::from_fn(&[4, 4], |i| if i == [0, 1] { ONE } else { ZERO });
        assert!(Hamiltonian::new(shape, vec![LocalTerm { support: vec![0, 1], matrix: m }]).is_err());
    }

    #[test]
    fn psi_l_btns_is_exact() {
        let psi = psi_l(5).unwrap();
        let b = btns_evaluate(psi.btns.as_ref().unwrap()).unwrap();
        assert!((b.norm() - 5f64.sqrt()).abs() < 1e-12);
        assert!(b.scale_real(1.0 / 5f64.sqrt()).sub(&psi.state).unwrap().norm() < 1e-12);
    }

    #[test]
    fn t_state_amplitudes_and_representation() {
        let t = t_state().unwrap();
        assert!((t.state.norm() - 1.0).abs() < 1e-14);
        let amp = 1.0 / 17f64.sqrt();
        assert_eq!(t.state.data().iter().filter(|z| z.norm() > 0.0).count(), 17);
        assert!(t.state.data().iter().all(|z| z.norm() == 0.0 || (z.re - amp).abs() < 1e-15));
        let b = btns_evaluate(t.btns.as_ref().unwrap()).unwrap();
        assert!(b.scale_real(amp).sub(&t.state).unwrap().norm() < 1e-12);
    }

    #[test]
    fn t_state_flattenings_have_full_rank() {
        let t = t_state().unwrap();
        for (rows, cols) in [([0], [1, 2]), ([1], [0, 2]), ([2], [0, 1])] {
            let s = crate::tensor::svd(&t.state, &rows, &cols, None, 1e-12).unwrap();
            assert_eq!(s.rank(), 9);
        }
    }

    #[test]
    fn w_degeneration_norm_and_overlap() {
        let l = 6;
        let w = w_state(l).unwrap();
        let curve = w.degeneration.unwrap();
        let psi = tns_evaluate(&degeneration_evaluate(&curve, C64::new(0.1, 0.0)).unwrap()).unwrap();
        assert!((psi.norm_sqr() - (1.01f64.powi(6) - 1.0)).abs() < 1e-13);
        let chi = w.state.scale_real(6f64.sqrt());
        assert!((inner(&chi, &psi).unwrap() - C64::new(0.6, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn tradeoff_rows_respect_the_bound() {
        let curve = psi_l(5).unwrap().degeneration.unwrap();
        let rows = approximation_tradeoff(&curve, &[0.2, 0.1, 0.05]).unwrap();
        assert!(rows.iter().all(|r| r.bound_applies && r.within_bound()));
        assert!(rows.windows(2).all(|w| w[1].distance < w[0].distance));
    }

    #[test]
    fn registry_covers_every_name() {
        for name in MODEL_NAMES {
            assert!(model_description(name).is_some());
            assert!(model_state(name, 5).is_ok(), "{name}");
        }
        assert!(model_hamiltonian("tstate", 3).is_err());
        assert!(model_state("nope", 5).is_err());
    }

    #[test]
    fn edge_matrix_reorders_reversed_supports() {
        let shape = build_graph(GraphKind::Chain { len: 2 }, 1, 2).unwrap();
        let z = &pauli()[2];
        let zi = kron(z, &Tensor::identity(2));
        let h = Hamiltonian::new(shape, vec![LocalTerm { support: vec![1, 0], matrix: zi }]).unwrap();
        assert_eq!(h.edge_matrix(0).unwrap(), kron(&Tensor::identity(2), z));
    }
}
