//! Dense complex tensors.
//!
//! Storage is row-major over the index order. Contraction permutes both
//! operands so that the summed indices are adjacent and then runs a plain
//! matrix product; at the sizes this crate targets (full states of at most a
//! few million amplitudes) this is both the simplest and the fastest route.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};
use crate::linalg;

/// Complex scalar used throughout the crate.
pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Dense complex multi-index array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TensorJson", into = "TensorJson")]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

/// Wire form of a tensor: `{shape, re, im}` in row-major order.
#[derive(Serialize, Deserialize)]
struct TensorJson {
    shape: Vec<usize>,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl TryFrom<TensorJson> for Tensor {
    type Error = Error;

    fn try_from(value: TensorJson) -> Result<Self> {
        if value.re.len() != value.im.len() {
            bail!(Dimension, "re has {} entries, im has {}", value.re.len(), value.im.len());
        }
        let data = value.re.iter().zip(&value.im).map(|(&re, &im)| C64::new(re, im)).collect();
        let t = Tensor::new(value.shape, data)?;
        if !t.is_finite() {
            bail!(Argument, "tensor contains non-finite entries");
        }
        Ok(t)
    }
}

impl From<Tensor> for TensorJson {
    fn from(t: Tensor) -> Self {
        TensorJson {
            re: t.data.iter().map(|z| z.re).collect(),
            im: t.data.iter().map(|z| z.im).collect(),
            shape: t.shape,
        }
    }
}

fn volume(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tensor {
    /// Builds a tensor from a shape and row-major data.
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        if shape.contains(&0) {
            bail!(Argument, "tensor extents must be positive, got {:?}", shape);
        }
        if volume(&shape) != data.len() {
            bail!(Dimension, "shape {:?} needs {} entries, got {}", shape, volume(&shape), data.len());
        }
        Ok(Tensor { shape, data })
    }

    /// Unchecked constructor; zero extents are allowed here so that rank-0
    /// factorizations can carry empty factors.
    pub(crate) fn from_raw(shape: Vec<usize>, data: Vec<C64>) -> Self {
        debug_assert_eq!(volume(&shape), data.len());
        Tensor { shape, data }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        assert!(!shape.contains(&0), "tensor extents must be positive");
        Tensor { shape: shape.to_vec(), data: vec![ZERO; volume(shape)] }
    }

    pub fn scalar(value: C64) -> Self {
        Tensor { shape: Vec::new(), data: vec![value] }
    }

    pub fn from_real(shape: &[usize], values: &[f64]) -> Result<Self> {
        Tensor::new(shape.to_vec(), values.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Builds a tensor by evaluating `f` on every multi-index in row-major order.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> C64) -> Self {
        let mut t = Tensor::zeros(shape);
        let mut idx = vec![0usize; shape.len()];
        for slot in t.data.iter_mut() {
            *slot = f(&idx);
            increment(&mut idx, shape);
        }
        t
    }

    /// Square identity matrix.
    pub fn identity(n: usize) -> Self {
        Tensor::from_fn(&[n, n], |i| if i[0] == i[1] { ONE } else { ZERO })
    }

    /// Computational basis vector of a single-index space.
    pub fn basis_vector(dim: usize, index: usize) -> Self {
        Tensor::from_fn(&[dim], |i| if i[0] == index { ONE } else { ZERO })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn strides(&self) -> Vec<usize> {
        strides(&self.shape)
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &n)| {
            debug_assert!(i < n);
            acc * n + i
        })
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: C64) {
        let k = self.offset(idx);
        self.data[k] = value;
    }

    /// Value of a rank-0 (or single-entry) tensor.
    pub fn as_scalar(&self) -> Option<C64> {
        (self.data.len() == 1).then(|| self.data[0])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn conj(&self) -> Tensor {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn scale(&self, c: C64) -> Tensor {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&z| z * c).collect() }
    }

    pub fn scale_real(&self, c: f64) -> Tensor {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&z| z * c).collect() }
    }

    pub fn scale_mut(&mut self, c: C64) {
        self.data.iter_mut().for_each(|z| *z *= c);
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: C64, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            bail!(Dimension, "axpy shapes {:?} and {:?}", self.shape, other.shape);
        }
        for (x, &y) in self.data.iter_mut().zip(&other.data) {
            *x += c * y;
        }
        Ok(())
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        let mut out = self.clone();
        out.axpy(ONE, other)?;
        Ok(out)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        let mut out = self.clone();
        out.axpy(-ONE, other)?;
        Ok(out)
    }

    /// Reorders indices: output index `k` is input index `perm[k]`.
    pub fn permute(&self, perm: &[usize]) -> Tensor {
        let r = self.rank();
        assert_eq!(perm.len(), r, "permutation length");
        debug_assert!({
            let mut seen = vec![false; r];
            perm.iter().all(|&p| p < r && !std::mem::replace(&mut seen[p], true))
        });
        if perm.iter().enumerate().all(|(k, &p)| k == p) {
            return self.clone();
        }
        let in_strides = self.strides();
        let out_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let step: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
        let mut data = Vec::with_capacity(self.data.len());
        if self.data.is_empty() {
            return Tensor::from_raw(out_shape, data);
        }
        let mut idx = vec![0usize; r];
        let mut src = 0usize;
        let inner = r - 1;
        let (inner_n, inner_step) = (out_shape[inner], step[inner]);
        loop {
            for j in 0..inner_n {
                data.push(self.data[src + j * inner_step]);
            }
            // advance all but the innermost output index
            let mut k = inner;
            loop {
                if k == 0 {
                    return Tensor::from_raw(out_shape, data);
                }
                k -= 1;
                idx[k] += 1;
                src += step[k];
                if idx[k] < out_shape[k] {
                    break;
                }
                src -= step[k] * idx[k];
                idx[k] = 0;
            }
        }
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        if volume(shape) != self.data.len() || shape.contains(&0) {
            bail!(Dimension, "cannot reshape {:?} into {:?}", self.shape, shape);
        }
        Ok(Tensor { shape: shape.to_vec(), data: self.data.clone() })
    }

    pub fn into_reshaped(self, shape: &[usize]) -> Result<Tensor> {
        if volume(shape) != self.data.len() || shape.contains(&0) {
            bail!(Dimension, "cannot reshape {:?} into {:?}", self.shape, shape);
        }
        Ok(Tensor { shape: shape.to_vec(), data: self.data })
    }

    /// Fixes `axis` to `index`, dropping that axis.
    pub fn slice_axis(&self, axis: usize, index: usize) -> Result<Tensor> {
        if axis >= self.rank() || index >= self.shape[axis] {
            bail!(Argument, "slice ({axis}, {index}) out of range for {:?}", self.shape);
        }
        let outer: usize = self.shape[..axis].iter().product();
        let n = self.shape[axis];
        let inner: usize = self.shape[axis + 1..].iter().product();
        let mut data = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let base = (o * n + index) * inner;
            data.extend_from_slice(&self.data[base..base + inner]);
        }
        let mut shape = self.shape.clone();
        shape.remove(axis);
        Ok(Tensor { shape, data })
    }

    /// Keeps the first `keep` indices along `axis`.
    pub fn truncate_axis(&self, axis: usize, keep: usize) -> Result<Tensor> {
        if axis >= self.rank() || keep == 0 || keep > self.shape[axis] {
            bail!(Argument, "cannot keep {keep} of axis {axis} in {:?}", self.shape);
        }
        let outer: usize = self.shape[..axis].iter().product();
        let n = self.shape[axis];
        let inner: usize = self.shape[axis + 1..].iter().product();
        let mut data = Vec::with_capacity(outer * keep * inner);
        for o in 0..outer {
            let base = o * n * inner;
            data.extend_from_slice(&self.data[base..base + keep * inner]);
        }
        let mut shape = self.shape.clone();
        shape[axis] = keep;
        Ok(Tensor { shape, data })
    }

    /// Stacks equally shaped tensors along a new trailing axis.
    pub fn stack_last(parts: &[Tensor]) -> Result<Tensor> {
        let Some(first) = parts.first() else {
            bail!(Argument, "cannot stack zero tensors");
        };
        if parts.iter().any(|p| p.shape != first.shape) {
            bail!(Dimension, "stacked tensors must share a shape");
        }
        let k = parts.len();
        let mut data = vec![ZERO; first.len() * k];
        for (j, p) in parts.iter().enumerate() {
            for (i, &z) in p.data.iter().enumerate() {
                data[i * k + j] = z;
            }
        }
        let mut shape = first.shape.clone();
        shape.push(k);
        Ok(Tensor { shape, data })
    }

    /// Row-major matrix view over an index bipartition.
    pub fn matricize(&self, rows: &[usize], cols: &[usize]) -> Result<(Tensor, Vec<usize>, Vec<usize>)> {
        check_bipartition(self.rank(), rows, cols)?;
        let perm: Vec<usize> = rows.iter().chain(cols).copied().collect();
        let row_ext: Vec<usize> = rows.iter().map(|&i| self.shape[i]).collect();
        let col_ext: Vec<usize> = cols.iter().map(|&i| self.shape[i]).collect();
        let m = volume(&row_ext);
        let n = volume(&col_ext);
        let t = self.permute(&perm);
        Ok((Tensor::from_raw(vec![m, n], t.data), row_ext, col_ext))
    }
}

fn check_bipartition(rank: usize, rows: &[usize], cols: &[usize]) -> Result<()> {
    let mut seen = vec![false; rank];
    for &i in rows.iter().chain(cols) {
        if i >= rank || std::mem::replace(&mut seen[i], true) {
            bail!(Argument, "index {i} repeated or out of range in bipartition");
        }
    }
    if seen.iter().any(|s| !s) {
        bail!(Argument, "bipartition must cover all {rank} indices");
    }
    Ok(())
}

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * shape[k + 1];
    }
    s
}

/// Row-major odometer step; returns false once it wraps around.
pub(crate) fn increment(idx: &mut [usize], shape: &[usize]) -> bool {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < shape[k] {
            return true;
        }
        idx[k] = 0;
    }
    false
}

/// `(m x k) * (k x n)` for row-major slices.
pub(crate) fn matmul(a: &[C64], b: &[C64], m: usize, k: usize, n: usize) -> Vec<C64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut c = vec![ZERO; m * n];
    for i in 0..m {
        let row = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let x = a[i * k + p];
            if x == ZERO {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cj, &bj) in row.iter_mut().zip(brow) {
                *cj += x * bj;
            }
        }
    }
    c
}

/// Sums over the paired indices `(index of a, index of b)`.
///
/// Result indices are the unpaired indices of `a` followed by those of `b`;
/// an empty `pairs` gives the outer product.
pub fn contract(a: &Tensor, b: &Tensor, pairs: &[(usize, usize)]) -> Result<Tensor> {
    let mut used_a = vec![false; a.rank()];
    let mut used_b = vec![false; b.rank()];
    for &(i, j) in pairs {
        if i >= a.rank() || j >= b.rank() {
            bail!(Argument, "pair ({i}, {j}) out of range for ranks {} and {}", a.rank(), b.rank());
        }
        if std::mem::replace(&mut used_a[i], true) || std::mem::replace(&mut used_b[j], true) {
            bail!(Argument, "index repeated in contraction pairs {:?}", pairs);
        }
        if a.shape[i] != b.shape[j] {
            bail!(Dimension, "contracting extent {} with {}", a.shape[i], b.shape[j]);
        }
    }
    let free_a: Vec<usize> = (0..a.rank()).filter(|&i| !used_a[i]).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|&j| !used_b[j]).collect();
    let perm_a: Vec<usize> = free_a.iter().copied().chain(pairs.iter().map(|p| p.0)).collect();
    let perm_b: Vec<usize> = pairs.iter().map(|p| p.1).chain(free_b.iter().copied()).collect();
    let m: usize = free_a.iter().map(|&i| a.shape[i]).product();
    let k: usize = pairs.iter().map(|p| a.shape[p.0]).product();
    let n: usize = free_b.iter().map(|&j| b.shape[j]).product();
    let ap = a.permute(&perm_a);
    let bp = b.permute(&perm_b);
    let data = matmul(&ap.data, &bp.data, m, k, n);
    let shape = free_a.iter().map(|&i| a.shape[i]).chain(free_b.iter().map(|&j| b.shape[j])).collect();
    Ok(Tensor::from_raw(shape, data))
}

pub fn outer(a: &Tensor, b: &Tensor) -> Tensor {
    contract(a, b, &[]).expect("outer product cannot fail")
}

/// `Σ conj(a) * b` over all entries.
pub fn inner(a: &Tensor, b: &Tensor) -> Result<C64> {
    if a.shape != b.shape {
        bail!(Dimension, "inner product of {:?} and {:?}", a.shape, b.shape);
    }
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| x.conj() * y).sum())
}

pub fn norm(a: &Tensor) -> f64 {
    a.norm()
}

/// Truncated singular value decomposition.
#[derive(Clone, Debug)]
pub struct SvdResult {
    /// Shape: row extents followed by the retained rank.
    pub left: Tensor,
    /// Descending, non-negative.
    pub singular_values: Vec<f64>,
    /// Shape: retained rank followed by the column extents.
    pub right: Tensor,
    /// Root of the sum of squared discarded singular values.
    pub truncation_error: f64,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// `left * diag(s) * right`, reshaped to row extents followed by column extents.
    pub fn reconstruct(&self) -> Tensor {
        let r = self.rank();
        let lshape = &self.left.shape()[..self.left.rank() - 1];
        let rshape = &self.right.shape()[1..];
        let m = volume(lshape);
        let n = volume(rshape);
        let shape: Vec<usize> = lshape.iter().chain(rshape).copied().collect();
        if r == 0 {
            return Tensor::from_raw(shape.clone(), vec![ZERO; volume(&shape)]);
        }
        let mut us = self.left.data.clone();
        for row in us.chunks_mut(r) {
            for (x, s) in row.iter_mut().zip(&self.singular_values) {
                *x *= s;
            }
        }
        Tensor::from_raw(shape, matmul(&us, &self.right.data, m, r, n))
    }
}

/// SVD of `m` viewed as a matrix with `rows` indices against `cols` indices.
///
/// Keeps at most `max_rank` values, and only those strictly above
/// `cutoff * s_max`. An all-zero input returns a rank-0 result.
pub fn svd(
    m: &Tensor,
    rows: &[usize],
    cols: &[usize],
    max_rank: Option<usize>,
    cutoff: f64,
) -> Result<SvdResult> {
    if cutoff < 0.0 || !cutoff.is_finite() {
        bail!(Argument, "cutoff must be a non-negative real, got {cutoff}");
    }
    if max_rank == Some(0) {
        bail!(Argument, "max_rank must be positive");
    }
    let (mat, row_ext, col_ext) = m.matricize(rows, cols)?;
    let (mr, nc) = (mat.shape[0], mat.shape[1]);
    let full = linalg::svd_row_major(&mat.data, mr, nc)?;
    let smax = full.s.first().copied().unwrap_or(0.0);
    let limit = max_rank.unwrap_or(usize::MAX);
    let keep = full.s.iter().take_while(|&&s| s > cutoff * smax && s > 0.0).count().min(limit);
    let truncation_error = full.s[keep..].iter().map(|s| s * s).sum::<f64>().sqrt();
    let p = full.s.len();
    let mut left = Vec::with_capacity(mr * keep);
    for i in 0..mr {
        left.extend_from_slice(&full.u[i * p..i * p + keep]);
    }
    let right = full.vt[..keep * nc].to_vec();
    let mut lshape = row_ext;
    lshape.push(keep);
    let mut rshape = vec![keep];
    rshape.extend(col_ext);
    Ok(SvdResult {
        left: Tensor::from_raw(lshape, left),
        singular_values: full.s[..keep].to_vec(),
        right: Tensor::from_raw(rshape, right),
        truncation_error,
    })
}
