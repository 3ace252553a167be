//! Dense complex operators over labelled tensor factors.
//!
//! A [`LabeledOperator`] is a square matrix acting on `⊗ᵢ Hᵢ`, where the
//! ordered wire list fixes the factor order. Row and column indices are
//! lexicographic in that order (the first wire is the most significant digit).

use std::collections::HashSet;
use std::fmt;

use nalgebra::DMatrix;

use crate::{Error, Matrix, Result, Vector, C64};

/// Relative threshold under which an eigenvalue is treated as zero.
pub const RANK_TOL: f64 = 1e-9;
/// Relative anti-Hermitian defect tolerated before symmetrizing.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Largest off-diagonal entry tolerated on a classical factor.
pub const CLASSICAL_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(String);

impl Label {
    pub fn new(s: impl Into<String>) -> Self {
        Label(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label(s.to_owned())
    }
}

impl From<String> for Label {
    fn from(s: String) -> Self {
        Label(s)
    }
}

impl From<usize> for Label {
    fn from(n: usize) -> Self {
        Label(n.to_string())
    }
}

impl From<&Label> for Label {
    fn from(l: &Label) -> Self {
        l.clone()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WireKind {
    Quantum,
    /// Carries only states diagonal in the computational basis.
    Classical,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Wire {
    pub label: Label,
    pub dim: usize,
    pub kind: WireKind,
}

impl Wire {
    pub fn quantum(label: impl Into<Label>, dim: usize) -> Self {
        Wire { label: label.into(), dim, kind: WireKind::Quantum }
    }

    pub fn classical(label: impl Into<Label>, dim: usize) -> Self {
        Wire { label: label.into(), dim, kind: WireKind::Classical }
    }
}

/// Product of the wire dimensions.
pub fn total_dim(wires: &[Wire]) -> usize {
    wires.iter().map(|w| w.dim).product()
}

fn check_wires(wires: &[Wire]) -> Result<()> {
    let mut seen = HashSet::new();
    for w in wires {
        if w.dim == 0 {
            return Err(Error::ZeroDimension { label: w.label.clone() });
        }
        if !seen.insert(&w.label) {
            return Err(Error::DuplicateLabel(w.label.clone()));
        }
    }
    Ok(())
}

/// Offsets in the full composite index of every multi-index over `selected`
/// (positions into `wires`), enumerated lexicographically in the given order.
pub(crate) fn sub_offsets(wires: &[Wire], selected: &[usize]) -> Vec<usize> {
    let n = wires.len();
    let mut strides = vec![1usize; n];
    for i in (0..n.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * wires[i + 1].dim;
    }
    let mut out = vec![0usize];
    for &p in selected {
        let (d, s) = (wires[p].dim, strides[p]);
        let mut next = Vec::with_capacity(out.len() * d);
        for &o in &out {
            for digit in 0..d {
                next.push(o + digit * s);
            }
        }
        out = next;
    }
    out
}

/// A square complex matrix acting on an ordered list of labelled wires.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledOperator {
    wires: Vec<Wire>,
    mat: Matrix,
}

impl LabeledOperator {
    pub fn new(wires: Vec<Wire>, mat: Matrix) -> Result<Self> {
        check_wires(&wires)?;
        let d = total_dim(&wires);
        if mat.nrows() != d || mat.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: if mat.nrows() != d { mat.nrows() } else { mat.ncols() },
            });
        }
        Ok(LabeledOperator { wires, mat })
    }

    /// A 1×1 operator with no wires.
    pub fn scalar(value: C64) -> Self {
        LabeledOperator { wires: Vec::new(), mat: Matrix::from_element(1, 1, value) }
    }

    pub fn identity(wires: Vec<Wire>) -> Result<Self> {
        let d = total_dim(&wires);
        Self::new(wires, Matrix::identity(d, d))
    }

    pub fn zeros(wires: Vec<Wire>) -> Result<Self> {
        let d = total_dim(&wires);
        Self::new(wires, Matrix::zeros(d, d))
    }

    /// The rank-one operator `|v⟩⟨v|`.
    pub fn from_ket(wires: Vec<Wire>, v: &Vector) -> Result<Self> {
        let m = v * v.adjoint();
        Self::new(wires, m)
    }

    /// `|I⟩⟩⟨⟨I|` on `a ⊗ b`; both wires must share a dimension.
    pub fn max_entangled(a: Wire, b: Wire) -> Result<Self> {
        if a.dim != b.dim {
            return Err(Error::DimensionMismatch { expected: a.dim, found: b.dim });
        }
        let v = vec_of(&Matrix::identity(a.dim, a.dim));
        Self::from_ket(vec![a, b], &v)
    }

    pub fn wires(&self) -> &[Wire] {
        &self.wires
    }

    pub fn matrix(&self) -> &Matrix {
        &self.mat
    }

    pub fn into_matrix(self) -> Matrix {
        self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.wires.iter().map(|w| w.label.clone()).collect()
    }

    pub fn position(&self, label: &Label) -> Option<usize> {
        self.wires.iter().position(|w| &w.label == label)
    }

    pub fn wire(&self, label: &Label) -> Option<&Wire> {
        self.wires.iter().find(|w| &w.label == label)
    }

    pub fn has_label(&self, label: &Label) -> bool {
        self.position(label).is_some()
    }

    fn positions(&self, labels: &[Label]) -> Result<Vec<usize>> {
        let mut seen = HashSet::new();
        labels
            .iter()
            .map(|l| {
                if !seen.insert(l) {
                    return Err(Error::DuplicateLabel(l.clone()));
                }
                self.position(l).ok_or_else(|| Error::UnknownLabel(l.clone()))
            })
            .collect()
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    /// Kronecker product; the wire list of `other` is appended.
    pub fn tensor(&self, other: &LabeledOperator) -> Result<LabeledOperator> {
        let mut wires = self.wires.clone();
        wires.extend(other.wires.iter().cloned());
        check_wires(&wires)?;
        Ok(LabeledOperator { wires, mat: self.mat.kronecker(&other.mat) })
    }

    /// Tensor with the identity on additional wires (appended).
    pub fn extend(&self, wires: &[Wire]) -> Result<LabeledOperator> {
        if wires.is_empty() {
            return Ok(self.clone());
        }
        self.tensor(&LabeledOperator::identity(wires.to_vec())?)
    }

    pub fn partial_trace(&self, labels: &[Label]) -> Result<LabeledOperator> {
        let traced = self.positions(labels)?;
        let kept: Vec<usize> = (0..self.wires.len()).filter(|p| !traced.contains(p)).collect();
        let okeep = sub_offsets(&self.wires, &kept);
        let otr = sub_offsets(&self.wires, &traced);
        let n = okeep.len();
        let mut out = Matrix::zeros(n, n);
        for (i, &oi) in okeep.iter().enumerate() {
            for (j, &oj) in okeep.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for &t in &otr {
                    acc += self.mat[(oi + t, oj + t)];
                }
                out[(i, j)] = acc;
            }
        }
        let wires = kept.iter().map(|&p| self.wires[p].clone()).collect();
        Ok(LabeledOperator { wires, mat: out })
    }

    /// Trace out every wire except `labels`, returned in the order given.
    pub fn reduced_to(&self, labels: &[Label]) -> Result<LabeledOperator> {
        self.positions(labels)?;
        let others: Vec<Label> =
            self.labels().into_iter().filter(|l| !labels.contains(l)).collect();
        self.partial_trace(&others)?.permute_wires(labels)
    }

    pub fn partial_transpose(&self, labels: &[Label]) -> Result<LabeledOperator> {
        let sel = self.positions(labels)?;
        let rest: Vec<usize> = (0..self.wires.len()).filter(|p| !sel.contains(p)).collect();
        let os = sub_offsets(&self.wires, &sel);
        let or = sub_offsets(&self.wires, &rest);
        let mut out = Matrix::zeros(self.dim(), self.dim());
        for &sr in &os {
            for &sc in &os {
                for &rr in &or {
                    for &rc in &or {
                        out[(sc + rr, sr + rc)] = self.mat[(sr + rr, sc + rc)];
                    }
                }
            }
        }
        Ok(LabeledOperator { wires: self.wires.clone(), mat: out })
    }

    pub fn transpose(&self) -> LabeledOperator {
        LabeledOperator { wires: self.wires.clone(), mat: self.mat.transpose() }
    }

    pub fn adjoint(&self) -> LabeledOperator {
        LabeledOperator { wires: self.wires.clone(), mat: self.mat.adjoint() }
    }

    /// Reorder the factors; `order` must be a permutation of the labels.
    pub fn permute_wires(&self, order: &[Label]) -> Result<LabeledOperator> {
        if order.len() != self.wires.len() {
            return Err(Error::WireMismatch(format!(
                "permutation lists {} labels, operator has {}",
                order.len(),
                self.wires.len()
            )));
        }
        let pos = self.positions(order)?;
        if pos.iter().enumerate().all(|(i, &p)| i == p) {
            return Ok(self.clone());
        }
        let old = sub_offsets(&self.wires, &pos);
        let n = self.dim();
        let mat = Matrix::from_fn(n, n, |r, c| self.mat[(old[r], old[c])]);
        let wires = pos.iter().map(|&p| self.wires[p].clone()).collect();
        Ok(LabeledOperator { wires, mat })
    }

    /// Same operator with its wires listed in the order of `wires` (labels
    /// and dimensions must agree).
    pub fn aligned_to(&self, wires: &[Wire]) -> Result<LabeledOperator> {
        let order: Vec<Label> = wires.iter().map(|w| w.label.clone()).collect();
        let out = self.permute_wires(&order)?;
        for (a, b) in out.wires.iter().zip(wires) {
            if a.dim != b.dim {
                return Err(Error::DimensionMismatch { expected: b.dim, found: a.dim });
            }
        }
        Ok(out)
    }

    pub fn relabel(&self, map: &[(Label, Label)]) -> Result<LabeledOperator> {
        let wires: Vec<Wire> = self
            .wires
            .iter()
            .map(|w| {
                let label = map
                    .iter()
                    .find(|(from, _)| from == &w.label)
                    .map(|(_, to)| to.clone())
                    .unwrap_or_else(|| w.label.clone());
                Wire { label, ..w.clone() }
            })
            .collect();
        check_wires(&wires)?;
        Ok(LabeledOperator { wires, mat: self.mat.clone() })
    }

    pub fn with_kind(&self, label: &Label, kind: WireKind) -> Result<LabeledOperator> {
        let p = self.position(label).ok_or_else(|| Error::UnknownLabel(label.clone()))?;
        let mut out = self.clone();
        out.wires[p].kind = kind;
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> LabeledOperator {
        LabeledOperator { wires: self.wires.clone(), mat: self.mat.scale(s) }
    }

    pub fn scale_complex(&self, s: C64) -> LabeledOperator {
        LabeledOperator { wires: self.wires.clone(), mat: &self.mat * s }
    }

    /// Entrywise sum; `other` is first permuted to this operator's wire order.
    pub fn add(&self, other: &LabeledOperator) -> Result<LabeledOperator> {
        let o = other.aligned_to(&self.wires)?;
        Ok(LabeledOperator { wires: self.wires.clone(), mat: &self.mat + &o.mat })
    }

    pub fn sub(&self, other: &LabeledOperator) -> Result<LabeledOperator> {
        let o = other.aligned_to(&self.wires)?;
        Ok(LabeledOperator { wires: self.wires.clone(), mat: &self.mat - &o.mat })
    }

    /// Matrix product on a common wire set.
    pub fn mul(&self, other: &LabeledOperator) -> Result<LabeledOperator> {
        let o = other.aligned_to(&self.wires)?;
        Ok(LabeledOperator { wires: self.wires.clone(), mat: &self.mat * &o.mat })
    }

    /// Largest entry modulus of `self − other` after alignment.
    pub fn max_diff(&self, other: &LabeledOperator) -> Result<f64> {
        Ok(max_abs(&self.sub(other)?.mat))
    }

    pub fn hermitian_defect(&self) -> f64 {
        hermitian_defect(&self.mat)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol
    }

    pub fn eigh(&self) -> Result<(Vec<f64>, Matrix)> {
        eigh(&self.mat)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(eigvalsh(&self.mat)?.first().copied().unwrap_or(0.0))
    }

    pub fn is_psd(&self, tol: f64) -> Result<bool> {
        Ok(self.min_eigenvalue()? >= -tol)
    }

    /// Numerical rank of a Hermitian operator, default tolerance.
    pub fn rank(&self) -> Result<usize> {
        Ok(numerical_rank(&eigvalsh(&self.mat)?, RANK_TOL))
    }

    pub fn rank_with_tol(&self, tol: f64) -> Result<usize> {
        Ok(numerical_rank(&eigvalsh(&self.mat)?, tol))
    }

    /// Largest modulus among entries that are off-diagonal on some classical
    /// factor; zero when every classical wire carries diagonal data only.
    pub fn classical_defect(&self) -> f64 {
        let classical: Vec<usize> = self
            .wires
            .iter()
            .enumerate()
            .filter(|(_, w)| w.kind == WireKind::Classical)
            .map(|(i, _)| i)
            .collect();
        if classical.is_empty() {
            return 0.0;
        }
        let n = self.dim();
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in 0..n {
                let off = classical.iter().any(|&p| digit(&self.wires, r, p) != digit(&self.wires, c, p));
                if off {
                    worst = worst.max(self.mat[(r, c)].norm());
                }
            }
        }
        worst
    }
}

fn digit(wires: &[Wire], index: usize, pos: usize) -> usize {
    let stride: usize = wires[pos + 1..].iter().map(|w| w.dim).product();
    (index / stride) % wires[pos].dim
}

/// Row-major vectorization `|A⟩⟩ = Σ A_nm |n⟩|m⟩`.
pub fn vec_of(a: &Matrix) -> Vector {
    let (r, c) = a.shape();
    Vector::from_fn(r * c, |i, _| a[(i / c, i % c)])
}

/// Inverse of [`vec_of`] for a `rows × cols` matrix.
pub fn unvec(v: &Vector, rows: usize, cols: usize) -> Result<Matrix> {
    if v.len() != rows * cols {
        return Err(Error::DimensionMismatch { expected: rows * cols, found: v.len() });
    }
    Ok(Matrix::from_fn(rows, cols, |i, j| v[i * cols + j]))
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

/// `‖A − A†‖_max / ‖A‖_max` (zero for the zero matrix).
pub fn hermitian_defect(m: &Matrix) -> f64 {
    let scale = max_abs(m);
    if scale == 0.0 {
        return 0.0;
    }
    max_abs(&(m - m.adjoint())) / scale
}

fn hermitian_part(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
    }
    let defect = hermitian_defect(m);
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian { defect });
    }
    Ok((m + m.adjoint()).scale(0.5))
}

/// Eigenvalues in ascending order and the matching orthonormal eigenvectors
/// (as columns).
pub fn eigh(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let h = hermitian_part(m)?;
    let n = h.nrows();
    if n == 0 {
        return Ok((Vec::new(), h));
    }
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

pub fn eigvalsh(m: &Matrix) -> Result<Vec<f64>> {
    let h = hermitian_part(m)?;
    let mut vals: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

fn support_threshold(values: &[f64], tol: f64) -> f64 {
    let top = values.iter().fold(0.0f64, |a, &v| a.max(v));
    tol * top.max(1.0)
}

/// Count of eigenvalues `λ > tol·max(1, λ_max)`.
pub fn numerical_rank(values: &[f64], tol: f64) -> usize {
    let thr = support_threshold(values, tol);
    values.iter().filter(|&&v| v > thr).count()
}

fn spectral_map(m: &Matrix, f: impl Fn(f64) -> f64) -> Result<Matrix> {
    let (vals, vecs) = eigh(m)?;
    let thr = support_threshold(&vals, RANK_TOL);
    let n = vals.len();
    let mut out = Matrix::zeros(n, n);
    for (k, &lambda) in vals.iter().enumerate() {
        if lambda > thr {
            let col = vecs.column(k);
            out += (&col * col.adjoint()).scale(f(lambda));
        }
    }
    Ok(out)
}

/// Square root of a PSD matrix (negative and sub-threshold eigenvalues are
/// dropped).
pub fn sqrt_psd(m: &Matrix) -> Result<Matrix> {
    spectral_map(m, f64::sqrt)
}

/// Inverse square root on the support, zero on the kernel.
pub fn pinv_sqrt(m: &Matrix) -> Result<Matrix> {
    spectral_map(m, |l| 1.0 / l.sqrt())
}

/// Orthogonal projector onto the support.
pub fn support_projector(m: &Matrix) -> Result<Matrix> {
    spectral_map(m, |_| 1.0)
}

const SVD_MAX_ITER: usize = 2000;

/// Singular values as the nonnegative eigenvalues of `[[0, M], [M†, 0]]`.
fn dilation_singular_values(m: &Matrix) -> Vec<f64> {
    let (r, c) = m.shape();
    let mut h = Matrix::zeros(r + c, r + c);
    h.view_mut((0, r), (r, c)).copy_from(m);
    h.view_mut((r, 0), (c, r)).copy_from(&m.adjoint());
    let mut vals: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    vals.truncate(r.min(c));
    vals.into_iter().map(|v| v.max(0.0)).collect()
}

pub fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = match nalgebra::SVD::try_new(m.clone(), false, false, f64::EPSILON, SVD_MAX_ITER) {
        Some(svd) => svd.singular_values.iter().copied().collect(),
        None => dilation_singular_values(m),
    };
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn trace_norm(m: &Matrix) -> f64 {
    singular_values(m).iter().sum()
}

/// Schmidt coefficients (descending) of `v` across the cut `left | rest`.
pub fn schmidt_coefficients(v: &Vector, wires: &[Wire], left: &[Label]) -> Result<Vec<f64>> {
    check_wires(wires)?;
    let d = total_dim(wires);
    if v.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: v.len() });
    }
    let mut lpos = Vec::with_capacity(left.len());
    for l in left {
        let p = wires.iter().position(|w| &w.label == l).ok_or_else(|| Error::UnknownLabel(l.clone()))?;
        if lpos.contains(&p) {
            return Err(Error::DuplicateLabel(l.clone()));
        }
        lpos.push(p);
    }
    let rpos: Vec<usize> = (0..wires.len()).filter(|p| !lpos.contains(p)).collect();
    let ol = sub_offsets(wires, &lpos);
    let or = sub_offsets(wires, &rpos);
    let m = DMatrix::from_fn(ol.len(), or.len(), |i, j| v[ol[i] + or[j]]);
    Ok(singular_values(&m))
}

/// Schmidt rank of `v` across `left | rest`; a coefficient σ counts when
/// σ² exceeds `tol·max(1, σ_max²)`, matching the rank rule of the reduced
/// operator.
pub fn schmidt_rank(v: &Vector, wires: &[Wire], left: &[Label], tol: f64) -> Result<usize> {
    let s = schmidt_coefficients(v, wires, left)?;
    let sq: Vec<f64> = s.iter().map(|x| x * x).collect();
    Ok(numerical_rank(&sq, tol))
}
