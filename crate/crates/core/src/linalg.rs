//! Dense linear algebra on small Euclidean spaces.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_dim, Error, Result};

/// Default relative rank cutoff for pseudo-inverses.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;
/// Default relative tolerance for spectral norms.
pub const DEFAULT_NORM_TOL: f64 = 1e-12;

const POWER_MAX_ITER: usize = 10_000;
const EIGEN_MAX_DIM: usize = 32;

/// A point of a finite-dimensional Euclidean space.
///
/// Entries are finite. [`Vector::new`] validates; the `From<Vec<f64>>`
/// conversion is meant for values produced by arithmetic on valid vectors.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::param("vector must have positive dimension"));
        }
        if let Some(i) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!("vector entry {i} is not finite")));
        }
        Ok(Vector(entries))
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        Vector(vec![value; dim])
    }

    /// The `i`-th standard basis vector.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = Vector::zeros(dim);
        v.0[i] = 1.0;
        v
    }

    pub fn scalar(value: f64) -> Self {
        Vector(vec![value])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm1(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn dist(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&self, a: f64) -> Vector {
        self.map(|v| a * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Vector {
        Vector(self.0.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Vector, f: impl Fn(f64, f64) -> f64) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector(self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect())
    }

    /// `self + a * x`
    pub fn axpy(&self, a: f64, x: &Vector) -> Vector {
        self.zip_map(x, |s, v| s + a * v)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    /// Copy of the entries in `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> Vector {
        Vector(self.0[start..end].to_vec())
    }

    /// Concatenation of blocks.
    pub fn concat<'a>(blocks: impl IntoIterator<Item = &'a Vector>) -> Vector {
        Vector(blocks.into_iter().flat_map(|b| b.0.iter().copied()).collect())
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        debug_assert!(v.iter().all(|x| !x.is_nan()));
        Vector(v)
    }
}

impl FromIterator<f64> for Vector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Vector::from(iter.into_iter().collect::<Vec<f64>>())
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for &Vector {
    type Output = Vector;
    fn add(self, rhs: &Vector) -> Vector {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &Vector {
    type Output = Vector;
    fn sub(self, rhs: &Vector) -> Vector {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<&Vector> for f64 {
    type Output = Vector;
    fn mul(self, rhs: &Vector) -> Vector {
        rhs.scale(self)
    }
}

impl Neg for &Vector {
    type Output = Vector;
    fn neg(self) -> Vector {
        self.scale(-1.0)
    }
}

impl fmt::Display for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

impl Serialize for Vector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        Vector::new(v).map_err(D::Error::custom)
    }
}

/// A dense linear operator `L: R^cols -> R^rows`, stored row-major.
///
/// The spectral norm is computed on demand and cached together with a
/// certified upper bound.
#[derive(Clone)]
pub struct DenseMap {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    norm: OnceLock<(f64, f64)>,
}

impl DenseMap {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("{rows}x{cols} operator")));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} operator needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("operator entries must be finite"));
        }
        Ok(DenseMap { rows, cols, data, norm: OnceLock::new() })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("ragged rows".into()));
        }
        DenseMap::new(r, c, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        DenseMap::diag(&vec![1.0; n])
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMap { rows, cols, data: vec![0.0; rows * cols], norm: OnceLock::new() }
    }

    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = DenseMap::zeros(n, n);
        for (i, &v) in d.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    /// The 1x1 operator `t ↦ a t`.
    pub fn scalar(a: f64) -> Self {
        DenseMap::diag(&[a])
    }

    /// Orthogonal projector onto the span of `basis` (assumed orthonormal).
    pub fn projector(dim: usize, basis: &[Vector]) -> Self {
        let mut m = DenseMap::zeros(dim, dim);
        for b in basis {
            for i in 0..dim {
                for j in 0..dim {
                    m.data[i * dim + j] += b[i] * b[j];
                }
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// `Lx`
    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.cols, x.dim())?;
        Ok(self.apply_unchecked(x))
    }

    /// `L*y`
    pub fn adjoint_apply(&self, y: &Vector) -> Result<Vector> {
        check_dim(self.rows, y.dim())?;
        Ok(self.adjoint_unchecked(y))
    }

    pub(crate) fn apply_unchecked(&self, x: &Vector) -> Vector {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x.iter()).map(|(a, b)| a * b).sum())
            .collect::<Vec<f64>>()
            .into()
    }

    pub(crate) fn adjoint_unchecked(&self, y: &Vector) -> Vector {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let yi = y[i];
            if yi != 0.0 {
                for (o, a) in out.iter_mut().zip(self.row(i)) {
                    *o += a * yi;
                }
            }
        }
        out.into()
    }

    /// `(Id - L L*) y`, the gradient of twice the quadratic defect
    /// `y ↦ (‖y‖² − ‖L*y‖²)/2`.
    pub fn gram_complement_apply(&self, y: &Vector) -> Result<Vector> {
        check_dim(self.rows, y.dim())?;
        Ok(self.gram_complement_unchecked(y))
    }

    pub(crate) fn gram_complement_unchecked(&self, y: &Vector) -> Vector {
        y - &self.apply_unchecked(&self.adjoint_unchecked(y))
    }

    pub fn transpose(&self) -> DenseMap {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.get(i, j);
            }
        }
        DenseMap { rows: self.cols, cols: self.rows, data, norm: OnceLock::new() }
    }

    /// The composition `self ∘ inner`.
    pub fn compose(&self, inner: &DenseMap) -> Result<DenseMap> {
        check_dim(self.cols, inner.rows)?;
        let (m, n, k) = (self.rows, inner.cols, self.cols);
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for l in 0..k {
                let a = self.get(i, l);
                if a != 0.0 {
                    for j in 0..n {
                        data[i * n + j] += a * inner.get(l, j);
                    }
                }
            }
        }
        DenseMap::new(m, n, data)
    }

    pub fn scale(&self, a: f64) -> DenseMap {
        DenseMap {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| a * v).collect(),
            norm: OnceLock::new(),
        }
    }

    /// Stacks operators with a common domain on top of each other.
    pub fn vstack(blocks: &[DenseMap]) -> Result<DenseMap> {
        let cols = blocks.first().ok_or_else(|| Error::Shape("empty stack".into()))?.cols;
        let mut data = Vec::new();
        let mut rows = 0;
        for b in blocks {
            check_dim(cols, b.cols)?;
            rows += b.rows;
            data.extend_from_slice(&b.data);
        }
        DenseMap::new(rows, cols, data)
    }

    pub fn sub(&self, other: &DenseMap) -> Result<DenseMap> {
        check_dim(self.rows, other.rows)?;
        check_dim(self.cols, other.cols)?;
        DenseMap::new(
            self.rows,
            self.cols,
            self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `L*L` as a dense `cols x cols` matrix.
    pub fn gram(&self) -> DenseMap {
        self.transpose().compose(self).expect("shapes agree")
    }

    /// `L L*` as a dense `rows x rows` matrix.
    pub fn cogram(&self) -> DenseMap {
        self.compose(&self.transpose()).expect("shapes agree")
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    /// Spectral norm `‖L‖` to relative accuracy `tol`.
    ///
    /// Power iteration on `L*L` from the normalized all-ones vector, stopped
    /// when successive Rayleigh quotients agree to `tol` relative. For small
    /// domains the result is cross-checked against a symmetric eigensolver,
    /// which also rescues seeds orthogonal to the top singular vector.
    pub fn operator_norm(&self, tol: f64) -> Result<f64> {
        if !(tol > 0.0) {
            return Err(Error::param("norm tolerance must be positive"));
        }
        if let Some(&(sigma, _)) = self.norm.get() {
            return Ok(sigma);
        }
        let sigma = self.compute_norm(tol)?;
        let _ = self.norm.set((sigma, sigma * (1.0 + tol)));
        Ok(sigma)
    }

    /// Certified upper bound on `‖L‖`, computing the norm if needed.
    pub fn norm_bound(&self) -> f64 {
        if self.norm.get().is_none() {
            // Small or well-conditioned inputs always converge; fall back to
            // the Frobenius norm, itself an upper bound, if they do not.
            if self.operator_norm(DEFAULT_NORM_TOL).is_err() {
                let fro = self.data.iter().map(|v| v * v).sum::<f64>().sqrt();
                let _ = self.norm.set((fro, fro));
            }
        }
        self.norm.get().map(|&(_, b)| b).unwrap_or(f64::INFINITY)
    }

    /// The cached norm, or `None` when not yet computed.
    pub fn cached_norm(&self) -> Option<f64> {
        self.norm.get().map(|&(s, _)| s)
    }

    /// `‖L‖`, computed with the default tolerance if needed.
    pub fn norm(&self) -> f64 {
        self.operator_norm(DEFAULT_NORM_TOL).unwrap_or_else(|_| self.norm_bound())
    }

    fn compute_norm(&self, tol: f64) -> Result<f64> {
        if self.is_zero() {
            return Ok(0.0);
        }
        let n = self.cols;
        let mut v = Vector::filled(n, 1.0 / (n as f64).sqrt());
        let mut prev = f64::NAN;
        let mut lambda = 0.0;
        let mut converged = false;
        for _ in 0..POWER_MAX_ITER {
            let w = self.adjoint_unchecked(&self.apply_unchecked(&v));
            lambda = v.dot(&w);
            let nw = w.norm();
            if nw == 0.0 {
                break;
            }
            v = w.scale(1.0 / nw);
            if (lambda - prev).abs() < tol * lambda {
                converged = true;
                break;
            }
            prev = lambda;
        }
        let power = lambda.max(0.0).sqrt();
        if n <= EIGEN_MAX_DIM {
            let eig = SymmetricEigen::new(self.gram().to_nalgebra());
            let top = eig.eigenvalues.iter().fold(0.0f64, |m, &l| m.max(l));
            let exact = top.max(0.0).sqrt();
            if (power - exact).abs() > tol * exact {
                return Ok(exact);
            }
            return Ok(power.max(exact));
        }
        if !converged {
            return Err(Error::NormNotConverged(POWER_MAX_ITER));
        }
        Ok(power)
    }
}

impl PartialEq for DenseMap {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows && self.cols == other.cols && self.data == other.data
    }
}

impl fmt::Debug for DenseMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DenseMap")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("entries", &self.to_rows())
            .finish()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    entries: Vec<Vec<f64>>,
}

impl Serialize for DenseMap {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixRepr { rows: self.rows, cols: self.cols, entries: self.to_rows() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DenseMap {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = MatrixRepr::deserialize(d)?;
        if r.entries.len() != r.rows {
            return Err(D::Error::custom(format!(
                "matrix declares {} rows but lists {}",
                r.rows,
                r.entries.len()
            )));
        }
        if let Some(i) = r.entries.iter().position(|row| row.len() != r.cols) {
            return Err(D::Error::custom(format!("row {i} does not have {} entries", r.cols)));
        }
        DenseMap::from_rows(&r.entries).map_err(D::Error::custom)
    }
}

/// Moore–Penrose inverse of a small symmetric positive semidefinite matrix,
/// with an orthonormal basis of its range.
#[derive(Clone, Debug)]
pub struct PseudoInverse {
    pub pinv: DenseMap,
    pub range_basis: Vec<Vector>,
    /// Eigenpairs of the input, eigenvalues clipped at zero.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vector>,
    dim: usize,
}

impl PseudoInverse {
    pub fn rank(&self) -> usize {
        self.range_basis.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, y: &Vector) -> Result<Vector> {
        self.pinv.apply(y)
    }

    /// Orthogonal projection onto the range.
    pub fn project_range(&self, y: &Vector) -> Vector {
        let mut out = Vector::zeros(self.dim);
        for b in &self.range_basis {
            out = out.axpy(b.dot(y), b);
        }
        out
    }

    /// Orthogonal projection onto the kernel.
    pub fn project_kernel(&self, y: &Vector) -> Vector {
        y - &self.project_range(y)
    }

    /// Whether `y` lies in the range up to `tol * (1 + ‖y‖)`.
    pub fn in_range(&self, y: &Vector, tol: f64) -> bool {
        self.project_kernel(y).norm() <= tol * (1.0 + y.norm())
    }
}

/// Pseudo-inverse of a symmetric PSD matrix with at most 32 rows.
pub fn pseudo_inverse_small(a: &DenseMap, rank_tol: f64) -> Result<PseudoInverse> {
    let n = a.rows;
    if a.cols != n {
        return Err(Error::Shape(format!("pseudo-inverse needs a square matrix, got {}x{}", n, a.cols)));
    }
    if n > EIGEN_MAX_DIM {
        return Err(Error::Shape(format!("pseudo-inverse limited to {EIGEN_MAX_DIM} rows, got {n}")));
    }
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    let asym = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .fold(0.0f64, |m, (i, j)| m.max((a.get(i, j) - a.get(j, i)).abs()));
    if asym > rank_tol.max(1e-12) * scale {
        return Err(Error::Shape(format!("matrix is not symmetric (asymmetry {asym:e})")));
    }
    let eig = SymmetricEigen::new(a.to_nalgebra());
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, &l| m.max(l));
    let cut = rank_tol * top;
    if eig.eigenvalues.iter().any(|&l| l < -cut.max(1e-12 * scale)) {
        return Err(Error::Shape("matrix is not positive semidefinite".into()));
    }
    let mut pinv = DenseMap::zeros(n, n);
    let mut range_basis = Vec::new();
    let mut eigenvectors = Vec::with_capacity(n);
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        let v: Vector = eig.eigenvectors.column(k).iter().copied().collect();
        eigenvectors.push(v.clone());
        if top > 0.0 && l > cut {
            for i in 0..n {
                for j in 0..n {
                    pinv.data[i * n + j] += v[i] * v[j] / l;
                }
            }
            range_basis.push(v);
        }
    }
    Ok(PseudoInverse {
        pinv,
        range_basis,
        eigenvalues: eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect(),
        eigenvectors,
        dim: n,
    })
}

/// Orthonormal basis of the orthogonal complement of `span(basis)` in `R^dim`.
pub fn orthogonal_complement(dim: usize, basis: &[Vector]) -> Vec<Vector> {
    let p = DenseMap::projector(dim, basis);
    let comp = DenseMap::identity(dim).sub(&p).expect("square");
    // eigenvalues of a projector are 0 or 1
    pseudo_inverse_small(&comp, 1e-8)
        .map(|pi| {
            pi.eigenvalues
                .iter()
                .zip(pi.eigenvectors)
                .filter(|(l, _)| **l > 0.5)
                .map(|(_, v)| v)
                .collect()
        })
        .unwrap_or_default()
}

/// Gram–Schmidt; fails when the vectors are (numerically) dependent.
pub fn orthonormalize(vectors: &[Vector]) -> Result<Vec<Vector>> {
    let mut out: Vec<Vector> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &out {
                w = w.axpy(-b.dot(&w), b);
            }
        }
        let n = w.norm();
        if n <= 1e-10 * (1.0 + v.norm()) {
            return Err(Error::param("basis vectors are linearly dependent"));
        }
        out.push(w.scale(1.0 / n));
    }
    Ok(out)
}
