//! Hermitian operators over an explicit product-state basis.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::basis::{Basis, ProductState};
use crate::error::{Error, Result};
use crate::par;

pub type C64 = Complex64;

/// Above this dimension dense diagonalization is not attempted by default.
pub const DENSE_THRESHOLD: usize = 4096;

/// Off-diagonal magnitudes at or below this are treated as absent edges.
pub const CONNECTIVITY_EPS: f64 = 1e-12;

/// Anything that can apply itself to a complex vector.
pub trait LinearOp: Sync {
    fn dim(&self) -> usize;
    /// `y = A x`
    fn apply(&self, x: &[C64], y: &mut [C64]);
}

/// Compressed sparse rows with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl Csr {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: vec![0; dim + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    /// Assemble from per-row `(col, value)` lists; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_rows(dim: usize, rows: Vec<Vec<(usize, C64)>>) -> Self {
        debug_assert_eq!(rows.len(), dim);
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_unstable_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        let mut m = Self { dim, row_ptr, cols, vals };
        m.prune();
        m
    }

    fn prune(&mut self) {
        if self.vals.iter().all(|v| *v != C64::new(0.0, 0.0)) {
            return;
        }
        let mut row_ptr = vec![0];
        let mut cols = Vec::with_capacity(self.cols.len());
        let mut vals = Vec::with_capacity(self.vals.len());
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.vals[k] != C64::new(0.0, 0.0) {
                    cols.push(self.cols[k]);
                    vals.push(self.vals[k]);
                }
            }
            row_ptr.push(cols.len());
        }
        self.row_ptr = row_ptr;
        self.cols = cols;
        self.vals = vals;
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let rows = values
            .iter()
            .enumerate()
            .map(|(i, &v)| vec![(i, C64::new(v, 0.0))])
            .collect();
        Self::from_rows(values.len(), rows)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[range.clone()].binary_search(&c) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    /// All stored `(row, col, value)` triples in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut m = self.clone();
        m.vals.iter_mut().for_each(|v| *v *= s);
        m.prune();
        m
    }

    /// `self + s * other`
    pub fn add_scaled(&self, other: &Csr, s: f64) -> Self {
        assert_eq!(self.dim, other.dim);
        let rows = (0..self.dim)
            .map(|r| {
                self.row(r)
                    .chain(other.row(r).map(|(c, v)| (c, v * s)))
                    .collect::<Vec<_>>()
            })
            .collect();
        Self::from_rows(self.dim, rows)
    }

    /// Principal submatrix on `indices` (in the given order).
    pub fn submatrix(&self, indices: &[usize]) -> Self {
        let mut pos = vec![usize::MAX; self.dim];
        for (k, &i) in indices.iter().enumerate() {
            pos[i] = k;
        }
        let rows = indices
            .iter()
            .map(|&r| {
                self.row(r)
                    .filter(|&(c, _v)| pos[c] != usize::MAX).map(|(c, v)| (pos[c], v))
                    .collect()
            })
            .collect();
        Self::from_rows(indices.len(), rows)
    }

    /// Symmetric permutation: row/col `k` of the result is `perm[k]` here.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        self.submatrix(perm)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    /// Largest `|A_ij - conj(A_ji)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        self.triplets()
            .map(|(r, c, v)| (v - self.get(c, r).conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Row-sum bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim)
            .map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    #[inline]
    fn row_dot(&self, r: usize, x: &[C64]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for k in self.row_ptr[r]..self.row_ptr[r + 1] {
            acc += self.vals[k] * x[self.cols[k]];
        }
        acc
    }
}

impl LinearOp for Csr {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        if self.dim >= 2048 {
            par::fill_indexed(y, |r| self.row_dot(r, x));
        } else {
            for (r, yr) in y.iter_mut().enumerate() {
                *yr = self.row_dot(r, x);
            }
        }
    }
}

/// Which representation a consumer should prefer for this dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Storage {
    Dense,
    Sparse,
}

/// A Hermitian matrix on an ordered product-state basis.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    basis: Arc<Basis>,
    matrix: Csr,
}

impl OperatorMatrix {
    /// Wraps `matrix`; fails if it is not Hermitian to `1e-12` relative.
    pub fn new(basis: Arc<Basis>, matrix: Csr) -> Result<Self> {
        if matrix.dim() != basis.len() {
            return Err(Error::BasisMismatch);
        }
        let defect = matrix.hermiticity_defect();
        let scale = matrix.max_abs().max(1.0);
        let diag_imag = (0..matrix.dim()).map(|i| matrix.get(i, i).im.abs()).fold(0.0, f64::max);
        if defect > 1e-12 * scale || diag_imag > 1e-12 * scale {
            return Err(Error::NotHermitian(defect.max(diag_imag)));
        }
        Ok(Self { basis, matrix })
    }

    pub fn zeros(basis: Arc<Basis>) -> Self {
        let dim = basis.len();
        Self {
            basis,
            matrix: Csr::zeros(dim),
        }
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn csr(&self) -> &Csr {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn storage(&self) -> Storage {
        if self.dim() > DENSE_THRESHOLD {
            Storage::Sparse
        } else {
            Storage::Dense
        }
    }

    pub fn get(&self, row: &ProductState, col: &ProductState) -> C64 {
        match (self.basis.index_of(row), self.basis.index_of(col)) {
            (Some(r), Some(c)) => self.matrix.get(r, c),
            _ => C64::new(0.0, 0.0),
        }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        self.matrix.to_dense()
    }

    /// Restriction to the sub-basis given by `indices`.
    pub fn restricted(&self, indices: &[usize]) -> OperatorMatrix {
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        let basis = Arc::new(self.basis.subset(&sorted));
        Self {
            basis,
            matrix: self.matrix.submatrix(&sorted),
        }
    }

    pub fn scaled(&self, s: f64) -> OperatorMatrix {
        Self {
            basis: self.basis.clone(),
            matrix: self.matrix.scaled(s),
        }
    }

    pub fn plus(&self, other: &OperatorMatrix, s: f64) -> Result<OperatorMatrix> {
        if !Arc::ptr_eq(&self.basis, &other.basis) && *self.basis != *other.basis {
            return Err(Error::BasisMismatch);
        }
        Ok(Self {
            basis: self.basis.clone(),
            matrix: self.matrix.add_scaled(&other.matrix, s),
        })
    }

    pub fn is_diagonal(&self) -> bool {
        self.matrix.triplets().all(|(r, c, _)| r == c)
    }

    /// Coordinate-list text export: header naming the basis ordering, then
    /// one `row col re im` line per stored entry (0-based indices).
    pub fn to_coo_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# operator coordinate list");
        let _ = writeln!(out, "# sites {}", self.basis.n_sites());
        let _ = writeln!(out, "# dim {}", self.dim());
        let _ = writeln!(out, "# basis-order lexicographic g<r from site 1");
        let _ = writeln!(out, "# basis-sha256 {}", self.basis.hash_hex());
        let _ = writeln!(out, "# row col re im");
        for (r, c, v) in self.matrix.triplets() {
            let _ = writeln!(out, "{r} {c} {:.17e} {:.17e}", v.re, v.im);
        }
        out
    }

    /// Parse [`to_coo_text`](Self::to_coo_text) output against a known basis.
    pub fn from_coo_text(basis: Arc<Basis>, text: &str) -> Result<Self> {
        let dim = basis.len();
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); dim];
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let parsed = (|| {
                let r: usize = f.first()?.parse().ok()?;
                let c: usize = f.get(1)?.parse().ok()?;
                let re: f64 = f.get(2)?.parse().ok()?;
                let im: f64 = f.get(3)?.parse().ok()?;
                Some((r, c, C64::new(re, im)))
            })();
            let (r, c, v) = parsed.ok_or(Error::BasisMismatch)?;
            if r >= dim || c >= dim {
                return Err(Error::OutOfRange { index: r.max(c), limit: dim });
            }
            rows[r].push((c, v));
        }
        Self::new(basis, Csr::from_rows(dim, rows))
    }
}

impl LinearOp for OperatorMatrix {
    fn dim(&self) -> usize {
        self.matrix.dim()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.matrix.apply(x, y)
    }
}

/// Generator of the form `H(t) = H_static + a(t) H_drive + d(t) N`,
/// where `N = sum_i Q_i` is diagonal.
#[derive(Debug, Clone)]
pub struct TimeDependentOperator {
    pub static_part: OperatorMatrix,
    pub drive: OperatorMatrix,
    /// Diagonal of `sum_i Q_i` over the basis.
    pub number: Vec<f64>,
    pub schedule: Schedule,
}

/// Scalar schedules for the drive amplitude and the modulated detuning.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    /// Detuning modulation amplitude `Δ0`: the number term enters as `-Δ0 sin(ω t)`.
    pub detuning_amplitude: f64,
    pub omega: f64,
    /// Relative drive-amplitude harmonics: `a(t) = 1 + sum_h c_h cos(h ω t)`.
    pub amplitude_harmonics: Vec<f64>,
}

impl Schedule {
    pub fn drive_factor(&self, t: f64) -> f64 {
        1.0 + self
            .amplitude_harmonics
            .iter()
            .enumerate()
            .map(|(h, c)| c * ((h + 1) as f64 * self.omega * t).cos())
            .sum::<f64>()
    }

    pub fn number_factor(&self, t: f64) -> f64 {
        -self.detuning_amplitude * (self.omega * t).sin()
    }
}

impl TimeDependentOperator {
    pub fn basis(&self) -> &Arc<Basis> {
        self.static_part.basis()
    }

    pub fn dim(&self) -> usize {
        self.static_part.dim()
    }

    /// `H(t)` as a static matrix.
    pub fn at(&self, t: f64) -> OperatorMatrix {
        let m = self
            .static_part
            .csr()
            .add_scaled(self.drive.csr(), self.schedule.drive_factor(t))
            .add_scaled(&Csr::diagonal(&self.number), self.schedule.number_factor(t));
        OperatorMatrix {
            basis: self.static_part.basis.clone(),
            matrix: m,
        }
    }

    /// Linear combination `s H_static + a H_drive + d N` usable as a [`LinearOp`].
    pub fn combination(&self, s: f64, a: f64, d: f64) -> Combination<'_> {
        Combination { op: self, s, a, d }
    }
}

pub struct Combination<'a> {
    op: &'a TimeDependentOperator,
    s: f64,
    a: f64,
    d: f64,
}

impl LinearOp for Combination<'_> {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let st = self.op.static_part.csr();
        let dr = self.op.drive.csr();
        let f = |r: usize| {
            st.row_dot(r, x) * self.s + dr.row_dot(r, x) * self.a + x[r] * (self.d * self.op.number[r])
        };
        if st.dim() >= 2048 {
            par::fill_indexed(y, f);
        } else {
            for (r, yr) in y.iter_mut().enumerate() {
                *yr = f(r);
            }
        }
    }
}
