//! Dense exact-rational matrices and the row-reduction routines the
//! constraint engine is built on.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_traits::{One, Zero};

use crate::scalar::{self, Scalar};

#[derive(Clone, PartialEq, Eq)]
pub struct RatMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Scalar>,
}

/// Reduced row echelon form together with the row operations that produced it.
#[derive(Clone, Debug)]
pub struct Echelon {
    /// The reduced matrix.
    pub reduced: RatMatrix,
    /// Pivot column of each nonzero row, in row order.
    pub pivots: Vec<usize>,
    /// Invertible `T` with `T * original = reduced`.
    pub transform: RatMatrix,
}

impl RatMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RatMatrix { rows, cols, data: vec![Scalar::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Scalar::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Scalar>>) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == n_cols), "ragged rows");
        RatMatrix { rows: n_rows, cols: n_cols, data: rows.into_iter().flatten().collect() }
    }

    /// Builds a matrix with the given row count and column count from
    /// rows that may be empty (useful for `0 x n` matrices).
    pub fn from_rows_with_cols(rows: Vec<Vec<Scalar>>, cols: usize) -> Self {
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        RatMatrix { rows: rows.len(), cols, data: rows.into_iter().flatten().collect() }
    }

    pub fn from_i64(rows: &[&[i64]]) -> Self {
        Self::from_rows(rows.iter().map(|r| r.iter().map(|&x| scalar::int(x)).collect()).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[Scalar] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Scalar> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<Scalar>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    pub fn mul(&self, other: &RatMatrix) -> Self {
        assert_eq!(self.cols, other.rows, "dimension mismatch in product");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other[(k, j)];
                    if !b.is_zero() {
                        out[(i, j)] += a * b;
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Scalar]) -> Vec<Scalar> {
        assert_eq!(self.cols, v.len(), "dimension mismatch in product");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .filter(|(a, b)| !a.is_zero() && !b.is_zero())
                    .fold(Scalar::zero(), |acc, (a, b)| acc + a * b)
            })
            .collect()
    }

    /// `vᵀ M`.
    pub fn vec_mul(&self, v: &[Scalar]) -> Vec<Scalar> {
        assert_eq!(self.rows, v.len(), "dimension mismatch in product");
        let mut out = vec![Scalar::zero(); self.cols];
        for (i, vi) in v.iter().enumerate() {
            if vi.is_zero() {
                continue;
            }
            for (j, o) in out.iter_mut().enumerate() {
                let m = &self[(i, j)];
                if !m.is_zero() {
                    *o += vi * m;
                }
            }
        }
        out
    }

    pub fn add(&self, other: &RatMatrix) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        RatMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &RatMatrix) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        RatMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: &Scalar) -> Self {
        RatMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| a * s).collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && (0..self.rows).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }

    pub fn is_antisymmetric(&self) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| self[(i, i)].is_zero() && (0..i).all(|j| self[(i, j)] == -&self[(j, i)]))
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut out = Self::zeros(rows.len(), cols.len());
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                out[(a, b)] = self[(i, j)].clone();
            }
        }
        out
    }

    /// Row reduction to reduced row echelon form, pivoting in column order.
    pub fn echelon(&self) -> Echelon {
        self.echelon_with_order(&(0..self.cols).collect::<Vec<_>>())
    }

    /// Row reduction trying pivot columns in the given order. Columns not
    /// listed are never used as pivots.
    pub fn echelon_with_order(&self, column_order: &[usize]) -> Echelon {
        let mut a = self.clone();
        let mut t = RatMatrix::identity(self.rows);
        let mut pivots = Vec::new();
        let mut next_row = 0;
        for &col in column_order {
            if next_row == self.rows {
                break;
            }
            let Some(pivot_row) = (next_row..self.rows).find(|&r| !a[(r, col)].is_zero()) else {
                continue;
            };
            a.swap_rows(pivot_row, next_row);
            t.swap_rows(pivot_row, next_row);
            let inv = a[(next_row, col)].recip();
            a.scale_row(next_row, &inv);
            t.scale_row(next_row, &inv);
            for r in 0..self.rows {
                if r != next_row && !a[(r, col)].is_zero() {
                    let factor = a[(r, col)].clone();
                    a.add_row_multiple(r, next_row, &-&factor);
                    t.add_row_multiple(r, next_row, &-&factor);
                }
            }
            pivots.push(col);
            next_row += 1;
        }
        Echelon { reduced: a, pivots, transform: t }
    }

    pub fn rank(&self) -> usize {
        self.echelon().pivots.len()
    }

    /// Basis of `{v : M v = 0}`; one vector per free column, with a 1 in
    /// that column.
    pub fn null_space(&self) -> Vec<Vec<Scalar>> {
        let ech = self.echelon();
        let free: Vec<usize> = (0..self.cols).filter(|c| !ech.pivots.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![Scalar::zero(); self.cols];
                v[f] = Scalar::one();
                for (r, &p) in ech.pivots.iter().enumerate() {
                    v[p] = -&ech.reduced[(r, f)];
                }
                v
            })
            .collect()
    }

    /// Basis of `{v : vᵀ M = 0}`.
    pub fn left_null_space(&self) -> Vec<Vec<Scalar>> {
        self.transpose().null_space()
    }

    pub fn inverse(&self) -> Option<RatMatrix> {
        if !self.is_square() {
            return None;
        }
        let ech = self.echelon();
        (ech.pivots.len() == self.rows).then_some(ech.transform)
    }

    /// Indices of a maximal linearly independent set of rows, chosen
    /// greedily in row order.
    pub fn independent_rows(&self) -> Vec<usize> {
        let mut basis = RowBasis::new(self.cols);
        (0..self.rows).filter(|&i| basis.insert(self.row(i).to_vec())).collect()
    }

    /// Moore-Penrose pseudo-inverse of a symmetric matrix:
    /// `Rᵀ (R M Rᵀ)⁻¹ R` with the rows of `R` a basis of the range.
    pub fn symmetric_pseudo_inverse(&self) -> RatMatrix {
        assert!(self.is_symmetric(), "pseudo-inverse requires a symmetric matrix");
        let rows = self.independent_rows();
        if rows.is_empty() {
            return RatMatrix::zeros(self.cols, self.rows);
        }
        let r = self.submatrix(&rows, &(0..self.cols).collect::<Vec<_>>());
        let core = r.mul(self).mul(&r.transpose());
        let core_inv = core.inverse().expect("range restriction of a symmetric matrix is invertible");
        r.transpose().mul(&core_inv).mul(&r)
    }

    pub fn to_f64(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).iter().map(scalar::to_f64).collect()).collect()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for j in 0..self.cols {
                self.data.swap(a * self.cols + j, b * self.cols + j);
            }
        }
    }

    fn scale_row(&mut self, r: usize, s: &Scalar) {
        for j in 0..self.cols {
            self[(r, j)] *= s;
        }
    }

    /// row[target] += factor * row[source]
    fn add_row_multiple(&mut self, target: usize, source: usize, factor: &Scalar) {
        for j in 0..self.cols {
            if !self[(source, j)].is_zero() {
                let delta = &self[(source, j)] * factor;
                self[(target, j)] += delta;
            }
        }
    }
}

impl Index<(usize, usize)> for RatMatrix {
    type Output = Scalar;

    fn index(&self, (i, j): (usize, usize)) -> &Scalar {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for RatMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Scalar {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for RatMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "RatMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|x| x.to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

/// Incrementally maintained row space in echelon form.
#[derive(Clone, Debug)]
pub struct RowBasis {
    width: usize,
    rows: Vec<(usize, Vec<Scalar>)>,
}

impl RowBasis {
    pub fn new(width: usize) -> Self {
        RowBasis { width, rows: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Reduces `v` against the basis; the remainder has zeros in every
    /// pivot column.
    pub fn reduce(&self, mut v: Vec<Scalar>) -> Vec<Scalar> {
        assert_eq!(v.len(), self.width);
        for (pivot, row) in &self.rows {
            if !v[*pivot].is_zero() {
                let factor = v[*pivot].clone();
                for (x, r) in v.iter_mut().zip(row) {
                    if !r.is_zero() {
                        *x -= &factor * r;
                    }
                }
            }
        }
        v
    }

    /// Adds `v` if it is independent of the current rows; returns whether it was added.
    pub fn insert(&mut self, v: Vec<Scalar>) -> bool {
        let mut rem = self.reduce(v);
        let Some(pivot) = rem.iter().position(|x| !x.is_zero()) else {
            return false;
        };
        let inv = rem[pivot].recip();
        for x in rem.iter_mut() {
            *x *= &inv;
        }
        for (_, row) in self.rows.iter_mut() {
            if !row[pivot].is_zero() {
                let factor = row[pivot].clone();
                for (x, r) in row.iter_mut().zip(&rem) {
                    *x -= &factor * r;
                }
            }
        }
        self.rows.push((pivot, rem));
        true
    }

    pub fn contains(&self, v: &[Scalar]) -> bool {
        self.reduce(v.to_vec()).iter().all(Zero::is_zero)
    }
}

/// Whether two lists of vectors span the same subspace.
pub fn same_span(a: &[Vec<Scalar>], b: &[Vec<Scalar>]) -> bool {
    let width = a.first().or(b.first()).map_or(0, Vec::len);
    let mut basis_a = RowBasis::new(width);
    for v in a {
        basis_a.insert(v.clone());
    }
    let mut basis_b = RowBasis::new(width);
    for v in b {
        basis_b.insert(v.clone());
    }
    basis_a.len() == basis_b.len() && b.iter().all(|v| basis_a.contains(v))
}
