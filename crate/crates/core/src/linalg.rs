//! Dense complex matrices and the Hermitian eigensolver.
//!
//! Matrices are small (a few thousand rows at most) and stored row-major.
//! Hermitian spectra are computed block by block: the sparsity graph of the
//! input is split into connected components first, so block-diagonal inputs
//! such as flagged states cost one small solve per block.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{arg, Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Tolerance on max |h - h†| accepted by the eigensolver.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Off-diagonal Frobenius mass (relative to the block norm) at which Jacobi stops.
const JACOBI_OFF_TOL: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 100;
/// Blocks above this size go to Householder tridiagonalisation + implicit QR.
const JACOBI_MAX_BLOCK: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return arg(format!(
                "matrix data has {} entries, expected {}x{}",
                data.len(),
                rows,
                cols
            ));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return arg("matrix contains non-finite entries");
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &x) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(x, 0.0);
        }
        m
    }

    /// Outer product |u⟩⟨v|.
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        Self::from_fn(u.len(), v.len(), |r, c| u[r] * v[c].conj())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, other: &Self, s: C64) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * other * self†`, the sandwich used by channel application.
    pub fn conjugate(&self, other: &Self) -> Self {
        self.matmul(other).matmul(&self.adjoint())
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Kronecker product with `self` as the left (most significant) factor.
    pub fn kron(&self, other: &Self) -> Self {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        let mut out = Self::zeros(rows, cols);
        for ar in 0..self.rows {
            for ac in 0..self.cols {
                let a = self[(ar, ac)];
                if a == ZERO {
                    continue;
                }
                for br in 0..other.rows {
                    let base = (ar * other.rows + br) * cols + ac * other.cols;
                    let brow = other.row(br);
                    for (bc, b) in brow.iter().enumerate() {
                        out.data[base + bc] = a * b;
                    }
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// max |h_ij - conj(h_ji)|; infinite for non-square input.
    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in r..n {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol
    }

    /// Replace by (h + h†)/2 with an exactly real diagonal.
    pub fn hermitize(&mut self) {
        assert!(self.is_square());
        let n = self.rows;
        for r in 0..n {
            self.data[r * n + r].im = 0.0;
            for c in r + 1..n {
                let avg = (self.data[r * n + c] + self.data[c * n + r].conj()) * 0.5;
                self.data[r * n + c] = avg;
                self.data[c * n + r] = avg.conj();
            }
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Sum of |entries| off the diagonal.
    pub fn offdiagonal_l1(&self) -> f64 {
        let n = self.cols;
        self.data
            .iter()
            .enumerate()
            .filter(|(i, _)| i / n != i % n)
            .map(|(_, z)| z.norm())
            .sum()
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

/// Accumulate `weight * (f_1 ⊗ f_2 ⊗ ... ⊗ f_n)` into `target`, visiting only
/// the nonzero entries of each factor.
pub fn kron_accumulate(target: &mut ComplexMatrix, factors: &[&ComplexMatrix], weight: C64) {
    let rows: usize = factors.iter().map(|f| f.rows).product();
    let cols: usize = factors.iter().map(|f| f.cols).product();
    assert_eq!((target.rows, target.cols), (rows, cols), "kron target shape");
    let nonzeros: Vec<Vec<(usize, usize, C64)>> = factors
        .iter()
        .map(|f| {
            let mut nz = Vec::new();
            for r in 0..f.rows {
                for c in 0..f.cols {
                    let z = f[(r, c)];
                    if z != ZERO {
                        nz.push((r, c, z));
                    }
                }
            }
            nz
        })
        .collect();
    fn walk(
        depth: usize,
        r: usize,
        c: usize,
        v: C64,
        factors: &[&ComplexMatrix],
        nonzeros: &[Vec<(usize, usize, C64)>],
        target: &mut ComplexMatrix,
    ) {
        if depth == factors.len() {
            target[(r, c)] += v;
            return;
        }
        let f = factors[depth];
        for &(fr, fc, fv) in &nonzeros[depth] {
            walk(
                depth + 1,
                r * f.rows + fr,
                c * f.cols + fc,
                v * fv,
                factors,
                nonzeros,
                target,
            );
        }
    }
    walk(0, 0, 0, weight, factors, &nonzeros, target);
}

/// Spectral decomposition h = V diag(values) V† with values sorted descending.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Vec<f64>,
    /// Eigenvectors stored as columns, in the same order as `values`.
    pub vectors: ComplexMatrix,
}

impl Eigh {
    /// V f(Λ) V† for a real function applied to the spectrum.
    pub fn reconstruct_with(&self, mut f: impl FnMut(f64) -> f64) -> ComplexMatrix {
        let n = self.values.len();
        let fv: Vec<f64> = self.values.iter().map(|&x| f(x)).collect();
        let v = &self.vectors;
        let mut out = ComplexMatrix::zeros(n, n);
        for k in 0..n {
            if fv[k] == 0.0 {
                continue;
            }
            for r in 0..n {
                let vr = v[(r, k)] * fv[k];
                if vr == ZERO {
                    continue;
                }
                for c in 0..n {
                    out[(r, c)] += vr * v[(c, k)].conj();
                }
            }
        }
        out
    }
}

fn check_hermitian(h: &ComplexMatrix) -> Result<()> {
    if !h.is_square() {
        return arg(format!("eigh needs a square matrix, got {}x{}", h.rows, h.cols));
    }
    let defect = h.hermitian_defect();
    if defect > HERMITIAN_TOL {
        return Err(Error::Argument(format!(
            "matrix is not Hermitian (defect {defect:.3e})"
        )));
    }
    Ok(())
}

/// Connected components of the sparsity graph, each sorted, ordered by first index.
fn components(h: &ComplexMatrix) -> Vec<Vec<usize>> {
    let n = h.rows;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for r in 0..n {
        let row = h.row(r);
        for (c, z) in row.iter().enumerate().skip(r + 1) {
            if *z != ZERO {
                let (a, b) = (find(&mut parent, r), find(&mut parent, c));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[root]].push(i);
    }
    groups
}

fn submatrix(h: &ComplexMatrix, idx: &[usize]) -> Vec<C64> {
    let mut out = Vec::with_capacity(idx.len() * idx.len());
    for &r in idx {
        for &c in idx {
            out.push(h[(r, c)]);
        }
    }
    out
}

/// Cyclic complex Jacobi on a dense n×n Hermitian block, in place.
/// Returns the (unsorted) eigenvalues; accumulates rotations into `v` when given.
fn jacobi(a: &mut [C64], n: usize, mut v: Option<&mut [C64]>) -> Vec<f64> {
    if let Some(v) = v.as_deref_mut() {
        v.iter_mut().for_each(|z| *z = ZERO);
        for i in 0..n {
            v[i * n + i] = ONE;
        }
    }
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        let mut total = 0.0;
        for r in 0..n {
            for c in 0..n {
                let m = a[r * n + c].norm_sqr();
                total += m;
                if r != c {
                    off += m;
                }
            }
        }
        if off.sqrt() <= JACOBI_OFF_TOL * total.sqrt() || off == 0.0 {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[p * n + q];
                let r = apq.norm();
                if r < f64::MIN_POSITIVE {
                    continue;
                }
                let phase = apq / r;
                let app = a[p * n + p].re;
                let aqq = a[q * n + q].re;
                let theta = (aqq - app) / (2.0 * r);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    let t = 1.0 / (theta.abs() + (theta * theta + 1.0).sqrt());
                    if theta < 0.0 {
                        -t
                    } else {
                        t
                    }
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let gpp = C64::new(c, 0.0);
                let gpq = C64::new(s, 0.0);
                let gqp = -phase.conj() * s;
                let gqq = phase.conj() * c;
                // A <- A G
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = akp * gpp + akq * gqp;
                    a[k * n + q] = akp * gpq + akq * gqq;
                }
                // A <- G† A
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = gpp.conj() * apk + gqp.conj() * aqk;
                    a[q * n + k] = gpq.conj() * apk + gqq.conj() * aqk;
                }
                a[p * n + q] = ZERO;
                a[q * n + p] = ZERO;
                a[p * n + p] = C64::new(a[p * n + p].re, 0.0);
                a[q * n + q] = C64::new(a[q * n + q].re, 0.0);
                if let Some(v) = v.as_deref_mut() {
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = vkp * gpp + vkq * gqp;
                        v[k * n + q] = vkp * gpq + vkq * gqq;
                    }
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i].re).collect()
}

fn block_eigen(block: &[C64], n: usize, want_vectors: bool) -> (Vec<f64>, Option<Vec<C64>>) {
    if n == 1 {
        return (vec![block[0].re], want_vectors.then(|| vec![ONE]));
    }
    if n <= JACOBI_MAX_BLOCK {
        let mut a = block.to_vec();
        if want_vectors {
            let mut v = vec![ZERO; n * n];
            let vals = jacobi(&mut a, n, Some(&mut v));
            (vals, Some(v))
        } else {
            (jacobi(&mut a, n, None), None)
        }
    } else {
        let m = DMatrix::from_row_slice(n, n, block);
        if want_vectors {
            let eig = m.symmetric_eigen();
            let vals = eig.eigenvalues.iter().copied().collect();
            let mut v = vec![ZERO; n * n];
            for r in 0..n {
                for c in 0..n {
                    v[r * n + c] = eig.eigenvectors[(r, c)];
                }
            }
            (vals, Some(v))
        } else {
            (m.symmetric_eigenvalues().iter().copied().collect(), None)
        }
    }
}

fn sort_descending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

/// Full Hermitian eigendecomposition; eigenvalues descending.
pub fn eigh(h: &ComplexMatrix) -> Result<Eigh> {
    check_hermitian(h)?;
    let n = h.rows;
    let mut values = Vec::with_capacity(n);
    let mut columns: Vec<Vec<C64>> = Vec::with_capacity(n);
    for idx in components(h) {
        let m = idx.len();
        let (vals, vecs) = block_eigen(&submatrix(h, &idx), m, true);
        let vecs = vecs.expect("vectors requested");
        for (k, &val) in vals.iter().enumerate() {
            let mut col = vec![ZERO; n];
            for (local, &global) in idx.iter().enumerate() {
                col[global] = vecs[local * m + k];
            }
            values.push(val);
            columns.push(col);
        }
    }
    let order = sort_descending(&values);
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, dst)] = columns[src][r];
        }
    }
    Ok(Eigh {
        values: order.iter().map(|&i| values[i]).collect(),
        vectors,
    })
}

/// Hermitian eigenvalues only, sorted descending.
pub fn eigvalsh(h: &ComplexMatrix) -> Result<Vec<f64>> {
    check_hermitian(h)?;
    let mut values = Vec::with_capacity(h.rows);
    for idx in components(h) {
        let (vals, _) = block_eigen(&submatrix(h, &idx), idx.len(), false);
        values.extend(vals);
    }
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

/// Sum of singular values.
pub fn trace_norm(a: &ComplexMatrix) -> Result<f64> {
    if !a.is_square() {
        return arg("trace norm needs a square matrix");
    }
    if a.is_hermitian(HERMITIAN_TOL) {
        let mut herm = a.clone();
        herm.hermitize();
        return Ok(eigvalsh(&herm)?.iter().map(|x| x.abs()).sum());
    }
    let mut gram = a.adjoint().matmul(a);
    gram.hermitize();
    Ok(eigvalsh(&gram)?.iter().map(|x| x.max(0.0).sqrt()).sum())
}

/// Square root of a positive semidefinite matrix (negative eigenvalues clipped).
pub fn sqrt_psd(h: &ComplexMatrix) -> Result<ComplexMatrix> {
    let e = eigh(h)?;
    Ok(e.reconstruct_with(|x| x.max(0.0).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> ComplexMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = ComplexMatrix::from_fn(n, n, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        m.hermitize();
        m
    }

    fn reconstruction_residual(h: &ComplexMatrix, e: &Eigh) -> f64 {
        e.reconstruct_with(|x| x).max_abs_diff(h)
    }

    fn orthonormality_residual(v: &ComplexMatrix) -> f64 {
        v.adjoint()
            .matmul(v)
            .max_abs_diff(&ComplexMatrix::identity(v.cols()))
    }

    #[test]
    fn diagonal_matrix_sorted_descending() {
        let h = ComplexMatrix::from_real_diagonal(&[0.2, 3.0, -1.0, 0.5]);
        let e = eigh(&h).unwrap();
        assert_eq!(e.values, vec![3.0, 0.5, 0.2, -1.0]);
    }

    #[test]
    fn pauli_x_spectrum() {
        let x = ComplexMatrix::new(2, 2, vec![ZERO, ONE, ONE, ZERO]).unwrap();
        let e = eigh(&x).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-15);
        assert!((e.values[1] + 1.0).abs() < 1e-15);
        assert!(reconstruction_residual(&x, &e) < 1e-14);
    }

    #[test]
    fn random_hermitian_reconstructs() {
        for seed in 0..20 {
            let h = random_hermitian(8, seed);
            let e = eigh(&h).unwrap();
            assert!(reconstruction_residual(&h, &e) <= 1e-10);
            assert!(orthonormality_residual(&e.vectors) <= 1e-10);
            let vals = eigvalsh(&h).unwrap();
            for (a, b) in vals.iter().zip(&e.values) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn large_blocks_use_householder_path() {
        let h = random_hermitian(90, 3);
        let e = eigh(&h).unwrap();
        assert!(reconstruction_residual(&h, &e) <= 1e-10);
        assert!(orthonormality_residual(&e.vectors) <= 1e-10);
    }

    #[test]
    fn block_diagonal_split_matches_dense() {
        let a = random_hermitian(3, 5);
        let b = random_hermitian(2, 6);
        // interleave the two blocks over indices {0,2,4} and {1,3}
        let mut h = ComplexMatrix::zeros(5, 5);
        let ia = [0, 2, 4];
        let ib = [1, 3];
        for (i, &r) in ia.iter().enumerate() {
            for (j, &c) in ia.iter().enumerate() {
                h[(r, c)] = a[(i, j)];
            }
        }
        for (i, &r) in ib.iter().enumerate() {
            for (j, &c) in ib.iter().enumerate() {
                h[(r, c)] = b[(i, j)];
            }
        }
        let e = eigh(&h).unwrap();
        assert!(reconstruction_residual(&h, &e) <= 1e-12);
        let mut expected: Vec<f64> = eigvalsh(&a).unwrap();
        expected.extend(eigvalsh(&b).unwrap());
        expected.sort_by(|x, y| y.total_cmp(x));
        for (x, y) in expected.iter().zip(&e.values) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = ComplexMatrix::new(2, 2, vec![ZERO, ONE, ZERO, ZERO]).unwrap();
        assert!(matches!(eigh(&m), Err(Error::Argument(_))));
    }

    #[test]
    fn trace_norm_general_matrix() {
        // singular values of [[0,1],[0,0]] are {1,0}
        let m = ComplexMatrix::new(2, 2, vec![ZERO, ONE, ZERO, ZERO]).unwrap();
        assert!((trace_norm(&m).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn kron_accumulate_matches_dense_kron() {
        let a = random_hermitian(2, 1);
        let b = random_hermitian(3, 2);
        let c = random_hermitian(2, 4);
        let dense = a.kron(&b).kron(&c);
        let mut acc = ComplexMatrix::zeros(12, 12);
        kron_accumulate(&mut acc, &[&a, &b, &c], ONE);
        assert!(acc.max_abs_diff(&dense) < 1e-15);
    }
}
