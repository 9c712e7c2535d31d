//! Density matrices, pure states, and the operations the measures need:
//! tensor composition, reductions, partial transposition, entropy and dephasing.
//!
//! Subsystem dimensions are listed left to right in tensor order; flag
//! registers are always appended on the right.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::Rng;

use crate::error::{arg, Error, Result};
use crate::linalg::{eigvalsh, kron_accumulate, ComplexMatrix, C64, ONE, ZERO};
use crate::rng::complex_gaussian;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;
pub const NORM_TOL: f64 = 1e-12;
/// Eigenvalues below this are treated as zero in entropies.
pub const ENTROPY_CUTOFF: f64 = 1e-12;
pub const DEFAULT_DIM_CAP: usize = 4096;

static DIM_CAP: AtomicUsize = AtomicUsize::new(DEFAULT_DIM_CAP);

/// Largest total Hilbert-space dimension any composite construction may produce.
pub fn dim_cap() -> usize {
    DIM_CAP.load(Ordering::Relaxed)
}

pub fn set_dim_cap(cap: usize) {
    DIM_CAP.store(cap.max(1), Ordering::Relaxed);
}

pub(crate) fn check_cap(requested: usize) -> Result<()> {
    let cap = dim_cap();
    if requested > cap {
        Err(Error::Capacity { requested, cap })
    } else {
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    dims: Vec<usize>,
}

impl DensityMatrix {
    /// Validates every invariant, including positivity (one eigensolve).
    pub fn new(matrix: ComplexMatrix, dims: Vec<usize>) -> Result<Self> {
        let rho = Self::check_shape(matrix, dims)?;
        rho.check_cheap()?;
        rho.check_positive()?;
        Ok(rho)
    }

    /// Trusted constructor for results of invariant-preserving operations.
    /// Hermitises to remove rounding asymmetry.
    pub(crate) fn from_trusted(mut matrix: ComplexMatrix, dims: Vec<usize>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), matrix.rows());
        matrix.hermitize();
        Self { matrix, dims }
    }

    fn check_shape(matrix: ComplexMatrix, dims: Vec<usize>) -> Result<Self> {
        if !matrix.is_square() {
            return arg("density matrix must be square");
        }
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return arg("subsystem dimensions must be nonempty and positive");
        }
        let prod: usize = dims.iter().product();
        if prod != matrix.rows() {
            return arg(format!(
                "dims {:?} multiply to {}, matrix has dimension {}",
                dims,
                prod,
                matrix.rows()
            ));
        }
        Ok(Self { matrix, dims })
    }

    fn check_cheap(&self) -> Result<()> {
        let defect = self.matrix.hermitian_defect();
        if defect > HERMITIAN_TOL {
            return arg(format!("state is not Hermitian (defect {defect:.3e})"));
        }
        let tr = self.matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return arg(format!("state trace is {tr}, expected 1"));
        }
        Ok(())
    }

    fn check_positive(&self) -> Result<()> {
        let mut h = self.matrix.clone();
        h.hermitize();
        let min = eigvalsh(&h)?.last().copied().unwrap_or(0.0);
        if min < -PSD_TOL {
            return arg(format!("state has negative eigenvalue {min:.3e}"));
        }
        Ok(())
    }

    /// Re-run every invariant check.
    pub fn validate(&self) -> Result<()> {
        self.check_cheap()?;
        self.check_positive()
    }

    pub fn from_matrix(matrix: ComplexMatrix) -> Result<Self> {
        let d = matrix.rows();
        Self::new(matrix, vec![d])
    }

    /// Diagonal (incoherent) state from a probability vector.
    pub fn from_diagonal(probs: &[f64], dims: Vec<usize>) -> Result<Self> {
        if probs.iter().any(|&p| p < 0.0) {
            return arg("diagonal entries must be nonnegative");
        }
        Self::new(ComplexMatrix::from_real_diagonal(probs), dims)
    }

    /// |k⟩⟨k| in dimension d.
    pub fn basis_state(d: usize, k: usize) -> Result<Self> {
        if k >= d {
            return arg(format!("basis index {k} out of range for dimension {d}"));
        }
        let mut m = ComplexMatrix::zeros(d, d);
        m[(k, k)] = ONE;
        Ok(Self { matrix: m, dims: vec![d] })
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Self {
        let d: usize = dims.iter().product();
        let m = ComplexMatrix::from_real_diagonal(&vec![1.0 / d as f64; d]);
        Self { matrix: m, dims }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn purity(&self) -> f64 {
        self.matrix.as_slice().iter().map(|z| z.norm_sqr()).sum()
    }

    /// Relabel the subsystem structure without touching the matrix.
    pub fn with_dims(&self, dims: Vec<usize>) -> Result<Self> {
        let s = Self::check_shape(self.matrix.clone(), dims)?;
        Ok(s)
    }

    /// Convex combination Σ w_i ρ_i of states with identical dims.
    pub fn mixture(weights: &[f64], states: &[DensityMatrix]) -> Result<Self> {
        if weights.len() != states.len() || states.is_empty() {
            return arg("mixture needs equally many weights and states");
        }
        let dims = states[0].dims.clone();
        let d = states[0].dim();
        let mut acc = ComplexMatrix::zeros(d, d);
        for (w, s) in weights.iter().zip(states) {
            if s.dims != dims {
                return arg("mixture components have different dims");
            }
            acc.add_scaled(&s.matrix, C64::new(*w, 0.0));
        }
        Ok(Self::from_trusted(acc, dims))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amplitudes: Vec<C64>,
    dims: Vec<usize>,
}

impl PureState {
    pub fn new(amplitudes: Vec<C64>, dims: Vec<usize>) -> Result<Self> {
        let prod: usize = dims.iter().product();
        if prod != amplitudes.len() || dims.is_empty() {
            return arg("pure state dims do not match amplitude count");
        }
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return arg(format!("pure state norm is {norm}, expected 1"));
        }
        Ok(Self { amplitudes, dims })
    }

    /// Normalises the amplitudes first.
    pub fn normalized(amplitudes: Vec<C64>, dims: Vec<usize>) -> Result<Self> {
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Degenerate("zero vector".into()));
        }
        Self::new(amplitudes.into_iter().map(|z| z / norm).collect(), dims)
    }

    pub fn basis(d: usize, k: usize) -> Result<Self> {
        if k >= d {
            return arg(format!("basis index {k} out of range for dimension {d}"));
        }
        let mut a = vec![ZERO; d];
        a[k] = ONE;
        Ok(Self { amplitudes: a, dims: vec![d] })
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn inner(&self, other: &PureState) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn tensor(&self, other: &PureState) -> PureState {
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amplitudes {
            for b in &other.amplitudes {
                amps.push(a * b);
            }
        }
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        PureState { amplitudes: amps, dims }
    }

    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix::from_trusted(
            ComplexMatrix::outer(&self.amplitudes, &self.amplitudes),
            self.dims.clone(),
        )
    }
}

/// ρ ⊗ σ with concatenated dims.
pub fn tensor(a: &DensityMatrix, b: &DensityMatrix) -> Result<DensityMatrix> {
    check_cap(a.dim() * b.dim())?;
    let mut dims = a.dims.clone();
    dims.extend_from_slice(&b.dims);
    Ok(DensityMatrix::from_trusted(a.matrix.kron(&b.matrix), dims))
}

/// Tensor product of a list of states, left to right.
pub fn tensor_all(factors: &[&DensityMatrix]) -> Result<DensityMatrix> {
    if factors.is_empty() {
        return arg("tensor of an empty list");
    }
    let d: usize = factors.iter().map(|f| f.dim()).product();
    check_cap(d)?;
    let dims: Vec<usize> = factors.iter().flat_map(|f| f.dims.iter().copied()).collect();
    let mut acc = ComplexMatrix::zeros(d, d);
    let mats: Vec<&ComplexMatrix> = factors.iter().map(|f| &f.matrix).collect();
    kron_accumulate(&mut acc, &mats, ONE);
    Ok(DensityMatrix::from_trusted(acc, dims))
}

/// ρ^{⊗n}.
pub fn tensor_power(rho: &DensityMatrix, n: usize) -> Result<DensityMatrix> {
    if n == 0 {
        return arg("tensor power needs n >= 1");
    }
    let factors = vec![rho; n];
    tensor_all(&factors)
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

/// Offsets in the full index of every value of the multi-index over `subset`.
fn subset_offsets(dims: &[usize], subset: &[usize]) -> Vec<usize> {
    let st = strides(dims);
    let mut offs = vec![0usize];
    for &s in subset {
        let mut next = Vec::with_capacity(offs.len() * dims[s]);
        for &o in &offs {
            for v in 0..dims[s] {
                next.push(o + v * st[s]);
            }
        }
        offs = next;
    }
    offs
}

fn normalize_subset(dims: &[usize], set: &[usize]) -> Result<Vec<usize>> {
    let mut s = set.to_vec();
    s.sort_unstable();
    s.dedup();
    if s.len() != set.len() {
        return arg("repeated subsystem index");
    }
    if let Some(&bad) = s.iter().find(|&&i| i >= dims.len()) {
        return arg(format!(
            "subsystem index {bad} out of range for {} subsystems",
            dims.len()
        ));
    }
    Ok(s)
}

/// Reduced state on the subsystems listed in `keep` (kept in ascending order).
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    if keep.is_empty() {
        return arg("partial trace must keep at least one subsystem");
    }
    let keep = normalize_subset(&rho.dims, keep)?;
    let traced: Vec<usize> = (0..rho.dims.len()).filter(|i| !keep.contains(i)).collect();
    let ko = subset_offsets(&rho.dims, &keep);
    let to = subset_offsets(&rho.dims, &traced);
    let dk = ko.len();
    let m = &rho.matrix;
    let mut out = ComplexMatrix::zeros(dk, dk);
    for (a, &ra) in ko.iter().enumerate() {
        for (b, &cb) in ko.iter().enumerate() {
            let mut acc = ZERO;
            for &t in &to {
                acc += m[(ra + t, cb + t)];
            }
            out[(a, b)] = acc;
        }
    }
    let dims = keep.iter().map(|&i| rho.dims[i]).collect();
    Ok(DensityMatrix::from_trusted(out, dims))
}

/// Transpose the indices of every subsystem in `subsystems`.
pub fn partial_transpose_set(rho: &DensityMatrix, subsystems: &[usize]) -> Result<ComplexMatrix> {
    let set = normalize_subset(&rho.dims, subsystems)?;
    let st = strides(&rho.dims);
    let d = rho.dim();
    // offset contributed by the transposed subsystems to each full index
    let part: Vec<usize> = (0..d)
        .map(|i| {
            set.iter()
                .map(|&s| (i / st[s]) % rho.dims[s] * st[s])
                .sum()
        })
        .collect();
    let m = &rho.matrix;
    Ok(ComplexMatrix::from_fn(d, d, |r, c| {
        let rr = r - part[r] + part[c];
        let cc = c - part[c] + part[r];
        m[(rr, cc)]
    }))
}

pub fn partial_transpose(rho: &DensityMatrix, subsystem: usize) -> Result<ComplexMatrix> {
    partial_transpose_set(rho, &[subsystem])
}

/// Shannon entropy in bits of a spectrum, with the entropy cutoff applied.
pub fn spectrum_entropy(values: &[f64]) -> f64 {
    -values
        .iter()
        .filter(|&&x| x > ENTROPY_CUTOFF)
        .map(|&x| x * x.log2())
        .sum::<f64>()
}

/// von Neumann entropy in bits.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    let vals = eigvalsh(&rho.matrix).expect("density matrices are Hermitian");
    spectrum_entropy(&vals)
}

/// Diagonal part of ρ in the computational basis.
pub fn dephase(rho: &DensityMatrix) -> DensityMatrix {
    let diag: Vec<f64> = rho.matrix.diagonal().iter().map(|z| z.re).collect();
    DensityMatrix {
        matrix: ComplexMatrix::from_real_diagonal(&diag),
        dims: rho.dims.clone(),
    }
}

/// GG†/Tr(GG†) for a d×rank complex Gaussian G.
pub fn random_density(d: usize, rank: usize, rng: &mut impl Rng) -> Result<DensityMatrix> {
    random_density_with_dims(vec![d], rank, rng)
}

pub fn random_density_with_dims(
    dims: Vec<usize>,
    rank: usize,
    rng: &mut impl Rng,
) -> Result<DensityMatrix> {
    let d: usize = dims.iter().product();
    if rank == 0 || rank > d {
        return arg(format!("rank {rank} outside 1..={d}"));
    }
    check_cap(d)?;
    let g = ComplexMatrix::from_fn(d, rank, |_, _| complex_gaussian(rng));
    let mut m = g.matmul(&g.adjoint());
    let tr = m.trace().re;
    m = m.scale_real(1.0 / tr);
    Ok(DensityMatrix::from_trusted(m, dims))
}

/// Haar-random pure state.
pub fn random_pure(dims: Vec<usize>, rng: &mut impl Rng) -> PureState {
    let d: usize = dims.iter().product();
    let amps = (0..d).map(|_| complex_gaussian(rng)).collect();
    PureState::normalized(amps, dims).expect("Gaussian vector is nonzero almost surely")
}

/// Random mixture of product states Σ_k w_k ρ_A^k ⊗ ρ_B^k (separable by construction).
pub fn random_separable(da: usize, db: usize, terms: usize, rng: &mut impl Rng) -> DensityMatrix {
    let weights = crate::rng::simplex_point(rng, terms.max(1));
    let parts: Vec<DensityMatrix> = weights
        .iter()
        .map(|_| {
            let ra = rng.gen_range(1..=da);
            let rb = rng.gen_range(1..=db);
            let a = random_density(da, ra, rng).expect("rank in range");
            let b = random_density(db, rb, rng).expect("rank in range");
            tensor(&a, &b).expect("small product")
        })
        .collect();
    DensityMatrix::mixture(&weights, &parts).expect("consistent dims")
}

/// Random incoherent (diagonal) state.
pub fn random_incoherent(dims: Vec<usize>, rng: &mut impl Rng) -> DensityMatrix {
    let d: usize = dims.iter().product();
    let p = crate::rng::simplex_point(rng, d);
    DensityMatrix::from_diagonal(&p, dims).expect("simplex point is a valid diagonal")
}
