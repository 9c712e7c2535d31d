//! Kraus channels, ensembles, and the two families of free channels:
//! incoherent operations and 1-local channels.

use rand::Rng;

use crate::error::{arg, Error, Result};
use crate::linalg::{ComplexMatrix, C64, ONE, ZERO};
use crate::rng::complex_gaussian;
use crate::state::{check_cap, DensityMatrix, PureState};

pub const TP_TOL: f64 = 1e-10;
/// Selective outcomes below this probability are dropped.
pub const MIN_OUTCOME_PROB: f64 = 1e-14;
/// Entries above this magnitude count as nonzero for the incoherence test.
pub const INCOHERENT_ENTRY_TOL: f64 = 1e-12;
pub const WEIGHT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    kraus: Vec<ComplexMatrix>,
    in_dims: Vec<usize>,
    out_dims: Vec<usize>,
}

impl KrausChannel {
    pub fn new(kraus: Vec<ComplexMatrix>, in_dims: Vec<usize>, out_dims: Vec<usize>) -> Result<Self> {
        if kraus.is_empty() {
            return arg("a channel needs at least one Kraus operator");
        }
        let din: usize = in_dims.iter().product();
        let dout: usize = out_dims.iter().product();
        if in_dims.is_empty() || out_dims.is_empty() {
            return arg("channel dims must be nonempty");
        }
        for k in &kraus {
            if k.rows() != dout || k.cols() != din {
                return arg(format!(
                    "Kraus operator is {}x{}, expected {}x{}",
                    k.rows(),
                    k.cols(),
                    dout,
                    din
                ));
            }
        }
        let ch = Self { kraus, in_dims, out_dims };
        let defect = ch.tp_defect();
        if defect > TP_TOL {
            return arg(format!("channel is not trace preserving (defect {defect:.3e})"));
        }
        Ok(ch)
    }

    pub(crate) fn from_trusted(kraus: Vec<ComplexMatrix>, in_dims: Vec<usize>, out_dims: Vec<usize>) -> Self {
        Self { kraus, in_dims, out_dims }
    }

    pub fn identity(dims: Vec<usize>) -> Self {
        let d = dims.iter().product();
        Self::from_trusted(vec![ComplexMatrix::identity(d)], dims.clone(), dims)
    }

    /// Unitary channel ρ ↦ UρU†.
    pub fn unitary(u: ComplexMatrix, dims: Vec<usize>) -> Result<Self> {
        Self::new(vec![u], dims.clone(), dims)
    }

    /// Computational-basis measurement, Kraus operators |k⟩⟨k|.
    pub fn dephasing(d: usize) -> Self {
        let kraus = (0..d)
            .map(|k| {
                let mut m = ComplexMatrix::zeros(d, d);
                m[(k, k)] = ONE;
                m
            })
            .collect();
        Self::from_trusted(kraus, vec![d], vec![d])
    }

    /// Projective measurement {|φ_i⟩⟨φ_i|} acting on the rightmost register of
    /// a space `system_dims ⊗ flag_dims` (Kraus operators I ⊗ |φ_i⟩⟨φ_i|).
    pub fn register_measurement(system_dims: &[usize], flags: &[PureState]) -> Result<Self> {
        if flags.is_empty() {
            return arg("measurement needs at least one projector");
        }
        let fdims = flags[0].dims().to_vec();
        let ds: usize = system_dims.iter().product();
        let id = ComplexMatrix::identity(ds);
        let kraus = flags
            .iter()
            .map(|f| id.kron(&ComplexMatrix::outer(f.amplitudes(), f.amplitudes())))
            .collect();
        let mut dims = system_dims.to_vec();
        dims.extend_from_slice(&fdims);
        Self::new(kraus, dims.clone(), dims)
    }

    pub fn kraus(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    pub fn in_dims(&self) -> &[usize] {
        &self.in_dims
    }

    pub fn out_dims(&self) -> &[usize] {
        &self.out_dims
    }

    pub fn in_dim(&self) -> usize {
        self.in_dims.iter().product()
    }

    pub fn out_dim(&self) -> usize {
        self.out_dims.iter().product()
    }

    /// max |Σ K†K − I|.
    pub fn tp_defect(&self) -> f64 {
        let d = self.in_dim();
        let mut acc = ComplexMatrix::zeros(d, d);
        for k in &self.kraus {
            acc.add_scaled(&k.adjoint().matmul(k), ONE);
        }
        acc.max_abs_diff(&ComplexMatrix::identity(d))
    }

    /// Same Kraus operators with relabelled subsystem structure.
    pub fn with_dims(&self, in_dims: Vec<usize>, out_dims: Vec<usize>) -> Result<Self> {
        Self::new(self.kraus.clone(), in_dims, out_dims)
    }

    fn check_input(&self, rho: &DensityMatrix) -> Result<()> {
        if rho.dim() != self.in_dim() {
            return arg(format!(
                "channel input dimension {} does not match state dimension {}",
                self.in_dim(),
                rho.dim()
            ));
        }
        Ok(())
    }

    fn output_dims_for(&self, rho: &DensityMatrix) -> Vec<usize> {
        if self.in_dims == self.out_dims && rho.dims().iter().product::<usize>() == self.out_dim() {
            rho.dims().to_vec()
        } else {
            self.out_dims.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    weights: Vec<f64>,
    states: Vec<DensityMatrix>,
}

impl Ensemble {
    pub fn new(weights: Vec<f64>, states: Vec<DensityMatrix>) -> Result<Self> {
        if weights.is_empty() || weights.len() != states.len() {
            return arg("ensemble needs equally many (>= 1) weights and states");
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return arg("ensemble weights must be nonnegative");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return arg(format!("ensemble weights sum to {total}, expected 1"));
        }
        let dims = states[0].dims();
        if states.iter().any(|s| s.dims() != dims) {
            return arg("ensemble states have different dims");
        }
        Ok(Self { weights, states })
    }

    pub fn single(state: DensityMatrix) -> Self {
        Self { weights: vec![1.0], states: vec![state] }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Σ p_i ρ_i.
    pub fn average(&self) -> DensityMatrix {
        DensityMatrix::mixture(&self.weights, &self.states).expect("validated ensemble")
    }
}

/// Output of a selective (post-selected) application.
#[derive(Clone, Debug)]
pub struct Outcomes {
    pub ensemble: Ensemble,
    /// Index of the Kraus operator behind each retained outcome.
    pub kraus_indices: Vec<usize>,
    /// Probability mass of dropped outcomes, absorbed by renormalisation.
    pub dropped_mass: f64,
}

/// Σ K ρ K†.
pub fn apply(ch: &KrausChannel, rho: &DensityMatrix) -> Result<DensityMatrix> {
    ch.check_input(rho)?;
    let d = ch.out_dim();
    let mut acc = ComplexMatrix::zeros(d, d);
    for k in &ch.kraus {
        acc.add_scaled(&k.conjugate(rho.matrix()), ONE);
    }
    Ok(DensityMatrix::from_trusted(acc, ch.output_dims_for(rho)))
}

/// Per-outcome states ρ_i = KρK†/p_i with probabilities p_i = Tr KρK†.
pub fn selective_apply(ch: &KrausChannel, rho: &DensityMatrix) -> Result<Outcomes> {
    ch.check_input(rho)?;
    let dims = ch.output_dims_for(rho);
    let mut weights = Vec::new();
    let mut states = Vec::new();
    let mut indices = Vec::new();
    let mut dropped = 0.0;
    for (i, k) in ch.kraus.iter().enumerate() {
        let out = k.conjugate(rho.matrix());
        let p = out.trace().re;
        if p < MIN_OUTCOME_PROB {
            dropped += p.max(0.0);
            continue;
        }
        weights.push(p);
        states.push(DensityMatrix::from_trusted(out.scale_real(1.0 / p), dims.clone()));
        indices.push(i);
    }
    if weights.is_empty() {
        return Err(Error::Degenerate("every outcome has vanishing probability".into()));
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(Outcomes {
        ensemble: Ensemble { weights, states },
        kraus_indices: indices,
        dropped_mass: dropped,
    })
}

/// Every Kraus operator has at most one entry above tolerance per column.
pub fn is_incoherent(ch: &KrausChannel) -> bool {
    ch.kraus.iter().all(|k| {
        (0..k.cols()).all(|c| {
            (0..k.rows())
                .filter(|&r| k[(r, c)].norm() > INCOHERENT_ENTRY_TOL)
                .count()
                <= 1
        })
    })
}

/// Which side of a bipartition a 1-local channel acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Does `k` factor as K_A ⊗ I_B (side Left) or I_A ⊗ K_B (side Right), for a
/// square operator on a space of dimension da·db?
fn factors_on(k: &ComplexMatrix, da: usize, db: usize, side: Side, tol: f64) -> bool {
    if k.rows() != da * db || k.cols() != da * db {
        return false;
    }
    match side {
        Side::Left => {
            for a in 0..da {
                for a2 in 0..da {
                    let val = k[(a * db, a2 * db)];
                    for b in 0..db {
                        for b2 in 0..db {
                            let expected = if b == b2 { val } else { ZERO };
                            if (k[(a * db + b, a2 * db + b2)] - expected).norm() > tol {
                                return false;
                            }
                        }
                    }
                }
            }
            true
        }
        Side::Right => {
            for b in 0..db {
                for b2 in 0..db {
                    let val = k[(b, b2)];
                    for a in 0..da {
                        for a2 in 0..da {
                            let expected = if a == a2 { val } else { ZERO };
                            if (k[(a * db + b, a2 * db + b2)] - expected).norm() > tol {
                                return false;
                            }
                        }
                    }
                }
            }
            true
        }
    }
}

/// Is the channel of the form Λ ⊗ id or id ⊗ Λ across the cut after the
/// first `split` subsystems of its input dims?
pub fn is_one_local(ch: &KrausChannel, split: usize) -> bool {
    let dims = ch.in_dims();
    if ch.in_dims != ch.out_dims || split == 0 || split >= dims.len() {
        return false;
    }
    let da: usize = dims[..split].iter().product();
    let db: usize = dims[split..].iter().product();
    [Side::Left, Side::Right]
        .iter()
        .any(|&side| ch.kraus.iter().all(|k| factors_on(k, da, db, side, 1e-12)))
}

/// Parameters of an incoherent channel: row targets and one complex
/// amplitude vector per input column.
#[derive(Clone, Debug, PartialEq)]
pub struct IncoherentParams {
    pub d: usize,
    pub n_kraus: usize,
    /// rows[n * d + j] is the output row of column j in Kraus operator n.
    pub rows: Vec<usize>,
    /// raw[j * n_kraus + n] is the unnormalised amplitude of column j in operator n.
    pub raw: Vec<C64>,
}

impl IncoherentParams {
    pub fn sample(d: usize, n_kraus: usize, rng: &mut impl Rng) -> Self {
        let rows = (0..n_kraus * d).map(|_| rng.gen_range(0..d)).collect();
        let raw = (0..d * n_kraus).map(|_| complex_gaussian(rng)).collect();
        Self { d, n_kraus, rows, raw }
    }

    /// Amplitudes a_{·j}: the raw column vector projected off every earlier
    /// column that shares an output row in some operator, then normalised.
    /// `None` when a projection leaves nothing.
    pub fn amplitudes(&self) -> Option<Vec<Vec<C64>>> {
        let (d, n) = (self.d, self.n_kraus);
        let mut cols: Vec<Vec<C64>> = Vec::with_capacity(d);
        for j in 0..d {
            // modified Gram-Schmidt against masked earlier columns
            let mut basis: Vec<Vec<C64>> = Vec::new();
            for (jp, prev) in cols.iter().enumerate() {
                let mut u: Vec<C64> = (0..n)
                    .map(|k| if self.rows[k * d + j] == self.rows[k * d + jp] { prev[k] } else { ZERO })
                    .collect();
                for b in &basis {
                    let proj: C64 = b.iter().zip(&u).map(|(x, y)| x.conj() * y).sum();
                    u.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
                }
                let norm = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if norm > 1e-12 {
                    basis.push(u.into_iter().map(|z| z / norm).collect());
                }
            }
            let mut g: Vec<C64> = self.raw[j * n..(j + 1) * n].to_vec();
            let scale = g.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for _ in 0..2 {
                for b in &basis {
                    let proj: C64 = b.iter().zip(&g).map(|(x, y)| x.conj() * y).sum();
                    g.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
                }
            }
            let norm = g.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if !(norm > 1e-8 * scale.max(1e-300)) {
                return None;
            }
            cols.push(g.into_iter().map(|z| z / norm).collect());
        }
        Some(cols)
    }

    pub fn build(&self) -> Option<KrausChannel> {
        let amps = self.amplitudes()?;
        let (d, n) = (self.d, self.n_kraus);
        let kraus = (0..n)
            .map(|k| {
                let mut m = ComplexMatrix::zeros(d, d);
                for (j, col) in amps.iter().enumerate() {
                    m[(self.rows[k * d + j], j)] = col[k];
                }
                m
            })
            .collect();
        Some(KrausChannel::from_trusted(kraus, vec![d], vec![d]))
    }
}

/// Random incoherent channel on dimension d with `n_kraus` operators.
///
/// Row targets are uniform and independent per (operator, column). Each
/// column's amplitude vector is a random complex unit vector orthogonalised
/// against earlier columns on the operators where their rows coincide, which
/// makes Σ K†K = I hold exactly. Row draws that admit no such vector for a
/// column are redrawn for that column.
pub fn random_incoherent_channel(d: usize, n_kraus: usize, rng: &mut impl Rng) -> Result<KrausChannel> {
    if n_kraus == 0 || d == 0 {
        return arg("random incoherent channel needs d >= 1 and n_kraus >= 1");
    }
    let mut params = IncoherentParams::sample(d, n_kraus, rng);
    for attempt in 0.. {
        if let Some(ch) = params.build() {
            return Ok(ch);
        }
        if attempt > 64 {
            // a permutation in every operator never overlaps
            for k in 0..n_kraus {
                for j in 0..d {
                    params.rows[k * d + j] = j;
                }
            }
        } else {
            params = IncoherentParams::sample(d, n_kraus, rng);
        }
    }
    unreachable!()
}

/// Random CPTP map from a Haar-like isometry split into `n_kraus` blocks.
pub fn random_channel(d_in: usize, d_out: usize, n_kraus: usize, rng: &mut impl Rng) -> Result<KrausChannel> {
    if n_kraus == 0 || n_kraus * d_out < d_in {
        return arg("random channel needs n_kraus * d_out >= d_in");
    }
    let rows = n_kraus * d_out;
    // Gram-Schmidt on the columns of a Gaussian rows×d_in matrix
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(d_in);
    while cols.len() < d_in {
        let mut v: Vec<C64> = (0..rows).map(|_| complex_gaussian(rng)).collect();
        for _ in 0..2 {
            for b in &cols {
                let proj: C64 = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-8 {
            cols.push(v.into_iter().map(|z| z / norm).collect());
        }
    }
    let kraus = (0..n_kraus)
        .map(|k| ComplexMatrix::from_fn(d_out, d_in, |r, c| cols[c][k * d_out + r]))
        .collect();
    Ok(KrausChannel::from_trusted(kraus, vec![d_in], vec![d_out]))
}

/// K ⊗ I (side Left: the channel acts first) or I ⊗ K (side Right).
pub fn embed_local(ch: &KrausChannel, other_dim: usize, side: Side) -> Result<KrausChannel> {
    check_cap(ch.in_dim().max(ch.out_dim()) * other_dim)?;
    let id = ComplexMatrix::identity(other_dim);
    let kraus = ch
        .kraus
        .iter()
        .map(|k| match side {
            Side::Left => k.kron(&id),
            Side::Right => id.kron(k),
        })
        .collect();
    let (mut in_dims, mut out_dims) = (Vec::new(), Vec::new());
    match side {
        Side::Left => {
            in_dims.extend_from_slice(&ch.in_dims);
            in_dims.push(other_dim);
            out_dims.extend_from_slice(&ch.out_dims);
            out_dims.push(other_dim);
        }
        Side::Right => {
            in_dims.push(other_dim);
            in_dims.extend_from_slice(&ch.in_dims);
            out_dims.push(other_dim);
            out_dims.extend_from_slice(&ch.out_dims);
        }
    }
    Ok(KrausChannel::from_trusted(kraus, in_dims, out_dims))
}

/// Λ̃ with Kraus operators K_n ⊗ |φ_n⟩, recording each outcome in a flag register.
pub fn flagged_channel(ch: &KrausChannel, flags: &[PureState]) -> Result<KrausChannel> {
    if flags.len() != ch.kraus.len() {
        return arg(format!(
            "{} flags for {} Kraus operators",
            flags.len(),
            ch.kraus.len()
        ));
    }
    let fdims = flags[0].dims().to_vec();
    let fd = flags[0].dim();
    check_cap(ch.out_dim() * fd)?;
    let kraus = ch
        .kraus
        .iter()
        .zip(flags)
        .map(|(k, f)| {
            let col = ComplexMatrix::new(fd, 1, f.amplitudes().to_vec()).expect("flag shape");
            k.kron(&col)
        })
        .collect();
    let mut out_dims = ch.out_dims.clone();
    out_dims.extend_from_slice(&fdims);
    Ok(KrausChannel::from_trusted(kraus, ch.in_dims.clone(), out_dims))
}
