//! Resource measures behind a uniform evaluation interface.

mod ctr;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::linalg::{eigh, eigvalsh, trace_norm, ComplexMatrix, C64};
use crate::state::{partial_transpose_set, spectrum_entropy, von_neumann_entropy, DensityMatrix};
use crate::Theory;

pub use ctr::{c_tr_with, CtrOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MeasureId {
    #[serde(rename = "c_l1")]
    CL1,
    #[serde(rename = "c_rel_ent")]
    CRelEnt,
    #[serde(rename = "c_tr")]
    CTr,
    #[serde(rename = "negativity")]
    Negativity,
    #[serde(rename = "eof_2q")]
    Eof2q,
}

impl MeasureId {
    pub const ALL: [MeasureId; 5] = [
        MeasureId::CL1,
        MeasureId::CRelEnt,
        MeasureId::CTr,
        MeasureId::Negativity,
        MeasureId::Eof2q,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MeasureId::CL1 => "c_l1",
            MeasureId::CRelEnt => "c_rel_ent",
            MeasureId::CTr => "c_tr",
            MeasureId::Negativity => "negativity",
            MeasureId::Eof2q => "eof_2q",
        }
    }

    pub fn descriptor(self) -> MeasureDescriptor {
        MeasureDescriptor::of(self)
    }
}

impl fmt::Display for MeasureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MeasureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MeasureId::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Argument(format!("unknown measure `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasureDescriptor {
    pub id: MeasureId,
    pub theory: Theory,
    pub max_dim: usize,
    pub supports_flagged_eval: bool,
    /// Analytic expectation, used only to label suites and exit codes.
    pub known_flag_additive: bool,
}

impl MeasureDescriptor {
    pub fn of(id: MeasureId) -> Self {
        let (theory, max_dim, flagged, additive) = match id {
            MeasureId::CL1 => (Theory::Coherence, 4096, true, true),
            MeasureId::CRelEnt => (Theory::Coherence, 4096, true, true),
            MeasureId::CTr => (Theory::Coherence, 16, true, false),
            MeasureId::Negativity => (Theory::Entanglement, 4096, true, true),
            MeasureId::Eof2q => (Theory::Entanglement, 4, false, true),
        };
        Self {
            id,
            theory,
            max_dim,
            supports_flagged_eval: flagged,
            known_flag_additive: additive,
        }
    }

    pub fn all() -> Vec<Self> {
        MeasureId::ALL.iter().map(|&m| Self::of(m)).collect()
    }

    /// Capability check for a state of the given shape.
    pub fn check_supports(&self, dims: &[usize]) -> Result<()> {
        let d: usize = dims.iter().product();
        let fail = |reason: String| {
            Err(Error::Capability { measure: self.id.as_str().into(), reason })
        };
        if d > self.max_dim {
            return fail(format!("dimension {d} exceeds max_dim {}", self.max_dim));
        }
        match self.id {
            MeasureId::Eof2q if dims != [2, 2] => fail(format!("needs dims [2, 2], got {dims:?}")),
            MeasureId::Negativity if dims.len() < 2 => fail("needs at least two subsystems".into()),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub value: f64,
    pub iterations: usize,
    pub gap_estimate: f64,
    pub converged: bool,
}

impl SolverReport {
    pub fn exact(value: f64) -> Self {
        Self { value, iterations: 0, gap_estimate: 0.0, converged: true }
    }
}

/// Subsystems forming party A; everything else is party B.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bipartition {
    pub party_a: Vec<usize>,
}

impl Bipartition {
    /// A = subsystem 0, B = all remaining subsystems (including any flag register).
    pub fn first_vs_rest() -> Self {
        Self { party_a: vec![0] }
    }

    pub fn party_b(&self, n_subsystems: usize) -> Result<Vec<usize>> {
        let mut a = self.party_a.clone();
        a.sort_unstable();
        a.dedup();
        if a.is_empty() || a.len() != self.party_a.len() || a.iter().any(|&s| s >= n_subsystems) {
            return arg(format!("invalid party A {:?} for {n_subsystems} subsystems", self.party_a));
        }
        let b: Vec<usize> = (0..n_subsystems).filter(|s| !a.contains(s)).collect();
        if b.is_empty() {
            return arg("party B is empty");
        }
        Ok(b)
    }
}

impl Default for Bipartition {
    fn default() -> Self {
        Self::first_vs_rest()
    }
}

pub fn c_l1(rho: &DensityMatrix) -> f64 {
    rho.matrix().offdiagonal_l1()
}

/// S(Δρ) − S(ρ) in bits.
pub fn c_rel_ent(rho: &DensityMatrix) -> f64 {
    let diag: Vec<f64> = rho.matrix().diagonal().iter().map(|z| z.re).collect();
    (spectrum_entropy(&diag) - von_neumann_entropy(rho)).max(0.0)
}

pub fn c_tr(rho: &DensityMatrix) -> SolverReport {
    c_tr_with(rho, &CtrOptions::default())
}

/// (‖ρ^{T_B}‖₁ − 1)/2.
pub fn negativity(rho: &DensityMatrix, cut: &Bipartition) -> Result<f64> {
    let b = cut.party_b(rho.dims().len())?;
    let pt = partial_transpose_set(rho, &b)?;
    Ok(((trace_norm(&pt)? - 1.0) / 2.0).max(0.0))
}

fn require_two_qubits(rho: &DensityMatrix) -> Result<()> {
    if rho.dims() != [2, 2] {
        return Err(Error::Capability {
            measure: MeasureId::Eof2q.as_str().into(),
            reason: format!("needs dims [2, 2], got {:?}", rho.dims()),
        });
    }
    Ok(())
}

/// Eigenvalues below this are treated as exact zeros of ρ.
const CONCURRENCE_EIG_FLOOR: f64 = 1e-14;

/// Concurrence from the singular values of τ_ij = v_iᵀ (σy⊗σy) v_j, where
/// ρ = Σ v_i v_i† is the spectral decomposition. Avoids square roots of
/// near-zero eigenvalues, which would cost half the digits on pure states.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    require_two_qubits(rho)?;
    let e = eigh(rho.matrix())?;
    let vs: Vec<Vec<C64>> = e
        .values
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > CONCURRENCE_EIG_FLOOR)
        .map(|(k, &l)| (0..4).map(|r| e.vectors[(r, k)] * l.sqrt()).collect())
        .collect();
    let k = vs.len();
    // σy⊗σy is real and antidiagonal with signs (−1, 1, 1, −1)
    let sign = [-1.0, 1.0, 1.0, -1.0];
    let tau = |i: usize, j: usize| -> C64 { (0..4).map(|r| vs[i][r] * vs[j][3 - r] * sign[r]).sum() };
    let mut dil = ComplexMatrix::zeros(2 * k, 2 * k);
    for i in 0..k {
        for j in 0..k {
            let t = tau(i, j);
            dil[(i, k + j)] = t;
            dil[(k + j, i)] = t.conj();
        }
    }
    let mut l: Vec<f64> = eigvalsh(&dil)?.into_iter().take(k).map(|x| x.max(0.0)).collect();
    l.resize(4, 0.0);
    Ok((l[0] - l[1] - l[2] - l[3]).max(0.0))
}

fn binary_entropy(x: f64) -> f64 {
    spectrum_entropy(&[x, 1.0 - x])
}

/// Entanglement of formation of a two-qubit state, in bits.
pub fn eof_2q(rho: &DensityMatrix) -> Result<f64> {
    let c = concurrence(rho)?.min(1.0);
    Ok(binary_entropy((1.0 + (1.0 - c * c).max(0.0).sqrt()) / 2.0))
}

#[derive(Clone, Debug, Default)]
pub struct EvalOptions {
    pub ctr: CtrOptions,
    pub cut: Option<Bipartition>,
}

pub fn evaluate(desc: &MeasureDescriptor, rho: &DensityMatrix) -> Result<SolverReport> {
    evaluate_with(desc, rho, &EvalOptions::default())
}

pub fn evaluate_with(desc: &MeasureDescriptor, rho: &DensityMatrix, opts: &EvalOptions) -> Result<SolverReport> {
    desc.check_supports(rho.dims())?;
    Ok(match desc.id {
        MeasureId::CL1 => SolverReport::exact(c_l1(rho)),
        MeasureId::CRelEnt => SolverReport::exact(c_rel_ent(rho)),
        MeasureId::CTr => c_tr_with(rho, &opts.ctr),
        MeasureId::Negativity => {
            let cut = opts.cut.clone().unwrap_or_default();
            SolverReport::exact(negativity(rho, &cut)?)
        }
        MeasureId::Eof2q => SolverReport::exact(eof_2q(rho)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ZERO;
    use crate::rng::stream;
    use crate::state::{random_density, random_density_with_dims, random_pure, tensor, PureState};

    fn plus() -> DensityMatrix {
        let s = 1.0 / 2f64.sqrt();
        PureState::new(vec![C64::new(s, 0.0); 2], vec![2]).unwrap().projector()
    }

    fn bell() -> DensityMatrix {
        let s = 1.0 / 2f64.sqrt();
        let z = ZERO;
        PureState::new(vec![C64::new(s, 0.0), z, z, C64::new(s, 0.0)], vec![2, 2])
            .unwrap()
            .projector()
    }

    #[test]
    fn ids_round_trip() {
        for m in MeasureId::ALL {
            assert_eq!(m.as_str().parse::<MeasureId>().unwrap(), m);
        }
        assert!("c_l2".parse::<MeasureId>().is_err());
        let eof = MeasureDescriptor::of(MeasureId::Eof2q);
        assert!(!eof.supports_flagged_eval);
        assert_eq!(eof.max_dim, 4);
    }

    #[test]
    fn c_l1_examples() {
        assert!((c_l1(&plus()) - 1.0).abs() < 1e-15);
        for d in 2..7 {
            let amp = vec![C64::new(1.0 / (d as f64).sqrt(), 0.0); d];
            let rho = PureState::new(amp, vec![d]).unwrap().projector();
            assert!((c_l1(&rho) - (d - 1) as f64).abs() < 1e-13);
        }
        let mut rng = stream(1, 0);
        let rho = random_density(3, 3, &mut rng).unwrap();
        let mut brute = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    brute += rho.matrix()[(i, j)].norm();
                }
            }
        }
        assert!((c_l1(&rho) - brute).abs() < 1e-15);
    }

    fn eig2(a: f64, b: f64, off: f64) -> [f64; 2] {
        let m = (a + b) / 2.0;
        let r = (((a - b) / 2.0).powi(2) + off * off).sqrt();
        [m + r, m - r]
    }

    fn h(ps: &[f64]) -> f64 {
        ps.iter().filter(|&&p| p > 0.0).map(|p| -p * p.log2()).sum()
    }

    #[test]
    fn c_rel_ent_examples() {
        assert!((c_rel_ent(&plus()) - 1.0).abs() < 1e-12);
        assert!(c_rel_ent(&DensityMatrix::maximally_mixed(vec![3])) < 1e-15);
        let zero = DensityMatrix::basis_state(2, 0).unwrap();
        let rho = DensityMatrix::mixture(&[0.5, 0.5], &[plus(), zero]).unwrap();
        // ρ = [[3/4, 1/4], [1/4, 1/4]]
        let expected = h(&[0.75, 0.25]) - h(&eig2(0.75, 0.25, 0.25));
        assert!((c_rel_ent(&rho) - expected).abs() < 1e-12);
    }

    #[test]
    fn negativity_examples() {
        let b = bell();
        assert!((negativity(&b, &Bipartition::default()).unwrap() - 0.5).abs() < 1e-12);
        let mut rng = stream(2, 0);
        for _ in 0..20 {
            let a = random_density(2, 2, &mut rng).unwrap();
            let c = random_density(3, 3, &mut rng).unwrap();
            let prod = tensor(&a, &c).unwrap();
            assert!(negativity(&prod, &Bipartition::default()).unwrap() < 1e-12);
        }
        for seed in 0..100 {
            let mut rng = stream(3, seed);
            let rho = random_density_with_dims(vec![2, 2], 4, &mut rng).unwrap();
            let flag = DensityMatrix::basis_state(3, (seed % 3) as usize).unwrap();
            let fl = tensor(&rho, &flag).unwrap();
            let cut = Bipartition::default();
            let diff = negativity(&fl, &cut).unwrap() - negativity(&rho, &cut).unwrap();
            assert!(diff.abs() < 1e-12);
        }
        assert!(negativity(&DensityMatrix::maximally_mixed(vec![4]), &Bipartition::default()).is_err());
        assert!(negativity(&b, &Bipartition { party_a: vec![0, 1] }).is_err());
    }

    #[test]
    fn eof_examples() {
        assert!((eof_2q(&bell()).unwrap() - 1.0).abs() < 1e-12);
        let mut rng = stream(4, 0);
        let prod = random_pure(vec![2], &mut rng).tensor(&random_pure(vec![2], &mut rng));
        let prod = prod.projector().with_dims(vec![2, 2]).unwrap();
        assert!(eof_2q(&prod).unwrap() < 1e-6);
        let werner = DensityMatrix::mixture(&[0.9, 0.1], &[bell(), DensityMatrix::maximally_mixed(vec![2, 2])]).unwrap();
        let c = (3.0 * 0.9 - 1.0) / 2.0;
        assert!((concurrence(&werner).unwrap() - c).abs() < 1e-10);
        let x = (1.0 + (1.0 - c * c).sqrt()) / 2.0;
        assert!((eof_2q(&werner).unwrap() - h(&[x, 1.0 - x])).abs() < 1e-10);
        let wrong = DensityMatrix::maximally_mixed(vec![4]);
        assert!(matches!(eof_2q(&wrong), Err(Error::Capability { .. })));
    }

    #[test]
    fn evaluate_dispatch_and_capability() {
        let inc = DensityMatrix::from_diagonal(&[0.2, 0.3, 0.5], vec![3]).unwrap();
        let d = MeasureDescriptor::of(MeasureId::CL1);
        assert_eq!(evaluate(&d, &inc).unwrap().value, 0.0);
        let flagged = tensor(&bell(), &DensityMatrix::basis_state(2, 0).unwrap()).unwrap();
        let eof = MeasureDescriptor::of(MeasureId::Eof2q);
        assert!(matches!(evaluate(&eof, &flagged), Err(Error::Capability { .. })));
        let big = DensityMatrix::maximally_mixed(vec![17]);
        let ctr = MeasureDescriptor::of(MeasureId::CTr);
        assert!(matches!(evaluate(&ctr, &big), Err(Error::Capability { .. })));
    }
}
