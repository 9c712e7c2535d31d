//! Flag bases, flagged states, the two-branch ω mixture, symmetrised tensor
//! products and the typical-part decomposition of a two-flag state's N-fold power.

use crate::channel::Ensemble;
use crate::error::{arg, Error, Result};
use crate::linalg::{kron_accumulate, ComplexMatrix, C64, ONE};
use crate::state::{check_cap, tensor, tensor_power, DensityMatrix, PureState};
use crate::Theory;

const ORTHONORMAL_TOL: f64 = 1e-12;
const FREE_ENTRY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct FlagBasis {
    vectors: Vec<PureState>,
    theory: Theory,
}

impl FlagBasis {
    /// Validated construction.
    pub fn new(vectors: Vec<PureState>, theory: Theory) -> Result<Self> {
        let basis = Self { vectors, theory };
        if !validate_flag_basis(&basis) {
            return arg("vectors do not form a flag basis");
        }
        Ok(basis)
    }

    /// Wrap vectors without checking; use [`validate_flag_basis`] before relying on it.
    pub fn unchecked(vectors: Vec<PureState>, theory: Theory) -> Self {
        Self { vectors, theory }
    }

    /// The first `count` computational basis vectors of a register of dimension `dim`.
    pub fn computational(dim: usize, count: usize, theory: Theory) -> Result<Self> {
        Self::product(&[dim], count, theory)
    }

    /// The first `count` product computational basis vectors on a register with
    /// the given subsystem dims.
    pub fn product(dims: &[usize], count: usize, theory: Theory) -> Result<Self> {
        let total: usize = dims.iter().product();
        if count == 0 || count > total {
            return arg(format!("{count} flags do not fit a register of dimension {total}"));
        }
        let vectors = (0..count)
            .map(|k| {
                let mut v = PureState::basis(total, k).expect("index in range");
                if dims.len() > 1 {
                    v = PureState::new(v.amplitudes().to_vec(), dims.to_vec()).expect("unit vector");
                }
                v
            })
            .collect();
        Ok(Self { vectors, theory })
    }

    pub fn vectors(&self) -> &[PureState] {
        &self.vectors
    }

    pub fn theory(&self) -> Theory {
        self.theory
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn register_dims(&self) -> &[usize] {
        self.vectors.first().map(|v| v.dims()).unwrap_or(&[])
    }

    pub fn register_dim(&self) -> usize {
        self.vectors.first().map(|v| v.dim()).unwrap_or(0)
    }

    pub fn projector(&self, i: usize) -> DensityMatrix {
        self.vectors[i].projector()
    }
}

/// Computational basis vector up to a global phase. For a register with
/// several subsystems this is exactly a product of computational basis vectors.
fn is_free_vector(v: &PureState) -> bool {
    v.amplitudes().iter().filter(|z| z.norm() > FREE_ENTRY_TOL).count() == 1
}

/// Default flags with `n` outcomes: computational for coherence; for
/// entanglement a product [2, 2] register when `n <= 4`, else a single register.
pub fn default_flag_basis(theory: Theory, n: usize) -> Result<FlagBasis> {
    match theory {
        Theory::Entanglement if n <= 4 => FlagBasis::product(&[2, 2], n, theory),
        _ => FlagBasis::computational(n, n, theory),
    }
}

/// Orthonormality plus freeness of every vector; for coherence this also
/// certifies that each projector |φ_i⟩⟨φ_i| has a single nonzero entry, so the
/// projective measurement is incoherent.
pub fn validate_flag_basis(basis: &FlagBasis) -> bool {
    let v = &basis.vectors;
    if v.is_empty() {
        return false;
    }
    let dims = v[0].dims();
    if v.iter().any(|x| x.dims() != dims) || v.len() > v[0].dim() {
        return false;
    }
    for i in 0..v.len() {
        for j in i..v.len() {
            let ip = v[i].inner(&v[j]);
            let expected = if i == j { 1.0 } else { 0.0 };
            if (ip - C64::new(expected, 0.0)).norm() > ORTHONORMAL_TOL {
                return false;
            }
        }
    }
    v.iter().all(is_free_vector)
}

/// {φ_i ⊗ ψ_j} with i major.
pub fn tensor_flag_basis(a: &FlagBasis, b: &FlagBasis) -> Result<FlagBasis> {
    if a.theory != b.theory {
        return arg("flag bases belong to different theories");
    }
    let vectors = a
        .vectors
        .iter()
        .flat_map(|x| b.vectors.iter().map(move |y| x.tensor(y)))
        .collect();
    Ok(FlagBasis { vectors, theory: a.theory })
}

/// Σ p_i ρ_i ⊗ |φ_i⟩⟨φ_i| with the flag register appended on the right.
pub fn flagged_state(ens: &Ensemble, basis: &FlagBasis) -> Result<DensityMatrix> {
    if ens.len() != basis.len() {
        return arg(format!(
            "ensemble has {} members but the flag basis has {} vectors",
            ens.len(),
            basis.len()
        ));
    }
    if !validate_flag_basis(basis) {
        return arg("invalid flag basis");
    }
    let sys_dims = ens.states()[0].dims().to_vec();
    let d = ens.states()[0].dim() * basis.register_dim();
    check_cap(d)?;
    let mut acc = ComplexMatrix::zeros(d, d);
    for ((p, rho), phi) in ens.weights().iter().zip(ens.states()).zip(basis.vectors()) {
        let proj = ComplexMatrix::outer(phi.amplitudes(), phi.amplitudes());
        kron_accumulate(&mut acc, &[rho.matrix(), &proj], C64::new(*p, 0.0));
    }
    let mut dims = sys_dims;
    dims.extend_from_slice(basis.register_dims());
    Ok(DensityMatrix::from_trusted(acc, dims))
}

/// ω = ½ρ⊗|φ₁⟩⟨φ₁| + ½σ⊗|φ₂⟩⟨φ₂|.
pub fn omega(rho: &DensityMatrix, sigma: &DensityMatrix, basis: &FlagBasis) -> Result<DensityMatrix> {
    if basis.len() != 2 {
        return arg("omega needs a two-element flag basis");
    }
    if rho.dims() != sigma.dims() {
        return arg("omega needs states on the same space");
    }
    let ens = Ensemble::new(vec![0.5, 0.5], vec![rho.clone(), sigma.clone()])?;
    flagged_state(&ens, basis)
}

/// Every distinct arrangement of a multiset given by multiplicities, in
/// lexicographic order of factor indices.
pub fn arrangements(multiplicities: &[usize]) -> Vec<Vec<usize>> {
    let n: usize = multiplicities.iter().sum();
    let mut out = Vec::new();
    let mut left = multiplicities.to_vec();
    let mut cur = Vec::with_capacity(n);
    fn rec(left: &mut [usize], cur: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for f in 0..left.len() {
            if left[f] > 0 {
                left[f] -= 1;
                cur.push(f);
                rec(left, cur, n, out);
                cur.pop();
                left[f] += 1;
            }
        }
    }
    rec(&mut left, &mut cur, n, &mut out);
    out
}

fn accumulate_symmetrized(
    target: &mut ComplexMatrix,
    mats: &[&ComplexMatrix],
    multiplicities: &[usize],
    weight: C64,
) {
    for arr in arrangements(multiplicities) {
        let factors: Vec<&ComplexMatrix> = arr.iter().map(|&f| mats[f]).collect();
        kron_accumulate(target, &factors, weight);
    }
}

/// Sum over all distinct orderings of the multiset {factor_i with multiplicity m_i}.
pub fn symmetrized_tensor(factors: &[(&DensityMatrix, usize)]) -> Result<ComplexMatrix> {
    if factors.is_empty() || factors.iter().all(|(_, m)| *m == 0) {
        return arg("symmetrized tensor of an empty multiset");
    }
    let d: usize = factors.iter().map(|(f, m)| f.dim().pow(*m as u32)).product();
    let mut log_d = 0.0;
    for (f, m) in factors {
        log_d += (*m as f64) * (f.dim() as f64).ln();
    }
    if log_d > (crate::state::dim_cap() as f64).ln() + 1e-9 {
        return Err(Error::Capacity { requested: d, cap: crate::state::dim_cap() });
    }
    check_cap(d)?;
    let mats: Vec<&ComplexMatrix> = factors.iter().map(|(f, _)| f.matrix()).collect();
    let mults: Vec<usize> = factors.iter().map(|(_, m)| *m).collect();
    let mut acc = ComplexMatrix::zeros(d, d);
    accumulate_symmetrized(&mut acc, &mats, &mults, ONE);
    Ok(acc)
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Values within this distance of an integer are snapped before floor/ceil,
/// so that e.g. 0.1·10 counts as exactly 1.
const INTEGER_SNAP: f64 = 1e-9;

fn snap(x: f64) -> f64 {
    if (x - x.round()).abs() < INTEGER_SNAP {
        x.round()
    } else {
        x
    }
}

pub fn snapped_floor(x: f64) -> i64 {
    snap(x).floor() as i64
}

pub fn snapped_ceil(x: f64) -> i64 {
    snap(x).ceil() as i64
}

/// [⌊Np(1−δ)⌋, ⌈Np(1+δ)⌉] clipped to [0, N].
pub fn typical_range(n: usize, p: f64, delta_typ: f64) -> (usize, usize) {
    let nf = n as f64;
    let lo = snapped_floor(nf * p * (1.0 - delta_typ)).clamp(0, n as i64) as usize;
    let hi = snapped_ceil(nf * p * (1.0 + delta_typ)).clamp(0, n as i64) as usize;
    (lo, hi)
}

#[derive(Clone, Debug)]
pub struct TypicalDecomposition {
    pub rho_typ: DensityMatrix,
    pub epsilon: f64,
    pub weight_t: f64,
    /// Inclusive range of ρ̃₁ counts kept in the typical part.
    pub k_range: (usize, usize),
    pub n: usize,
    pub delta_typ: f64,
    pub p1: f64,
    /// ρ̃_i = ρ_i ⊗ |φ_i⟩⟨φ_i|.
    pub tilde: [DensityMatrix; 2],
}

impl TypicalDecomposition {
    pub fn p2(&self) -> f64 {
        1.0 - self.p1
    }

    /// p₁^k p₂^{N−k}, the weight of one arrangement with k copies of ρ̃₁.
    pub fn arrangement_weight(&self, k: usize) -> f64 {
        self.p1.powi(k as i32) * self.p2().powi((self.n - k) as i32)
    }

    /// The two-flag state p₁ρ̃₁ + p₂ρ̃₂.
    pub fn single_copy(&self) -> DensityMatrix {
        DensityMatrix::mixture(&[self.p1, self.p2()], &self.tilde).expect("same dims")
    }

    /// (ρ^⊗N − (1−ε)ρ_typ)/ε, defined only when ε > 1e-12.
    pub fn atypical_part(&self) -> Result<Option<DensityMatrix>> {
        if self.epsilon <= 1e-12 {
            return Ok(None);
        }
        let full = tensor_power(&self.single_copy(), self.n)?;
        let mut m = full.into_matrix();
        m.add_scaled(self.rho_typ.matrix(), C64::new(-(1.0 - self.epsilon), 0.0));
        let m = m.scale_real(1.0 / self.epsilon);
        Ok(Some(DensityMatrix::from_trusted(m, self.rho_typ.dims().to_vec())))
    }

    /// max entry of (1−ε)ρ_typ + Σ_{k∉range} p₁^k p₂^{N−k} S_k − ρ^⊗N, where
    /// the atypical sum and the plain tensor power are built independently of ρ_typ.
    pub fn reconstruction_residual(&self) -> Result<f64> {
        let full = tensor_power(&self.single_copy(), self.n)?;
        let mut m = self.rho_typ.matrix().scale_real(1.0 - self.epsilon);
        let mats = [self.tilde[0].matrix(), self.tilde[1].matrix()];
        for k in (0..=self.n).filter(|k| *k < self.k_range.0 || *k > self.k_range.1) {
            let w = self.arrangement_weight(k);
            accumulate_symmetrized(&mut m, &mats, &[k, self.n - k], C64::new(w, 0.0));
        }
        Ok(m.max_abs_diff(full.matrix()))
    }
}

/// Typical part of (p₁ρ₁⊗|φ₁⟩⟨φ₁| + p₂ρ₂⊗|φ₂⟩⟨φ₂|)^⊗N.
///
/// ρ_typ = (1/T) Σ_{k∈range} p₁^k p₂^{N−k} S((ρ̃₁)^⊗k ⊗ (ρ̃₂)^⊗(N−k)), with
/// T = Σ_{k∈range} C(N,k) p₁^k p₂^{N−k} and ε = 1 − T.
pub fn typical_decomposition(
    rho1: &DensityMatrix,
    rho2: &DensityMatrix,
    p1: f64,
    basis: &FlagBasis,
    n: usize,
    delta_typ: f64,
) -> Result<TypicalDecomposition> {
    if !(0.0..=0.5).contains(&p1) {
        return arg(format!("p1 = {p1} must lie in [0, 1/2]"));
    }
    if !(delta_typ >= 0.0) || n == 0 {
        return arg("typical decomposition needs N >= 1 and delta_typ >= 0");
    }
    if basis.len() != 2 || !validate_flag_basis(basis) {
        return arg("typical decomposition needs a valid two-element flag basis");
    }
    if rho1.dims() != rho2.dims() {
        return arg("rho1 and rho2 must live on the same space");
    }
    let single = rho1.dim() * basis.register_dim();
    let log_total = n as f64 * (single as f64).ln();
    if log_total > (crate::state::dim_cap() as f64).ln() + 1e-9 {
        return Err(Error::Capacity {
            requested: single.saturating_pow(n as u32),
            cap: crate::state::dim_cap(),
        });
    }
    let total = single.pow(n as u32);
    check_cap(total)?;
    let (lo, hi) = typical_range(n, p1, delta_typ);
    if lo > hi {
        return Err(Error::Degenerate(format!("empty typical range [{lo}, {hi}]")));
    }
    let p2 = 1.0 - p1;
    let tilde = [
        tensor(rho1, &basis.projector(0))?,
        tensor(rho2, &basis.projector(1))?,
    ];
    let weight_t: f64 = (lo..=hi)
        .map(|k| binomial(n, k) * p1.powi(k as i32) * p2.powi((n - k) as i32))
        .sum();
    if weight_t <= 0.0 {
        return Err(Error::Degenerate("typical range carries no probability".into()));
    }
    let mats = [tilde[0].matrix(), tilde[1].matrix()];
    let mut acc = ComplexMatrix::zeros(total, total);
    for k in lo..=hi {
        let w = p1.powi(k as i32) * p2.powi((n - k) as i32) / weight_t;
        accumulate_symmetrized(&mut acc, &mats, &[k, n - k], C64::new(w, 0.0));
    }
    let dims: Vec<usize> = (0..n).flat_map(|_| tilde[0].dims().to_vec()).collect();
    Ok(TypicalDecomposition {
        rho_typ: DensityMatrix::from_trusted(acc, dims),
        epsilon: 1.0 - weight_t,
        weight_t,
        k_range: (lo, hi),
        n,
        delta_typ,
        p1,
        tilde,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{selective_apply, KrausChannel};
    use crate::linalg::ZERO;
    use crate::rng::stream;
    use crate::state::{partial_trace, random_density};
    use rand::Rng;

    fn qubit_basis() -> FlagBasis {
        FlagBasis::computational(2, 2, Theory::Coherence).unwrap()
    }

    #[test]
    fn computational_basis_is_a_flag_basis() {
        for n in 1..6 {
            assert!(validate_flag_basis(&FlagBasis::computational(n, n, Theory::Coherence).unwrap()));
        }
        let s = 1.0 / 2f64.sqrt();
        let plus = PureState::new(vec![C64::new(s, 0.0), C64::new(s, 0.0)], vec![2]).unwrap();
        let minus = PureState::new(vec![C64::new(s, 0.0), C64::new(-s, 0.0)], vec![2]).unwrap();
        assert!(!validate_flag_basis(&FlagBasis::unchecked(vec![plus, minus], Theory::Coherence)));
        let phase = PureState::new(vec![ZERO, C64::from_polar(1.0, 0.7)], vec![2]).unwrap();
        let zero = PureState::basis(2, 0).unwrap();
        assert!(validate_flag_basis(&FlagBasis::unchecked(vec![zero.clone(), phase], Theory::Coherence)));
        assert!(!validate_flag_basis(&FlagBasis::unchecked(vec![zero.clone(), zero], Theory::Coherence)));
    }

    #[test]
    fn tensor_of_flag_bases_is_a_flag_basis() {
        for seed in 0..100 {
            let mut rng = stream(1, seed);
            let (da, db) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
            let a = FlagBasis::computational(da, rng.gen_range(1..=da), Theory::Entanglement).unwrap();
            let b = FlagBasis::computational(db, rng.gen_range(1..=db), Theory::Entanglement).unwrap();
            let ab = tensor_flag_basis(&a, &b).unwrap();
            assert_eq!(ab.len(), a.len() * b.len());
            assert!(validate_flag_basis(&ab));
        }
    }

    #[test]
    fn single_member_flagged_state() {
        let mut rng = stream(2, 0);
        let rho = random_density(3, 2, &mut rng).unwrap();
        let basis = FlagBasis::computational(2, 1, Theory::Coherence).unwrap();
        let f = flagged_state(&Ensemble::single(rho.clone()), &basis).unwrap();
        let expected = tensor(&rho, &basis.projector(0)).unwrap();
        assert!(f.matrix().max_abs_diff(expected.matrix()) < 1e-15);
    }

    fn random_ensemble(rng: &mut crate::rng::Stream, d: usize, n: usize) -> Ensemble {
        let w = crate::rng::simplex_point(rng, n);
        let states = (0..n)
            .map(|_| random_density(d, rng.gen_range(1..=d), rng).unwrap())
            .collect();
        Ensemble::new(w, states).unwrap()
    }

    #[test]
    fn flag_trace_recovers_average_and_blocks_are_separate() {
        let mut rng = stream(3, 0);
        let ens = random_ensemble(&mut rng, 3, 3);
        let basis = FlagBasis::computational(3, 3, Theory::Coherence).unwrap();
        let f = flagged_state(&ens, &basis).unwrap();
        let red = partial_trace(&f, &[0]).unwrap();
        assert!(red.matrix().max_abs_diff(ens.average().matrix()) < 1e-15);
        let m = f.matrix();
        for r in 0..9 {
            for c in 0..9 {
                if r % 3 != c % 3 {
                    assert!(m[(r, c)].norm() <= 1e-14);
                }
            }
        }
    }

    #[test]
    fn measuring_the_flag_recovers_the_ensemble() {
        let mut rng = stream(4, 0);
        let ens = random_ensemble(&mut rng, 2, 3);
        let basis = FlagBasis::computational(3, 3, Theory::Coherence).unwrap();
        let f = flagged_state(&ens, &basis).unwrap();
        let meas = KrausChannel::register_measurement(&[2], basis.vectors()).unwrap();
        let out = selective_apply(&meas, &f).unwrap();
        for i in 0..3 {
            assert!((out.ensemble.weights()[i] - ens.weights()[i]).abs() <= 1e-12);
            let expected = tensor(&ens.states()[i], &basis.projector(i)).unwrap();
            assert!(out.ensemble.states()[i].matrix().max_abs_diff(expected.matrix()) <= 1e-12);
        }
    }

    #[test]
    fn flagged_state_length_mismatch() {
        let mut rng = stream(5, 0);
        let ens = random_ensemble(&mut rng, 2, 2);
        let basis = FlagBasis::computational(3, 3, Theory::Coherence).unwrap();
        assert!(flagged_state(&ens, &basis).is_err());
    }

    #[test]
    fn omega_marginal_and_square_expansion() {
        let mut rng = stream(6, 0);
        let rho = random_density(2, 2, &mut rng).unwrap();
        let sigma = random_density(2, 2, &mut rng).unwrap();
        let basis = qubit_basis();
        let same = omega(&rho, &rho, &basis).unwrap();
        assert!(partial_trace(&same, &[0]).unwrap().matrix().max_abs_diff(rho.matrix()) < 1e-15);
        // ω⊗ω against the explicit four-term mixture
        let w = omega(&rho, &sigma, &basis).unwrap();
        let ww = tensor(&w, &w).unwrap();
        let states = [&rho, &sigma];
        let mut four = ComplexMatrix::zeros(16, 16);
        for i in 0..2 {
            for j in 0..2 {
                let term = states[i]
                    .matrix()
                    .kron(basis.projector(i).matrix())
                    .kron(states[j].matrix())
                    .kron(basis.projector(j).matrix());
                four.add_scaled(&term, C64::new(0.25, 0.0));
            }
        }
        assert!(ww.matrix().max_abs_diff(&four) <= 1e-12);
        assert!(omega(&rho, &random_density(3, 1, &mut rng).unwrap(), &basis).is_err());
    }

    #[test]
    fn symmetrized_single_factor_is_tensor_power() {
        let mut rng = stream(7, 0);
        let rho = random_density(2, 2, &mut rng).unwrap();
        let s = symmetrized_tensor(&[(&rho, 3)]).unwrap();
        assert!(s.max_abs_diff(tensor_power(&rho, 3).unwrap().matrix()) < 1e-15);
    }

    #[test]
    fn symmetrized_two_one_has_three_terms() {
        let mut rng = stream(8, 0);
        let a = random_density(2, 2, &mut rng).unwrap();
        let b = random_density(2, 2, &mut rng).unwrap();
        assert_eq!(arrangements(&[2, 1]), vec![vec![0, 0, 1], vec![0, 1, 0], vec![1, 0, 0]]);
        let s = symmetrized_tensor(&[(&a, 2), (&b, 1)]).unwrap();
        let (am, bm) = (a.matrix(), b.matrix());
        let expected = &(&am.kron(am).kron(bm) + &am.kron(bm).kron(am)) + &bm.kron(am).kron(am);
        assert!(s.max_abs_diff(&expected) < 1e-15);
        // Tr = 3 Tr(a)^2 Tr(b)
        assert!((s.trace().re - 3.0).abs() < 1e-14);
    }

    #[test]
    fn symmetrized_two_two_matches_bitstring_enumeration() {
        let mut rng = stream(9, 0);
        let a = random_density(2, 2, &mut rng).unwrap();
        let b = random_density(2, 1, &mut rng).unwrap();
        let s = symmetrized_tensor(&[(&a, 2), (&b, 2)]).unwrap();
        let mut oracle = ComplexMatrix::zeros(16, 16);
        let mut terms = 0;
        for bits in 0u32..16 {
            if bits.count_ones() != 2 {
                continue;
            }
            terms += 1;
            let mut m = ComplexMatrix::identity(1);
            for pos in (0..4).rev() {
                let f = if bits >> pos & 1 == 1 { b.matrix() } else { a.matrix() };
                m = m.kron(f);
            }
            oracle.add_scaled(&m, ONE);
        }
        assert_eq!(terms, 6);
        assert!(s.max_abs_diff(&oracle) < 1e-14);
    }

    #[test]
    fn symmetrized_capacity_error() {
        let big = DensityMatrix::maximally_mixed(vec![8]);
        assert!(matches!(
            symmetrized_tensor(&[(&big, 5)]),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn full_range_has_no_tail() {
        let mut rng = stream(10, 0);
        let r1 = random_density(2, 2, &mut rng).unwrap();
        let r2 = random_density(2, 2, &mut rng).unwrap();
        let t = typical_decomposition(&r1, &r2, 0.4, &qubit_basis(), 3, 10.0).unwrap();
        assert_eq!(t.k_range, (0, 3));
        assert!(t.epsilon.abs() < 1e-15);
        let full = tensor_power(&t.single_copy(), 3).unwrap();
        assert!(t.rho_typ.matrix().max_abs_diff(full.matrix()) <= 1e-12);
        assert!(t.atypical_part().unwrap().is_none());
    }

    #[test]
    fn half_half_two_copies_zero_delta() {
        let mut rng = stream(11, 0);
        let r1 = random_density(2, 2, &mut rng).unwrap();
        let r2 = random_density(2, 2, &mut rng).unwrap();
        let t = typical_decomposition(&r1, &r2, 0.5, &qubit_basis(), 2, 0.0).unwrap();
        assert_eq!(t.k_range, (1, 1));
        assert!((t.weight_t - 0.5).abs() < 1e-15);
        assert!((t.epsilon - 0.5).abs() < 1e-15);
        let (a, b) = (t.tilde[0].matrix(), t.tilde[1].matrix());
        let expected = (&a.kron(b) + &b.kron(a)).scale_real(0.5);
        assert!(t.rho_typ.matrix().max_abs_diff(&expected) < 1e-15);
        t.rho_typ.validate().unwrap();
        let atyp = t.atypical_part().unwrap().unwrap();
        atyp.validate().unwrap();
        assert!(t.reconstruction_residual().unwrap() <= 1e-12);
    }

    #[test]
    fn typical_range_examples() {
        assert_eq!(typical_range(6, 0.3, 0.5), (0, 3));
        assert_eq!(typical_range(6, 0.3, 0.0), (1, 2));
        assert_eq!(typical_range(4, 0.5, 0.0), (2, 2));
        assert_eq!(typical_range(10, 0.1, 0.0), (1, 1));
    }

    #[test]
    fn typical_decomposition_argument_errors() {
        let r = DensityMatrix::maximally_mixed(vec![2]);
        assert!(typical_decomposition(&r, &r, 0.6, &qubit_basis(), 2, 0.1).is_err());
        let three = FlagBasis::computational(3, 3, Theory::Coherence).unwrap();
        assert!(typical_decomposition(&r, &r, 0.3, &three, 2, 0.1).is_err());
        assert!(matches!(
            typical_decomposition(&r, &r, 0.3, &qubit_basis(), 7, 0.1),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(4, 2), 6.0);
        assert_eq!(binomial(6, 0), 1.0);
        assert_eq!(binomial(3, 4), 0.0);
    }
}
