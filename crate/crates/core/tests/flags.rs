use flagcheck_core::channel::{selective_apply, Ensemble, KrausChannel};
use flagcheck_core::flags::{
    flagged_state, omega, snapped_ceil, snapped_floor, typical_decomposition, typical_range, FlagBasis,
};
use flagcheck_core::instances::InstanceGen;
use flagcheck_core::linalg::{ComplexMatrix, C64};
use flagcheck_core::rng::stream;
use flagcheck_core::state::{tensor, tensor_all};
use flagcheck_core::Theory;
use statrs::distribution::{Binomial, DiscreteCDF};

const P1S: [f64; 6] = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5];
const DELTAS: [f64; 5] = [0.0, 0.1, 0.3, 0.5, 1.0];

/// Mass of Binomial(N, p) outside [lo, hi].
fn tail_oracle(n: usize, p: f64, lo: usize, hi: usize) -> f64 {
    let b = Binomial::new(p, n as u64).unwrap();
    let below = if lo == 0 { 0.0 } else { b.cdf(lo as u64 - 1) };
    below + (1.0 - b.cdf(hi as u64))
}

#[test]
fn n_minus_k_bound_chain() {
    for n in 1..=40 {
        for &p1 in &P1S {
            for &d in &DELTAS {
                let (lo, hi) = typical_range(n, p1, d);
                let p2 = 1.0 - p1;
                let floor2 = snapped_floor(n as f64 * p2 * (1.0 - d));
                let ceil2 = snapped_ceil(n as f64 * p2 * (1.0 + d));
                for k in lo..=hi {
                    let nk = (n - k) as i64;
                    assert!(floor2 <= nk && nk <= ceil2, "N={n} p1={p1} d={d} k={k}: {floor2} <= {nk} <= {ceil2}");
                }
            }
        }
    }
}

#[test]
fn epsilon_matches_binomial_cdf() {
    let gen = InstanceGen::new(Theory::Coherence, 2);
    let basis = FlagBasis::computational(2, 2, Theory::Coherence).unwrap();
    let mut rng = stream(5, 0);
    let (r1, r2) = (gen.state(&mut rng), gen.state(&mut rng));
    for &p1 in &[0.3, 0.5] {
        for n in 1..=5 {
            for &d in &[0.0, 0.3, 0.5] {
                let td = typical_decomposition(&r1, &r2, p1, &basis, n, d).unwrap();
                let oracle = tail_oracle(n, p1, td.k_range.0, td.k_range.1);
                assert!((td.epsilon - oracle).abs() <= 1e-12, "p1={p1} N={n} d={d}: {} vs {oracle}", td.epsilon);
                assert!((td.weight_t + td.epsilon - 1.0).abs() <= 1e-12);
                let res = td.reconstruction_residual().unwrap();
                assert!(res <= 1e-12, "reconstruction residual {res:e}");
                td.rho_typ.validate().unwrap();
            }
        }
    }
}

#[test]
fn worked_tail_example() {
    let basis = FlagBasis::computational(2, 2, Theory::Coherence).unwrap();
    let r = flagcheck_core::state::DensityMatrix::maximally_mixed(vec![2]);
    let td = typical_decomposition(&r, &r, 0.3, &basis, 6, 0.5).unwrap();
    assert_eq!(td.k_range, (0, 3));
    let b = Binomial::new(0.3, 6).unwrap();
    assert!((td.epsilon - (1.0 - b.cdf(3))).abs() <= 1e-12);
}

#[test]
fn atypical_part_is_a_state() {
    let gen = InstanceGen::new(Theory::Coherence, 2);
    let basis = FlagBasis::computational(2, 2, Theory::Coherence).unwrap();
    let mut rng = stream(8, 1);
    let (r1, r2) = (gen.state(&mut rng), gen.state(&mut rng));
    let td = typical_decomposition(&r1, &r2, 0.3, &basis, 4, 0.0).unwrap();
    let atyp = td.atypical_part().unwrap().expect("positive tail");
    atyp.validate().unwrap();
    let full = typical_decomposition(&r1, &r2, 0.3, &basis, 4, 10.0).unwrap();
    assert!(full.epsilon.abs() < 1e-15);
    assert!(full.atypical_part().unwrap().is_none());
}

#[test]
fn flag_measurement_recovers_the_ensemble() {
    for theory in [Theory::Coherence, Theory::Entanglement] {
        let gen = InstanceGen::new(theory, 2);
        for i in 0..20 {
            let mut rng = stream(3, i);
            let ens = gen.ensemble(&mut rng);
            let basis = gen.flag_basis(ens.len());
            let rho = flagged_state(&ens, &basis).unwrap();
            let system = ens.states()[0].dims().to_vec();
            let flags: Vec<_> = basis.vectors().iter().map(|v| v.projector()).collect();
            let da: usize = system.iter().product();
            let mut kraus: Vec<_> = flags.iter().map(|f| ComplexMatrix::identity(da).kron(f.matrix())).collect();
            let mut rest = ComplexMatrix::identity(rho.dim());
            for k in &kraus {
                rest.add_scaled(k, C64::new(-1.0, 0.0));
            }
            if rest.max_abs() > 0.0 {
                kraus.push(rest);
            }
            let dims = rho.dims().to_vec();
            let ch = KrausChannel::new(kraus, dims.clone(), dims).unwrap();
            let out = selective_apply(&ch, &rho).unwrap();
            assert_eq!(out.ensemble.len(), ens.len());
            for (j, (w, st)) in out.ensemble.weights().iter().zip(out.ensemble.states()).enumerate() {
                assert!((w - ens.weights()[j]).abs() <= 1e-12);
                let expect = tensor(&ens.states()[j], &flags[j]).unwrap();
                assert!(st.matrix().max_abs_diff(expect.matrix()) <= 1e-12);
            }
        }
    }
}

#[test]
fn omega_square_expands_entrywise() {
    let gen = InstanceGen::new(Theory::Coherence, 2);
    let basis = FlagBasis::computational(2, 2, Theory::Coherence).unwrap();
    let [p0, p1] = [basis.projector(0), basis.projector(1)];
    for i in 0..10 {
        let mut rng = stream(12, i);
        let (rho, sigma) = (gen.state(&mut rng), gen.state(&mut rng));
        let w = omega(&rho, &sigma, &basis).unwrap();
        let ww = tensor(&w, &w).unwrap();
        let terms = [
            tensor_all(&[&rho, &p0, &rho, &p0]).unwrap(),
            tensor_all(&[&rho, &p0, &sigma, &p1]).unwrap(),
            tensor_all(&[&sigma, &p1, &rho, &p0]).unwrap(),
            tensor_all(&[&sigma, &p1, &sigma, &p1]).unwrap(),
        ];
        let expansion = flagcheck_core::state::DensityMatrix::mixture(&[0.25; 4], &terms).unwrap();
        assert!(ww.matrix().max_abs_diff(expansion.matrix()) <= 1e-12);
    }
}

#[test]
fn single_member_flag_is_plain_tensor() {
    let gen = InstanceGen::new(Theory::Coherence, 3);
    let rho = gen.state(&mut stream(1, 1));
    let basis = FlagBasis::computational(3, 1, Theory::Coherence).unwrap();
    let f = flagged_state(&Ensemble::single(rho.clone()), &basis).unwrap();
    let expect = tensor(&rho, &basis.projector(0)).unwrap();
    assert!(f.matrix().max_abs_diff(expect.matrix()) == 0.0);
}
