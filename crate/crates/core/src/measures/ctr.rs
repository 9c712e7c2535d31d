//! Trace-norm coherence: min over incoherent δ of ‖ρ − δ‖₁.
//!
//! f(q) = ‖ρ − diag(q)‖₁ on the probability simplex. A short projected
//! subgradient phase (Polyak steps) is followed by Newton steps on the smoothed
//! barrier objective Σ_k √(λ_k² + μ²) − τ Σ_i ln q_i, with μ = τ driven to zero.
//! Every iterate also yields a lower bound: for Hermitian W with ‖W‖ ≤ 1,
//! f(q) ≥ Re Tr(Wρ) − max_i W_ii for all q on the simplex.

use nalgebra::{DMatrix, DVector};

use super::SolverReport;
use crate::linalg::{eigh, ComplexMatrix, Eigh, C64};
use crate::rng::{simplex_point, stream};
use crate::state::DensityMatrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CtrOptions {
    /// Certified gap needed to report convergence.
    pub tol: f64,
    /// Total iteration budget across all restarts.
    pub max_iter: usize,
    pub restarts: usize,
}

impl Default for CtrOptions {
    fn default() -> Self {
        Self { tol: 1e-7, max_iter: 20_000, restarts: 5 }
    }
}

const SUBGRADIENT_STEPS: usize = 10;
const MU_START: f64 = 1e-3;
const MU_STOP: f64 = 1e-13;
const NEWTON_STEPS_PER_STAGE: usize = 40;
const FULL_STEP_DECREMENT: f64 = 1e-12;
const SIGN_CUTOFF: f64 = 1e-12;
/// Eigenvalues below this magnitude get their certificate weight optimised.
const FREE_CUTOFF: f64 = 1e-6;
const MAX_FREE: usize = 3;
const RESTART_SEED: u64 = 0x00c0_ffee;

struct Solver<'a> {
    rho: &'a ComplexMatrix,
    d: usize,
    /// Target gap; solving continues past `tol` down to this value.
    polish: f64,
    best_f: f64,
    best_q: Vec<f64>,
    best_lower: f64,
    iterations: usize,
    max_iter: usize,
}

/// Point evaluation: spectrum of ρ − diag(q) and the projections v_k†ρv_k.
struct Point {
    q: Vec<f64>,
    eig: Eigh,
    f: f64,
    /// |V_ik|²
    weights: Vec<f64>,
    /// Re v_k† ρ v_k
    rho_k: Vec<f64>,
}

impl<'a> Solver<'a> {
    fn point(&self, q: Vec<f64>) -> Point {
        let d = self.d;
        let mut a = self.rho.clone();
        for (i, qi) in q.iter().enumerate() {
            a[(i, i)] -= C64::new(*qi, 0.0);
        }
        a.hermitize();
        let eig = eigh(&a).expect("shifted state is Hermitian");
        let f = eig.values.iter().map(|x| x.abs()).sum();
        let v = &eig.vectors;
        let mut weights = vec![0.0; d * d];
        for i in 0..d {
            for k in 0..d {
                weights[i * d + k] = v[(i, k)].norm_sqr();
            }
        }
        let rho_k = (0..d)
            .map(|k| {
                let col: Vec<C64> = (0..d).map(|r| v[(r, k)]).collect();
                let rv = self.rho.mul_vec(&col);
                col.iter().zip(&rv).map(|(a, b)| (a.conj() * b).re).sum()
            })
            .collect();
        Point { q, eig, f, weights, rho_k }
    }

    /// Lower bound Re Tr(Wρ) − max_i W_ii for W = V diag(w) V†.
    fn lower_bound(&self, p: &Point, w: &[f64]) -> f64 {
        let d = self.d;
        let tr: f64 = w.iter().zip(&p.rho_k).map(|(a, b)| a * b).sum();
        let max_diag = (0..d)
            .map(|i| (0..d).map(|k| w[k] * p.weights[i * d + k]).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        tr - max_diag
    }

    fn record(&mut self, p: &Point, mu: f64) {
        if p.f < self.best_f {
            self.best_f = p.f;
            self.best_q = p.q.clone();
        }
        let sign: Vec<f64> = p
            .eig
            .values
            .iter()
            .map(|&x| if x.abs() <= SIGN_CUTOFF { 0.0 } else { x.signum() })
            .collect();
        let mut l = self.lower_bound(p, &sign);
        if mu > 0.0 {
            let smooth: Vec<f64> = p.eig.values.iter().map(|&x| x / (x * x + mu * mu).sqrt()).collect();
            l = l.max(self.lower_bound(p, &smooth));
        }
        self.best_lower = self.best_lower.max(l);
    }

    /// Lower bound with w = sign(λ) on well-separated eigenvalues and the
    /// weights of the (at most three) near-null eigenvectors chosen optimally.
    fn refine(&mut self, p: &Point) {
        let d = self.d;
        let mut order: Vec<usize> = (0..d).filter(|&k| p.eig.values[k].abs() <= FREE_CUTOFF).collect();
        if order.is_empty() {
            return;
        }
        order.sort_by(|&a, &b| p.eig.values[a].abs().total_cmp(&p.eig.values[b].abs()));
        order.truncate(MAX_FREE);
        let c: Vec<f64> = (0..d)
            .map(|i| {
                (0..d)
                    .filter(|k| !order.contains(k))
                    .map(|k| p.eig.values[k].signum() * (p.rho_k[k] - p.weights[i * d + k]))
                    .sum()
            })
            .collect();
        let b: Vec<Vec<f64>> = (0..d)
            .map(|i| order.iter().map(|&k| p.rho_k[k] - p.weights[i * d + k]).collect())
            .collect();
        self.best_lower = self.best_lower.max(max_min_affine(&c, &b));
    }

    fn gap(&self) -> f64 {
        (self.best_f - self.best_lower).max(0.0)
    }

    fn done(&self) -> bool {
        self.gap() <= self.polish || self.iterations >= self.max_iter
    }

    fn subgradient_phase(&mut self, q0: Vec<f64>) -> Vec<f64> {
        let d = self.d;
        let mut q = q0;
        for _ in 0..SUBGRADIENT_STEPS {
            if self.done() {
                break;
            }
            self.iterations += 1;
            let p = self.point(q.clone());
            self.record(&p, 0.0);
            let mut g: Vec<f64> = (0..d)
                .map(|i| {
                    -(0..d)
                        .map(|k| {
                            let x = p.eig.values[k];
                            let s = if x.abs() <= SIGN_CUTOFF { 0.0 } else { x.signum() };
                            s * p.weights[i * d + k]
                        })
                        .sum::<f64>()
                })
                .collect();
            let mean = g.iter().sum::<f64>() / d as f64;
            g.iter_mut().for_each(|x| *x -= mean);
            let norm2: f64 = g.iter().map(|x| x * x).sum();
            if norm2 < 1e-28 {
                break;
            }
            let step = (p.f - self.best_lower).max(0.0) / norm2;
            let moved: Vec<f64> = q.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            q = project_simplex(&moved);
        }
        self.best_q.clone()
    }

    /// Barrier objective, gradient and Hessian at a point.
    fn barrier(&self, p: &Point, mu: f64, tau: f64) -> (f64, Vec<f64>, DMatrix<f64>) {
        let d = self.d;
        let lam = &p.eig.values;
        let hv: f64 = lam.iter().map(|x| (x * x + mu * mu).sqrt()).sum();
        let phi = hv - tau * p.q.iter().map(|x| x.ln()).sum::<f64>();
        let d1: Vec<f64> = lam.iter().map(|x| x / (x * x + mu * mu).sqrt()).collect();
        let grad: Vec<f64> = (0..d)
            .map(|i| -(0..d).map(|k| d1[k] * p.weights[i * d + k]).sum::<f64>() - tau / p.q[i])
            .collect();
        let mut gamma = vec![0.0; d * d];
        for k in 0..d {
            for l in 0..d {
                let (a, b) = (lam[k], lam[l]);
                let scale = (a * a + mu * mu).sqrt().max((b * b + mu * mu).sqrt());
                gamma[k * d + l] = if (a - b).abs() <= 1e-6 * scale {
                    let m = 0.5 * (a + b);
                    mu * mu / (m * m + mu * mu).powf(1.5)
                } else {
                    (d1[k] - d1[l]) / (a - b)
                };
            }
        }
        // P_i[k,l] = conj(V_ik) V_il
        let v = &p.eig.vectors;
        let proj: Vec<Vec<C64>> = (0..d)
            .map(|i| {
                let mut m = vec![C64::new(0.0, 0.0); d * d];
                for k in 0..d {
                    let a = v[(i, k)].conj();
                    for l in 0..d {
                        m[k * d + l] = a * v[(i, l)];
                    }
                }
                m
            })
            .collect();
        let mut hess = DMatrix::<f64>::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let mut s = 0.0;
                for kl in 0..d * d {
                    s += gamma[kl] * (proj[i][kl] * proj[j][kl].conj()).re;
                }
                hess[(i, j)] = s;
                hess[(j, i)] = s;
            }
            hess[(i, i)] += tau / (p.q[i] * p.q[i]);
        }
        (phi, grad, hess)
    }

    fn newton_phase(&mut self, q0: Vec<f64>) {
        let d = self.d;
        let eta = 1e-2;
        let mut q: Vec<f64> = q0.iter().map(|x| (1.0 - eta) * x + eta / d as f64).collect();
        let mut mu = MU_START;
        let mut p = self.point(q.clone());
        while mu >= MU_STOP && !self.done() {
            let tau = mu;
            let mut prev_decrement = f64::INFINITY;
            for _ in 0..NEWTON_STEPS_PER_STAGE {
                if self.done() {
                    break;
                }
                self.iterations += 1;
                self.record(&p, mu);
                let (phi, grad, hess) = self.barrier(&p, mu, tau);
                let Some(delta) = kkt_step(&hess, &grad) else { break };
                let decrement: f64 = -grad.iter().zip(&delta).map(|(g, s)| g * s).sum::<f64>();
                if !(decrement > 0.0) || decrement < 1e-3 * mu * mu {
                    break;
                }
                let mut t = 1.0f64;
                for i in 0..d {
                    if delta[i] < 0.0 {
                        t = t.min(-0.99 * q[i] / delta[i]);
                    }
                }
                let np = if decrement < FULL_STEP_DECREMENT {
                    // function values no longer resolve the decrease; rely on
                    // quadratic convergence and stop once it stalls
                    if decrement > 0.25 * prev_decrement {
                        break;
                    }
                    let trial: Vec<f64> = q.iter().zip(&delta).map(|(a, b)| a + t * b).collect();
                    self.point(trial)
                } else {
                    let mut accepted = None;
                    for _ in 0..50 {
                        let trial: Vec<f64> = q.iter().zip(&delta).map(|(a, b)| a + t * b).collect();
                        if trial.iter().all(|&x| x > 0.0) {
                            let tp = self.point(trial);
                            let tphi = self.barrier_value(&tp, mu, tau);
                            if tphi <= phi - 0.25 * t * decrement {
                                accepted = Some(tp);
                                break;
                            }
                        }
                        t *= 0.5;
                    }
                    let Some(np) = accepted else { break };
                    np
                };
                prev_decrement = decrement;
                p = np;
                q = p.q.clone();
            }
            self.record(&p, mu);
            if !self.done() {
                self.refine(&p);
            }
            mu *= 0.1;
        }
    }

    fn barrier_value(&self, p: &Point, mu: f64, tau: f64) -> f64 {
        let hv: f64 = p.eig.values.iter().map(|x| (x * x + mu * mu).sqrt()).sum();
        hv - tau * p.q.iter().map(|x| x.ln()).sum::<f64>()
    }
}

/// Newton direction for min ½sᵀHs + gᵀs subject to Σ s = 0, from the bordered
/// system [H 1; 1ᵀ 0]. H is nearly singular along the all-ones direction, so
/// eliminating the multiplier separately would cancel catastrophically.
fn kkt_step(hess: &DMatrix<f64>, grad: &[f64]) -> Option<Vec<f64>> {
    let d = grad.len();
    let mut k = DMatrix::<f64>::zeros(d + 1, d + 1);
    let mut rhs = DVector::<f64>::zeros(d + 1);
    for i in 0..d {
        for j in 0..d {
            k[(i, j)] = hess[(i, j)];
        }
        k[(i, d)] = 1.0;
        k[(d, i)] = 1.0;
        rhs[i] = -grad[i];
    }
    let sol = k.lu().solve(&rhs)?;
    let s: Vec<f64> = (0..d).map(|i| sol[i]).collect();
    s.iter().all(|v| v.is_finite()).then_some(s)
}

/// max over z ∈ [−1, 1]^m of min_i (c_i + b_i·z), by enumerating the vertices
/// of the hypograph polytope.
pub(crate) fn max_min_affine(c: &[f64], b: &[Vec<f64>]) -> f64 {
    let m = b.first().map_or(0, |r| r.len());
    let value = |z: &[f64]| {
        (0..c.len())
            .map(|i| c[i] + b[i].iter().zip(z).map(|(x, y)| x * y).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    };
    // constraint j < n: t − b_j·z = c_j; j = n + 2k (+1): z_k = −1 (+1)
    let n = c.len();
    let total = n + 2 * m;
    let mut best = value(&vec![0.0; m]);
    let mut pick = Vec::with_capacity(m + 1);
    fn rec(start: usize, total: usize, need: usize, pick: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if pick.len() == need {
            f(pick);
            return;
        }
        for j in start..total {
            if total - j < need - pick.len() {
                break;
            }
            pick.push(j);
            rec(j + 1, total, need, pick, f);
            pick.pop();
        }
    }
    rec(0, total, m + 1, &mut pick, &mut |rows: &[usize]| {
        let mut a = DMatrix::<f64>::zeros(m + 1, m + 1);
        let mut rhs = DVector::<f64>::zeros(m + 1);
        for (r, &j) in rows.iter().enumerate() {
            if j < n {
                a[(r, m)] = 1.0;
                for k in 0..m {
                    a[(r, k)] = -b[j][k];
                }
                rhs[r] = c[j];
            } else {
                let k = (j - n) / 2;
                a[(r, k)] = 1.0;
                rhs[r] = if (j - n) % 2 == 0 { -1.0 } else { 1.0 };
            }
        }
        if let Some(sol) = a.lu().solve(&rhs) {
            let z: Vec<f64> = (0..m).map(|k| sol[k]).collect();
            if z.iter().all(|x| x.is_finite() && x.abs() <= 1.0 + 1e-12) {
                let z: Vec<f64> = z.iter().map(|x| x.clamp(-1.0, 1.0)).collect();
                best = best.max(value(&z));
            }
        }
    });
    best
}

/// Euclidean projection onto the probability simplex.
pub(crate) fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (j, uj) in u.iter().enumerate() {
        css += uj;
        let t = (css - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

pub fn c_tr_with(rho: &DensityMatrix, opts: &CtrOptions) -> SolverReport {
    let m = rho.matrix();
    let d = rho.dim();
    if m.offdiagonal_l1() == 0.0 {
        return SolverReport::exact(0.0);
    }
    let diag: Vec<f64> = m.diagonal().iter().map(|z| z.re.max(0.0)).collect();
    let mut solver = Solver {
        rho: m,
        d,
        polish: (opts.tol * 1e-2).min(1e-9),
        best_f: f64::INFINITY,
        best_q: diag.clone(),
        best_lower: f64::NEG_INFINITY,
        iterations: 0,
        max_iter: opts.max_iter,
    };
    let mut rng = stream(RESTART_SEED, d as u64);
    for r in 0..opts.restarts.max(1) {
        if solver.done() {
            break;
        }
        let start = match r {
            0 => project_simplex(&diag),
            1 => vec![1.0 / d as f64; d],
            _ => simplex_point(&mut rng, d),
        };
        let warm = solver.subgradient_phase(start);
        solver.newton_phase(warm);
    }
    let gap = solver.gap();
    SolverReport {
        value: solver.best_f,
        iterations: solver.iterations,
        gap_estimate: gap,
        converged: gap <= opts.tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::c_l1;
    use crate::state::{random_density, PureState};

    fn brute_qubit(rho: &DensityMatrix, steps: usize) -> f64 {
        let m = rho.matrix();
        let b = m[(0, 1)].norm();
        (0..=steps)
            .map(|s| {
                let q = s as f64 / steps as f64;
                let (x, y) = (m[(0, 0)].re - q, m[(1, 1)].re - (1.0 - q));
                let mid = 0.5 * (x + y);
                let r = (0.25 * (x - y).powi(2) + b * b).sqrt();
                (mid + r).abs() + (mid - r).abs()
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn incoherent_is_zero() {
        let rho = DensityMatrix::from_diagonal(&[0.1, 0.6, 0.3], vec![3]).unwrap();
        let r = c_tr_with(&rho, &CtrOptions::default());
        assert_eq!(r.value, 0.0);
        assert!(r.converged);
    }

    #[test]
    fn plus_state_matches_grid() {
        let s = 1.0 / 2f64.sqrt();
        let rho = PureState::new(vec![C64::new(s, 0.0); 2], vec![2]).unwrap().projector();
        let r = c_tr_with(&rho, &CtrOptions::default());
        assert!(r.converged, "{r:?}");
        assert!((r.value - brute_qubit(&rho, 100_000)).abs() < 1e-7);
        assert!((r.value - 1.0).abs() < 1e-7);
    }

    #[test]
    fn qubits_match_c_l1() {
        let tol = 1e-7;
        for seed in 0..200 {
            let mut rng = stream(5, seed);
            let rho = random_density(2, 1 + (seed % 2) as usize, &mut rng).unwrap();
            let r = c_tr_with(&rho, &CtrOptions::default());
            assert!(r.converged, "{r:?}");
            assert!((r.value - c_l1(&rho)).abs() <= 2.0 * tol, "{} vs {}", r.value, c_l1(&rho));
        }
    }

    #[test]
    fn qutrits_converge_with_certificate() {
        for seed in 0..100 {
            let mut rng = stream(6, seed);
            let rho = random_density(3, 1 + (seed % 3) as usize, &mut rng).unwrap();
            let r = c_tr_with(&rho, &CtrOptions::default());
            assert!(r.converged && r.gap_estimate <= 1e-7, "seed {seed}: {r:?}");
        }
    }

    #[test]
    fn larger_dimensions_converge() {
        for (seed, d) in [(0u64, 4usize), (1, 6), (2, 8), (3, 12), (4, 16)] {
            let mut rng = stream(7, seed);
            let rho = random_density(d, d.min(3), &mut rng).unwrap();
            let r = c_tr_with(&rho, &CtrOptions::default());
            assert!(r.converged, "d={d}: {r:?}");
        }
    }

    #[test]
    fn max_min_affine_matches_grid() {
        let mut rng = stream(8, 0);
        use rand::Rng;
        for m in 1..=2 {
            for _ in 0..20 {
                let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let b: Vec<Vec<f64>> = (0..4).map(|_| (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
                let exact = max_min_affine(&c, &b);
                let steps = 400;
                let mut grid = f64::NEG_INFINITY;
                let pts: Vec<f64> = (0..=steps).map(|s| -1.0 + 2.0 * s as f64 / steps as f64).collect();
                let eval = |z: &[f64]| (0..4).map(|i| c[i] + b[i].iter().zip(z).map(|(x, y)| x * y).sum::<f64>()).fold(f64::INFINITY, f64::min);
                if m == 1 {
                    for &x in &pts { grid = grid.max(eval(&[x])); }
                } else {
                    for &x in &pts { for &y in &pts { grid = grid.max(eval(&[x, y])); } }
                }
                assert!(exact >= grid - 1e-12 && exact <= grid + 1e-2, "{exact} {grid}");
            }
        }
    }

    #[test]
    fn simplex_projection() {
        let p = project_simplex(&[0.5, 0.5, 0.5]);
        assert!(p.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
        let p = project_simplex(&[2.0, 0.0, -1.0]);
        assert_eq!(p, vec![1.0, 0.0, 0.0]);
    }
}
