//! Counterexample search: random restarts of Nelder–Mead over unconstrained
//! real parameterisations of instances.
//!
//! States are G G†/Tr(G G†) for a complex Gaussian-style factor G, ensemble
//! weights are a softmax, incoherent channels use the per-column amplitude
//! vectors of [`IncoherentParams`] with row targets fixed per restart, and
//! local channels for entanglement orthonormalise a stacked Kraus factor.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{embed_local, Ensemble, IncoherentParams, KrausChannel, Side};
use crate::checks::{Checker, Property, Verdict};
use crate::error::{arg, Result};
use crate::exec::Executor;
use crate::flags::default_flag_basis;
use crate::instances::Instance;
use crate::linalg::{eigh, ComplexMatrix, C64};
use crate::rng::{gaussian_vec, stream};
use crate::state::DensityMatrix;
use crate::Theory;

/// Nelder–Mead evaluations per restart.
pub const DEFAULT_RESTART_BUDGET: usize = 2000;
const INITIAL_STEP: f64 = 0.4;
const SIMPLEX_COLLAPSE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub measure_id: crate::measures::MeasureId,
    pub property: Property,
    /// Largest violation found; ≤ 0 when none was.
    pub best_violation: f64,
    /// Witness in the instance text format.
    pub instance: String,
    pub evaluations: usize,
    pub seed: u64,
    pub restarts: usize,
    pub best_restart: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct SearchOptions {
    pub restart_budget: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { restart_budget: DEFAULT_RESTART_BUDGET }
    }
}

/// Result of one minimisation.
#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Adaptive Nelder–Mead minimisation with an exact evaluation cap. The
/// simplex is rebuilt around the incumbent whenever it collapses, until the
/// budget runs out.
pub fn nelder_mead(mut f: impl FnMut(&[f64]) -> f64, x0: &[f64], step: f64, max_evals: usize) -> Minimum {
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut best = Minimum { x: x0.to_vec(), value: f64::INFINITY, evaluations: 0 };
    if max_evals == 0 {
        return best;
    }
    let nf = n.max(1) as f64;
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf);
    let mut center = x0.to_vec();
    let mut scale = step;
    'outer: while evals < max_evals {
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        let v0 = if best.value.is_finite() && center == best.x { best.value } else { eval(&center, &mut evals) };
        simplex.push((center.clone(), v0));
        for i in 0..n {
            if evals >= max_evals {
                break 'outer;
            }
            let mut x = center.clone();
            x[i] += scale;
            let v = eval(&x, &mut evals);
            simplex.push((x, v));
        }
        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            if simplex[0].1 < best.value {
                best.x = simplex[0].0.clone();
                best.value = simplex[0].1;
            }
            let size = simplex[1..]
                .iter()
                .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if evals >= max_evals {
                break 'outer;
            }
            if size < SIMPLEX_COLLAPSE || n == 0 {
                break;
            }
            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                centroid.iter_mut().zip(x).for_each(|(c, xi)| *c += xi / nf);
            }
            let worst = simplex[n].clone();
            let along = |t: f64| -> Vec<f64> {
                centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect()
            };
            let xr = along(alpha);
            let fr = eval(&xr, &mut evals);
            if fr < simplex[0].1 {
                if evals >= max_evals {
                    simplex[n] = (xr, fr);
                    continue;
                }
                let xe = along(alpha * gamma);
                let fe = eval(&xe, &mut evals);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
                continue;
            }
            if evals >= max_evals {
                continue;
            }
            let (xc, fc) = if fr < worst.1 {
                let xc = along(alpha * rho);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = along(-rho);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < fr.min(worst.1) {
                simplex[n] = (xc, fc);
                continue;
            }
            let x_best = simplex[0].0.clone();
            for item in simplex.iter_mut().skip(1) {
                if evals >= max_evals {
                    break;
                }
                let x: Vec<f64> = x_best.iter().zip(&item.0).map(|(b, xi)| b + sigma * (xi - b)).collect();
                let v = eval(&x, &mut evals);
                *item = (x, v);
            }
        }
        center = best.x.clone();
        scale *= 0.5;
    }
    best.evaluations = evals;
    best
}

/// Maps a real vector to an instance.
#[derive(Clone, Debug)]
struct Decoder {
    theory: Theory,
    dim: usize,
    property: Property,
    rank: usize,
    members: usize,
    channel: Option<ChannelShape>,
}

#[derive(Clone, Debug)]
enum ChannelShape {
    Incoherent { n_kraus: usize, rows: Vec<usize> },
    Local { n_kraus: usize, side: Side },
}

impl Decoder {
    fn state_dims(&self) -> Vec<usize> {
        match self.theory {
            Theory::Coherence => vec![self.dim],
            Theory::Entanglement => vec![self.dim, self.dim],
        }
    }

    fn state_len(&self) -> usize {
        let d: usize = self.state_dims().iter().product();
        2 * d * self.rank
    }

    fn channel_len(&self) -> usize {
        match &self.channel {
            None => 0,
            Some(ChannelShape::Incoherent { n_kraus, .. }) => 2 * self.dim * n_kraus,
            Some(ChannelShape::Local { n_kraus, .. }) => 2 * n_kraus * self.dim * self.dim,
        }
    }

    fn len(&self) -> usize {
        match self.property {
            Property::StrongMono => self.state_len() + self.channel_len(),
            Property::TwoCopy => self.state_len(),
            _ => self.members * (self.state_len() + 1),
        }
    }

    fn state(&self, x: &[f64]) -> Option<DensityMatrix> {
        let dims = self.state_dims();
        let d: usize = dims.iter().product();
        let g = ComplexMatrix::from_fn(d, self.rank, |r, c| {
            let k = 2 * (r * self.rank + c);
            C64::new(x[k], x[k + 1])
        });
        let mut m = g.matmul(&g.adjoint());
        let tr = m.trace().re;
        if !(tr > 1e-300) || !tr.is_finite() {
            return None;
        }
        m = m.scale_real(1.0 / tr);
        Some(DensityMatrix::from_trusted(m, dims))
    }

    fn channel(&self, x: &[f64]) -> Option<KrausChannel> {
        let d = self.dim;
        match self.channel.as_ref()? {
            ChannelShape::Incoherent { n_kraus, rows } => {
                let raw = (0..d * n_kraus).map(|k| C64::new(x[2 * k], x[2 * k + 1])).collect();
                IncoherentParams { d, n_kraus: *n_kraus, rows: rows.clone(), raw }.build()
            }
            ChannelShape::Local { n_kraus, side } => {
                let rows = n_kraus * d;
                let v = ComplexMatrix::from_fn(rows, d, |r, c| {
                    let k = 2 * (r * d + c);
                    C64::new(x[k], x[k + 1])
                });
                let mut gram = v.adjoint().matmul(&v);
                gram.hermitize();
                let e = eigh(&gram).ok()?;
                if !(e.values.last().copied()? > 1e-10 * e.values[0].max(1e-300)) {
                    return None;
                }
                let iso = v.matmul(&e.reconstruct_with(|l| 1.0 / l.sqrt()));
                let kraus = (0..*n_kraus)
                    .map(|k| ComplexMatrix::from_fn(d, d, |r, c| iso[(k * d + r, c)]))
                    .collect();
                let local = KrausChannel::from_trusted(kraus, vec![d], vec![d]);
                embed_local(&local, d, *side).ok()
            }
        }
    }

    fn decode(&self, x: &[f64]) -> Option<Instance> {
        let sl = self.state_len();
        match self.property {
            Property::StrongMono => {
                let rho = self.state(&x[..sl])?;
                let channel = self.channel(&x[sl..])?;
                Some(Instance::StateChannel { rho, channel })
            }
            Property::TwoCopy => Some(Instance::State { rho: self.state(&x[..sl])? }),
            _ => {
                let n = self.members;
                let logits = &x[n * sl..];
                let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
                let total: f64 = e.iter().sum();
                let weights: Vec<f64> = e.iter().map(|v| v / total).collect();
                let states = (0..n)
                    .map(|i| self.state(&x[i * sl..(i + 1) * sl]))
                    .collect::<Option<Vec<_>>>()?;
                let ensemble = Ensemble::new(weights, states).ok()?;
                let basis = default_flag_basis(self.theory, n).ok()?;
                Some(Instance::Ensemble { ensemble, basis })
            }
        }
    }
}

/// Properties the search can target.
pub const SEARCHABLE: [Property; 6] = [
    Property::StrongMono,
    Property::FlagSup,
    Property::FlagSub,
    Property::FlagAdditivity,
    Property::Convexity,
    Property::TwoCopy,
];

struct RestartResult {
    violation: f64,
    instance: Option<Instance>,
    evaluations: usize,
}

fn objective(checker: &Checker, property: Property, decoder: &Decoder, x: &[f64]) -> f64 {
    let Some(inst) = decoder.decode(x) else {
        return f64::INFINITY;
    };
    match checker.run(property, &inst) {
        Ok(r) if r.verdict != Verdict::Inconclusive => -r.violation,
        _ => f64::INFINITY,
    }
}

fn restart(checker: &Checker, property: Property, dim: usize, seed: u64, index: usize, budget: usize) -> RestartResult {
    let theory = checker.desc.theory;
    let mut rng = stream(seed, index as u64);
    let d_total = match theory {
        Theory::Coherence => dim,
        Theory::Entanglement => dim * dim,
    };
    // cycle ranks and shapes across restarts; pure states first
    let rank = 1 + (index / 3) % d_total;
    let n_kraus = 2 + index % 3;
    let channel = (property == Property::StrongMono).then(|| match theory {
        Theory::Coherence => ChannelShape::Incoherent {
            n_kraus,
            rows: (0..n_kraus * dim).map(|_| rng.gen_range(0..dim)).collect(),
        },
        Theory::Entanglement => ChannelShape::Local {
            n_kraus,
            side: if rng.gen::<bool>() { Side::Left } else { Side::Right },
        },
    });
    let decoder = Decoder { theory, dim, property, rank, members: 2 + index % 3, channel, };
    let x0 = gaussian_vec(&mut rng, decoder.len());
    let min = nelder_mead(|x| objective(checker, property, &decoder, x), &x0, INITIAL_STEP, budget);
    let instance = if min.value.is_finite() { decoder.decode(&min.x) } else { None };
    RestartResult { violation: -min.value, instance, evaluations: min.evaluations }
}

/// Maximise the violation of `property` by `checker`'s measure over
/// instances of local dimension `dim` within `budget` objective evaluations.
pub fn search_violation(
    checker: &Checker,
    property: Property,
    dim: usize,
    budget: usize,
    seed: u64,
    opts: &SearchOptions,
    exec: &Executor,
) -> Result<SearchOutcome> {
    if !SEARCHABLE.contains(&property) {
        return arg(format!("search does not support property {property}"));
    }
    if budget == 0 || dim < 2 {
        return arg("search needs budget >= 1 and dim >= 2");
    }
    let per = opts.restart_budget.max(1);
    let restarts = budget.div_ceil(per);
    let results = exec.map(restarts, |i| {
        let b = if i + 1 == restarts { budget - per * (restarts - 1) } else { per };
        restart(checker, property, dim, seed, i, b)
    });
    let mut best: Option<(usize, &RestartResult)> = None;
    for (i, r) in results.iter().enumerate() {
        if r.instance.is_some() && best.is_none_or(|(_, b)| r.violation > b.violation) {
            best = Some((i, r));
        }
    }
    let evaluations = results.iter().map(|r| r.evaluations).sum();
    let Some((best_restart, b)) = best else {
        return Err(crate::error::Error::Degenerate("no restart produced a valid instance".into()));
    };
    let instance = b.instance.as_ref().expect("checked above");
    // re-evaluate the stored witness so the number matches replay exactly
    let replay = Instance::from_text(&instance.to_text())?;
    let check = checker.run(property, &replay)?;
    Ok(SearchOutcome {
        measure_id: checker.desc.id,
        property,
        best_violation: check.violation,
        instance: instance.to_text(),
        evaluations,
        seed,
        restarts,
        best_restart,
    })
}
