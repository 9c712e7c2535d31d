//! Seeded sweeps over random instances and the paired flag-additivity audit.
//!
//! Trial `i` draws every object from `stream(seed, i)`, so a sweep's results
//! are the same at any worker count.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::checks::{CheckResult, Checker, Property, Verdict};
use crate::error::{arg, Result};
use crate::exec::Executor;
use crate::flags::FlagBasis;
use crate::instances::{Instance, InstanceGen};
use crate::measures::MeasureId;
use crate::rng::stream;
use crate::search::{search_violation, SearchOptions};

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub property: Property,
    pub trials: usize,
    /// Local dimensions, used round-robin by trial index.
    pub dims: Vec<usize>,
    pub seed: u64,
    /// N for n_copy and sandwich instances.
    pub copies: usize,
    pub delta_typ: f64,
}

impl SweepSpec {
    pub fn new(property: Property, trials: usize, dims: Vec<usize>, seed: u64) -> Self {
        Self { property, trials, dims, seed, copies: 3, delta_typ: 0.3 }
    }

    pub fn dim_for(&self, index: usize) -> usize {
        self.dims[index % self.dims.len()]
    }
}

/// Random instance of the shape `property` needs.
pub fn generate(gen: &InstanceGen, property: Property, spec: &SweepSpec, rng: &mut impl Rng) -> Result<Instance> {
    Ok(match property {
        Property::FlagAdditivity | Property::FlagSup | Property::FlagSub | Property::Convexity => {
            let ensemble = gen.ensemble(rng);
            let basis = gen.flag_basis(ensemble.len());
            Instance::Ensemble { ensemble, basis }
        }
        Property::StrongMono => {
            let rho = gen.state(rng);
            let channel = gen.free_channel(rng)?;
            Instance::StateChannel { rho, channel }
        }
        Property::TwoCopy => Instance::State { rho: gen.state(rng) },
        Property::NCopy => Instance::Copies { rho: gen.state(rng), n: spec.copies },
        Property::FullAdditivity | Property::OmegaIdentity => Instance::Pair {
            rho: gen.state(rng),
            sigma: gen.state(rng),
        },
        Property::FreePadding => Instance::Padding { rho: gen.state(rng), delta: gen.padding_state(rng) },
        Property::Sandwich => {
            let rho1 = gen.state(rng);
            let rho2 = gen.state(rng);
            let p1 = 0.05 + 0.45 * rng.gen::<f64>();
            Instance::Sandwich {
                rho1,
                rho2,
                p1,
                basis: FlagBasis::computational(2, 2, gen.theory)?,
                n: spec.copies,
                delta_typ: spec.delta_typ,
            }
        }
    })
}

pub fn trial_instance(checker: &Checker, spec: &SweepSpec, index: usize) -> Result<Instance> {
    let gen = InstanceGen::new(checker.desc.theory, spec.dim_for(index));
    let mut rng = stream(spec.seed, index as u64);
    generate(&gen, spec.property, spec, &mut rng)
}

pub fn run_trial(checker: &Checker, spec: &SweepSpec, index: usize) -> Result<CheckResult> {
    let inst = trial_instance(checker, spec, index)?;
    checker.clone().with_seed(spec.seed, index as u64).run(spec.property, &inst)
}

/// One result per trial, in trial order.
pub fn sweep(checker: &Checker, spec: &SweepSpec, exec: &Executor) -> Result<Vec<CheckResult>> {
    if spec.trials == 0 || spec.dims.is_empty() {
        return arg("a sweep needs at least one trial and one dimension");
    }
    exec.map(spec.trials, |i| run_trial(checker, spec, i)).into_iter().collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub holds: usize,
    pub violated: usize,
    pub inconclusive: usize,
}

impl Counts {
    pub fn add(&mut self, v: Verdict) {
        match v {
            Verdict::Holds => self.holds += 1,
            Verdict::Violated => self.violated += 1,
            Verdict::Inconclusive => self.inconclusive += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.holds + self.violated + self.inconclusive
    }
}

pub fn tally<'a>(results: impl IntoIterator<Item = &'a CheckResult>) -> Counts {
    let mut c = Counts::default();
    for r in results {
        c.add(r.verdict);
    }
    c
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub measure_id: MeasureId,
    pub trials: usize,
    pub seed: u64,
    pub counts: BTreeMap<Property, Counts>,
    /// Strong-mono violations turned into flag_sup violations.
    pub bridged_mono_to_flag: usize,
    /// flag_sup violations turned into strong-mono violations.
    pub bridged_flag_to_mono: usize,
    pub bridge_failures: usize,
    /// Best strong-mono violation from the optional search.
    pub search_best: Option<f64>,
    /// No audited property pair disagrees on the sample.
    pub consistent: bool,
    pub notes: Vec<String>,
}

/// Paired sweeps of flag_sup, flag_sub, strong_mono and convexity, with
/// every violation pushed through the matching bridge and an optional
/// strong-mono search of `search_budget` evaluations in the first dimension.
pub fn audit_theorem1(
    checker: &Checker,
    trials: usize,
    dims: &[usize],
    seed: u64,
    search_budget: usize,
    exec: &Executor,
) -> Result<AuditSummary> {
    let props = [Property::FlagSup, Property::FlagSub, Property::StrongMono, Property::Convexity];
    let mut counts = BTreeMap::new();
    let mut notes = Vec::new();
    let (mut to_flag, mut to_mono, mut failures) = (0, 0, 0);
    for p in props {
        let spec = SweepSpec::new(p, trials, dims.to_vec(), seed);
        let results = sweep(checker, &spec, exec)?;
        counts.insert(p, tally(&results));
        for r in results.iter().filter(|r| r.is_violated()) {
            let inst = trial_instance(checker, &spec, r.index as usize)?;
            match (p, &inst) {
                (Property::StrongMono, Instance::StateChannel { rho, channel }) => {
                    match checker.bridge_mono_violation_to_flag(rho, channel, None) {
                        Ok(b) if b.sound => to_flag += 1,
                        _ => failures += 1,
                    }
                }
                (Property::FlagSup, Instance::Ensemble { ensemble, basis }) => {
                    match checker.bridge_flag_violation_to_mono(ensemble, basis) {
                        Ok(b) if b.mono.is_violated() => to_mono += 1,
                        _ => failures += 1,
                    }
                }
                _ => {}
            }
        }
    }
    let mut search_best = None;
    if search_budget > 0 {
        let out = search_violation(checker, Property::StrongMono, dims[0], search_budget, seed, &SearchOptions::default(), exec)?;
        search_best = Some(out.best_violation);
        if out.best_violation > checker.tol {
            if let Instance::StateChannel { rho, channel } = Instance::from_text(&out.instance)? {
                match checker.bridge_mono_violation_to_flag(&rho, &channel, None) {
                    Ok(b) if b.sound => to_flag += 1,
                    _ => failures += 1,
                }
            }
        }
    }
    let violated = |p: Property| counts.get(&p).map_or(0, |c: &Counts| c.violated);
    let mono_any = violated(Property::StrongMono) > 0 || search_best.is_some_and(|v| v > checker.tol);
    let sup_any = violated(Property::FlagSup) > 0 || to_flag > 0;
    let mono_evidence = mono_any || to_mono > 0;
    let sub_any = violated(Property::FlagSub) > 0;
    let convex_any = violated(Property::Convexity) > 0;
    if mono_evidence != sup_any {
        notes.push("strong_mono and flag_sup disagree on the sample".into());
    }
    if sub_any != convex_any {
        notes.push("flag_sub and convexity disagree on the sample".into());
    }
    if failures > 0 {
        notes.push(format!("{failures} bridge(s) did not reproduce a violation"));
    }
    Ok(AuditSummary {
        measure_id: checker.desc.id,
        trials,
        seed,
        counts,
        bridged_mono_to_flag: to_flag,
        bridged_flag_to_mono: to_mono,
        bridge_failures: failures,
        search_best,
        consistent: notes.is_empty(),
        notes,
    })
}
