//! Property checks. Each check evaluates both sides of one equality or
//! inequality for one measure on one instance and classifies the signed
//! residual `lhs − rhs` against a tolerance.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{is_incoherent, is_one_local, selective_apply, Ensemble, KrausChannel};
use crate::error::{arg, Error, Result};
use crate::flags::{
    binomial, default_flag_basis, flagged_state, omega, snapped_ceil, snapped_floor, typical_decomposition,
    validate_flag_basis, FlagBasis,
};
use crate::format::digest;
use crate::instances::Instance;
use crate::linalg::eigvalsh;
use crate::measures::{evaluate_with, Bipartition, EvalOptions, MeasureDescriptor, MeasureId};
use crate::state::{partial_transpose_set, tensor_all, tensor_power, DensityMatrix};
use crate::Theory;

/// Free-padding slack used by the flag-to-monotonicity bridge.
pub const PADDING_TOL: f64 = 1e-6;
/// Slack in the bridge soundness inequality.
pub const BRIDGE_SLACK: f64 = 1e-9;

/// Verdict tolerance: 1e-6 for the iterative trace-norm solver, 1e-9 otherwise.
pub fn default_tol(id: MeasureId) -> f64 {
    match id {
        MeasureId::CTr => 1e-6,
        _ => 1e-9,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    FlagAdditivity,
    FlagSup,
    FlagSub,
    StrongMono,
    Convexity,
    TwoCopy,
    NCopy,
    FullAdditivity,
    OmegaIdentity,
    Sandwich,
    FreePadding,
}

/// How lhs and rhs must compare for a property to hold.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Equal,
    AtLeast,
    AtMost,
    /// rhs ≤ lhs ≤ `details["upper"]`.
    Between,
}

impl Relation {
    /// Amount by which the relation fails; ≤ 0 when it holds exactly.
    pub fn violation(self, residual: f64) -> f64 {
        match self {
            Relation::Equal => residual.abs(),
            Relation::AtLeast => -residual,
            Relation::AtMost | Relation::Between => residual,
        }
    }
}

impl Property {
    pub const ALL: [Property; 11] = [
        Property::FlagAdditivity,
        Property::FlagSup,
        Property::FlagSub,
        Property::StrongMono,
        Property::Convexity,
        Property::TwoCopy,
        Property::NCopy,
        Property::FullAdditivity,
        Property::OmegaIdentity,
        Property::Sandwich,
        Property::FreePadding,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Property::FlagAdditivity => "flag_additivity",
            Property::FlagSup => "flag_sup",
            Property::FlagSub => "flag_sub",
            Property::StrongMono => "strong_mono",
            Property::Convexity => "convexity",
            Property::TwoCopy => "two_copy",
            Property::NCopy => "n_copy",
            Property::FullAdditivity => "full_additivity",
            Property::OmegaIdentity => "omega_identity",
            Property::Sandwich => "sandwich",
            Property::FreePadding => "free_padding",
        }
    }

    pub fn relation(self) -> Relation {
        match self {
            Property::FlagSup | Property::StrongMono | Property::Convexity => Relation::AtLeast,
            Property::FlagSub => Relation::AtMost,
            Property::Sandwich => Relation::Between,
            _ => Relation::Equal,
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Property {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Property::ALL
            .iter()
            .copied()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Argument(format!("unknown property `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Violated,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Holds => "holds",
            Verdict::Violated => "violated",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// NaN (no value) round-trips through JSON as `null`.
mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub measure_id: MeasureId,
    pub property: Property,
    #[serde(with = "nan_as_null")]
    pub lhs: f64,
    #[serde(with = "nan_as_null")]
    pub rhs: f64,
    /// lhs − rhs.
    #[serde(with = "nan_as_null")]
    pub residual: f64,
    /// How far the defining relation fails; positive beyond `tol` means violated.
    #[serde(with = "nan_as_null")]
    pub violation: f64,
    pub tol: f64,
    pub verdict: Verdict,
    pub instance_digest: String,
    pub seed: u64,
    /// Trial index within a sweep.
    pub index: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl CheckResult {
    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }

    pub fn is_violated(&self) -> bool {
        self.verdict == Verdict::Violated
    }

    pub fn detail(&self, key: &str) -> Option<f64> {
        self.details.get(key).copied()
    }
}

/// Why a check could not give a verdict.
enum Fail {
    Error(Error),
    Inconclusive(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Error(e)
    }
}

struct Sides {
    lhs: f64,
    rhs: f64,
    details: BTreeMap<String, f64>,
    /// Overrides the relation's violation when the property has more structure.
    violation: Option<f64>,
}

impl Sides {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self { lhs, rhs, details: BTreeMap::new(), violation: None }
    }

    fn detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }
}

/// Party A = the first subsystem of every block of consecutive subsystems.
pub fn block_cut(blocks: &[usize]) -> Bipartition {
    let mut party_a = Vec::with_capacity(blocks.len());
    let mut offset = 0;
    for &b in blocks {
        party_a.push(offset);
        offset += b;
    }
    Bipartition { party_a }
}

struct Session<'a> {
    checker: &'a Checker,
    unconverged: usize,
    worst_gap: f64,
}

impl Session<'_> {
    fn eval_blocks(&mut self, rho: &DensityMatrix, blocks: &[usize]) -> Result<f64> {
        let c = self.checker;
        let report = if c.desc.theory == Theory::Entanglement {
            let opts = EvalOptions { ctr: c.opts.ctr, cut: Some(block_cut(blocks)) };
            evaluate_with(&c.desc, rho, &opts)?
        } else {
            evaluate_with(&c.desc, rho, &c.opts)?
        };
        if !report.converged {
            self.unconverged += 1;
            self.worst_gap = self.worst_gap.max(report.gap_estimate);
        }
        Ok(report.value)
    }

    fn eval(&mut self, rho: &DensityMatrix) -> Result<f64> {
        self.eval_blocks(rho, &[rho.dims().len()])
    }

    fn average(&mut self, ens: &Ensemble) -> Result<f64> {
        let mut acc = 0.0;
        for (p, st) in ens.weights().iter().zip(ens.states()) {
            acc += p * self.eval(st)?;
        }
        Ok(acc)
    }

    /// M(ρ_1 ⊗ ... ⊗ ρ_k) with each factor its own block.
    fn product(&mut self, factors: &[&DensityMatrix]) -> Result<f64> {
        if factors.is_empty() {
            return Ok(0.0);
        }
        let joint = tensor_all(factors)?;
        let blocks: Vec<usize> = factors.iter().map(|f| f.dims().len()).collect();
        self.eval_blocks(&joint, &blocks)
    }

    fn copies(&mut self, rho: &DensityMatrix, n: usize) -> Result<f64> {
        let joint = tensor_power(rho, n)?;
        self.eval_blocks(&joint, &vec![rho.dims().len(); n])
    }
}

/// Runs checks for one measure at one tolerance.
#[derive(Clone, Debug)]
pub struct Checker {
    pub desc: MeasureDescriptor,
    pub tol: f64,
    pub opts: EvalOptions,
    pub seed: u64,
    pub index: u64,
}

impl Checker {
    pub fn new(desc: MeasureDescriptor) -> Self {
        Self { desc, tol: default_tol(desc.id), opts: EvalOptions::default(), seed: 0, index: 0 }
    }

    pub fn for_measure(id: MeasureId) -> Self {
        Self::new(id.descriptor())
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_seed(mut self, seed: u64, index: u64) -> Self {
        self.seed = seed;
        self.index = index;
        self
    }

    fn session(&self) -> Session<'_> {
        Session { checker: self, unconverged: 0, worst_gap: 0.0 }
    }

    fn digest(&self, property: Property, instance: &Instance) -> String {
        digest(&[self.desc.id.as_str(), property.as_str(), &instance.to_text()])
    }

    fn conclude(
        &self,
        property: Property,
        instance_digest: String,
        session: Session<'_>,
        outcome: std::result::Result<Sides, Fail>,
    ) -> Result<CheckResult> {
        let mut res = CheckResult {
            measure_id: self.desc.id,
            property,
            lhs: f64::NAN,
            rhs: f64::NAN,
            residual: f64::NAN,
            violation: f64::NAN,
            tol: self.tol,
            verdict: Verdict::Inconclusive,
            instance_digest,
            seed: self.seed,
            index: self.index,
            details: BTreeMap::new(),
            reason: None,
        };
        match outcome {
            Ok(sides) => {
                res.lhs = sides.lhs;
                res.rhs = sides.rhs;
                res.residual = sides.lhs - sides.rhs;
                res.violation = sides.violation.unwrap_or_else(|| property.relation().violation(res.residual));
                res.details = sides.details;
                if session.unconverged > 0 {
                    res.reason = Some(format!(
                        "{} solve(s) did not converge (worst gap {:.3e})",
                        session.unconverged, session.worst_gap
                    ));
                } else if res.violation > self.tol {
                    res.verdict = Verdict::Violated;
                } else {
                    res.verdict = Verdict::Holds;
                }
            }
            Err(Fail::Inconclusive(reason)) => res.reason = Some(reason),
            Err(Fail::Error(e @ Error::Capability { .. })) => res.reason = Some(e.to_string()),
            Err(Fail::Error(e)) => return Err(e),
        }
        Ok(res)
    }

    /// Dispatch on an instance record.
    pub fn run(&self, property: Property, instance: &Instance) -> Result<CheckResult> {
        match (property, instance) {
            (
                Property::FlagAdditivity | Property::FlagSup | Property::FlagSub,
                Instance::Ensemble { ensemble, basis },
            ) => self.flag_check(property, ensemble, basis),
            (Property::Convexity, Instance::Ensemble { ensemble, .. }) => self.convexity(ensemble),
            (Property::StrongMono, Instance::StateChannel { rho, channel }) => self.strong_mono(rho, channel),
            (Property::TwoCopy, Instance::State { rho }) => self.two_copy(rho),
            (Property::NCopy, Instance::Copies { rho, n }) => self.n_copy(rho, *n),
            (Property::FullAdditivity, Instance::Pair { rho, sigma }) => self.full_additivity(rho, sigma),
            (Property::OmegaIdentity, Instance::Pair { rho, sigma }) => self.omega_identity(rho, sigma),
            (Property::FreePadding, Instance::Padding { rho, delta }) => self.free_padding(rho, delta),
            (Property::Sandwich, Instance::Sandwich { rho1, rho2, p1, basis, n, delta_typ }) => {
                self.sandwich(rho1, rho2, *p1, basis, *n, *delta_typ)
            }
            (p, inst) => arg(format!("property {p} does not apply to a `{}` instance", inst.kind())),
        }
    }

    fn check_ensemble_basis(ens: &Ensemble, basis: &FlagBasis) -> Result<()> {
        if basis.len() != ens.len() {
            return arg(format!("{} flags for an ensemble of {}", basis.len(), ens.len()));
        }
        if !validate_flag_basis(basis) {
            return arg("flag basis is not orthonormal and free");
        }
        Ok(())
    }

    /// flag_additivity, flag_sup or flag_sub: lhs = M(Σ p_i ρ_i ⊗ φ_i), rhs = Σ p_i M(ρ_i).
    pub fn flag_check(&self, property: Property, ens: &Ensemble, basis: &FlagBasis) -> Result<CheckResult> {
        if !matches!(property, Property::FlagAdditivity | Property::FlagSup | Property::FlagSub) {
            return arg(format!("{property} is not a flag property"));
        }
        Self::check_ensemble_basis(ens, basis)?;
        let d = self.digest(property, &Instance::Ensemble { ensemble: ens.clone(), basis: basis.clone() });
        let mut s = self.session();
        let outcome = (|| -> std::result::Result<Sides, Fail> {
            let flagged = flagged_state(ens, basis)?;
            let lhs = s.eval(&flagged)?;
            let rhs = s.average(ens)?;
            Ok(Sides::new(lhs, rhs))
        })();
        self.conclude(property, d, s, outcome)
    }

    pub fn flag_additivity(&self, ens: &Ensemble, basis: &FlagBasis) -> Result<CheckResult> {
        self.flag_check(Property::FlagAdditivity, ens, basis)
    }

    pub fn flag_sup(&self, ens: &Ensemble, basis: &FlagBasis) -> Result<CheckResult> {
        self.flag_check(Property::FlagSup, ens, basis)
    }

    pub fn flag_sub(&self, ens: &Ensemble, basis: &FlagBasis) -> Result<CheckResult> {
        self.flag_check(Property::FlagSub, ens, basis)
    }

    /// Freeness of a channel under this measure's theory.
    pub fn is_free(&self, ch: &KrausChannel) -> bool {
        match self.desc.theory {
            Theory::Coherence => is_incoherent(ch),
            Theory::Entanglement => is_one_local(ch, 1),
        }
    }

    /// lhs = M(ρ), rhs = Σ p_i M(ρ_i) over the selective outcomes of `ch`.
    pub fn strong_mono(&self, rho: &DensityMatrix, ch: &KrausChannel) -> Result<CheckResult> {
        if !self.is_free(ch) {
            return arg(format!("channel is not a free operation of {}", self.desc.theory));
        }
        let d = self.digest(
            Property::StrongMono,
            &Instance::StateChannel { rho: rho.clone(), channel: ch.clone() },
        );
        let mut s = self.session();
        let outcome = (|| -> std::result::Result<Sides, Fail> {
            let out = selective_apply(ch, rho)?;
            let lhs = s.eval(rho)?;
            let rhs = s.average(&out.ensemble)?;
            Ok(Sides::new(lhs, rhs)
                .detail("outcomes", out.ensemble.len() as f64)
                .detail("dropped_mass", out.dropped_mass))
        })();
        self.conclude(Property::StrongMono, d, s, outcome)
    }

    /// lhs = Σ p_i M(ρ_i), rhs = M(Σ p_i ρ_i).
    pub fn convexity(&self, ens: &Ensemble) -> Result<CheckResult> {
        let basis = default_flag_basis(self.desc.theory, ens.len())?;
        let d = self.digest(Property::Convexity, &Instance::Ensemble { ensemble: ens.clone(), basis });
        let mut s = self.session();
        let outcome = (|| -> std::result::Result<Sides, Fail> {
            let lhs = s.average(ens)?;
            let rhs = s.eval(&ens.average())?;
            Ok(Sides::new(lhs, rhs))
        })();
        self.conclude(Property::Convexity, d, s, outcome)
    }

    /// lhs = M(ρ⊗ρ), rhs = 2M(ρ).
    pub fn two_copy(&self, rho: &DensityMatrix) -> Result<CheckResult> {
        let d = self.digest(Property::TwoCopy, &Instance::State { rho: rho.clone() });
        let mut s = self.session();
        let outcome = (|| -> std::result::Result<Sides, Fail> {
            let lhs = s.copies(rho, 2)?;
            let rhs = 2.0 * s.eval(rho)?;
            Ok(Sides::new(lhs, rhs))
        })();
        self.conclude(Property::TwoCopy, d, s, outcome)
    }

    /// lhs = M(ρ^⊗N), rhs = N·M(ρ).
    pub fn n_copy(&self, rho: &DensityMatrix, n: usize) -> Result<CheckResult> {
        if n == 0 {
            return arg("n_copy needs N >= 1");
        }
        let d = self.digest(Property::NCopy, &Instance::Copies { rho: rho.clone(), n });
        let mut s = self.session();
        let outcome = (|| -> std::result::Result<Sides, Fail> {
            let lhs = s.copies(rho, n)?;
            let rhs = n as f64 * s.eval(rho)?;
            Ok(Sides::new(lhs, rhs).detail("n", n as f64))
        })();
        self.conclude(Property::NCopy, d, s, outcome)
    }

    /// lhs = M(ρ⊗σ), rhs = M(ρ) + M(σ).
    pub fn full_additivity(&self, rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<CheckResult> {
        let d = self.digest(Property::FullAdditivity, &Instance::Pair { rho: rho.clone(), sigma: sigma.clone() });
        let mut s = self.session();
        let outcome = (|| -> std::result::Result<Sides, Fail> {
            let lhs = s.product(&[rho, sigma])?;
            let rhs = s.eval(rho)? + s.eval(sigma)?;
            Ok(Sides::new(lhs, rhs))
        })();
        self.conclude(Property::FullAdditivity, d, s, outcome)
    }

    /// lhs = M(ρ⊗σ), rhs = 4M(ω) − M(ρ) − M(σ) with ω = ½ρ⊗|0⟩⟨0| + ½σ⊗|1⟩⟨1|.
    ///
    /// Requires flag additivity on ω and two-copy additivity for ρ, σ and ω;
    /// a failed prerequisite makes the result inconclusive. Details carry the
    /// expansion residual M(ω⊗ω) − ¼M(ρ⊗ρ) − ½M(ρ⊗σ) − ¼M(σ⊗σ) and the
    /// swap residual M(ρ⊗σ) − M(σ⊗ρ).
    pub fn omega_identity(&self, rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<CheckResult> {
        if rho.dims() != sigma.dims() {
            return arg("rho and sigma must live on the same space");
        }
        let d = self.digest(Property::OmegaIdentity, &Instance::Pair { rho: rho.clone(), sigma: sigma.clone() });
        let tol = self.tol;
        let mut s = self.session();
        let outcome = (|| -> std::result::Result<Sides, Fail> {
            let basis = FlagBasis::computational(2, 2, self.desc.theory)?;
            let w = omega(rho, sigma, &basis)?;
            let m_rho = s.eval(rho)?;
            let m_sigma = s.eval(sigma)?;
            let m_w = s.eval(&w)?;
            let flag_res = m_w - 0.5 * (m_rho + m_sigma);
            if flag_res.abs() > tol {
                return Err(Fail::Inconclusive(format!(
                    "prerequisite flag_additivity failed on omega (residual {flag_res:.3e})"
                )));
            }
            let m_rr = s.copies(rho, 2)?;
            let m_ss = s.copies(sigma, 2)?;
            let m_ww = s.copies(&w, 2)?;
            for (name, two, one) in [("rho", m_rr, m_rho), ("sigma", m_ss, m_sigma), ("omega", m_ww, m_w)] {
                let r = two - 2.0 * one;
                if r.abs() > tol {
                    return Err(Fail::Inconclusive(format!(
                        "prerequisite two_copy failed for {name} (residual {r:.3e})"
                    )));
                }
            }
            let m_rs = s.product(&[rho, sigma])?;
            let m_sr = s.product(&[sigma, rho])?;
            let expansion = m_ww - (0.25 * m_rr + 0.5 * m_rs + 0.25 * m_ss);
            let swap = m_rs - m_sr;
            let rhs = 4.0 * m_w - m_rho - m_sigma;
            let mut sides = Sides::new(m_rs, rhs)
                .detail("expansion_residual", expansion)
                .detail("swap_residual", swap)
                .detail("m_omega", m_w);
            sides.violation = Some((m_rs - rhs).abs().max(expansion.abs()).max(swap.abs()));
            Ok(sides)
        })();
        self.conclude(Property::OmegaIdentity, d, s, outcome)
    }

    /// lhs = M(ρ⊗δ), rhs = M(ρ) for a free δ.
    pub fn free_padding(&self, rho: &DensityMatrix, delta: &DensityMatrix) -> Result<CheckResult> {
        self.require_free_state(delta)?;
        let d = self.digest(Property::FreePadding, &Instance::Padding { rho: rho.clone(), delta: delta.clone() });
        let mut s = self.session();
        let outcome = (|| -> std::result::Result<Sides, Fail> {
            let lhs = s.product(&[rho, delta])?;
            let rhs = s.eval(rho)?;
            Ok(Sides::new(lhs, rhs))
        })();
        self.conclude(Property::FreePadding, d, s, outcome)
    }

    /// Diagonal for coherence; PPT across the first subsystem for entanglement
    /// (necessary for separability, and sufficient on 2⊗2 and 2⊗3).
    fn require_free_state(&self, delta: &DensityMatrix) -> Result<()> {
        match self.desc.theory {
            Theory::Coherence => {
                let mut off = delta.matrix().clone();
                for i in 0..off.rows() {
                    off[(i, i)] = crate::linalg::ZERO;
                }
                if off.max_abs() > 1e-12 {
                    return arg("padding state is not incoherent");
                }
            }
            Theory::Entanglement => {
                if delta.dims().len() >= 2 {
                    let mut pt = partial_transpose_set(delta, &[0])?;
                    pt.hermitize();
                    if eigvalsh(&pt)?.last().is_some_and(|&e| e < -1e-12) {
                        return arg("padding state is entangled (negative partial transpose)");
                    }
                }
            }
        }
        Ok(())
    }

    /// lower ≤ M(ρ_typ) ≤ upper, where the bounds evaluate
    /// ρ₁^⊗a ⊗ ρ₂^⊗b at (a, b) = (⌊Np₁(1−δ)⌋, ⌊Np₂(1−δ)⌋) and
    /// (⌈Np₁(1+δ)⌉, ⌈Np₂(1+δ)⌉). lhs = M(ρ_typ), rhs = lower.
    ///
    /// Flag additivity on p₁ρ₁⊗φ₁ + p₂ρ₂⊗φ₂ is verified first. Details also
    /// carry the flag expansion Σ_k C(N,k) p₁^k p₂^{N−k}/T · M(ρ₁^⊗k ⊗ ρ₂^⊗(N−k)).
    pub fn sandwich(
        &self,
        rho1: &DensityMatrix,
        rho2: &DensityMatrix,
        p1: f64,
        basis: &FlagBasis,
        n: usize,
        delta_typ: f64,
    ) -> Result<CheckResult> {
        let d = self.digest(
            Property::Sandwich,
            &Instance::Sandwich {
                rho1: rho1.clone(),
                rho2: rho2.clone(),
                p1,
                basis: basis.clone(),
                n,
                delta_typ,
            },
        );
        let tol = self.tol;
        let mut s = self.session();
        let outcome = (|| -> std::result::Result<Sides, Fail> {
            let td = typical_decomposition(rho1, rho2, p1, basis, n, delta_typ)?;
            let single = Ensemble::new(vec![p1, 1.0 - p1], vec![rho1.clone(), rho2.clone()])?;
            let flagged = flagged_state(&single, basis)?;
            let fa = s.eval(&flagged)? - s.average(&single)?;
            if fa.abs() > tol {
                return Err(Fail::Inconclusive(format!(
                    "prerequisite flag_additivity failed (residual {fa:.3e})"
                )));
            }
            let m_typ = s.eval_blocks(&td.rho_typ, &vec![td.tilde[0].dims().len(); n])?;
            let p2 = 1.0 - p1;
            let nf = n as f64;
            let lower_counts = (
                snapped_floor(nf * p1 * (1.0 - delta_typ)).max(0) as usize,
                snapped_floor(nf * p2 * (1.0 - delta_typ)).max(0) as usize,
            );
            let upper_counts = (
                snapped_ceil(nf * p1 * (1.0 + delta_typ)).max(0) as usize,
                snapped_ceil(nf * p2 * (1.0 + delta_typ)).max(0) as usize,
            );
            let mut mixed = |a: usize, b: usize| -> Result<f64> {
                let mut factors = vec![rho1; a];
                factors.extend(std::iter::repeat(rho2).take(b));
                s.product(&factors)
            };
            let lower = mixed(lower_counts.0, lower_counts.1)?;
            let upper = mixed(upper_counts.0, upper_counts.1)?;
            let mut expansion = 0.0;
            for k in td.k_range.0..=td.k_range.1 {
                let w = binomial(n, k) * td.arrangement_weight(k) / td.weight_t;
                expansion += w * mixed(k, n - k)?;
            }
            let mut sides = Sides::new(m_typ, lower)
                .detail("upper", upper)
                .detail("epsilon", td.epsilon)
                .detail("k_lo", td.k_range.0 as f64)
                .detail("k_hi", td.k_range.1 as f64)
                .detail("expansion", expansion)
                .detail("expansion_residual", m_typ - expansion);
            sides.violation = Some((lower - m_typ).max(m_typ - upper));
            Ok(sides)
        })();
        self.conclude(Property::Sandwich, d, s, outcome)
    }

    /// Strong-monotonicity violation → flag-supadditivity violation on the
    /// selective outcomes of the same channel.
    pub fn bridge_mono_violation_to_flag(
        &self,
        rho: &DensityMatrix,
        ch: &KrausChannel,
        basis: Option<&FlagBasis>,
    ) -> Result<MonoToFlag> {
        let mono = self.strong_mono(rho, ch)?;
        if !mono.is_violated() {
            return arg(format!("strong monotonicity is not violated here (verdict {})", mono.verdict));
        }
        let ensemble = selective_apply(ch, rho)?.ensemble;
        let basis = match basis {
            Some(b) => b.clone(),
            None => default_flag_basis(self.desc.theory, ensemble.len())?,
        };
        if basis.len() != ensemble.len() {
            return arg(format!("{} flags for {} outcomes", basis.len(), ensemble.len()));
        }
        let flag_sup = self.flag_sup(&ensemble, &basis)?;
        let monotone_gap = mono.lhs - flag_sup.lhs;
        let sound = flag_sup.is_violated() && flag_sup.violation >= mono.violation - BRIDGE_SLACK;
        Ok(MonoToFlag { ensemble, basis, mono, flag_sup, monotone_gap, sound })
    }

    /// Flag-supadditivity violation → strong-monotonicity violation of the
    /// flag-register measurement on the flagged state.
    pub fn bridge_flag_violation_to_mono(&self, ens: &Ensemble, basis: &FlagBasis) -> Result<FlagToMono> {
        let flag_sup = self.flag_sup(ens, basis)?;
        if !flag_sup.is_violated() {
            return arg(format!("flag supadditivity is not violated here (verdict {})", flag_sup.verdict));
        }
        let mut padding_defect: f64 = 0.0;
        {
            let mut s = self.session();
            for (i, st) in ens.states().iter().enumerate() {
                let padded = crate::state::tensor(st, &basis.projector(i))?;
                let defect = (s.eval(&padded)? - s.eval(st)?).abs();
                if defect > PADDING_TOL {
                    return arg(format!("free padding fails on member {i} (defect {defect:.3e})"));
                }
                padding_defect = padding_defect.max(defect);
            }
        }
        let rho = flagged_state(ens, basis)?;
        let system_dims = ens.states()[0].dims().to_vec();
        let channel = KrausChannel::register_measurement(&system_dims, basis.vectors())?;
        let mono = self.strong_mono(&rho, &channel)?;
        Ok(FlagToMono { rho, channel, flag_sup, mono, padding_defect })
    }

    /// Per-copy values M(ρ^⊗N)/N for N = 1..=n_max.
    pub fn regularization(&self, rho: &DensityMatrix, n_max: usize) -> Result<Regularization> {
        if n_max == 0 {
            return arg("n_max must be at least 1");
        }
        let full_dims: Vec<usize> = (0..n_max).flat_map(|_| rho.dims().to_vec()).collect();
        crate::state::check_cap(full_dims.iter().product())?;
        self.desc.check_supports(&full_dims)?;
        let mut s = self.session();
        let mut values = Vec::with_capacity(n_max);
        for n in 1..=n_max {
            values.push((n, s.copies(rho, n)? / n as f64));
        }
        let trend = Trend::of(&values.iter().map(|v| v.1).collect::<Vec<_>>(), 1e-9);
        Ok(Regularization { values, trend, converged: s.unconverged == 0 })
    }
}

#[derive(Clone, Debug)]
pub struct MonoToFlag {
    pub ensemble: Ensemble,
    pub basis: FlagBasis,
    pub mono: CheckResult,
    pub flag_sup: CheckResult,
    /// M(ρ) − M(flagged outcomes), ≥ 0 for a monotone measure.
    pub monotone_gap: f64,
    /// flag_sup violated with magnitude ≥ the strong-mono magnitude − 1e-9.
    pub sound: bool,
}

#[derive(Clone, Debug)]
pub struct FlagToMono {
    pub rho: DensityMatrix,
    pub channel: KrausChannel,
    pub flag_sup: CheckResult,
    pub mono: CheckResult,
    /// max_i |M(ρ_i ⊗ φ_i) − M(ρ_i)|.
    pub padding_defect: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Constant,
    Increasing,
    Decreasing,
    Mixed,
}

impl Trend {
    pub fn of(values: &[f64], tol: f64) -> Trend {
        let diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
        let up = diffs.iter().any(|&d| d > tol);
        let down = diffs.iter().any(|&d| d < -tol);
        match (up, down) {
            (false, false) => Trend::Constant,
            (true, false) => Trend::Increasing,
            (false, true) => Trend::Decreasing,
            (true, true) => Trend::Mixed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Regularization {
    pub values: Vec<(usize, f64)>,
    pub trend: Trend,
    pub converged: bool,
}

pub fn check_flag_additivity(m: &MeasureDescriptor, ens: &Ensemble, basis: &FlagBasis, tol: f64) -> Result<CheckResult> {
    Checker::new(*m).with_tol(tol).flag_additivity(ens, basis)
}

pub fn check_flag_sup(m: &MeasureDescriptor, ens: &Ensemble, basis: &FlagBasis, tol: f64) -> Result<CheckResult> {
    Checker::new(*m).with_tol(tol).flag_sup(ens, basis)
}

pub fn check_flag_sub(m: &MeasureDescriptor, ens: &Ensemble, basis: &FlagBasis, tol: f64) -> Result<CheckResult> {
    Checker::new(*m).with_tol(tol).flag_sub(ens, basis)
}

pub fn check_strong_mono(m: &MeasureDescriptor, rho: &DensityMatrix, ch: &KrausChannel, tol: f64) -> Result<CheckResult> {
    Checker::new(*m).with_tol(tol).strong_mono(rho, ch)
}

pub fn check_convexity(m: &MeasureDescriptor, ens: &Ensemble, tol: f64) -> Result<CheckResult> {
    Checker::new(*m).with_tol(tol).convexity(ens)
}

pub fn check_two_copy(m: &MeasureDescriptor, rho: &DensityMatrix, tol: f64) -> Result<CheckResult> {
    Checker::new(*m).with_tol(tol).two_copy(rho)
}

pub fn check_n_copy(m: &MeasureDescriptor, rho: &DensityMatrix, n: usize, tol: f64) -> Result<CheckResult> {
    Checker::new(*m).with_tol(tol).n_copy(rho, n)
}

pub fn check_full_additivity(
    m: &MeasureDescriptor,
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    tol: f64,
) -> Result<CheckResult> {
    Checker::new(*m).with_tol(tol).full_additivity(rho, sigma)
}

pub fn check_omega_identity(
    m: &MeasureDescriptor,
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    tol: f64,
) -> Result<CheckResult> {
    Checker::new(*m).with_tol(tol).omega_identity(rho, sigma)
}

pub fn check_free_padding(
    m: &MeasureDescriptor,
    rho: &DensityMatrix,
    delta: &DensityMatrix,
    tol: f64,
) -> Result<CheckResult> {
    Checker::new(*m).with_tol(tol).free_padding(rho, delta)
}

#[allow(clippy::too_many_arguments)]
pub fn check_sandwich(
    m: &MeasureDescriptor,
    rho1: &DensityMatrix,
    rho2: &DensityMatrix,
    p1: f64,
    basis: &FlagBasis,
    n: usize,
    delta_typ: f64,
    tol: f64,
) -> Result<CheckResult> {
    Checker::new(*m).with_tol(tol).sandwich(rho1, rho2, p1, basis, n, delta_typ)
}

pub fn bridge_mono_violation_to_flag(
    m: &MeasureDescriptor,
    rho: &DensityMatrix,
    ch: &KrausChannel,
    basis: Option<&FlagBasis>,
) -> Result<MonoToFlag> {
    Checker::new(*m).bridge_mono_violation_to_flag(rho, ch, basis)
}

pub fn bridge_flag_violation_to_mono(m: &MeasureDescriptor, ens: &Ensemble, basis: &FlagBasis) -> Result<FlagToMono> {
    Checker::new(*m).bridge_flag_violation_to_mono(ens, basis)
}

pub fn estimate_regularization(m: &MeasureDescriptor, rho: &DensityMatrix, n_max: usize) -> Result<Regularization> {
    Checker::new(*m).regularization(rho, n_max)
}
