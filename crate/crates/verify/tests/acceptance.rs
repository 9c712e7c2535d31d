//! One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

use std::time::Duration;

use flagcheck::{config_from_json, run, CommandKind, RunConfig};
use flagcheck_core::channel::apply;
use flagcheck_core::checks::{CheckResult, Checker, Property, Verdict};
use flagcheck_core::exec::Executor;
use flagcheck_core::flags::{binomial, typical_decomposition, typical_range, FlagBasis};
use flagcheck_core::instances::{Instance, InstanceGen};
use flagcheck_core::linalg::{eigvalsh, C64, ZERO};
use flagcheck_core::measures::{c_l1, evaluate, negativity, Bipartition, MeasureId};
use flagcheck_core::rng::stream;
use flagcheck_core::search::{search_violation, SearchOptions};
use flagcheck_core::state::{partial_transpose, tensor, PureState};
use flagcheck_core::sweep::{sweep, tally, SweepSpec};
use flagcheck_core::Theory;
use flagcheck_verify::{criterion, ensure, worst, Outcome};
use statrs::distribution::{Binomial, DiscreteCDF};

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn all_hold(results: &[CheckResult], bound: f64, what: &str) -> Result<f64, String> {
    let bad = results.iter().filter(|r| r.verdict != Verdict::Holds || r.violation > bound).count();
    let w = worst(results.iter().map(|r| r.violation));
    ensure(bad == 0, || format!("{what}: {bad}/{} fail (worst {w:.3e})", results.len()))?;
    Ok(w)
}

fn ac1(exec: &Executor) -> Result<String, String> {
    let mut parts = Vec::new();
    for id in [MeasureId::CL1, MeasureId::CRelEnt] {
        let c = Checker::for_measure(id).with_tol(1e-7);
        for p in [Property::FlagAdditivity, Property::StrongMono, Property::Convexity] {
            let rs = sweep(&c, &SweepSpec::new(p, 1000, vec![2, 3, 4], 1), exec).map_err(|e| e.to_string())?;
            let w = all_hold(&rs, 1e-7, &format!("{id} {p}"))?;
            parts.push(format!("{id}/{p} {w:.1e}"));
        }
    }
    Ok(format!("6 x 1000 instances hold at 1e-7; worst {}", parts.join(", ")))
}

fn ac2(exec: &Executor) -> Result<String, String> {
    let c = Checker::for_measure(MeasureId::CTr);
    let out = search_violation(&c, Property::StrongMono, 3, 100_000, 11, &SearchOptions::default(), exec)
        .map_err(|e| e.to_string())?;
    let mut msgs = vec![format!("search best {:.4e} in {} evals", out.best_violation, out.evaluations)];
    let mut ok = out.best_violation >= 1e-3 && out.evaluations <= 100_000;
    let Instance::StateChannel { rho, channel } = Instance::from_text(&out.instance).map_err(|e| e.to_string())? else {
        return Err("search witness is not a state/channel pair".into());
    };
    match c.bridge_mono_violation_to_flag(&rho, &channel, None) {
        Ok(b) => {
            let diff = (b.flag_sup.violation - b.mono.violation).abs();
            ok &= diff <= 2e-6;
            msgs.push(format!(
                "bridge flag_sup {:.4e} vs mono {:.4e} (|diff| {diff:.3e}, needs <= 2e-6; M(rho) - M(flagged) = {:.4e})",
                b.flag_sup.violation, b.mono.violation, b.monotone_gap
            ));
            let sub = c.flag_sub(&b.ensemble, &b.basis).map_err(|e| e.to_string())?;
            ok &= sub.holds();
            msgs.push(format!("flag_sub on bridged ensemble {}", sub.verdict));
            println!(
                "INFO     bookkeeping: flag_sup - mono - gap = {:.3e}; sound = {}",
                b.flag_sup.violation - b.mono.violation - b.monotone_gap,
                b.sound
            );
            if let Ok(back) = c.bridge_flag_violation_to_mono(&b.ensemble, &b.basis) {
                println!(
                    "INFO     round trip: mono on flagged pair {:.4e}, flag_sup {:.4e} (|diff| {:.3e}), original mono {:.4e}",
                    back.mono.violation,
                    b.flag_sup.violation,
                    (back.mono.violation - b.flag_sup.violation).abs(),
                    b.mono.violation
                );
            }
        }
        Err(e) => {
            ok = false;
            msgs.push(format!("bridge failed: {e}"));
        }
    }
    let c6 = Checker::for_measure(MeasureId::CTr).with_tol(1e-6);
    for p in [Property::FlagSub, Property::Convexity] {
        let rs = sweep(&c6, &SweepSpec::new(p, 1000, vec![3], 2), exec).map_err(|e| e.to_string())?;
        let t = tally(&rs);
        ok &= t.holds == 1000;
        msgs.push(format!("{p} {}/1000 hold", t.holds));
    }
    let text = msgs.join("; ");
    if ok {
        Ok(text)
    } else {
        Err(text)
    }
}

fn ac3() -> Result<String, String> {
    let rel = Checker::for_measure(MeasureId::CRelEnt);
    let l1 = Checker::for_measure(MeasureId::CL1);
    let gen = InstanceGen::new(Theory::Coherence, 2);
    let (mut expansion, mut flag_add, mut mult) = (0.0f64, 0.0f64, 0.0f64);
    let mut two_copy_fails = 0;
    for i in 0..500 {
        let mut rng = stream(3, i);
        let (r, s) = (gen.state(&mut rng), gen.state(&mut rng));
        let w = rel.omega_identity(&r, &s).map_err(|e| e.to_string())?;
        ensure(w.verdict != Verdict::Inconclusive, || format!("pair {i}: {:?}", w.reason))?;
        expansion = expansion.max(w.detail("expansion_residual").unwrap_or(f64::INFINITY).abs());
        flag_add = flag_add.max(w.residual.abs());
        if l1.two_copy(&r).map_err(|e| e.to_string())?.is_violated() {
            two_copy_fails += 1;
        }
        let joint = tensor(&r, &s).map_err(|e| e.to_string())?;
        mult = mult.max(((1.0 + c_l1(&joint)) - (1.0 + c_l1(&r)) * (1.0 + c_l1(&s))).abs());
    }
    let text = format!(
        "c_rel_ent omega expansion {expansion:.2e} (<= 1e-9), flag additivity {flag_add:.2e} (<= 1e-8); c_l1 two_copy violated {two_copy_fails}/500, multiplicativity {mult:.2e} (<= 1e-9)"
    );
    ensure(expansion <= 1e-9 && flag_add <= 1e-8 && two_copy_fails == 500 && mult <= 1e-9, || text.clone())?;
    Ok(text)
}

fn ac4(exec: &Executor) -> Result<String, String> {
    let c = Checker::for_measure(MeasureId::Negativity).with_tol(1e-9);
    let rs = sweep(&c, &SweepSpec::new(Property::FlagAdditivity, 500, vec![2], 4), exec).map_err(|e| e.to_string())?;
    let w = all_hold(&rs, 1e-9, "negativity flag_additivity")?;
    let s = 1.0 / 2f64.sqrt();
    let bell = PureState::new(vec![C64::new(s, 0.0), ZERO, ZERO, C64::new(s, 0.0)], vec![2, 2])
        .unwrap()
        .projector();
    let mut spec = eigvalsh(&partial_transpose(&bell, 1).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    spec.sort_by(f64::total_cmp);
    let oracle = worst(spec.iter().zip([-0.5, 0.5, 0.5, 0.5]).map(|(a, b)| (a - b).abs()));
    let n = negativity(&bell, &Bipartition::first_vs_rest()).map_err(|e| e.to_string())?;
    let text = format!("500 ensembles worst residual {w:.2e}; Bell N = {n} (oracle spectrum error {oracle:.1e})");
    ensure((n - 0.5).abs() <= 1e-12 && oracle <= 1e-12, || text.clone())?;
    Ok(text)
}

fn ac5() -> Result<String, String> {
    let rel = Checker::for_measure(MeasureId::CRelEnt);
    let gen = InstanceGen::new(Theory::Coherence, 2);
    let mut spread = 0.0f64;
    for i in 0..20 {
        let reg = rel.regularization(&gen.state(&mut stream(5, i)), 5).map_err(|e| e.to_string())?;
        let v0 = reg.values[0].1;
        spread = spread.max(worst(reg.values.iter().map(|(_, v)| (v - v0).abs())));
    }
    let basis = FlagBasis::computational(2, 2, Theory::Coherence).unwrap();
    let (mut rec, mut eps, mut sandwich) = (0.0f64, 0.0f64, 0.0f64);
    let mut failed = Vec::new();
    let checkers = [Checker::for_measure(MeasureId::CRelEnt), Checker::for_measure(MeasureId::CL1)];
    for (g, &p1) in [0.3, 0.5].iter().enumerate() {
        for n in 1..=6 {
            for &d in &[0.0, 0.3, 0.5] {
                let mut rng = stream(50 + g as u64, n as u64);
                let (r1, r2) = (gen.state(&mut rng), gen.state(&mut rng));
                let td = typical_decomposition(&r1, &r2, p1, &basis, n, d).map_err(|e| e.to_string())?;
                rec = rec.max(td.reconstruction_residual().map_err(|e| e.to_string())?);
                let b = Binomial::new(p1, n as u64).unwrap();
                let (lo, hi) = td.k_range;
                let below = if lo == 0 { 0.0 } else { b.cdf(lo as u64 - 1) };
                eps = eps.max((td.epsilon - (below + 1.0 - b.cdf(hi as u64))).abs());
                for c in &checkers {
                    let r = c.sandwich(&r1, &r2, p1, &basis, n, d).map_err(|e| e.to_string())?;
                    sandwich = sandwich.max(r.violation);
                    if !r.holds() {
                        failed.push(format!("{} p1={p1} N={n} d={d}", c.desc.id));
                    }
                }
            }
        }
    }
    let text = format!(
        "per-copy spread {spread:.2e}; reconstruction {rec:.2e}; epsilon vs binomial {eps:.2e}; sandwich worst violation {sandwich:.2e} over 36 cells{}",
        if failed.is_empty() { String::new() } else { format!("; failing {}", failed.join(", ")) }
    );
    ensure(spread <= 1e-9 && rec <= 1e-12 && eps <= 1e-12 && failed.is_empty(), || text.clone())?;
    Ok(text)
}

fn config(command: CommandKind, measures: &[MeasureId], props: &[Property]) -> RunConfig {
    let mut c = RunConfig::new(command);
    c.measures = measures.to_vec();
    c.properties = props.to_vec();
    c.master_seed = 6;
    c
}

fn ac6() -> Result<String, String> {
    let mut check = config(
        CommandKind::Check,
        &[MeasureId::CL1, MeasureId::CTr, MeasureId::Negativity],
        &[Property::FlagSup, Property::StrongMono, Property::Convexity, Property::TwoCopy],
    );
    check.trials = 40;
    check.dims = vec![2, 3];
    let mut search = config(CommandKind::Search, &[MeasureId::CTr], &[Property::StrongMono]);
    search.budget = 6000;
    let mut reg = config(CommandKind::Regularize, &[MeasureId::CRelEnt, MeasureId::CL1], &[]);
    reg.dims = vec![2];
    reg.sandwich = true;
    reg.trials = 6;
    let mut sizes = Vec::new();
    for cfg in [check, search, reg] {
        let base = run(&cfg, &Executor::sequential()).map_err(|e| e.to_string())?.to_json();
        let echoed = config_from_json(&base).map_err(|e| e.to_string())?;
        for threads in [1, 2, 4, 0] {
            let again = run(&echoed, &Executor::with_threads(threads)).map_err(|e| e.to_string())?.to_json();
            ensure(again == base, || format!("{} report differs at {threads} thread(s)", cfg.command.as_str()))?;
        }
        sizes.push(format!("{} {} bytes", cfg.command.as_str(), base.len()));
    }
    Ok(format!("echoed configs regenerate byte-identical reports at 1, 2, 4 and all threads ({})", sizes.join(", ")))
}

fn ac7(exec: &Executor) -> Result<String, String> {
    let mut parts = Vec::new();
    for id in MeasureId::ALL {
        let desc = id.descriptor();
        let dims: &[usize] = match id {
            MeasureId::Eof2q => &[2],
            MeasureId::Negativity => &[2, 3],
            _ => &[2, 3, 4],
        };
        let (mut faith, mut mono) = (0.0f64, f64::NEG_INFINITY);
        let mut unconverged = 0;
        for i in 0..500u64 {
            let gen = InstanceGen::new(desc.theory, dims[i as usize % dims.len()]);
            let mut rng = stream(7, i);
            let free = gen.free_state(&mut rng);
            let m_free = evaluate(&desc, &free).map_err(|e| e.to_string())?;
            faith = faith.max(m_free.value.abs());
            let rho = gen.state(&mut rng);
            let ch = gen.free_channel(&mut rng).map_err(|e| e.to_string())?;
            let before = evaluate(&desc, &rho).map_err(|e| e.to_string())?;
            let after = evaluate(&desc, &apply(&ch, &rho).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
            unconverged += [&m_free, &before, &after].iter().filter(|r| !r.converged).count();
            mono = mono.max(after.value - before.value);
        }
        ensure(faith <= 1e-6 && mono <= 1e-6 && unconverged == 0, || {
            format!("{id}: faithfulness {faith:.2e}, monotonicity {mono:.2e}, unconverged {unconverged}")
        })?;
        let padding = if id == MeasureId::Eof2q {
            "padding n/a".to_string()
        } else {
            let c = Checker::for_measure(id).with_tol(1e-6);
            let rs = sweep(&c, &SweepSpec::new(Property::FreePadding, 500, dims.to_vec(), 8), exec).map_err(|e| e.to_string())?;
            format!("padding {:.1e}", all_hold(&rs, 1e-6, &format!("{id} free_padding"))?)
        };
        parts.push(format!("{id}: M1 {faith:.1e} M2 {mono:.1e} {padding}"));
    }
    Ok(parts.join("; "))
}

/// ε(N) strictly decreasing for N ≤ 12 at fixed p₁ and δ > 0.
fn epsilon_monotone() -> Result<String, String> {
    let mut breaks = Vec::new();
    let mut cells = 0;
    for &p1 in &[0.1, 0.2, 0.3, 0.4, 0.5] {
        for &d in &[0.1, 0.3, 0.5] {
            cells += 1;
            let mut prev: Option<f64> = None;
            for n in 1..=12 {
                let (lo, hi) = typical_range(n, p1, d);
                let e = 1.0 - (lo..=hi).map(|k| binomial(n, k) * p1.powi(k as i32) * (1.0 - p1).powi((n - k) as i32)).sum::<f64>();
                if prev.is_some_and(|p| e >= p && e > 0.0) {
                    breaks.push(format!("p1={p1} d={d} N={n}"));
                    break;
                }
                prev = Some(e);
            }
        }
    }
    let text = format!("{}/{cells} grid cells decrease for N <= 12", cells - breaks.len());
    if breaks.is_empty() {
        Ok(text)
    } else {
        Err(format!("{text}; first increases at {}", breaks.join(", ")))
    }
}

fn main() {
    let exec = Executor::with_threads(0);
    println!("acceptance criteria ({} worker thread(s))", exec.threads());
    let outcomes: Vec<Outcome> = vec![
        criterion("AC1", secs(60), || ac1(&exec)),
        criterion("AC2", secs(600), || ac2(&exec)),
        criterion("AC3", secs(60), ac3),
        criterion("AC4", secs(30), || ac4(&exec)),
        criterion("AC5", secs(300), ac5),
        criterion("AC6", None, ac6),
        criterion("AC7", secs(120), || ac7(&exec)),
        criterion("INV-eps", None, epsilon_monotone),
    ];
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id.as_str()).collect();
    println!("{} of {} criteria pass", outcomes.len() - failed.len(), outcomes.len());
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
