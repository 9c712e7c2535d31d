//! Random instances for sweeps: states, ensembles, free channels and free
//! padding states of a given theory, and the replayable [`Instance`] record.
//!
//! Coherence instances live on a single system of dimension d. Entanglement
//! instances live on [d, d] with party A the first subsystem; flag registers
//! and padding are appended on the right and counted with party B.

use rand::Rng;

use crate::channel::{embed_local, random_channel, random_incoherent_channel, Ensemble, KrausChannel, Side};
use crate::error::{Error, Result};
use crate::format::{read_flags, read_kraus, read_qstate, write_flags, write_kraus, write_qstate};
use crate::flags::{default_flag_basis, FlagBasis};
use crate::rng::simplex_point;
use crate::state::{random_density_with_dims, random_incoherent, random_separable, DensityMatrix};
use crate::Theory;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InstanceGen {
    pub theory: Theory,
    /// Local dimension.
    pub dim: usize,
    pub max_ensemble: usize,
    pub max_kraus: usize,
}

impl InstanceGen {
    pub fn new(theory: Theory, dim: usize) -> Self {
        Self { theory, dim, max_ensemble: 4, max_kraus: 6 }
    }

    pub fn state_dims(&self) -> Vec<usize> {
        match self.theory {
            Theory::Coherence => vec![self.dim],
            Theory::Entanglement => vec![self.dim, self.dim],
        }
    }

    /// Random state of random rank.
    pub fn state(&self, rng: &mut impl Rng) -> DensityMatrix {
        let dims = self.state_dims();
        let d: usize = dims.iter().product();
        let rank = rng.gen_range(1..=d);
        random_density_with_dims(dims, rank, rng).expect("rank within dimension")
    }

    pub fn full_rank_state(&self, rng: &mut impl Rng) -> DensityMatrix {
        let dims = self.state_dims();
        let d: usize = dims.iter().product();
        random_density_with_dims(dims, d, rng).expect("rank within dimension")
    }

    pub fn ensemble_of_size(&self, n: usize, rng: &mut impl Rng) -> Ensemble {
        let weights = simplex_point(rng, n);
        let states = (0..n).map(|_| self.state(rng)).collect();
        Ensemble::new(weights, states).expect("valid by construction")
    }

    /// Ensemble of random size 1..=max_ensemble.
    pub fn ensemble(&self, rng: &mut impl Rng) -> Ensemble {
        let n = rng.gen_range(1..=self.max_ensemble.max(1));
        self.ensemble_of_size(n, rng)
    }

    pub fn flag_basis(&self, n: usize) -> FlagBasis {
        default_flag_basis(self.theory, n).expect("flag count fits the register")
    }

    /// Random free channel with 1..=max_kraus operators: incoherent for
    /// coherence, one-sided local for entanglement.
    pub fn free_channel(&self, rng: &mut impl Rng) -> Result<KrausChannel> {
        let n = rng.gen_range(1..=self.max_kraus.max(1));
        self.free_channel_with(n, rng)
    }

    pub fn free_channel_with(&self, n_kraus: usize, rng: &mut impl Rng) -> Result<KrausChannel> {
        match self.theory {
            Theory::Coherence => random_incoherent_channel(self.dim, n_kraus, rng),
            Theory::Entanglement => {
                let local = random_channel(self.dim, self.dim, n_kraus, rng)?;
                let side = if rng.gen::<bool>() { Side::Left } else { Side::Right };
                embed_local(&local, self.dim, side)
            }
        }
    }

    pub fn free_state(&self, rng: &mut impl Rng) -> DensityMatrix {
        match self.theory {
            Theory::Coherence => random_incoherent(self.state_dims(), rng),
            Theory::Entanglement => {
                let terms = rng.gen_range(1..=4);
                random_separable(self.dim, self.dim, terms, rng)
            }
        }
    }

    /// Free state to append to an instance: dimension 2 or 3 for coherence,
    /// a separable state on [2, 2] for entanglement.
    pub fn padding_state(&self, rng: &mut impl Rng) -> DensityMatrix {
        match self.theory {
            Theory::Coherence => {
                let d = rng.gen_range(2..=3);
                random_incoherent(vec![d], rng)
            }
            Theory::Entanglement => {
                let terms = rng.gen_range(1..=3);
                random_separable(2, 2, terms, rng)
            }
        }
    }
}

/// A concrete instance of one check, serialisable for standalone replay.
#[derive(Clone, Debug)]
pub enum Instance {
    Ensemble { ensemble: Ensemble, basis: FlagBasis },
    StateChannel { rho: DensityMatrix, channel: KrausChannel },
    State { rho: DensityMatrix },
    Copies { rho: DensityMatrix, n: usize },
    Pair { rho: DensityMatrix, sigma: DensityMatrix },
    Padding { rho: DensityMatrix, delta: DensityMatrix },
    Sandwich {
        rho1: DensityMatrix,
        rho2: DensityMatrix,
        p1: f64,
        basis: FlagBasis,
        n: usize,
        delta_typ: f64,
    },
}

fn section(out: &mut String, name: &str, body: &str) {
    out.push_str(&format!("begin {name}\n{body}"));
    if !body.ends_with('\n') {
        out.push('\n');
    }
    out.push_str(&format!("end {name}\n"));
}

fn header_value<'a>(header: &'a str, key: &str) -> Option<&'a str> {
    header
        .split_whitespace()
        .filter_map(|t| t.split_once('='))
        .find(|(k, _)| *k == key)
        .map(|(_, v)| v)
}

fn bad(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

impl Instance {
    pub fn kind(&self) -> &'static str {
        match self {
            Instance::Ensemble { .. } => "ensemble",
            Instance::StateChannel { .. } => "state_channel",
            Instance::State { .. } => "state",
            Instance::Copies { .. } => "copies",
            Instance::Pair { .. } => "pair",
            Instance::Padding { .. } => "padding",
            Instance::Sandwich { .. } => "sandwich",
        }
    }

    /// `instance 1 kind=<kind> [params]` followed by `begin`/`end` sections
    /// holding QSTATE, KRAUS and FLAGS documents.
    pub fn to_text(&self) -> String {
        let mut out = format!("instance 1 kind={}", self.kind());
        match self {
            Instance::Copies { n, .. } => out.push_str(&format!(" n={n}")),
            Instance::Sandwich { p1, n, delta_typ, .. } => {
                out.push_str(&format!(" p1={p1} n={n} delta_typ={delta_typ}"))
            }
            _ => {}
        }
        out.push('\n');
        match self {
            Instance::Ensemble { ensemble, basis } => {
                let w: Vec<String> = ensemble.weights().iter().map(|w| format!("{w}\n")).collect();
                section(&mut out, "weights", &w.concat());
                for st in ensemble.states() {
                    section(&mut out, "state", &write_qstate(st));
                }
                section(&mut out, "flags", &write_flags(basis));
            }
            Instance::StateChannel { rho, channel } => {
                section(&mut out, "state", &write_qstate(rho));
                section(&mut out, "channel", &write_kraus(channel));
            }
            Instance::State { rho } | Instance::Copies { rho, .. } => {
                section(&mut out, "state", &write_qstate(rho));
            }
            Instance::Pair { rho, sigma } => {
                section(&mut out, "state", &write_qstate(rho));
                section(&mut out, "state", &write_qstate(sigma));
            }
            Instance::Padding { rho, delta } => {
                section(&mut out, "state", &write_qstate(rho));
                section(&mut out, "state", &write_qstate(delta));
            }
            Instance::Sandwich { rho1, rho2, basis, .. } => {
                section(&mut out, "state", &write_qstate(rho1));
                section(&mut out, "state", &write_qstate(rho2));
                section(&mut out, "flags", &write_flags(basis));
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut header: Option<(usize, &str)> = None;
        let mut sections: Vec<(usize, &str, String)> = Vec::new();
        let mut open: Option<(usize, &str, String)> = None;
        for (i, raw) in text.lines().enumerate() {
            let no = i + 1;
            let line = raw.trim();
            if let Some((start, name, body)) = open.as_mut() {
                if line.strip_prefix("end ").map(str::trim) == Some(*name) {
                    sections.push((*start, *name, std::mem::take(body)));
                    open = None;
                } else {
                    body.push_str(line);
                    body.push('\n');
                }
                continue;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix("begin ") {
                open = Some((no, name.trim(), String::new()));
            } else if header.is_none() && line.starts_with("instance ") {
                header = Some((no, line));
            } else {
                return Err(bad(no, format!("unexpected line `{line}`")));
            }
        }
        if let Some((start, name, _)) = open {
            return Err(bad(start, format!("section `{name}` is not closed")));
        }
        let (hline, htext) = header.ok_or_else(|| bad(1, "missing `instance` header"))?;
        if htext.split_whitespace().nth(1) != Some("1") {
            return Err(bad(hline, "unsupported instance version"));
        }
        let kind = header_value(htext, "kind").ok_or_else(|| bad(hline, "missing `kind`"))?;
        let param = |key: &str| -> Result<f64> {
            header_value(htext, key)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| bad(hline, format!("missing or bad `{key}`")))
        };
        let count = |key: &str| -> Result<usize> {
            header_value(htext, key)
                .and_then(|v| v.parse::<usize>().ok())
                .ok_or_else(|| bad(hline, format!("missing or bad `{key}`")))
        };
        let of = |name: &str| -> Vec<&(usize, &str, String)> {
            sections.iter().filter(|s| s.1 == name).collect()
        };
        let states = of("state")
            .iter()
            .map(|s| read_qstate(&s.2))
            .collect::<Result<Vec<_>>>()?;
        let want_states = |n: usize| -> Result<()> {
            if states.len() != n {
                return Err(bad(hline, format!("kind `{kind}` needs {n} state sections, found {}", states.len())));
            }
            Ok(())
        };
        let flags = || -> Result<FlagBasis> {
            match of("flags").as_slice() {
                [one] => read_flags(&one.2),
                _ => Err(bad(hline, "expected exactly one flags section")),
            }
        };
        let mut st = states.clone().into_iter();
        Ok(match kind {
            "ensemble" => {
                let weights = match of("weights").as_slice() {
                    [one] => one
                        .2
                        .lines()
                        .map(|l| l.trim().parse::<f64>().map_err(|_| bad(one.0, format!("bad weight `{l}`"))))
                        .collect::<Result<Vec<_>>>()?,
                    _ => return Err(bad(hline, "expected exactly one weights section")),
                };
                let ensemble = Ensemble::new(weights, states)?;
                Instance::Ensemble { ensemble, basis: flags()? }
            }
            "state_channel" => {
                want_states(1)?;
                let channel = match of("channel").as_slice() {
                    [one] => read_kraus(&one.2)?,
                    _ => return Err(bad(hline, "expected exactly one channel section")),
                };
                Instance::StateChannel { rho: st.next().unwrap(), channel }
            }
            "state" => {
                want_states(1)?;
                Instance::State { rho: st.next().unwrap() }
            }
            "copies" => {
                want_states(1)?;
                Instance::Copies { rho: st.next().unwrap(), n: count("n")? }
            }
            "pair" | "padding" => {
                want_states(2)?;
                let (a, b) = (st.next().unwrap(), st.next().unwrap());
                if kind == "pair" {
                    Instance::Pair { rho: a, sigma: b }
                } else {
                    Instance::Padding { rho: a, delta: b }
                }
            }
            "sandwich" => {
                want_states(2)?;
                Instance::Sandwich {
                    rho1: st.next().unwrap(),
                    rho2: st.next().unwrap(),
                    p1: param("p1")?,
                    basis: flags()?,
                    n: count("n")?,
                    delta_typ: param("delta_typ")?,
                }
            }
            other => return Err(bad(hline, format!("unknown instance kind `{other}`"))),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{is_incoherent, is_one_local};
    use crate::flags::validate_flag_basis;
    use crate::rng::stream;

    #[test]
    fn generated_objects_are_free_and_valid() {
        for theory in [Theory::Coherence, Theory::Entanglement] {
            for seed in 0..30 {
                let mut rng = stream(1, seed);
                let gen = InstanceGen::new(theory, 2 + (seed % 2) as usize);
                let ens = gen.ensemble(&mut rng);
                assert!(ens.len() <= 4);
                let basis = gen.flag_basis(ens.len());
                assert!(validate_flag_basis(&basis));
                let ch = gen.free_channel(&mut rng).unwrap();
                match theory {
                    Theory::Coherence => assert!(is_incoherent(&ch)),
                    Theory::Entanglement => assert!(is_one_local(&ch, 1)),
                }
                gen.state(&mut rng).validate().unwrap();
                gen.free_state(&mut rng).validate().unwrap();
            }
        }
    }
}
