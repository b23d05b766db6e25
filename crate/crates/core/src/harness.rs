//! Experiment orchestration: resolves a config against an instance file,
//! runs seeded Monte-Carlo protocol trials over a horizon grid, and emits
//! regret reports.
//!
//! Trial seeds are derived by stable hashing of (base seed, horizon,
//! trial), so adding horizons or trials never perturbs existing ones, and
//! identical configs produce byte-identical reports modulo the timestamp
//! field. Regret is recomputed per trial by an exhaustive comparator
//! sweep, independent of the protocol's incremental accounting.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adversary::{
    make_fragmentation_adversary_from, make_threshold_hiding_adversary, Adversary, LabelRule,
};
use crate::coupling::couple_step;
use crate::error::{Error, Result};
use crate::hypothesis::HypothesisFamily;
use crate::instance::{load_instance, Instance};
use crate::learner::{make_hedge_cover_learner, Learner};
use crate::profile::ToleranceProfile;
use crate::protocol::{derive_seed3, regret, run_protocol};
use crate::smoothness::{
    construct_certificate, fragmentation_number, tolerance_profile, FragmentationWitness,
    SearchMode, PACKING_DP_CUTOFF,
};
use crate::space::{Distribution, Subset};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub instance: String,
    pub horizons: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub learner: LearnerSpec,
    pub adversary: AdversarySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LearnerSpec {
    Erm {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        family: Option<String>,
    },
    HedgeCover {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        family: Option<String>,
        eps: f64,
        /// Scales for an explicit certificate construction; when empty
        /// the instance's base measure and its exact tolerance profile
        /// are used instead.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        eps_seq: Vec<f64>,
    },
    Constant {
        value: bool,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AdversarySpec {
    Iid {
        member: usize,
        target: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        family: Option<String>,
    },
    Oblivious {
        schedule: Vec<usize>,
        /// "coin", "zero", "one", or unset when `target` is given.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        family: Option<String>,
    },
    ThresholdHiding {
        eps: f64,
        depth: u32,
        probe_budget: usize,
    },
    FragmentationLb {
        eps: f64,
        d: usize,
    },
}

impl AdversarySpec {
    pub fn is_lower_bound(&self) -> bool {
        matches!(
            self,
            AdversarySpec::ThresholdHiding { .. } | AdversarySpec::FragmentationLb { .. }
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub eps: f64,
    /// Certificate scales for the coupling's base measure; when empty the
    /// instance base and its exact tolerance profile are used.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eps_seq: Vec<f64>,
}

impl ExperimentConfig {
    /// Loads a config, re-anchoring the instance path relative to the
    /// config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))?;
        let mut config: ExperimentConfig =
            toml::from_str(&text).map_err(|e| Error::Malformed(e.to_string()))?;
        if let Some(dir) = path.parent() {
            let joined = dir.join(&config.instance);
            if joined.exists() {
                config.instance = joined.to_string_lossy().into_owned();
            }
        }
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::input("need at least one trial"));
        }
        if self.horizons.is_empty() {
            return Err(Error::input("need at least one horizon"));
        }
        for w in self.horizons.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::input("horizons must be strictly ascending"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub t: usize,
    pub trial: usize,
    pub regret: f64,
    pub expected_regret: f64,
    pub dummy_rounds: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HorizonStats {
    pub t: usize,
    pub mean_regret: f64,
    pub stderr_regret: f64,
    pub mean_expected_regret: f64,
    pub stderr_expected_regret: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegretReport {
    pub rows: Vec<TrialRecord>,
    pub per_horizon: Vec<HorizonStats>,
    /// Least-squares slope of `ln(mean expected regret)` against `ln T`.
    pub slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate_hash: Option<String>,
    /// Fragmentation numbers consulted while resolving the experiment,
    /// as (eps, count) pairs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fragmentation: Vec<(f64, usize)>,
    pub timestamp_unix: u64,
}

struct Resolved {
    instance: Instance,
    hedge_base: Option<(Distribution, ToleranceProfile)>,
    coupling: Option<(f64, Vec<Subset>)>, // (eps, kept mask per member)
    /// Cached witness for lower-bound adversaries (computed once, the
    /// exact dynamic program is too heavy to rerun per trial).
    lb_witness: Option<FragmentationWitness>,
    certificate_hash: Option<String>,
    fragmentation: Vec<(f64, usize)>,
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn profile_grid(mu0: &Distribution) -> Vec<f64> {
    if mu0.space().atom_count() <= 20 {
        let mut masses = mu0.all_subset_masses().expect("guarded");
        masses.sort_by(|a, b| a.partial_cmp(b).unwrap());
        masses.dedup();
        masses
    } else {
        (0..=1024).map(|i| i as f64 / 1024.0).collect()
    }
}

/// Base measure and profile for learners and couplings: an explicit
/// certificate when scales are given, otherwise the instance's base with
/// its exact tolerance profile (which is a valid certificate by
/// construction).
fn base_and_profile(
    instance: &Instance,
    eps_seq: &[f64],
) -> Result<(Distribution, ToleranceProfile, String)> {
    if eps_seq.is_empty() {
        let base = instance
            .base
            .clone()
            .ok_or_else(|| Error::input("instance has no [base] and no eps_seq was given"))?;
        let grid = profile_grid(&base);
        let profile = tolerance_profile(&instance.family, &base, &grid)?;
        let hash = profile_hash(&base, &profile);
        Ok((base, profile, hash))
    } else {
        let build = construct_certificate(&instance.family, eps_seq)?;
        if !build.certificate.verified {
            return Err(Error::input(
                "constructed certificate failed verification".to_string(),
            ));
        }
        let hash = profile_hash(&build.certificate.base, &build.certificate.profile);
        Ok((build.certificate.base, build.certificate.profile, hash))
    }
}

fn profile_hash(base: &Distribution, profile: &ToleranceProfile) -> String {
    let mut text = String::new();
    for p in base.probs() {
        text.push_str(&format!("{p:.17e};"));
    }
    for (z, v) in profile.breakpoints() {
        text.push_str(&format!("{z:.17e},{v:.17e};"));
    }
    format!("{:016x}", fnv1a64(text.as_bytes()))
}

fn resolve(config: &ExperimentConfig) -> Result<Resolved> {
    let instance = load_instance(&config.instance)?;
    let mut fragmentation = Vec::new();
    let mut certificate_hash = None;

    let hedge_base = match &config.learner {
        LearnerSpec::HedgeCover { eps_seq, .. } => {
            let (base, profile, hash) = base_and_profile(&instance, eps_seq)?;
            certificate_hash = Some(hash);
            Some((base, profile))
        }
        _ => None,
    };

    let mut lb_witness = None;
    match &config.adversary {
        AdversarySpec::ThresholdHiding { eps, .. } | AdversarySpec::FragmentationLb { eps, .. } => {
            let mode = if instance.space.atom_count() <= PACKING_DP_CUTOFF {
                SearchMode::Exact
            } else {
                SearchMode::Greedy
            };
            let w = fragmentation_number(&instance.family, *eps, mode)?;
            fragmentation.push((*eps, w.count));
            lb_witness = Some(w);
        }
        _ => {}
    }

    let coupling = match &config.coupling {
        None => None,
        Some(spec) => {
            let (base, profile, hash) = base_and_profile(&instance, &spec.eps_seq)?;
            certificate_hash.get_or_insert(hash);
            let kept: Vec<Subset> = instance
                .family
                .members()
                .iter()
                .map(|m| couple_step(m, &base, &profile, spec.eps).map(|s| s.kept_mask))
                .collect::<Result<_>>()?;
            Some((spec.eps, kept))
        }
    };

    Ok(Resolved {
        instance,
        hedge_base,
        coupling,
        lb_witness,
        certificate_hash,
        fragmentation,
    })
}

fn comparator_name<'a>(learner: &'a LearnerSpec, adversary: &'a AdversarySpec) -> Option<&'a str> {
    let from_learner = match learner {
        LearnerSpec::Erm { family } | LearnerSpec::HedgeCover { family, .. } => family.as_deref(),
        LearnerSpec::Constant { .. } => None,
    };
    from_learner.or(match adversary {
        AdversarySpec::Iid { family, .. } | AdversarySpec::Oblivious { family, .. } => {
            family.as_deref()
        }
        _ => None,
    })
}

fn build_for_horizon(
    config: &ExperimentConfig,
    resolved: &Resolved,
    t: usize,
) -> Result<(Adversary, Learner, HypothesisFamily)> {
    let instance = &resolved.instance;
    let named_comparator = || -> Result<HypothesisFamily> {
        match comparator_name(&config.learner, &config.adversary) {
            Some(name) => Ok(instance.hypothesis_family(name)?.clone()),
            None => instance
                .hypothesis_families
                .first()
                .map(|(_, f)| f.clone())
                .ok_or_else(|| Error::input("instance has no hypothesis family")),
        }
    };

    let (adversary, comparator) = match &config.adversary {
        AdversarySpec::Iid { member, target, .. } => {
            let comparator = named_comparator()?;
            if *member >= instance.family.len() || *target >= comparator.len() {
                return Err(Error::input("iid member or target out of range"));
            }
            (
                Adversary::iid(*member, *target, comparator.member(*target)),
                comparator,
            )
        }
        AdversarySpec::Oblivious {
            schedule,
            label,
            target,
            ..
        } => {
            let comparator = named_comparator()?;
            let rule = match (target, label.as_deref()) {
                (Some(i), _) => LabelRule::Target {
                    index: *i,
                    mask: comparator.member(*i),
                },
                (None, Some("coin")) | (None, None) => LabelRule::Coin,
                (None, Some("zero")) => LabelRule::Constant(false),
                (None, Some("one")) => LabelRule::Constant(true),
                (None, Some(other)) => {
                    return Err(Error::input(format!("unknown label rule {other:?}")))
                }
            };
            (Adversary::oblivious(schedule.clone(), rule)?, comparator)
        }
        AdversarySpec::ThresholdHiding {
            depth,
            probe_budget,
            ..
        } => {
            let witness = resolved.lb_witness.as_ref().expect("resolved for lb");
            make_threshold_hiding_adversary(&instance.family, witness, *depth, *probe_budget)?
        }
        AdversarySpec::FragmentationLb { eps, d } => {
            let witness = resolved.lb_witness.as_ref().expect("resolved for lb");
            make_fragmentation_adversary_from(&instance.family, witness, *eps, *d, t)?
        }
    };

    let learner = match &config.learner {
        LearnerSpec::Erm { .. } => Learner::erm(comparator.clone()),
        LearnerSpec::Constant { value } => Learner::constant(instance.space.atom_count(), *value),
        LearnerSpec::HedgeCover { eps, .. } => {
            let (base, profile) = resolved
                .hedge_base
                .as_ref()
                .expect("resolved for hedge learner");
            make_hedge_cover_learner(&comparator, base, profile, *eps, t)?.learner
        }
    };
    Ok((adversary, learner, comparator))
}

/// Runs the full experiment grid. Deterministic given the config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RegretReport> {
    config.validate()?;
    let resolved = resolve(config)?;

    let mut rows = Vec::with_capacity(config.horizons.len() * config.trials);
    for &t in &config.horizons {
        for trial in 0..config.trials {
            let (mut adversary, mut learner, comparator) = build_for_horizon(config, &resolved, t)?;
            let seed = derive_seed3(config.seed, t as u64, trial as u64);
            let transcript = run_protocol(
                &mut adversary,
                &mut learner,
                &resolved.instance.family,
                t,
                seed,
            )
            .map_err(|e| Error::input(format!("(T={t}, trial={trial}): {e}")))?;

            // independent per-round consistency check of the incremental
            // loss accounting
            let recount: u64 = transcript
                .rounds
                .iter()
                .map(|r| (r.prediction != r.label) as u64)
                .sum();
            if recount != transcript.cumulative_loss() {
                return Err(Error::input(format!(
                    "(T={t}, trial={trial}): loss accounting mismatch"
                )));
            }

            let summary = regret(&transcript, &comparator);
            let dummy_rounds = match &resolved.coupling {
                None => 0,
                Some((_, kept)) => transcript
                    .rounds
                    .iter()
                    .filter(|r| !kept[r.member].contains(r.atom))
                    .count(),
            };
            rows.push(TrialRecord {
                t,
                trial,
                regret: summary.regret,
                expected_regret: summary.expected_regret,
                dummy_rounds,
            });
        }
    }

    let per_horizon = horizon_stats(&rows, &config.horizons);
    let slope = fit_loglog_slope(&per_horizon);
    let timestamp_unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Ok(RegretReport {
        rows,
        per_horizon,
        slope,
        certificate_hash: resolved.certificate_hash,
        fragmentation: resolved.fragmentation,
        timestamp_unix,
    })
}

fn horizon_stats(rows: &[TrialRecord], horizons: &[usize]) -> Vec<HorizonStats> {
    horizons
        .iter()
        .map(|&t| {
            let r: Vec<&TrialRecord> = rows.iter().filter(|x| x.t == t).collect();
            let (m1, s1) = mean_stderr(r.iter().map(|x| x.regret));
            let (m2, s2) = mean_stderr(r.iter().map(|x| x.expected_regret));
            HorizonStats {
                t,
                mean_regret: m1,
                stderr_regret: s1,
                mean_expected_regret: m2,
                stderr_expected_regret: s2,
            }
        })
        .collect()
}

fn mean_stderr(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn fit_loglog_slope(stats: &[HorizonStats]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = stats
        .iter()
        .filter(|s| s.mean_expected_regret > 0.0)
        .map(|s| ((s.t as f64).ln(), s.mean_expected_regret.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// CSV rows: `T,trial,regret,expected_regret,dummy_rounds`.
pub fn report_to_csv(report: &RegretReport) -> String {
    let mut out = String::from("T,trial,regret,expected_regret,dummy_rounds\n");
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.t, r.trial, r.regret, r.expected_regret, r.dummy_rounds
        ));
    }
    out
}

/// Plot-ready triples `T mean stderr` of the expected-regret column.
pub fn report_to_plotdata(report: &RegretReport) -> String {
    let mut out = String::new();
    for s in &report.per_horizon {
        out.push_str(&format!(
            "{} {} {}\n",
            s.t, s.mean_expected_regret, s.stderr_expected_regret
        ));
    }
    out
}

pub fn report_to_json(report: &RegretReport) -> Result<String> {
    serde_json::to_string_pretty(report).map_err(|e| Error::Malformed(e.to_string()))
}

pub fn report_from_json(text: &str) -> Result<RegretReport> {
    serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))
}
