//! Private learning over finite covers: the exponential mechanism, an
//! exact differential-privacy audit, and the reduction from private
//! learning on the base space to PAC learning of thresholds over parts.
//!
//! The mechanism weighs each cover hypothesis by `exp(-alpha * errors / 2)`
//! (error count has sensitivity 1, so the mechanism is `alpha`-private,
//! which `verify_dp` re-derives by brute force over all neighboring
//! datasets). A deterministic argmin-errors selector is provided as the
//! canonical non-private foil.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::HypothesisFamily;
use crate::space::{mass_ge, Distribution, Subset};

/// Labeled examples over the atoms of a space.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub examples: Vec<(usize, bool)>,
}

impl LabeledDataset {
    pub fn new(examples: Vec<(usize, bool)>) -> Self {
        LabeledDataset { examples }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

/// Number of examples a hypothesis misclassifies.
pub fn error_count(h: Subset, data: &LabeledDataset) -> u64 {
    data.examples
        .iter()
        .filter(|&&(x, y)| h.contains(x) != y)
        .count() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MechanismKind {
    /// `P(h) proportional to exp(-alpha * errors(h) / 2)`.
    Exponential,
    /// Deterministic lowest-index argmin of errors (not private).
    ArgminErrors,
}

/// A selection mechanism over a finite hypothesis cover.
#[derive(Debug, Clone)]
pub struct MechanismSpec {
    pub cover: HypothesisFamily,
    pub alpha: f64,
    pub kind: MechanismKind,
}

impl MechanismSpec {
    pub fn exponential(cover: HypothesisFamily, alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::input(format!(
                "alpha {alpha} must be finite and >= 0"
            )));
        }
        Ok(MechanismSpec {
            cover,
            alpha,
            kind: MechanismKind::Exponential,
        })
    }

    pub fn argmin_errors(cover: HypothesisFamily) -> Self {
        MechanismSpec {
            cover,
            alpha: 0.0,
            kind: MechanismKind::ArgminErrors,
        }
    }
}

/// Exact output law of the mechanism on a dataset: a probability vector
/// over the cover.
pub fn output_law(spec: &MechanismSpec, data: &LabeledDataset) -> Vec<f64> {
    let errors: Vec<u64> = spec
        .cover
        .members()
        .iter()
        .map(|&h| error_count(h, data))
        .collect();
    match spec.kind {
        MechanismKind::Exponential => {
            let min = *errors.iter().min().unwrap();
            let raw: Vec<f64> = errors
                .iter()
                .map(|&e| (-spec.alpha * (e - min) as f64 / 2.0).exp())
                .collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|w| w / total).collect()
        }
        MechanismKind::ArgminErrors => {
            let best = errors
                .iter()
                .enumerate()
                .min_by_key(|&(_, e)| e)
                .map(|(i, _)| i)
                .unwrap();
            let mut law = vec![0.0; errors.len()];
            law[best] = 1.0;
            law
        }
    }
}

/// The exponential-mechanism law `P(h) = exp(-alpha errors(h)/2) / Z`.
pub fn exp_mech_output_law(spec: &MechanismSpec, data: &LabeledDataset) -> Result<Vec<f64>> {
    if spec.kind != MechanismKind::Exponential {
        return Err(Error::input("spec is not an exponential mechanism"));
    }
    Ok(output_law(spec, data))
}

/// Samples one hypothesis index from the mechanism's output law;
/// deterministic given the seed.
pub fn exp_mech_learn(spec: &MechanismSpec, data: &LabeledDataset, seed: u64) -> usize {
    let law = output_law(spec, data);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in law.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    law.len() - 1
}

/// A neighboring pair of datasets exhibiting the worst log-ratio.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DpWitness {
    pub dataset: Vec<(usize, bool)>,
    pub neighbor: Vec<(usize, bool)>,
    pub hypothesis: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DpAudit {
    /// Exact `max |ln P(h|S) - ln P(h|S')|` over all neighbors and
    /// hypotheses; infinite when one side has zero probability.
    pub max_log_ratio: f64,
    pub pass: bool,
    pub witness: Option<DpWitness>,
    pub datasets_checked: usize,
}

/// Guard on the exhaustive dataset enumeration of [`verify_dp`].
pub const DP_ENUMERATION_GUARD: usize = 1_000_000;

/// Brute-force pure-DP audit: enumerates every length-`m` dataset over
/// `domain_size` atoms with binary labels and every single-entry
/// neighbor, and computes the exact worst log-ratio over singleton output
/// events (which suffice for beta = 0). Passes iff the worst ratio is at
/// most `alpha_claim`.
pub fn verify_dp(
    spec: &MechanismSpec,
    domain_size: usize,
    m: usize,
    alpha_claim: f64,
) -> Result<DpAudit> {
    if domain_size == 0 || domain_size > spec.cover.space().atom_count() {
        return Err(Error::input(format!(
            "domain size {domain_size} outside the cover's space"
        )));
    }
    if m == 0 {
        return Err(Error::input("need datasets of at least one example"));
    }
    let codes = 2 * domain_size;
    let total = codes
        .checked_pow(m as u32)
        .filter(|&t| t <= DP_ENUMERATION_GUARD);
    let Some(total) = total else {
        return Err(Error::capacity(format!(
            "({codes})^{m} datasets exceed the enumeration guard {DP_ENUMERATION_GUARD}"
        )));
    };

    let decode = |code: usize| -> (usize, bool) { (code / 2, code % 2 == 1) };
    let mut max_log_ratio = 0.0f64;
    let mut witness = None;
    let mut dataset = vec![0usize; m];
    for _ in 0..total {
        let examples: Vec<(usize, bool)> = dataset.iter().map(|&c| decode(c)).collect();
        let data = LabeledDataset::new(examples.clone());
        let law = output_law(spec, &data);
        for pos in 0..m {
            for alt in 0..codes {
                if alt == dataset[pos] {
                    continue;
                }
                let mut neighbor = examples.clone();
                neighbor[pos] = decode(alt);
                let nlaw = output_law(spec, &LabeledDataset::new(neighbor.clone()));
                for (h, (&p, &q)) in law.iter().zip(&nlaw).enumerate() {
                    let ratio = log_ratio(p, q);
                    if ratio > max_log_ratio {
                        max_log_ratio = ratio;
                        witness = Some(DpWitness {
                            dataset: examples.clone(),
                            neighbor: neighbor.clone(),
                            hypothesis: h,
                        });
                    }
                }
            }
        }
        // odometer over dataset codes
        for d in dataset.iter_mut() {
            *d += 1;
            if *d < codes {
                break;
            }
            *d = 0;
        }
    }
    Ok(DpAudit {
        max_log_ratio,
        pass: max_log_ratio <= alpha_claim + 1e-9,
        witness: if max_log_ratio > alpha_claim + 1e-9 {
            witness
        } else {
            None
        },
        datasets_checked: total,
    })
}

fn log_ratio(p: f64, q: f64) -> f64 {
    if p == 0.0 && q == 0.0 {
        0.0
    } else if p == 0.0 || q == 0.0 {
        f64::INFINITY
    } else {
        (p.ln() - q.ln()).abs()
    }
}

/// Statistical constant of the sample-size formula
/// `m = C_STAT (d ln(1/eps) + ln(1/delta)) / eps^2 + C_PRIV d ln(1/rho_inv) / (alpha eps)`,
/// pinned here and exercised by the accuracy acceptance check.
pub const C_STAT: f64 = 8.0;

/// Privacy constant of the sample-size formula; see [`C_STAT`].
pub const C_PRIV: f64 = 8.0;

/// Sample size at which the exponential mechanism over an `eps`-uniform
/// cover is expected to be `(2 eps, delta)`-accurate. `rho_inv_eps` is
/// the cover scale, the largest grid point `z` with `rho(z) <= eps`.
pub fn private_sample_size(d: usize, eps: f64, delta: f64, alpha: f64, rho_inv_eps: f64) -> usize {
    let stat = C_STAT * (d as f64 * (1.0 / eps).ln() + (1.0 / delta).ln()) / (eps * eps);
    let priv_term = C_PRIV * d as f64 * (1.0 / rho_inv_eps).ln().max(0.0) / (alpha * eps);
    (stat + priv_term).ceil() as usize
}

/// Lifts a PAC learning problem over `[K]` to the base space and back:
/// each example `(a, y)` becomes `(x ~ dists[a], y AND x in parts[a])`,
/// the private learner runs on the lifted dataset, and the returned
/// hypothesis is thresholded by its exact conditional mean on each part.
/// `force_one_region`, when set, relabels any lifted sample landing in
/// that region to 1 (the realizability patch for stitched constructions;
/// off by default).
pub fn reduce_to_threshold_learner(
    private_learner: &mut dyn FnMut(&LabeledDataset, u64) -> Result<Subset>,
    parts: &[Subset],
    dists: &[Distribution],
    eta: f64,
    force_one_region: Option<Subset>,
    data: &[(usize, bool)],
    seed: u64,
) -> Result<Vec<bool>> {
    if parts.is_empty() || parts.len() != dists.len() {
        return Err(Error::input(
            "need matching non-empty parts and distributions",
        ));
    }
    for (i, p) in parts.iter().enumerate() {
        dists[i].space().check_subset(*p)?;
        if dists[i].mass(*p) <= 0.0 {
            return Err(Error::input(format!("part {i} has zero conditioning mass")));
        }
        if !mass_ge(dists[i].mass(*p), eta) {
            return Err(Error::input(format!(
                "distribution {i} places less than eta on its part"
            )));
        }
        for (j, q) in parts.iter().enumerate().skip(i + 1) {
            if !p.is_disjoint(*q) {
                return Err(Error::input(format!("parts {i} and {j} overlap")));
            }
        }
    }
    let k = parts.len();
    let mut rng = ChaCha12Rng::seed_from_u64(crate::protocol::derive_seed(seed, 0));
    let mut lifted = Vec::with_capacity(data.len());
    for &(a, y) in data {
        if a >= k {
            return Err(Error::input(format!("example index {a} outside [{k}]")));
        }
        let x = dists[a].sample(&mut rng);
        let mut y_lifted = y && parts[a].contains(x);
        if let Some(region) = force_one_region {
            if region.contains(x) {
                y_lifted = true;
            }
        }
        lifted.push((x, y_lifted));
    }
    let h = private_learner(
        &LabeledDataset::new(lifted),
        crate::protocol::derive_seed(seed, 1),
    )?;
    Ok((0..k)
        .map(|i| {
            let part_mass = dists[i].mass(parts[i]);
            let one_mass = dists[i].mass(parts[i].intersect(h));
            one_mass / part_mass >= 0.5
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::FiniteSpace;

    fn two_cover() -> HypothesisFamily {
        let s = FiniteSpace::with_atom_count(2).unwrap();
        HypothesisFamily::from_label_vecs(s, &[vec![1, 1], vec![0, 0]]).unwrap()
    }

    #[test]
    fn exponential_law_closed_form() {
        // errors (0, 2) at alpha = 1: P(h1) = 1 / (1 + e^-1)
        let spec = MechanismSpec::exponential(two_cover(), 1.0).unwrap();
        let data = LabeledDataset::new(vec![(0, true), (1, true)]);
        let law = exp_mech_output_law(&spec, &data).unwrap();
        assert!((law[0] - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-12);
        assert!((law[0] - 0.7311).abs() < 1e-4);
        assert!((law.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equal_errors_give_uniform_law() {
        let spec = MechanismSpec::exponential(two_cover(), 1.0).unwrap();
        // one example each way: both hypotheses err once
        let data = LabeledDataset::new(vec![(0, true), (1, false)]);
        let law = output_law(&spec, &data);
        assert!((law[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_alpha_ignores_errors() {
        let spec = MechanismSpec::exponential(two_cover(), 0.0).unwrap();
        let data = LabeledDataset::new(vec![(0, true), (1, true)]);
        let law = output_law(&spec, &data);
        assert_eq!(law, vec![0.5, 0.5]);
    }

    #[test]
    fn learn_is_deterministic_given_seed() {
        let spec = MechanismSpec::exponential(two_cover(), 0.5).unwrap();
        let data = LabeledDataset::new(vec![(0, true)]);
        let a = exp_mech_learn(&spec, &data, 42);
        let b = exp_mech_learn(&spec, &data, 42);
        assert_eq!(a, b);
    }

    #[test]
    fn single_hypothesis_cover_always_returned() {
        let s = FiniteSpace::with_atom_count(2).unwrap();
        let cover = HypothesisFamily::from_label_vecs(s, &[vec![1, 0]]).unwrap();
        let spec = MechanismSpec::exponential(cover, 1.0).unwrap();
        let data = LabeledDataset::new(vec![(0, false)]);
        assert_eq!(exp_mech_learn(&spec, &data, 9), 0);
    }

    #[test]
    fn strongly_separated_errors_concentrate_the_law() {
        let spec = MechanismSpec::exponential(two_cover(), 4.0).unwrap();
        let m = 6;
        let data = LabeledDataset::new(vec![(0, true); m]);
        let law = output_law(&spec, &data);
        // errors (0, m): P(h0) >= 1 - e^(-alpha m / 2)
        assert!(law[0] >= 1.0 - (-4.0 * m as f64 / 2.0).exp());
    }

    #[test]
    fn audit_passes_exponential_and_fails_argmin() {
        let spec = MechanismSpec::exponential(two_cover(), 0.5).unwrap();
        let audit = verify_dp(&spec, 2, 2, 0.5).unwrap();
        assert!(audit.pass, "max log ratio {}", audit.max_log_ratio);

        let argmin = MechanismSpec::argmin_errors(two_cover());
        let audit = verify_dp(&argmin, 2, 2, 0.5).unwrap();
        assert!(!audit.pass);
        assert!(audit.max_log_ratio.is_infinite());
        assert!(audit.witness.is_some());
    }

    #[test]
    fn data_ignoring_mechanism_has_zero_ratio() {
        let spec = MechanismSpec::exponential(two_cover(), 0.0).unwrap();
        let audit = verify_dp(&spec, 2, 2, 0.0).unwrap();
        assert_eq!(audit.max_log_ratio, 0.0);
        assert!(audit.pass);
    }

    #[test]
    fn reduction_recovers_true_thresholds_from_exact_learner() {
        let s = FiniteSpace::with_atom_count(6).unwrap();
        let parts: Vec<Subset> = (0..3)
            .map(|i| Subset::from_atoms(&[2 * i, 2 * i + 1]))
            .collect();
        let dists: Vec<Distribution> = (0..3)
            .map(|i| {
                let mut p = vec![0.02; 6];
                p[2 * i] = 0.45;
                p[2 * i + 1] = 0.47;
                Distribution::new(s.clone(), p).unwrap()
            })
            .collect();
        // the "private" learner that returns the true labeling
        let truth = parts[1].union(parts[2]);
        let mut learner = |_data: &LabeledDataset, _seed: u64| -> Result<Subset> { Ok(truth) };
        let data: Vec<(usize, bool)> =
            vec![(0, false), (1, true), (2, true), (0, false), (2, true)];
        let out =
            reduce_to_threshold_learner(&mut learner, &parts, &dists, 0.9, None, &data, 5).unwrap();
        assert_eq!(out, vec![false, true, true]);
    }

    #[test]
    fn reduction_k1_returns_majority_behavior() {
        let s = FiniteSpace::with_atom_count(3).unwrap();
        let parts = vec![Subset::from_atoms(&[0, 1])];
        let dists = vec![Distribution::new(s, vec![0.5, 0.3, 0.2]).unwrap()];
        // h labels only atom 0 inside the part: conditional mean 0.5/0.8 >= 1/2
        let mut learner =
            |_d: &LabeledDataset, _s: u64| -> Result<Subset> { Ok(Subset::singleton(0)) };
        let out =
            reduce_to_threshold_learner(&mut learner, &parts, &dists, 0.8, None, &[(0, true)], 1)
                .unwrap();
        assert_eq!(out, vec![true]);
    }
}
