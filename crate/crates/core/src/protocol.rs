//! The full-information online protocol: per round the adversary selects
//! a family member, the learner commits a prediction function, a sample
//! is drawn, and the label is revealed.
//!
//! Runs are bit-deterministic given the seed: adversary, learner, and
//! sampling randomness come from three independent streams derived by a
//! stable 64-bit hash, so adding horizons or trials never perturbs
//! existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::Adversary;
use crate::error::{Error, Result};
use crate::hypothesis::HypothesisFamily;
use crate::learner::Learner;
use crate::space::DistributionFamily;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable combination of seed components (platform- and run-independent).
pub fn derive_seed(base: u64, salt: u64) -> u64 {
    splitmix64(splitmix64(base) ^ splitmix64(salt.wrapping_add(0xA5A5_A5A5)))
}

/// Stable three-component seed: `(base, a, b) -> u64`.
pub fn derive_seed3(base: u64, a: u64, b: u64) -> u64 {
    derive_seed(derive_seed(base, a), b)
}

/// One protocol round: the member played, the sample, the revealed label,
/// the learner's realized prediction and loss, and the expected loss of
/// the learner's committed prediction law at the sampled atom.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Round {
    pub member: usize,
    pub atom: usize,
    pub label: u8,
    pub prediction: u8,
    pub loss: u8,
    pub expected_loss: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Transcript {
    pub rounds: Vec<Round>,
    /// Comparator index certified to label every round correctly, when
    /// the adversary guarantees realizability.
    pub realizable_target: Option<usize>,
}

impl Transcript {
    pub fn cumulative_loss(&self) -> u64 {
        self.rounds.iter().map(|r| r.loss as u64).sum()
    }

    pub fn cumulative_expected_loss(&self) -> f64 {
        self.rounds.iter().map(|r| r.expected_loss).sum()
    }

    /// Serializes rounds as line-delimited records:
    /// `round member atom label prediction loss`.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for (t, r) in self.rounds.iter().enumerate() {
            out.push_str(&format!(
                "{t} {} {} {} {} {}\n",
                r.member, r.atom, r.label, r.prediction, r.loss
            ));
        }
        out
    }
}

/// Executes `t_rounds` rounds of the protocol. Deterministic given
/// `seed`; the adversary and learner must live on the family's space.
pub fn run_protocol(
    adversary: &mut Adversary,
    learner: &mut Learner,
    family: &DistributionFamily,
    t_rounds: usize,
    seed: u64,
) -> Result<Transcript> {
    if t_rounds == 0 {
        return Err(Error::input("need at least one round"));
    }
    if learner.atom_count() != family.space().atom_count() {
        return Err(Error::input(format!(
            "learner is bound to {} atoms, family to {}",
            learner.atom_count(),
            family.space().atom_count()
        )));
    }
    let mut sample_rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, 0));
    let mut learner_rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, 1));
    let mut adversary_rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, 2));

    let mut rounds = Vec::with_capacity(t_rounds);
    for t in 0..t_rounds {
        let member = adversary.select(t);
        if member >= family.len() {
            return Err(Error::input(format!(
                "adversary selected member {member} of a {}-member family",
                family.len()
            )));
        }
        let law = learner.prediction_law();
        let committed = learner.commit(&mut learner_rng);
        let atom = family.member(member).sample(&mut sample_rng);
        let label = adversary.label(atom, learner, &mut adversary_rng);
        let prediction = committed.contains(atom);
        let expected_loss = if label { 1.0 - law[atom] } else { law[atom] };
        rounds.push(Round {
            member,
            atom,
            label: label as u8,
            prediction: prediction as u8,
            loss: (prediction != label) as u8,
            expected_loss,
        });
        learner.observe(atom, label);
    }
    Ok(Transcript {
        rounds,
        realizable_target: adversary.realizable_target(),
    })
}

/// Regret of a transcript against a comparator family, with the best
/// comparator found by exhaustive enumeration (lowest index on ties).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RegretSummary {
    pub learner_loss: u64,
    pub learner_expected_loss: f64,
    pub best_comparator_loss: u64,
    pub best_comparator_index: usize,
    pub regret: f64,
    pub expected_regret: f64,
}

pub fn regret(transcript: &Transcript, comparator: &HypothesisFamily) -> RegretSummary {
    let mut best_loss = u64::MAX;
    let mut best_index = 0;
    for (i, &h) in comparator.members().iter().enumerate() {
        let loss: u64 = transcript
            .rounds
            .iter()
            .map(|r| (h.contains(r.atom) as u8 != r.label) as u64)
            .sum();
        if loss < best_loss {
            best_loss = loss;
            best_index = i;
        }
    }
    let learner_loss = transcript.cumulative_loss();
    let learner_expected_loss = transcript.cumulative_expected_loss();
    RegretSummary {
        learner_loss,
        learner_expected_loss,
        best_comparator_loss: best_loss,
        best_comparator_index: best_index,
        regret: learner_loss as f64 - best_loss as f64,
        expected_regret: learner_expected_loss - best_loss as f64,
    }
}

/// Checks that the certified target hypothesis labels every round
/// correctly (the realizability contract of threshold-hiding and i.i.d.
/// adversaries).
pub fn check_realizable(transcript: &Transcript, comparator: &HypothesisFamily) -> bool {
    match transcript.realizable_target {
        None => false,
        Some(i) => {
            let h = comparator.member(i);
            transcript
                .rounds
                .iter()
                .all(|r| h.contains(r.atom) as u8 == r.label)
        }
    }
}
