//! Online learners for the protocol: realizable/agnostic ERM, Hedge over
//! a uniform cover, and a constant baseline.
//!
//! A learner commits a prediction function each round before the sample
//! is drawn. `commit` is read-only (randomness comes from the caller's
//! generator), so adversaries can probe a learner's current law by
//! cloning it and committing with their own generator; state changes only
//! through `observe`.

use rand::Rng;

use crate::cover::{build_uniform_cover, CoverRecord};
use crate::error::{Error, Result};
use crate::hypothesis::HypothesisFamily;
use crate::profile::ToleranceProfile;
use crate::space::{Distribution, Subset};

#[derive(Debug, Clone)]
pub enum Learner {
    Erm(ErmLearner),
    HedgeCover(HedgeLearner),
    Constant(ConstantLearner),
}

impl Learner {
    pub fn erm(family: HypothesisFamily) -> Self {
        Learner::Erm(ErmLearner::new(family))
    }

    pub fn constant(space_atoms: usize, value: bool) -> Self {
        Learner::Constant(ConstantLearner {
            atoms: space_atoms,
            value,
        })
    }

    /// `P(prediction = 1 | atom)` for every atom under the current state.
    pub fn prediction_law(&self) -> Vec<f64> {
        match self {
            Learner::Erm(l) => l.prediction_law(),
            Learner::HedgeCover(l) => l.prediction_law(),
            Learner::Constant(l) => vec![if l.value { 1.0 } else { 0.0 }; l.atoms],
        }
    }

    /// Commits this round's prediction function (as the set of atoms
    /// predicted 1). Deterministic learners ignore the generator.
    pub fn commit<R: Rng>(&self, rng: &mut R) -> Subset {
        match self {
            Learner::Erm(l) => l.commit(),
            Learner::HedgeCover(l) => l.commit(rng),
            Learner::Constant(l) => {
                if l.value {
                    Subset::full(l.atoms)
                } else {
                    Subset::EMPTY
                }
            }
        }
    }

    pub fn observe(&mut self, atom: usize, label: bool) {
        match self {
            Learner::Erm(l) => l.observe(atom, label),
            Learner::HedgeCover(l) => l.observe(atom, label),
            Learner::Constant(_) => {}
        }
    }

    pub fn atom_count(&self) -> usize {
        match self {
            Learner::Erm(l) => l.family.space().atom_count(),
            Learner::HedgeCover(l) => l.cover.space().atom_count(),
            Learner::Constant(l) => l.atoms,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConstantLearner {
    atoms: usize,
    value: bool,
}

/// Empirical risk minimization with deterministic lowest-index
/// tie-breaking: commits the lowest-index hypothesis consistent with all
/// past examples, falling back to the lowest-index empirical-loss
/// minimizer when the data stops being realizable.
#[derive(Debug, Clone)]
pub struct ErmLearner {
    family: HypothesisFamily,
    losses: Vec<u64>,
    consistent: Vec<bool>,
    consistent_count: usize,
}

impl ErmLearner {
    pub fn new(family: HypothesisFamily) -> Self {
        let k = family.len();
        ErmLearner {
            family,
            losses: vec![0; k],
            consistent: vec![true; k],
            consistent_count: k,
        }
    }

    pub fn current_index(&self) -> usize {
        if self.consistent_count > 0 {
            self.consistent.iter().position(|&c| c).unwrap()
        } else {
            let mut best = 0;
            for i in 1..self.losses.len() {
                if self.losses[i] < self.losses[best] {
                    best = i;
                }
            }
            best
        }
    }

    pub fn version_space_size(&self) -> usize {
        self.consistent_count
    }

    fn commit(&self) -> Subset {
        self.family.member(self.current_index())
    }

    fn prediction_law(&self) -> Vec<f64> {
        let h = self.commit();
        (0..self.family.space().atom_count())
            .map(|x| if h.contains(x) { 1.0 } else { 0.0 })
            .collect()
    }

    fn observe(&mut self, atom: usize, label: bool) {
        for (i, &m) in self.family.members().iter().enumerate() {
            if m.contains(atom) != label {
                self.losses[i] += 1;
                if self.consistent[i] {
                    self.consistent[i] = false;
                    self.consistent_count -= 1;
                }
            }
        }
    }
}

/// Multiplicative weights over a finite expert set (a uniform cover),
/// with randomized prediction: each round an expert is sampled from the
/// normalized weights `exp(-rate * cumulative loss)`, so the per-round
/// expected loss equals the weighted expert loss the analysis tracks.
#[derive(Debug, Clone)]
pub struct HedgeLearner {
    cover: HypothesisFamily,
    rate: f64,
    cum_losses: Vec<f64>,
    /// Sum over rounds of the weighted expert loss at commit time.
    cum_expected_loss: f64,
    rounds: usize,
    horizon: usize,
}

impl HedgeLearner {
    pub fn new(cover: HypothesisFamily, rate: f64, horizon: usize) -> Self {
        let k = cover.len();
        HedgeLearner {
            cover,
            rate,
            cum_losses: vec![0.0; k],
            cum_expected_loss: 0.0,
            rounds: 0,
            horizon,
        }
    }

    /// Standard tuning `sqrt(8 ln K / T)` for a known horizon.
    pub fn tuned_rate(cover_size: usize, horizon: usize) -> f64 {
        if cover_size <= 1 {
            return 0.0;
        }
        (8.0 * (cover_size as f64).ln() / horizon as f64).sqrt()
    }

    pub fn weights(&self) -> Vec<f64> {
        let min = self.cum_losses.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let raw: Vec<f64> = self
            .cum_losses
            .iter()
            .map(|&l| (-self.rate * (l - min)).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }

    fn commit<R: Rng>(&self, rng: &mut R) -> Subset {
        let w = self.weights();
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, wi) in w.iter().enumerate() {
            acc += wi;
            if u < acc {
                return self.cover.member(i);
            }
        }
        self.cover.member(self.cover.len() - 1)
    }

    fn prediction_law(&self) -> Vec<f64> {
        let w = self.weights();
        (0..self.cover.space().atom_count())
            .map(|x| {
                self.cover
                    .members()
                    .iter()
                    .zip(&w)
                    .filter(|(m, _)| m.contains(x))
                    .map(|(_, wi)| wi)
                    .sum()
            })
            .collect()
    }

    fn observe(&mut self, atom: usize, label: bool) {
        let w = self.weights();
        let mut expected = 0.0;
        for (i, m) in self.cover.members().iter().enumerate() {
            if m.contains(atom) != label {
                expected += w[i];
                self.cum_losses[i] += 1.0;
            }
        }
        self.cum_expected_loss += expected;
        self.rounds += 1;
    }

    pub fn cover(&self) -> &HypothesisFamily {
        &self.cover
    }

    /// External-regret audit from exact weight bookkeeping: cumulative
    /// expected loss, the best expert's loss, and the classical bound
    /// `sqrt(T/2 ln K)` at the configured horizon.
    pub fn regret_audit(&self) -> HedgeAudit {
        let best = self.cum_losses.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let k = self.cover.len() as f64;
        HedgeAudit {
            cum_expected_loss: self.cum_expected_loss,
            best_expert_loss: best,
            bound: (self.horizon as f64 / 2.0 * k.ln()).sqrt(),
            rounds: self.rounds,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HedgeAudit {
    pub cum_expected_loss: f64,
    pub best_expert_loss: f64,
    pub bound: f64,
    pub rounds: usize,
}

impl HedgeAudit {
    pub fn holds(&self) -> bool {
        self.cum_expected_loss <= self.best_expert_loss + self.bound + 1e-9
    }
}

/// Everything `make_hedge_cover_learner` decided: the learner, the cover
/// verification record, and the cover scale `delta` derived from the
/// profile (largest grid point with `rho(delta) <= eps`).
#[derive(Debug, Clone)]
pub struct HedgeBuild {
    pub learner: Learner,
    pub cover_record: CoverRecord,
    pub eps: f64,
    pub delta: f64,
    pub rate: f64,
}

/// Hedge over the eps-uniform cover implied by a verified certificate
/// `(mu0, profile)`: the cover is built at scale `delta = profile^-1(eps)`
/// under `mu0`, which makes it an eps-uniform cover under every member of
/// the certified family at once.
pub fn make_hedge_cover_learner(
    h: &HypothesisFamily,
    mu0: &Distribution,
    profile: &ToleranceProfile,
    eps: f64,
    horizon: usize,
) -> Result<HedgeBuild> {
    if horizon == 0 {
        return Err(Error::input("horizon must be at least 1"));
    }
    let delta = profile.inverse(eps).ok_or_else(|| {
        Error::input(format!(
            "profile never drops to eps = {eps}; no cover scale available"
        ))
    })?;
    // a zero cover scale (exact profiles vanish at 0) still admits a
    // cover: hypotheses equal mu0-almost-everywhere collapse
    let (cover, record) = build_uniform_cover(h, mu0, delta.max(1e-9))?;
    let rate = HedgeLearner::tuned_rate(cover.len(), horizon);
    Ok(HedgeBuild {
        learner: Learner::HedgeCover(HedgeLearner::new(cover, rate, horizon)),
        cover_record: record,
        eps,
        delta,
        rate,
    })
}
