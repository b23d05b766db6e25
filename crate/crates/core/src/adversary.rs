//! Constrained adversaries: i.i.d. and oblivious baselines plus the two
//! constructive hard adversaries.
//!
//! The threshold-hiding adversary runs a binary search over disjoint
//! parts indexed by integer positions of a dyadic tree, labelling the
//! midpoint part against the learner's likelier prediction (estimated by
//! probing clones of the learner) and keeping every emitted label
//! consistent with a limiting threshold hypothesis, so its transcripts
//! are certified realizable.
//!
//! The fragmentation adversary embeds the classical random-label lower
//! bound for products of thresholds into the parts of a fragmentation
//! witness: each round it plays a member carrying mass on the current
//! target part, labels hits by fair coins, and descends its per-block
//! binary search by the majority once a level has collected its quota of
//! hits. Rounds whose sample misses the target part are labelled by a
//! fair coin and ignored by the embedded search.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::dimension::vc_dimension;
use crate::error::{Error, Result};
use crate::hypothesis::HypothesisFamily;
use crate::learner::Learner;
use crate::smoothness::{
    fragmentation_number, FragmentationWitness, SearchMode, PACKING_DP_CUTOFF,
};
use crate::space::{DistributionFamily, Subset};

/// Size guard for the fragmentation adversary's product-of-thresholds
/// comparator.
const COMPARATOR_GUARD: usize = 4096;

#[derive(Debug, Clone)]
pub enum Adversary {
    Iid(IidAdversary),
    Oblivious(ObliviousAdversary),
    ThresholdHiding(ThresholdHidingAdversary),
    FragmentationLb(FragmentationLbAdversary),
}

impl Adversary {
    /// Realizable i.i.d. source: a fixed member, labels from a fixed
    /// comparator hypothesis.
    pub fn iid(member: usize, target_index: usize, target: Subset) -> Self {
        Adversary::Iid(IidAdversary {
            member,
            target_index,
            target,
        })
    }

    pub fn oblivious(schedule: Vec<usize>, rule: LabelRule) -> Result<Self> {
        if schedule.is_empty() {
            return Err(Error::input("oblivious schedule must be non-empty"));
        }
        Ok(Adversary::Oblivious(ObliviousAdversary { schedule, rule }))
    }

    /// Member index to play this round.
    pub fn select(&mut self, round: usize) -> usize {
        match self {
            Adversary::Iid(a) => a.member,
            Adversary::Oblivious(a) => a.schedule[round % a.schedule.len()],
            Adversary::ThresholdHiding(a) => a.select(),
            Adversary::FragmentationLb(a) => a.select(),
        }
    }

    /// Label for the drawn atom. Adaptive adversaries may probe the
    /// learner here; the learner's committed state for this round is
    /// already fixed since it mutates only on `observe`.
    pub fn label<R: Rng>(&mut self, atom: usize, learner: &Learner, rng: &mut R) -> bool {
        match self {
            Adversary::Iid(a) => a.target.contains(atom),
            Adversary::Oblivious(a) => match &a.rule {
                LabelRule::Target { mask, .. } => mask.contains(atom),
                LabelRule::Constant(v) => *v,
                LabelRule::Coin => rng.gen::<bool>(),
            },
            Adversary::ThresholdHiding(a) => a.label(atom, learner, rng),
            Adversary::FragmentationLb(a) => a.label(atom, rng),
        }
    }

    /// Index (into the comparator family) of a hypothesis certified to
    /// label every emitted round correctly, when the adversary is
    /// realizable by construction.
    pub fn realizable_target(&self) -> Option<usize> {
        match self {
            Adversary::Iid(a) => Some(a.target_index),
            Adversary::Oblivious(a) => match a.rule {
                LabelRule::Target { index, .. } => Some(index),
                _ => None,
            },
            Adversary::ThresholdHiding(a) => Some(a.lo),
            Adversary::FragmentationLb(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IidAdversary {
    pub member: usize,
    pub target_index: usize,
    pub target: Subset,
}

#[derive(Debug, Clone)]
pub enum LabelRule {
    Target { index: usize, mask: Subset },
    Constant(bool),
    Coin,
}

#[derive(Debug, Clone)]
pub struct ObliviousAdversary {
    pub schedule: Vec<usize>,
    pub rule: LabelRule,
}

/// Binary-search threshold hider over parts at integer positions
/// `1..2^depth`. The open interval `(lo, hi)` holds the still-undecided
/// positions; parts at or below `lo` are committed to label 1, parts at
/// or above `hi` to 0, so every emitted label stays consistent with the
/// threshold at position `lo`.
#[derive(Debug, Clone)]
pub struct ThresholdHidingAdversary {
    parts: Vec<Subset>,
    part_member: Vec<usize>,
    /// Atom masses of each part's witness member, for the probe vote.
    part_probs: Vec<Vec<f64>>,
    fallback_member: usize,
    probe_budget: usize,
    lo: usize,
    hi: usize,
    probe_counter: u64,
}

impl ThresholdHidingAdversary {
    fn midpoint(&self) -> Option<usize> {
        (self.hi - self.lo >= 2).then(|| (self.lo + self.hi) / 2)
    }

    fn select(&self) -> usize {
        match self.midpoint() {
            Some(c) => self.part_member[c - 1],
            None => self.fallback_member,
        }
    }

    fn position_of(&self, atom: usize) -> Option<usize> {
        self.parts
            .iter()
            .position(|p| p.contains(atom))
            .map(|i| i + 1)
    }

    fn label<R: Rng>(&mut self, atom: usize, learner: &Learner, rng: &mut R) -> bool {
        let Some(k) = self.position_of(atom) else {
            return false; // outside every part: all thresholds label 0
        };
        if k <= self.lo {
            return true;
        }
        if k >= self.hi {
            return false;
        }
        match self.midpoint() {
            Some(c) if k == c => {
                let likely = self.probe_likely_prediction(c, learner, rng);
                let y = !likely;
                if y {
                    self.lo = c;
                } else {
                    self.hi = c;
                }
                y
            }
            Some(c) if k < c => {
                // stray undecided part below the midpoint: committing it
                // to 1 keeps the midpoint undecided
                self.lo = k;
                true
            }
            _ => {
                self.hi = k;
                false
            }
        }
    }

    /// Estimates the learner's likelier prediction on the part at
    /// position `c`, weighting atoms by the played member's mass. Exact
    /// for deterministic learners with a single probe.
    fn probe_likely_prediction<R: Rng>(
        &mut self,
        c: usize,
        learner: &Learner,
        rng: &mut R,
    ) -> bool {
        use rand::SeedableRng;
        let part = self.parts[c - 1];
        let weights = &self.part_probs[c - 1];
        let mut vote_one = 0.0f64;
        let mut vote_zero = 0.0f64;
        for _ in 0..self.probe_budget {
            self.probe_counter += 1;
            let mut probe_rng = ChaCha12Rng::seed_from_u64(crate::protocol::derive_seed(
                self.probe_counter,
                rng.gen(),
            ));
            let committed = learner.clone().commit(&mut probe_rng);
            for x in part.atoms() {
                if committed.contains(x) {
                    vote_one += weights[x];
                } else {
                    vote_zero += weights[x];
                }
            }
        }
        vote_one > vote_zero
    }
}

/// Builds the threshold-hiding adversary from a fragmentation witness and
/// returns it with the generalized-threshold comparator it hides inside.
/// A depth-`d` binary search touches `2^d - 1` midpoint positions, so
/// that many disjoint parts are consumed from the witness.
pub fn make_threshold_hiding_adversary(
    family: &DistributionFamily,
    disjoint_parts: &FragmentationWitness,
    depth: u32,
    probe_budget: usize,
) -> Result<(Adversary, HypothesisFamily)> {
    if probe_budget == 0 {
        return Err(Error::input("probe budget must be at least 1"));
    }
    let needed = (1usize << depth) - 1;
    if disjoint_parts.parts.len() < needed {
        return Err(Error::input(format!(
            "depth {depth} needs {needed} disjoint parts, witness has {}",
            disjoint_parts.parts.len()
        )));
    }
    let parts: Vec<Subset> = disjoint_parts.parts[..needed].to_vec();
    for p in &parts {
        family.space().check_subset(*p)?;
    }
    // the exact envelope maximizer on each part (the paper's half-slack
    // witness is not needed on finite families)
    let part_member: Vec<usize> = parts.iter().map(|p| family.envelope(*p).witness).collect();
    let part_probs: Vec<Vec<f64>> = part_member
        .iter()
        .map(|&m| family.member(m).probs().to_vec())
        .collect();

    // comparator: the threshold chain f_j = union of the first j parts
    let mut members = Vec::with_capacity(needed + 1);
    let mut acc = Subset::EMPTY;
    members.push(acc);
    for p in &parts {
        acc = acc.union(*p);
        members.push(acc);
    }
    let comparator = HypothesisFamily::new(family.space().clone(), members)?.into_threshold()?;

    let adversary = Adversary::ThresholdHiding(ThresholdHidingAdversary {
        parts,
        part_member,
        part_probs,
        fallback_member: 0,
        probe_budget,
        lo: 0,
        hi: 1 << depth,
        probe_counter: 0,
    });
    Ok((adversary, comparator))
}

/// Per-block binary-search state of the embedded lower-bound schedule:
/// thresholds `lo..=hi` over the block's parts, attacked at local
/// position `ceil((lo + 1 + hi) / 2)`.
#[derive(Debug, Clone)]
struct Block {
    parts: Vec<usize>,
    lo: usize,
    hi: usize,
}

impl Block {
    fn active(&self) -> bool {
        self.lo < self.hi
    }

    fn attack_position(&self) -> usize {
        (self.lo + 1 + self.hi).div_ceil(2)
    }

    fn descend(&mut self, majority_one: bool) {
        let m = self.attack_position();
        if majority_one {
            self.hi = m - 1;
        } else {
            self.lo = m;
        }
    }
}

#[derive(Debug, Clone)]
pub struct FragmentationLbAdversary {
    parts: Vec<Subset>,
    part_member: Vec<usize>,
    blocks: Vec<Block>,
    cur_block: usize,
    hits_per_level: usize,
    level_hits: usize,
    level_heads: usize,
    current_part: usize,
    done: bool,
    total_hits: usize,
}

impl FragmentationLbAdversary {
    fn refresh_current_part(&mut self) {
        while self.cur_block < self.blocks.len() && !self.blocks[self.cur_block].active() {
            self.cur_block += 1;
        }
        if self.cur_block == self.blocks.len() {
            self.done = true;
            return;
        }
        let b = &self.blocks[self.cur_block];
        self.current_part = b.parts[b.attack_position() - 1];
    }

    fn select(&self) -> usize {
        self.part_member[self.current_part]
    }

    fn label<R: Rng>(&mut self, atom: usize, rng: &mut R) -> bool {
        let y = rng.gen::<bool>();
        if self.parts[self.current_part].contains(atom) {
            self.total_hits += 1;
            if !self.done {
                self.level_hits += 1;
                if y {
                    self.level_heads += 1;
                }
                if self.level_hits >= self.hits_per_level {
                    let majority_one = 2 * self.level_heads > self.level_hits;
                    self.blocks[self.cur_block].descend(majority_one);
                    self.level_hits = 0;
                    self.level_heads = 0;
                    self.refresh_current_part();
                }
            }
        }
        y
    }

    /// Rounds whose sample landed in the round's target part.
    pub fn hits(&self) -> usize {
        self.total_hits
    }
}

/// Builds the fragmentation lower-bound adversary at scale `eps` with `d`
/// blocks for a horizon of `t_rounds`, returning it together with its
/// product-of-thresholds comparator family (VC dimension at most `d`,
/// verified). The fragmentation witness is computed exactly when the
/// space allows it and by the greedy lower bound otherwise.
pub fn make_fragmentation_adversary(
    family: &DistributionFamily,
    eps: f64,
    d: usize,
    t_rounds: usize,
) -> Result<(Adversary, HypothesisFamily)> {
    let mode = if family.space().atom_count() <= PACKING_DP_CUTOFF {
        SearchMode::Exact
    } else {
        SearchMode::Greedy
    };
    let witness = fragmentation_number(family, eps, mode)?;
    make_fragmentation_adversary_from(family, &witness, eps, d, t_rounds)
}

/// As [`make_fragmentation_adversary`] with an explicit witness.
pub fn make_fragmentation_adversary_from(
    family: &DistributionFamily,
    witness: &FragmentationWitness,
    eps: f64,
    d: usize,
    t_rounds: usize,
) -> Result<(Adversary, HypothesisFamily)> {
    if d == 0 || t_rounds == 0 {
        return Err(Error::input("need d >= 1 and at least one round"));
    }
    let n_parts = witness.parts.len();
    if n_parts < 3 * d {
        return Err(Error::input(format!(
            "fragmentation witness of size {n_parts} below 3d = {}",
            3 * d
        )));
    }
    for p in &witness.parts {
        family.space().check_subset(*p)?;
    }
    let part_member: Vec<usize> = witness
        .parts
        .iter()
        .map(|p| family.envelope(*p).witness)
        .collect();

    // d blocks of consecutive witness parts
    let mut blocks = Vec::with_capacity(d);
    for j in 0..d {
        let start = j * n_parts / d;
        let end = (j + 1) * n_parts / d;
        blocks.push(Block {
            parts: (start..end).collect(),
            lo: 0,
            hi: end - start,
        });
    }

    let comparator = product_threshold_family(family, &witness.parts, &blocks)?;
    let vc = vc_dimension(&comparator, (d + 1).min(family.space().atom_count()))?;
    if vc > d {
        return Err(Error::input(format!(
            "comparator family has VC {vc} above the block count {d}"
        )));
    }

    // bit length of len equals ceil(log2(len + 1)): levels per block
    let total_levels: usize = blocks
        .iter()
        .map(|b| usize::BITS as usize - b.parts.len().leading_zeros() as usize)
        .sum();
    let emulated = ((eps * t_rounds as f64) / 2.0).ceil() as usize;
    let hits_per_level = emulated.div_ceil(total_levels).max(1);

    let mut adv = FragmentationLbAdversary {
        parts: witness.parts.clone(),
        part_member,
        blocks,
        cur_block: 0,
        hits_per_level,
        level_hits: 0,
        level_heads: 0,
        current_part: 0,
        done: false,
        total_hits: 0,
    };
    adv.refresh_current_part();
    Ok((Adversary::FragmentationLb(adv), comparator))
}

fn product_threshold_family(
    family: &DistributionFamily,
    parts: &[Subset],
    blocks: &[Block],
) -> Result<HypothesisFamily> {
    let size: usize = blocks.iter().map(|b| b.parts.len() + 1).product();
    if size > COMPARATOR_GUARD {
        return Err(Error::capacity(format!(
            "product comparator of size {size} beyond guard {COMPARATOR_GUARD}"
        )));
    }
    let maxes: Vec<usize> = blocks.iter().map(|b| b.parts.len()).collect();
    let mut thresholds = vec![0usize; blocks.len()];
    let mut members = Vec::with_capacity(size);
    loop {
        let mut mask = Subset::EMPTY;
        for (j, b) in blocks.iter().enumerate() {
            for (local, &global) in b.parts.iter().enumerate() {
                if local + 1 > thresholds[j] {
                    mask = mask.union(parts[global]);
                }
            }
        }
        members.push(mask);
        if !odometer_advance(&mut thresholds, &maxes) {
            break;
        }
    }
    HypothesisFamily::new(family.space().clone(), members)
}

fn odometer_advance(digits: &mut [usize], maxes: &[usize]) -> bool {
    for j in (0..digits.len()).rev() {
        if digits[j] < maxes[j] {
            digits[j] += 1;
            return true;
        }
        digits[j] = 0;
    }
    false
}
