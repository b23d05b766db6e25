//! Shared helpers for integration tests: seeded random instances and
//! independent brute-force oracles.

#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use dcol_core::hypothesis::HypothesisFamily;
use dcol_core::space::{Distribution, DistributionFamily, FiniteSpace, Subset};

pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Uniform point on the simplex (normalized i.i.d. exponentials).
pub fn random_distribution(space: &Arc<FiniteSpace>, rng: &mut ChaCha12Rng) -> Distribution {
    let n = space.atom_count();
    let raw: Vec<f64> = (0..n).map(|_| -rng.gen::<f64>().max(1e-12).ln()).collect();
    let total: f64 = raw.iter().sum();
    Distribution::new(space.clone(), raw.into_iter().map(|x| x / total).collect()).unwrap()
}

pub fn random_family(
    space: &Arc<FiniteSpace>,
    max_members: usize,
    rng: &mut ChaCha12Rng,
) -> DistributionFamily {
    let k = rng.gen_range(1..=max_members);
    DistributionFamily::new((0..k).map(|_| random_distribution(space, rng)).collect()).unwrap()
}

pub fn random_hypothesis_family(
    space: &Arc<FiniteSpace>,
    max_members: usize,
    rng: &mut ChaCha12Rng,
) -> HypothesisFamily {
    let n = space.atom_count();
    let k = rng.gen_range(1..=max_members);
    let members: Vec<Subset> = (0..k)
        .map(|_| Subset::from_mask(rng.gen::<u128>() & ((1u128 << n) - 1)))
        .collect();
    HypothesisFamily::new(space.clone(), members).unwrap()
}

/// Independent fragmentation oracle: maximizes, over all set partitions
/// of the atoms (restricted-growth enumeration), the number of blocks
/// with envelope mass at least `eps`. Any packing extends to a partition
/// and any partition's qualifying blocks form a packing, so the optima
/// agree.
pub fn fragmentation_by_partitions(family: &DistributionFamily, eps: f64) -> usize {
    let n = family.space().atom_count();
    let mut assignment = vec![0usize; n];
    let mut best = 0;
    partition_rec(family, eps, &mut assignment, 1, &mut best);
    best
}

fn partition_rec(
    family: &DistributionFamily,
    eps: f64,
    assignment: &mut Vec<usize>,
    pos: usize,
    best: &mut usize,
) {
    let n = family.space().atom_count();
    if pos == n {
        let blocks = *assignment.iter().max().unwrap() + 1;
        let mut count = 0;
        for b in 0..blocks {
            let atoms: Vec<usize> = (0..n).filter(|&i| assignment[i] == b).collect();
            let mask = Subset::from_atoms(&atoms);
            if family.envelope_mass(mask) >= eps - 1e-12 {
                count += 1;
            }
        }
        *best = (*best).max(count);
        return;
    }
    let cap = assignment[..pos].iter().max().unwrap() + 1;
    for b in 0..=cap {
        assignment[pos] = b;
        partition_rec(family, eps, assignment, pos + 1, best);
    }
    assignment[pos] = 0;
}

/// Naive VC recomputation: for each candidate size, enumerate atom
/// subsets as bitmasks and collect behaviors into a set.
pub fn naive_vc(h: &HypothesisFamily) -> usize {
    let n = h.space().atom_count();
    let mut best = 0;
    for mask in 1u32..(1 << n) {
        let atoms: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        let d = atoms.len();
        let mut behaviors = std::collections::HashSet::new();
        for &m in h.members() {
            behaviors.insert(atoms.iter().map(|&a| m.contains(a)).collect::<Vec<bool>>());
        }
        if behaviors.len() == 1 << d {
            best = best.max(d);
        }
    }
    best
}

/// Naive Littlestone recomputation: plain recursion on label-vector
/// sets, no memoization or split deduplication.
pub fn naive_ld(h: &HypothesisFamily) -> usize {
    let n = h.space().atom_count();
    let behaviors: Vec<Vec<bool>> = h
        .members()
        .iter()
        .map(|m| (0..n).map(|x| m.contains(x)).collect())
        .collect();
    naive_ld_rec(&behaviors, n)
}

fn naive_ld_rec(behaviors: &[Vec<bool>], n: usize) -> usize {
    if behaviors.len() <= 1 {
        return 0;
    }
    let mut best = 0;
    for x in 0..n {
        let zeros: Vec<Vec<bool>> = behaviors.iter().filter(|b| !b[x]).cloned().collect();
        let ones: Vec<Vec<bool>> = behaviors.iter().filter(|b| b[x]).cloned().collect();
        if zeros.is_empty() || ones.is_empty() {
            continue;
        }
        best = best.max(1 + naive_ld_rec(&zeros, n).min(naive_ld_rec(&ones, n)));
    }
    best
}

/// Prints the per-criterion acceptance line and enforces the stated
/// runtime budget.
pub struct CriterionTimer {
    name: &'static str,
    start: std::time::Instant,
    budget_secs: f64,
}

impl CriterionTimer {
    pub fn start(name: &'static str, budget_secs: f64) -> Self {
        CriterionTimer {
            name,
            start: std::time::Instant::now(),
            budget_secs,
        }
    }

    pub fn pass(self, details: &str) {
        let elapsed = self.start.elapsed().as_secs_f64();
        println!(
            "ACCEPTANCE {}: PASS — {} [{elapsed:.1}s / {:.0}s budget]",
            self.name, details, self.budget_secs
        );
        assert!(
            elapsed < self.budget_secs,
            "{} exceeded its runtime budget: {elapsed:.1}s",
            self.name
        );
    }
}
