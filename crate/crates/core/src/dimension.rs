//! Exact combinatorial dimensions of hypothesis families.
//!
//! Both computations are exhaustive and guarded: `vc_dimension` searches
//! all atom subsets up to an explicit cap, `littlestone_dimension` runs
//! the mistake-tree recursion memoized on behavior sets. Exceeding a
//! guard is a capacity error, never a silent truncation.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::hypothesis::HypothesisFamily;

/// Largest `d <= cap` such that some `d`-atom subset is shattered (all
/// `2^d` behaviors realized by the family).
pub fn vc_dimension(h: &HypothesisFamily, cap: usize) -> Result<usize> {
    let n = h.space().atom_count();
    if cap > n {
        return Err(Error::input(format!("cap {cap} exceeds atom count {n}")));
    }
    // a d-subset needs 2^d distinct behaviors, so the family size caps d
    let log_members = usize::BITS as usize - 1 - h.len().leading_zeros() as usize;
    let cap = cap.min(log_members);
    let mut best = 0;
    for d in 1..=cap {
        if any_shattered_subset(h, d) {
            best = d;
        } else {
            break; // shattering is downward closed in d
        }
    }
    Ok(best)
}

fn any_shattered_subset(h: &HypothesisFamily, d: usize) -> bool {
    let n = h.space().atom_count();
    let mut atoms = vec![0usize; d];
    combinations(n, d, &mut atoms, 0, 0, &mut |subset| {
        is_shattered(h, subset)
    })
}

/// Visits all size-`d` combinations; stops early when `f` returns true.
fn combinations(
    n: usize,
    d: usize,
    buf: &mut Vec<usize>,
    pos: usize,
    start: usize,
    f: &mut impl FnMut(&[usize]) -> bool,
) -> bool {
    if pos == d {
        return f(buf);
    }
    for i in start..n {
        buf[pos] = i;
        if combinations(n, d, buf, pos + 1, i + 1, f) {
            return true;
        }
    }
    false
}

fn is_shattered(h: &HypothesisFamily, atoms: &[usize]) -> bool {
    let want = 1usize << atoms.len();
    let mut seen = vec![false; want];
    let mut count = 0;
    for &m in h.members() {
        let mut pattern = 0usize;
        for (bit, &a) in atoms.iter().enumerate() {
            if m.contains(a) {
                pattern |= 1 << bit;
            }
        }
        if !seen[pattern] {
            seen[pattern] = true;
            count += 1;
            if count == want {
                return true;
            }
        }
    }
    false
}

/// Guard on the number of distinct behaviors the Littlestone recursion
/// will memoize over.
pub const LITTLESTONE_BEHAVIOR_GUARD: usize = 4096;

/// Exact Littlestone dimension via the mistake-tree recursion
///
/// `LD(B) = 0` if `B` has one behavior, else
/// `max_x { 1 + min(LD(B|x=0), LD(B|x=1)) }` over atoms `x` splitting `B`
/// into two non-empty restrictions, memoized on behavior sets.
pub fn littlestone_dimension(h: &HypothesisFamily) -> Result<usize> {
    if h.len() > LITTLESTONE_BEHAVIOR_GUARD {
        return Err(Error::capacity(format!(
            "{} behaviors exceed the Littlestone guard {LITTLESTONE_BEHAVIOR_GUARD}",
            h.len()
        )));
    }
    let behaviors: Vec<u128> = {
        let mut b: Vec<u128> = h.members().iter().map(|m| m.mask()).collect();
        b.sort_unstable();
        b
    };
    let n = h.space().atom_count();
    let mut memo: HashMap<Vec<u128>, usize> = HashMap::new();
    Ok(ld_rec(&behaviors, n, &mut memo))
}

fn ld_rec(behaviors: &[u128], n: usize, memo: &mut HashMap<Vec<u128>, usize>) -> usize {
    if behaviors.len() <= 1 {
        return 0;
    }
    if let Some(&v) = memo.get(behaviors) {
        return v;
    }
    let mut best = 0;
    // atoms with the same column split identically; visit each split once
    let mut seen_splits: HashSet<Vec<u128>> = HashSet::new();
    for x in 0..n {
        let bit = 1u128 << x;
        let zeros: Vec<u128> = behaviors.iter().copied().filter(|b| b & bit == 0).collect();
        if zeros.is_empty() || zeros.len() == behaviors.len() {
            continue;
        }
        if !seen_splits.insert(zeros.clone()) {
            continue;
        }
        let ones: Vec<u128> = behaviors.iter().copied().filter(|b| b & bit != 0).collect();
        let d = 1 + ld_rec(&zeros, n, memo).min(ld_rec(&ones, n, memo));
        best = best.max(d);
    }
    memo.insert(behaviors.to_vec(), best);
    best
}
