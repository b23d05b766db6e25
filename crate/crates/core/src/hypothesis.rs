//! Binary hypothesis families over a finite space.
//!
//! A hypothesis is the indicator of a subset of atoms, so a family is a
//! list of `Subset`s. A family may carry a threshold tag: the members
//! then form a chain under pointwise order, which is exactly the finite
//! form of a generalized threshold class (indicators of down-sets under a
//! total preorder on the atoms). Chain families cannot shatter two
//! points, so their VC dimension is at most 1.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{FiniteSpace, Subset};

/// How a threshold tag orders the atoms: `ranks[x]` is the position of
/// atom `x` in the preorder, ties allowed. A tagged member must be a
/// down-set: it contains every atom ranked at or below any of its atoms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdOrder {
    pub ranks: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct HypothesisFamily {
    space: Arc<FiniteSpace>,
    members: Vec<Subset>,
    threshold: Option<ThresholdOrder>,
}

impl HypothesisFamily {
    pub fn new(space: Arc<FiniteSpace>, members: Vec<Subset>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::input("hypothesis family needs at least one member"));
        }
        let mut dedup: Vec<Subset> = Vec::with_capacity(members.len());
        for m in members {
            space.check_subset(m)?;
            if !dedup.contains(&m) {
                dedup.push(m);
            }
        }
        Ok(HypothesisFamily {
            space,
            members: dedup,
            threshold: None,
        })
    }

    /// Builds from 0/1 label vectors (one per member, one entry per atom).
    pub fn from_label_vecs(space: Arc<FiniteSpace>, rows: &[Vec<u8>]) -> Result<Self> {
        let n = space.atom_count();
        let mut members = Vec::with_capacity(rows.len());
        for row in rows {
            if row.len() != n {
                return Err(Error::input(format!(
                    "label vector length {} != atom count {n}",
                    row.len()
                )));
            }
            let mut mask = 0u128;
            for (i, &b) in row.iter().enumerate() {
                match b {
                    0 => {}
                    1 => mask |= 1 << i,
                    other => return Err(Error::input(format!("label {other} is not 0/1"))),
                }
            }
            members.push(Subset::from_mask(mask));
        }
        Self::new(space, members)
    }

    /// Tags the family as a generalized threshold class, validating the
    /// chain condition and deriving the canonical preorder (atom rank =
    /// number of members labelling it 0; ties get equal rank).
    pub fn into_threshold(mut self) -> Result<Self> {
        let order = self.canonical_threshold_order()?;
        self.validate_down_sets(&order)?;
        self.threshold = Some(order);
        Ok(self)
    }

    /// Tags with an explicit preorder, validating every member is a
    /// down-set under it.
    pub fn into_threshold_with_order(mut self, order: ThresholdOrder) -> Result<Self> {
        if order.ranks.len() != self.space.atom_count() {
            return Err(Error::input("preorder rank vector length != atom count"));
        }
        self.validate_down_sets(&order)?;
        self.threshold = Some(order);
        Ok(self)
    }

    fn canonical_threshold_order(&self) -> Result<ThresholdOrder> {
        // chain condition: any two members are pointwise comparable
        for (i, &f) in self.members.iter().enumerate() {
            for &g in &self.members[i + 1..] {
                if !f.is_subset_of(g) && !g.is_subset_of(f) {
                    return Err(Error::input(
                        "members are not totally ordered pointwise; not a threshold class",
                    ));
                }
            }
        }
        let ranks = (0..self.space.atom_count())
            .map(|x| self.members.iter().filter(|m| !m.contains(x)).count() as u32)
            .collect();
        Ok(ThresholdOrder { ranks })
    }

    fn validate_down_sets(&self, order: &ThresholdOrder) -> Result<()> {
        for &m in &self.members {
            for y in m.atoms() {
                for x in 0..self.space.atom_count() {
                    if order.ranks[x] <= order.ranks[y] && !m.contains(x) {
                        return Err(Error::input(format!(
                            "member {:#x} is not a down-set: contains atom {y} but not \
                             lower-ranked atom {x}",
                            m.mask()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// The full threshold chain over `atom_count` atoms in their index
    /// order: `1[i >= k]` for `k = 0..=atom_count` (n+1 members).
    pub fn all_thresholds(space: Arc<FiniteSpace>) -> Self {
        let n = space.atom_count();
        let members = (0..=n)
            .map(|k| Subset::from_atoms(&(k..n).collect::<Vec<_>>()))
            .collect();
        HypothesisFamily::new(space, members)
            .and_then(Self::into_threshold)
            .expect("threshold chain is valid by construction")
    }

    pub fn space(&self) -> &Arc<FiniteSpace> {
        &self.space
    }

    pub fn members(&self) -> &[Subset] {
        &self.members
    }

    pub fn member(&self, i: usize) -> Subset {
        self.members[i]
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_threshold(&self) -> bool {
        self.threshold.is_some()
    }

    pub fn threshold_order(&self) -> Option<&ThresholdOrder> {
        self.threshold.as_ref()
    }

    pub fn label(&self, member: usize, atom: usize) -> bool {
        self.members[member].contains(atom)
    }

    /// Disagreement region of two members.
    pub fn disagreement(&self, i: usize, j: usize) -> Subset {
        self.members[i].sym_diff(self.members[j])
    }

    /// Sub-family keeping the given member indices (in the given order).
    pub fn restrict(&self, indices: &[usize]) -> Result<Self> {
        let members = indices.iter().map(|&i| self.members[i]).collect();
        let mut fam = HypothesisFamily::new(self.space.clone(), members)?;
        fam.threshold = self.threshold.clone();
        Ok(fam)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_chain_is_detected() {
        let s = FiniteSpace::with_atom_count(4).unwrap();
        let fam = HypothesisFamily::all_thresholds(s);
        assert_eq!(fam.len(), 5);
        assert!(fam.is_threshold());
        // 1[i >= k]: atom 0 is labelled 1 only by k = 0, so it misses 4 members
        assert_eq!(fam.threshold_order().unwrap().ranks, vec![4, 3, 2, 1]);
    }

    #[test]
    fn non_chain_family_rejects_threshold_tag() {
        let s = FiniteSpace::with_atom_count(3).unwrap();
        let fam = HypothesisFamily::from_label_vecs(s, &[vec![1, 0, 0], vec![0, 1, 0]]).unwrap();
        assert!(fam.into_threshold().is_err());
    }

    #[test]
    fn duplicate_members_collapse() {
        let s = FiniteSpace::with_atom_count(3).unwrap();
        let fam =
            HypothesisFamily::from_label_vecs(s, &[vec![1, 1, 0], vec![1, 1, 0], vec![0, 0, 0]])
                .unwrap();
        assert_eq!(fam.len(), 2);
    }
}
