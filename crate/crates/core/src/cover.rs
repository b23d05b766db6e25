//! Greedy uniform covers and maximal packings of hypothesis families.
//!
//! A cover at scale `delta` under a base measure `mu0` approximates every
//! member within `delta` disagreement mass; because the family member mass
//! is bounded through the tolerance profile, a `mu0`-cover at the right
//! scale is a uniform cover under every distribution in the family at
//! once. Covers come with an exhaustively checked verification record.

use crate::error::{Error, Result};
use crate::hypothesis::HypothesisFamily;
use crate::space::{mass_le, Distribution, DistributionFamily, MASS_TOL};

/// Verification record for a greedy cover: which members were selected
/// and the exhaustively computed worst residual disagreement.
#[derive(Debug, Clone)]
pub struct CoverRecord {
    /// Indices (into the covered family) of the selected cover elements.
    pub selected: Vec<usize>,
    /// `max_f min_{g in cover} mu0(f != g)`, over all members `f`.
    pub max_residual: f64,
    /// Whether `max_residual <= delta` held on the exhaustive check.
    pub verified: bool,
}

/// Greedy uniform cover of `h` at scale `delta` under `mu0`: members are
/// scanned in index order and added whenever no selected element is
/// within `delta` disagreement mass. Every member is then within `delta`
/// of the cover, which the returned record re-checks exhaustively.
pub fn build_uniform_cover(
    h: &HypothesisFamily,
    mu0: &Distribution,
    delta: f64,
) -> Result<(HypothesisFamily, CoverRecord)> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::input(format!("delta {delta} outside (0, 1]")));
    }
    if mu0.space() != h.space() {
        return Err(Error::input("cover base measure on a different space"));
    }
    let mut selected: Vec<usize> = Vec::new();
    for (i, &f) in h.members().iter().enumerate() {
        let covered = selected
            .iter()
            .any(|&j| mass_le(mu0.mass(f.sym_diff(h.member(j))), delta));
        if !covered {
            selected.push(i);
        }
    }
    let max_residual = h
        .members()
        .iter()
        .map(|&f| {
            selected
                .iter()
                .map(|&j| mu0.mass(f.sym_diff(h.member(j))))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    let record = CoverRecord {
        selected: selected.clone(),
        max_residual,
        verified: mass_le(max_residual, delta),
    };
    Ok((h.restrict(&selected)?, record))
}

/// Greedy maximal packing: a sub-family in which every pair disagrees
/// with envelope mass at least `eps`. Its size lower-bounds how many
/// hypotheses any `eps`-uniform cover must distinguish.
pub fn max_packing(
    h: &HypothesisFamily,
    family: &DistributionFamily,
    eps: f64,
) -> Result<HypothesisFamily> {
    if eps <= 0.0 {
        return Err(Error::input(format!("eps {eps} must be positive")));
    }
    if family.space() != h.space() {
        return Err(Error::input("packing family on a different space"));
    }
    let mut selected: Vec<usize> = Vec::new();
    for (i, &f) in h.members().iter().enumerate() {
        let separated = selected
            .iter()
            .all(|&j| family.envelope_mass(f.sym_diff(h.member(j))) >= eps - MASS_TOL);
        if separated {
            selected.push(i);
        }
    }
    h.restrict(&selected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{FiniteSpace, Subset};

    #[test]
    fn greedy_cover_of_thresholds_at_half() {
        let s = FiniteSpace::with_atom_count(4).unwrap();
        let h = HypothesisFamily::all_thresholds(s.clone());
        let mu0 = Distribution::uniform(s);
        let (cover, rec) = build_uniform_cover(&h, &mu0, 0.5).unwrap();
        assert!(cover.len() <= 3, "cover size {}", cover.len());
        assert!(rec.verified);
        assert!(rec.max_residual <= 0.5 + MASS_TOL);
    }

    #[test]
    fn delta_one_covers_with_single_element() {
        let s = FiniteSpace::with_atom_count(4).unwrap();
        let h = HypothesisFamily::all_thresholds(s.clone());
        let mu0 = Distribution::uniform(s);
        let (cover, rec) = build_uniform_cover(&h, &mu0, 1.0).unwrap();
        assert_eq!(cover.len(), 1);
        assert!(rec.verified);
    }

    #[test]
    fn singleton_family_covers_itself() {
        let s = FiniteSpace::with_atom_count(4).unwrap();
        let h = HypothesisFamily::new(s.clone(), vec![Subset::from_mask(0b0110)]).unwrap();
        let (cover, rec) = build_uniform_cover(&h, &Distribution::uniform(s), 0.25).unwrap();
        assert_eq!(cover.len(), 1);
        assert_eq!(cover.member(0), Subset::from_mask(0b0110));
        assert!(rec.verified && rec.max_residual == 0.0);
    }

    #[test]
    fn packing_of_singleton_indicators() {
        let s = FiniteSpace::with_atom_count(4).unwrap();
        let members = (0..4).map(Subset::singleton).collect();
        let h = HypothesisFamily::new(s.clone(), members).unwrap();
        let family = DistributionFamily::singleton(Distribution::uniform(s));
        // pairwise disagreement mass is 0.5 >= 0.3
        let packing = max_packing(&h, &family, 0.3).unwrap();
        assert_eq!(packing.len(), 4);
        // nothing can be 1.01-separated
        let packing = max_packing(&h, &family, 1.01).unwrap();
        assert_eq!(packing.len(), 1);
    }

    #[test]
    fn packing_of_single_member_family() {
        let s = FiniteSpace::with_atom_count(4).unwrap();
        let h = HypothesisFamily::new(s.clone(), vec![Subset::singleton(2)]).unwrap();
        let family = DistributionFamily::singleton(Distribution::uniform(s));
        assert_eq!(max_packing(&h, &family, 0.5).unwrap().len(), 1);
    }
}
