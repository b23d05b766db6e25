//! Finite measurable spaces, subsets as bitmasks, distributions, and
//! distribution families with their envelope functional.
//!
//! Every measurable set of a finite atomic space is a union of atoms, so a
//! `Subset` is a bitmask and all set algebra is bit algebra. The envelope
//! of a family `U` on a set `A` is `max_{mu in U} mu(A)`, an exact maximum
//! here rather than a supremum.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for mass comparisons. A test like `mass >= eps` is
/// implemented as `mass >= eps - MASS_TOL` so boundary witnesses are not
/// lost to rounding.
pub const MASS_TOL: f64 = 1e-12;

/// Probability vectors must sum to 1 within this tolerance.
pub const PROB_SUM_TOL: f64 = 1e-9;

/// Atoms are bitmask positions in a `u128`; one position is reserved for
/// the dummy atom of the extended space, so base spaces hold at most 127.
pub const MAX_ATOMS: usize = 127;

/// `a >= b` up to [`MASS_TOL`].
#[inline]
pub fn mass_ge(a: f64, b: f64) -> bool {
    a >= b - MASS_TOL
}

/// `a <= b` up to [`MASS_TOL`].
#[inline]
pub fn mass_le(a: f64, b: f64) -> bool {
    a <= b + MASS_TOL
}

/// A finite instance space: `atom_count` distinct labelled points.
///
/// Atom id `atom_count` (one past the last real atom) is reserved: it is
/// never a member of any user-supplied subset and houses the dummy point
/// that couplings send dropped mass to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteSpace {
    labels: Vec<String>,
}

impl FiniteSpace {
    pub fn new(labels: Vec<String>) -> Result<Arc<Self>> {
        if labels.is_empty() {
            return Err(Error::input("space needs at least one atom"));
        }
        if labels.len() > MAX_ATOMS {
            return Err(Error::capacity(format!(
                "at most {MAX_ATOMS} atoms supported, got {}",
                labels.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::input(format!("duplicate atom label {l:?}")));
            }
        }
        Ok(Arc::new(FiniteSpace { labels }))
    }

    /// Space with atoms labelled `x0..x{n-1}`.
    pub fn with_atom_count(n: usize) -> Result<Arc<Self>> {
        Self::new((0..n).map(|i| format!("x{i}")).collect())
    }

    pub fn atom_count(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Id of the reserved dummy atom (one past the last real atom).
    pub fn dummy_atom(&self) -> usize {
        self.labels.len()
    }

    /// The extended space with the dummy atom materialized as a real atom.
    pub fn extended(&self) -> Arc<Self> {
        let mut labels = self.labels.clone();
        labels.push("<dummy>".to_string());
        Arc::new(FiniteSpace { labels })
    }

    pub fn full_subset(&self) -> Subset {
        Subset::full(self.atom_count())
    }

    /// Validates that `mask` uses no bits beyond this space's atoms.
    pub fn check_subset(&self, a: Subset) -> Result<()> {
        if self.atom_count() < 128 && (a.mask() >> self.atom_count()) != 0 {
            return Err(Error::MaskRange(format!(
                "mask {:#x} has bits beyond atom count {}",
                a.mask(),
                self.atom_count()
            )));
        }
        Ok(())
    }
}

/// A measurable set: a bitmask over atom ids (bit `i` = atom `i`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Subset(u128);

impl Subset {
    pub const EMPTY: Subset = Subset(0);

    pub fn from_mask(mask: u128) -> Self {
        Subset(mask)
    }

    pub fn full(atom_count: usize) -> Self {
        debug_assert!(atom_count < 128);
        Subset((1u128 << atom_count) - 1)
    }

    pub fn singleton(atom: usize) -> Self {
        debug_assert!(atom < 128);
        Subset(1u128 << atom)
    }

    pub fn from_atoms(atoms: &[usize]) -> Self {
        let mut mask = 0u128;
        for &a in atoms {
            debug_assert!(a < 128);
            mask |= 1u128 << a;
        }
        Subset(mask)
    }

    pub fn mask(&self) -> u128 {
        self.0
    }

    pub fn contains(&self, atom: usize) -> bool {
        atom < 128 && (self.0 >> atom) & 1 == 1
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn card(&self) -> u32 {
        self.0.count_ones()
    }

    pub fn union(&self, other: Subset) -> Subset {
        Subset(self.0 | other.0)
    }

    pub fn intersect(&self, other: Subset) -> Subset {
        Subset(self.0 & other.0)
    }

    pub fn minus(&self, other: Subset) -> Subset {
        Subset(self.0 & !other.0)
    }

    /// Symmetric difference; for hypotheses-as-sets this is the
    /// disagreement region.
    pub fn sym_diff(&self, other: Subset) -> Subset {
        Subset(self.0 ^ other.0)
    }

    pub fn is_disjoint(&self, other: Subset) -> bool {
        self.0 & other.0 == 0
    }

    pub fn is_subset_of(&self, other: Subset) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn atoms(&self) -> impl Iterator<Item = usize> + '_ {
        (0..128).filter(move |&i| self.contains(i))
    }
}

/// A probability distribution over the atoms of one space.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    space: Arc<FiniteSpace>,
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(space: Arc<FiniteSpace>, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != space.atom_count() {
            return Err(Error::input(format!(
                "probability vector length {} != atom count {}",
                probs.len(),
                space.atom_count()
            )));
        }
        for (i, &p) in probs.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(Error::Normalization(format!(
                    "entry {p} for atom {i} outside [0, 1]"
                )));
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::Normalization(format!(
                "probabilities sum to {sum}, not 1 within {PROB_SUM_TOL}"
            )));
        }
        Ok(Distribution { space, probs })
    }

    pub fn uniform(space: Arc<FiniteSpace>) -> Self {
        let n = space.atom_count();
        Distribution {
            space,
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(space: Arc<FiniteSpace>, atom: usize) -> Result<Self> {
        if atom >= space.atom_count() {
            return Err(Error::input(format!("atom {atom} out of range")));
        }
        let mut probs = vec![0.0; space.atom_count()];
        probs[atom] = 1.0;
        Ok(Distribution { space, probs })
    }

    /// Uniform mixture of the given distributions (all on one space).
    pub fn uniform_mixture(dists: &[&Distribution]) -> Result<Self> {
        let first = dists
            .first()
            .ok_or_else(|| Error::input("mixture of zero distributions"))?;
        let n = first.space.atom_count();
        let mut probs = vec![0.0; n];
        for d in dists {
            if d.space != first.space {
                return Err(Error::input("mixture members on different spaces"));
            }
            for (acc, p) in probs.iter_mut().zip(&d.probs) {
                *acc += p / dists.len() as f64;
            }
        }
        Ok(Distribution {
            space: first.space.clone(),
            probs,
        })
    }

    pub fn space(&self) -> &Arc<FiniteSpace> {
        &self.space
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, atom: usize) -> f64 {
        self.probs[atom]
    }

    /// Mass of a subset. The mask is assumed valid for this space.
    pub fn mass(&self, a: Subset) -> f64 {
        debug_assert!(self.space.check_subset(a).is_ok());
        a.atoms().map(|i| self.probs[i]).sum()
    }

    /// Mass with the mask validated against the space.
    pub fn checked_mass(&self, a: Subset) -> Result<f64> {
        self.space.check_subset(a)?;
        Ok(self.mass(a))
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen::<f64>();
        let mut acc = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.probs.len() - 1
    }

    /// Masses of all `2^n` subsets, indexed by mask. Guarded: `n <= 20`.
    pub fn all_subset_masses(&self) -> Result<Vec<f64>> {
        let n = self.space.atom_count();
        if n > 20 {
            return Err(Error::capacity(format!(
                "2^{n} subset enumeration beyond n = 20 cutoff"
            )));
        }
        let mut masses = vec![0.0; 1 << n];
        for m in 1usize..(1 << n) {
            let low = m.trailing_zeros() as usize;
            masses[m] = masses[m & (m - 1)] + self.probs[low];
        }
        Ok(masses)
    }
}

/// Envelope mass of a family on a set, with the index of a member
/// attaining it (lowest index on ties).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeMass {
    pub mass: f64,
    pub witness: usize,
}

/// A non-empty, deduplicated family of distributions on one shared space.
///
/// This is the constraint set the adversary draws from; its envelope
/// functional `A -> max_mu mu(A)` is the central set function of the
/// theory (monotone and subadditive by construction).
#[derive(Debug, Clone)]
pub struct DistributionFamily {
    members: Vec<Distribution>,
}

impl DistributionFamily {
    pub fn new(members: Vec<Distribution>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::input("family needs at least one member"))?;
        let space = first.space().clone();
        let mut dedup: Vec<Distribution> = Vec::with_capacity(members.len());
        for d in members {
            if d.space().as_ref() != space.as_ref() {
                return Err(Error::input("family members on different spaces"));
            }
            if !dedup.iter().any(|e| e.probs() == d.probs()) {
                dedup.push(d);
            }
        }
        Ok(DistributionFamily { members: dedup })
    }

    pub fn singleton(d: Distribution) -> Self {
        DistributionFamily { members: vec![d] }
    }

    pub fn members(&self) -> &[Distribution] {
        &self.members
    }

    pub fn member(&self, i: usize) -> &Distribution {
        &self.members[i]
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn space(&self) -> &Arc<FiniteSpace> {
        self.members[0].space()
    }

    /// `max_{mu in U} mu(A)` with its witness member.
    pub fn envelope(&self, a: Subset) -> EnvelopeMass {
        let mut best = EnvelopeMass {
            mass: self.members[0].mass(a),
            witness: 0,
        };
        for (i, d) in self.members.iter().enumerate().skip(1) {
            let m = d.mass(a);
            if m > best.mass {
                best = EnvelopeMass {
                    mass: m,
                    witness: i,
                };
            }
        }
        best
    }

    /// Envelope with the mask validated against the family's space.
    pub fn checked_envelope(&self, a: Subset) -> Result<EnvelopeMass> {
        self.space().check_subset(a)?;
        Ok(self.envelope(a))
    }

    pub fn envelope_mass(&self, a: Subset) -> f64 {
        self.envelope(a).mass
    }

    /// Closes the family under finite mixtures on a weight grid with
    /// denominator `levels`: every convex combination of members whose
    /// weights are multiples of `1/levels` becomes a member. The results
    /// that assume a convex constraint set can be exercised against the
    /// convexified family without deciding whether convexity was meant.
    pub fn convexify(&self, levels: usize) -> Result<DistributionFamily> {
        if levels == 0 {
            return Err(Error::input("need at least one mixture level"));
        }
        let k = self.members.len();
        let count = compositions_count(levels, k);
        if count > 100_000 {
            return Err(Error::capacity(format!(
                "{count} mixture weights exceed the convexification guard"
            )));
        }
        let n = self.space().atom_count();
        let mut members = Vec::new();
        let mut weights = vec![0usize; k];
        compositions(levels, 0, &mut weights, &mut |w| {
            let mut probs = vec![0.0f64; n];
            for (wi, member) in w.iter().zip(&self.members) {
                for (p, q) in probs.iter_mut().zip(member.probs()) {
                    *p += (*wi as f64 / levels as f64) * q;
                }
            }
            members.push(Distribution {
                space: self.space().clone(),
                probs,
            });
        });
        DistributionFamily::new(members)
    }
}

fn compositions_count(total: usize, parts: usize) -> usize {
    // C(total + parts - 1, parts - 1)
    let mut c = 1usize;
    for i in 0..parts - 1 {
        c = c.saturating_mul(total + i + 1) / (i + 1);
    }
    c
}

fn compositions(remaining: usize, idx: usize, buf: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if idx == buf.len() - 1 {
        buf[idx] = remaining;
        f(buf);
        return;
    }
    for take in 0..=remaining {
        buf[idx] = take;
        compositions(remaining - take, idx + 1, buf, f);
    }
}
