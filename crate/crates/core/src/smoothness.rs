//! Smoothness certificates, fragmentation numbers, and the constructive
//! base-measure procedures, each paired with an exhaustive verifier.
//!
//! A family `U` is `(mu0, rho)`-smooth when `mu(A) <= rho(mu0(A))` for
//! every member `mu` and set `A`. On a finite space this is a check over
//! all `2^n` subsets, so certificates here are verified objects rather
//! than asymptotic claims. The two iterative constructions — the
//! per-scale base measure and the full certificate — follow their proofs
//! literally, selecting the lexicographically first feasible
//! (member, subset) pair at each step so runs are reproducible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::{Exactness, ToleranceProfile};
use crate::space::{mass_ge, mass_le, Distribution, DistributionFamily, Subset, MASS_TOL};

/// Exhaustive subset enumeration is allowed up to this atom count.
pub const EXHAUSTIVE_CUTOFF: usize = 20;

/// The exact fragmentation dynamic program (3^n submask scan) is allowed
/// up to this atom count.
pub const PACKING_DP_CUTOFF: usize = 15;

/// A verified (or refuted) smoothness certificate for a family.
#[derive(Debug, Clone)]
pub struct SmoothnessCertificate {
    pub base: Distribution,
    pub profile: ToleranceProfile,
    pub verified: bool,
    /// Lexicographically smallest violating subset when not verified.
    pub witness: Option<Subset>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchMode {
    Exact,
    Greedy,
}

/// Witness for a fragmentation count: `count` disjoint parts, each
/// carrying at least `eps` mass under the cited member.
#[derive(Debug, Clone)]
pub struct FragmentationWitness {
    pub count: usize,
    pub parts: Vec<Subset>,
    pub witnesses: Vec<usize>,
    /// `Exact` from the dynamic program, `LowerBound` from greedy carving.
    pub exactness: Exactness,
}

/// The exact tolerance profile of a family against a base measure:
/// `rho~(eps) = max { mu(A) : mu in U, mu0(A) <= eps }` on the grid.
///
/// Exact mode enumerates all subsets (guard `n <= 20`); above the guard a
/// greedy density-ordering pass yields a flagged lower bound.
pub fn tolerance_profile(
    family: &DistributionFamily,
    mu0: &Distribution,
    grid: &[f64],
) -> Result<ToleranceProfile> {
    if mu0.space() != family.space() {
        return Err(Error::input("base measure on a different space"));
    }
    if grid.is_empty() {
        return Err(Error::input("tolerance profile needs a non-empty grid"));
    }
    let n = family.space().atom_count();
    let mut zs: Vec<f64> = grid.to_vec();
    zs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    zs.dedup();

    let (values, exactness) = if n <= EXHAUSTIVE_CUTOFF {
        (profile_values_exact(family, mu0, &zs)?, Exactness::Exact)
    } else {
        (
            profile_values_greedy(family, mu0, &zs),
            Exactness::LowerBound,
        )
    };
    let mut profile = ToleranceProfile::from_steps(zs.into_iter().zip(values).collect())?;
    profile.set_exactness(exactness);
    Ok(profile)
}

fn profile_values_exact(
    family: &DistributionFamily,
    mu0: &Distribution,
    zs: &[f64],
) -> Result<Vec<f64>> {
    let base = mu0.all_subset_masses()?;
    let mut order: Vec<u32> = (0..base.len() as u32).collect();
    order.sort_by(|&a, &b| base[a as usize].partial_cmp(&base[b as usize]).unwrap());

    let mut values = vec![0.0f64; zs.len()];
    for member in family.members() {
        let masses = member.all_subset_masses()?;
        // walk subsets by ascending base mass, tracking the running max of
        // member mass, and snapshot it at each grid threshold
        let mut running = 0.0f64;
        let mut gi = 0usize;
        for &m in &order {
            let bm = base[m as usize];
            while gi < zs.len() && bm > zs[gi] + MASS_TOL {
                values[gi] = values[gi].max(running);
                gi += 1;
            }
            if gi == zs.len() {
                break;
            }
            running = running.max(masses[m as usize]);
        }
        for v in values.iter_mut().skip(gi) {
            *v = v.max(running);
        }
    }
    Ok(values)
}

fn profile_values_greedy(family: &DistributionFamily, mu0: &Distribution, zs: &[f64]) -> Vec<f64> {
    let n = family.space().atom_count();
    let mut values = vec![0.0f64; zs.len()];
    for member in family.members() {
        // atoms by density ratio, infinite-ratio atoms first
        let mut atoms: Vec<usize> = (0..n).collect();
        atoms.sort_by(|&a, &b| {
            let ra = density_ratio(member.prob(a), mu0.prob(a));
            let rb = density_ratio(member.prob(b), mu0.prob(b));
            rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
        });
        for (gi, &z) in zs.iter().enumerate() {
            let mut base_sum = 0.0;
            let mut mass = 0.0;
            for &x in &atoms {
                if base_sum + mu0.prob(x) <= z + MASS_TOL {
                    base_sum += mu0.prob(x);
                    mass += member.prob(x);
                }
            }
            values[gi] = values[gi].max(mass);
        }
    }
    values
}

fn density_ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Exhaustively checks `mu(A) <= rho(mu0(A))` over all subsets and
/// members. On failure the witness is the smallest violating mask.
pub fn verify_certificate(
    family: &DistributionFamily,
    mu0: &Distribution,
    profile: &ToleranceProfile,
) -> Result<SmoothnessCertificate> {
    verify_certificate_with_tol(family, mu0, profile, MASS_TOL)
}

pub fn verify_certificate_with_tol(
    family: &DistributionFamily,
    mu0: &Distribution,
    profile: &ToleranceProfile,
    tol: f64,
) -> Result<SmoothnessCertificate> {
    if mu0.space() != family.space() {
        return Err(Error::input("base measure on a different space"));
    }
    let base = mu0.all_subset_masses()?;
    let member_masses: Vec<Vec<f64>> = family
        .members()
        .iter()
        .map(|m| m.all_subset_masses())
        .collect::<Result<_>>()?;
    let mut witness = None;
    'scan: for mask in 0..base.len() {
        let bound = profile.eval(base[mask]);
        for mm in &member_masses {
            if mm[mask] > bound + tol {
                witness = Some(Subset::from_mask(mask as u128));
                break 'scan;
            }
        }
    }
    Ok(SmoothnessCertificate {
        base: mu0.clone(),
        profile: profile.clone(),
        verified: witness.is_none(),
        witness,
    })
}

/// The epsilon-fragmentation number: the maximum count of disjoint sets
/// each carrying at least `eps` envelope mass, with a witnessing packing.
///
/// Exact mode runs the submask dynamic program
/// `best(S) = max_{A <= S, envelope(A) >= eps} 1 + best(S \ A)`
/// (3^n pairs, guard `n <= 15`); greedy mode carves parts member by
/// member and is a flagged lower bound.
pub fn fragmentation_number(
    family: &DistributionFamily,
    eps: f64,
    mode: SearchMode,
) -> Result<FragmentationWitness> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::input(format!("eps {eps} outside (0, 1]")));
    }
    match mode {
        SearchMode::Exact => fragmentation_exact(family, eps),
        SearchMode::Greedy => Ok(fragmentation_greedy(family, eps)),
    }
}

fn fragmentation_exact(family: &DistributionFamily, eps: f64) -> Result<FragmentationWitness> {
    let n = family.space().atom_count();
    if n > PACKING_DP_CUTOFF {
        return Err(Error::capacity(format!(
            "exact fragmentation needs n <= {PACKING_DP_CUTOFF}, got {n}"
        )));
    }
    let size = 1usize << n;
    let mut envelope = vec![0.0f64; size];
    for member in family.members() {
        let masses = member.all_subset_masses()?;
        for (e, m) in envelope.iter_mut().zip(masses) {
            *e = e.max(m);
        }
    }
    let qualifies: Vec<bool> = envelope.iter().map(|&e| mass_ge(e, eps)).collect();

    let mut best = vec![0u16; size];
    let mut choice = vec![0u32; size]; // 0 = stop; else the chosen part mask
    for s in 1..size {
        let mut a = s;
        // descending submask scan with >= keeps the smallest maximizing part
        while a > 0 {
            if qualifies[a] {
                let cand = 1 + best[s & !a];
                if cand >= best[s] {
                    best[s] = cand;
                    choice[s] = a as u32;
                }
            }
            a = (a - 1) & s;
        }
    }

    let mut parts = Vec::new();
    let mut witnesses = Vec::new();
    let mut s = size - 1;
    while choice[s] != 0 {
        let part = Subset::from_mask(choice[s] as u128);
        witnesses.push(family.envelope(part).witness);
        parts.push(part);
        s &= !(choice[s] as usize);
    }
    Ok(FragmentationWitness {
        count: best[size - 1] as usize,
        parts,
        witnesses,
        exactness: Exactness::Exact,
    })
}

fn fragmentation_greedy(family: &DistributionFamily, eps: f64) -> FragmentationWitness {
    let n = family.space().atom_count();
    let mut taken = Subset::EMPTY;
    let mut parts = Vec::new();
    let mut witnesses = Vec::new();
    for (mi, member) in family.members().iter().enumerate() {
        loop {
            let mut atoms: Vec<usize> = (0..n).filter(|&x| !taken.contains(x)).collect();
            atoms.sort_by(|&a, &b| {
                member
                    .prob(b)
                    .partial_cmp(&member.prob(a))
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let mut part = Subset::EMPTY;
            let mut mass = 0.0;
            for &x in &atoms {
                if mass_ge(mass, eps) {
                    break;
                }
                part = part.union(Subset::singleton(x));
                mass += member.prob(x);
            }
            if !mass_ge(mass, eps) {
                break;
            }
            taken = taken.union(part);
            parts.push(part);
            witnesses.push(mi);
        }
    }
    FragmentationWitness {
        count: parts.len(),
        parts,
        witnesses,
        exactness: Exactness::LowerBound,
    }
}

/// Output of the per-scale base-measure construction: the mixture of the
/// selected members plus the iteration log.
#[derive(Debug, Clone)]
pub struct ScaledBase {
    pub base: Distribution,
    /// The selected (member index, set) pairs in selection order.
    pub iterations: Vec<(usize, Subset)>,
    /// The exact fragmentation number used as `N` in the construction.
    pub fragmentation: usize,
}

/// Constructs the scale-`eps` base measure: iteratively selects pairs
/// `(mu_i, A_i)` with `sum_{j<i} mu_j(A_i) <= eps / N` and
/// `mu_i(A_i) >= 2 eps` until none exists, then returns the uniform
/// mixture of the selected members. The outcome satisfies
/// `mu_eps(A) <= eps / N^2  =>  envelope(A) <= 2 eps` for every subset
/// (see [`verify_scaled_base`]); when no pair is ever feasible the
/// envelope is everywhere below `2 eps` and the uniform mixture of the
/// whole family is returned.
pub fn construct_scaled_base(family: &DistributionFamily, eps: f64) -> Result<ScaledBase> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::input(format!("eps {eps} outside (0, 1]")));
    }
    let n = family.space().atom_count();
    if n > EXHAUSTIVE_CUTOFF {
        return Err(Error::capacity(format!(
            "scaled base needs exhaustive subset search, n <= {EXHAUSTIVE_CUTOFF}"
        )));
    }
    let frag = fragmentation_number(family, eps, SearchMode::Exact)?.count;
    let member_masses: Vec<Vec<f64>> = family
        .members()
        .iter()
        .map(|m| m.all_subset_masses())
        .collect::<Result<_>>()?;

    let mut selected: Vec<(usize, Subset)> = Vec::new();
    let mut acc = vec![0.0f64; n]; // sum of selected members' atom masses
    let budget = eps / frag as f64;
    let safety_cap = 10 * frag + 10;
    loop {
        let acc_masses = subset_masses_of(&acc);
        let mut found = None;
        'outer: for (mi, mm) in member_masses.iter().enumerate() {
            for mask in 1..mm.len() {
                if mass_ge(mm[mask], 2.0 * eps) && mass_le(acc_masses[mask], budget) {
                    found = Some((mi, mask));
                    break 'outer;
                }
            }
        }
        match found {
            None => break,
            Some((mi, mask)) => {
                for (a, p) in acc.iter_mut().zip(family.member(mi).probs()) {
                    *a += p;
                }
                selected.push((mi, Subset::from_mask(mask as u128)));
                if selected.len() > safety_cap {
                    return Err(Error::capacity(
                        "scaled-base construction failed to terminate".to_string(),
                    ));
                }
            }
        }
    }

    let base = if selected.is_empty() {
        Distribution::uniform_mixture(&family.members().iter().collect::<Vec<_>>())?
    } else {
        let picked: Vec<&Distribution> =
            selected.iter().map(|&(mi, _)| family.member(mi)).collect();
        Distribution::uniform_mixture(&picked)?
    };
    Ok(ScaledBase {
        base,
        iterations: selected,
        fragmentation: frag,
    })
}

/// Exhaustively checks the scaled-base implication
/// `mu_eps(A) <= eps / N^2  =>  envelope(A) <= 2 eps` on every subset.
/// Returns the first violating subset, if any.
pub fn verify_scaled_base(
    family: &DistributionFamily,
    eps: f64,
    scaled: &ScaledBase,
) -> Result<Option<Subset>> {
    let base = scaled.base.all_subset_masses()?;
    let threshold = eps / (scaled.fragmentation as f64).powi(2);
    let member_masses: Vec<Vec<f64>> = family
        .members()
        .iter()
        .map(|m| m.all_subset_masses())
        .collect::<Result<_>>()?;
    for mask in 0..base.len() {
        if mass_le(base[mask], threshold) {
            for mm in &member_masses {
                if !mass_le(mm[mask], 2.0 * eps) {
                    return Ok(Some(Subset::from_mask(mask as u128)));
                }
            }
        }
    }
    Ok(None)
}

fn subset_masses_of(atom_masses: &[f64]) -> Vec<f64> {
    let n = atom_masses.len();
    let mut out = vec![0.0; 1 << n];
    for m in 1usize..(1 << n) {
        let low = m.trailing_zeros() as usize;
        out[m] = out[m & (m - 1)] + atom_masses[low];
    }
    out
}

/// Per-scale record of the certificate construction.
#[derive(Debug, Clone)]
pub struct ScaleRecord {
    pub eps: f64,
    pub selected: Vec<(usize, Subset)>,
    /// Atom masses of the per-scale finite measure
    /// `(2/eps) sum_j 2^(i_max + 1 - j) mu_j` that witnesses the
    /// per-scale bound.
    pub scale_measure: Vec<f64>,
    /// Total mass of the per-scale measure.
    pub c_raw: f64,
    /// `c_raw` after enforcing the non-decreasing-in-scale constraint.
    pub c_used: f64,
    /// Step boundary `delta_i = eps_i / (2^i c_used)`.
    pub delta: f64,
}

#[derive(Debug, Clone)]
pub struct CertificateBuild {
    pub certificate: SmoothnessCertificate,
    pub scales: Vec<ScaleRecord>,
}

/// Constructs a smoothness certificate from scratch for the supplied
/// decreasing scale sequence.
///
/// Per scale `eps`, the inner loop selects pairs `(mu_i, A_i)` with
/// `mu_i(A_i) >= eps` and
/// `mu_i(A_i) >= (2/eps) sum_{j<i} 2^(i-j) mu_j(A_i)` until exhaustion.
/// The weights grow with age: that is what makes the selected pairs
/// carve out disjoint sets of envelope mass `eps/2` (so the loop ends
/// within the `eps/2`-fragmentation number) and makes the termination
/// condition itself certify the per-scale bound
/// `envelope(A) <= eps + mu^eps(A)` for the weighted measure
/// `mu^eps = (2/eps) sum_j 2^(i_max+1-j) mu_j`. The per-scale measures
/// are normalized, their totals forced non-decreasing across scales
/// (running maximum), and mixed with weights `2^-i` into the base
/// measure. The step profile takes value `2 eps_i` on
/// `(delta_{i+1}, delta_i]` and `2` above `delta_1`. The infinite
/// mixture of the underlying proof is truncated at the supplied scales
/// and renormalized, which only tightens the certificate at the scales it
/// covers; the assembled pair is then re-verified exhaustively.
pub fn construct_certificate(
    family: &DistributionFamily,
    eps_sequence: &[f64],
) -> Result<CertificateBuild> {
    if eps_sequence.is_empty() {
        return Err(Error::input("certificate needs at least one scale"));
    }
    for w in eps_sequence.windows(2) {
        if w[1] >= w[0] {
            return Err(Error::input("eps sequence must be strictly decreasing"));
        }
    }
    if eps_sequence.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
        return Err(Error::input("scales must lie in (0, 1]"));
    }
    let n = family.space().atom_count();
    if n > EXHAUSTIVE_CUTOFF {
        return Err(Error::capacity(format!(
            "certificate construction needs exhaustive subset search, n <= {EXHAUSTIVE_CUTOFF}"
        )));
    }
    let member_masses: Vec<Vec<f64>> = family
        .members()
        .iter()
        .map(|m| m.all_subset_masses())
        .collect::<Result<_>>()?;

    let mut scales: Vec<ScaleRecord> = Vec::new();
    let mut normalized: Vec<Distribution> = Vec::new();
    let mut c_prev = 0.0f64;
    for (i, &eps) in eps_sequence.iter().enumerate() {
        let (selected, weighted) = certificate_scale_loop(family, &member_masses, eps)?;
        let (nu, scale_measure, c_raw) = if selected.is_empty() {
            // no (mu, A) with mu(A) >= eps exists: the envelope is below
            // eps everywhere, any probability measure preserves the
            // per-scale bound
            let mix = Distribution::uniform_mixture(&family.members().iter().collect::<Vec<_>>())?;
            let measure = mix.probs().to_vec();
            (mix, measure, 1.0)
        } else {
            let scale_measure: Vec<f64> = weighted.iter().map(|w| (2.0 / eps) * w).collect();
            let c_raw: f64 = scale_measure.iter().sum();
            let nu = Distribution::new(
                family.space().clone(),
                scale_measure.iter().map(|m| m / c_raw).collect(),
            )?;
            (nu, scale_measure, c_raw)
        };
        let c_used = c_raw.max(c_prev);
        c_prev = c_used;
        let delta = eps / (2f64.powi(i as i32 + 1) * c_used);
        scales.push(ScaleRecord {
            eps,
            selected,
            scale_measure,
            c_raw,
            c_used,
            delta,
        });
        normalized.push(nu);
    }

    // mu0 = normalize( sum_i 2^-i nu_i ), truncated at the supplied scales
    let k = normalized.len();
    let total: f64 = (1..=k).map(|i| 2f64.powi(-(i as i32))).sum();
    let mut probs = vec![0.0f64; n];
    for (i, nu) in normalized.iter().enumerate() {
        let w = 2f64.powi(-(i as i32 + 1)) / total;
        for (p, q) in probs.iter_mut().zip(nu.probs()) {
            *p += w * q;
        }
    }
    let mu0 = Distribution::new(family.space().clone(), probs)?;

    let mut steps: Vec<(f64, f64)> = scales
        .iter()
        .rev()
        .map(|s| (s.delta, 2.0 * s.eps))
        .collect();
    steps.push((1.0, 2.0));
    let profile = ToleranceProfile::from_steps(steps)?;

    let certificate = verify_certificate(family, &mu0, &profile)?;
    Ok(CertificateBuild {
        certificate,
        scales,
    })
}

/// Selected pairs plus the final weighted accumulator
/// `sum_j 2^(i_max+1-j) mu_j` as atom masses.
type ScaleSelection = (Vec<(usize, Subset)>, Vec<f64>);

fn certificate_scale_loop(
    family: &DistributionFamily,
    member_masses: &[Vec<f64>],
    eps: f64,
) -> Result<ScaleSelection> {
    let n = family.space().atom_count();
    let mut selected: Vec<(usize, Subset)> = Vec::new();
    // weighted accumulator: sum_{j<i} 2^(i-j) mu_j; old selections gain
    // weight each round, which forces termination
    let mut wacc = vec![0.0f64; n];
    let safety_cap = 4 * n + 64;
    loop {
        let wacc_masses = subset_masses_of(&wacc);
        let mut found = None;
        'outer: for (mi, mm) in member_masses.iter().enumerate() {
            for mask in 1..mm.len() {
                if mass_ge(mm[mask], eps) && mass_ge(mm[mask], (2.0 / eps) * wacc_masses[mask]) {
                    found = Some((mi, mask));
                    break 'outer;
                }
            }
        }
        match found {
            None => break,
            Some((mi, mask)) => {
                let member = family.member(mi);
                for (w, p) in wacc.iter_mut().zip(member.probs()) {
                    *w = 2.0 * (*w + p);
                }
                selected.push((mi, Subset::from_mask(mask as u128)));
                if selected.len() > safety_cap {
                    return Err(Error::capacity(
                        "certificate scale loop failed to terminate".to_string(),
                    ));
                }
            }
        }
    }
    Ok((selected, wacc))
}

/// Exhaustively checks the per-scale bound
/// `envelope(A) <= eps + mu^eps(A)` for one scale record.
pub fn verify_scale_bound(
    family: &DistributionFamily,
    record: &ScaleRecord,
) -> Result<Option<Subset>> {
    let scale_masses = subset_masses_of(&record.scale_measure);
    let member_masses: Vec<Vec<f64>> = family
        .members()
        .iter()
        .map(|m| m.all_subset_masses())
        .collect::<Result<_>>()?;
    for mask in 0..scale_masses.len() {
        for mm in &member_masses {
            if !mass_le(mm[mask], record.eps + scale_masses[mask]) {
                return Ok(Some(Subset::from_mask(mask as u128)));
            }
        }
    }
    Ok(None)
}

/// Turán-style refinement: given disjoint sets with per-set witnessing
/// distributions, selects indices whose pairwise cross-mass stays below
/// `delta`, via a min-degree greedy independent set on the conflict
/// graph. When every node degree is at most `1/delta` the selection has
/// size at least `N * delta / 2`.
pub fn turan_refine(
    sets: &[Subset],
    dists: &[Distribution],
    eps: f64,
    delta: f64,
) -> Result<Vec<usize>> {
    if sets.len() != dists.len() || sets.is_empty() {
        return Err(Error::input(
            "need matching non-empty sets and distributions",
        ));
    }
    if !(eps > 0.0 && eps <= 1.0) || !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::input("eps and delta must lie in (0, 1]"));
    }
    for (i, s) in sets.iter().enumerate() {
        if !mass_ge(dists[i].mass(*s), eps) {
            return Err(Error::input(format!(
                "distribution {i} places less than eps on its own set"
            )));
        }
        for (j, t) in sets.iter().enumerate().skip(i + 1) {
            if !s.is_disjoint(*t) {
                return Err(Error::input(format!("sets {i} and {j} are not disjoint")));
            }
        }
    }
    let n = sets.len();
    let mut adj = vec![vec![false; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if mass_ge(dists[i].mass(sets[j]), delta) || mass_ge(dists[j].mass(sets[i]), delta) {
                adj[i][j] = true;
                adj[j][i] = true;
            }
        }
    }
    let mut alive = vec![true; n];
    let mut selected = Vec::new();
    loop {
        let mut pick = None;
        let mut pick_deg = usize::MAX;
        for i in 0..n {
            if alive[i] {
                let deg = (0..n).filter(|&j| alive[j] && adj[i][j]).count();
                if deg < pick_deg {
                    pick = Some(i);
                    pick_deg = deg;
                }
            }
        }
        let Some(i) = pick else { break };
        selected.push(i);
        alive[i] = false;
        for j in 0..n {
            if adj[i][j] {
                alive[j] = false;
            }
        }
    }
    selected.sort_unstable();
    debug_assert!(selected.iter().all(|&i| selected
        .iter()
        .all(|&j| i == j || dists[i].mass(sets[j]) < delta + MASS_TOL)));
    Ok(selected)
}
