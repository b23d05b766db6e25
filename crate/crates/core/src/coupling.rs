//! Per-step couplings reducing a generalized-smooth adversary to a smooth
//! adversary on the dummy-extended space.
//!
//! Each step keeps the real sample where its density ratio against the
//! base measure is below a cutoff and reroutes the remaining mass to the
//! reserved dummy atom. Against the extended base
//! `mu0~ = 1/2 mu0 + 1/2 delta_dummy`, the coupled distribution has a
//! small density-ratio bound on real atoms and at most 2 on the dummy
//! atom; the probability of a dummy round is bounded through the
//! tolerance profile. Both bounds are stored and checked per atom rather
//! than folded into one constant.

use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::profile::ToleranceProfile;
use crate::space::{mass_ge, mass_le, Distribution, DistributionFamily, Subset, MASS_TOL};

/// One coupled step: the kept region, the mass rerouted to the dummy
/// atom, the coupled distribution on the extended space, and the claimed
/// density-ratio bound on real atoms against the extended base.
#[derive(Debug, Clone)]
pub struct CoupledStep {
    pub kept_mask: Subset,
    pub dummy_prob: f64,
    pub coupled_dist: Distribution,
    pub smooth_bound: f64,
}

impl CoupledStep {
    /// Per-atom density ratios against `mu0~ = 1/2 mu0 + 1/2 delta_dummy`:
    /// the maximum over real atoms and the dummy atom's ratio.
    pub fn density_ratios(&self, mu0: &Distribution) -> (f64, f64) {
        let n = mu0.space().atom_count();
        let mut real_max = 0.0f64;
        for x in 0..n {
            let p = self.coupled_dist.prob(x);
            if p == 0.0 {
                continue;
            }
            let base = 0.5 * mu0.prob(x);
            let ratio = if base > 0.0 { p / base } else { f64::INFINITY };
            real_max = real_max.max(ratio);
        }
        let dummy_ratio = self.coupled_dist.prob(n) / 0.5;
        (real_max, dummy_ratio)
    }
}

fn build_step(
    mu_t: &Distribution,
    mu0: &Distribution,
    keep: impl Fn(usize) -> bool,
    smooth_bound: f64,
) -> Result<CoupledStep> {
    let n = mu0.space().atom_count();
    let mut kept = Subset::EMPTY;
    let mut probs = vec![0.0f64; n + 1];
    let mut dummy_prob = 0.0;
    for (x, slot) in probs[..n].iter_mut().enumerate() {
        if keep(x) {
            kept = kept.union(Subset::singleton(x));
            *slot = mu_t.prob(x);
        } else {
            dummy_prob += mu_t.prob(x);
        }
    }
    probs[n] = dummy_prob;
    let coupled_dist = Distribution::new(mu0.space().extended(), probs)?;
    Ok(CoupledStep {
        kept_mask: kept,
        dummy_prob,
        coupled_dist,
        smooth_bound,
    })
}

/// Couples one adversary step at scale `eps` under a well-behaved
/// tolerance profile. The cutoff is `eta = rho(eps)/eps`: atoms with
/// density ratio above `eta` are dropped (including atoms with zero base
/// mass but positive member mass). When the member belongs to a family
/// verified `(mu0, rho)`-smooth, the dropped mass is at most `rho(eps)`
/// and real atoms satisfy the `2 eta` ratio bound.
pub fn couple_step(
    mu_t: &Distribution,
    mu0: &Distribution,
    profile: &ToleranceProfile,
    eps: f64,
) -> Result<CoupledStep> {
    if !profile.well_behaved() {
        return Err(Error::input(
            "couple_step needs a well-behaved tolerance profile",
        ));
    }
    if mu_t.space() != mu0.space() {
        return Err(Error::input("member and base on different spaces"));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::input(format!("eps {eps} outside (0, 1]")));
    }
    let eta = profile.eval(eps) / eps;
    let step = build_step(
        mu_t,
        mu0,
        |x| mass_le(mu_t.prob(x), eta * mu0.prob(x)),
        2.0 * eta,
    )?;
    Ok(step)
}

/// Coupling variant for a cap hypothesis of the form
/// `mu0(A) <= eps  =>  envelope(A) <= eta`. The cutoff keeps atoms with
/// density ratio at most `2 sigma` (`sigma = eta/eps`) or base mass
/// above `eps`; the extended-space ratio bound is `4/eps` and the dummy
/// probability is at most `eta` under the hypothesis.
pub fn couple_step_capped(
    mu_t: &Distribution,
    mu0: &Distribution,
    eps: f64,
    eta: f64,
) -> Result<CoupledStep> {
    if mu_t.space() != mu0.space() {
        return Err(Error::input("member and base on different spaces"));
    }
    if !(eps > 0.0 && eps <= 1.0) || !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::input("eps and eta must lie in (0, 1]"));
    }
    let sigma = eta / eps;
    build_step(
        mu_t,
        mu0,
        |x| mass_le(mu_t.prob(x), 2.0 * sigma * mu0.prob(x)) || mu0.prob(x) > eps,
        4.0 / eps,
    )
}

/// Extracts `B` inside `a` with `mu(B)` in `(eps/2, eps]`, assuming
/// `mu(a) > eps` and every atom of `a` carries at most `eps`. If a single
/// atom already lands in the window it is returned (lowest index);
/// otherwise atoms are added in decreasing mass until the running sum
/// first exceeds `eps/2`, which cannot overshoot `eps` since every atom
/// then weighs at most `eps/2`.
pub fn extract_small_set(mu: &Distribution, a: Subset, eps: f64) -> Result<Subset> {
    mu.space().check_subset(a)?;
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::input(format!("eps {eps} outside (0, 1]")));
    }
    if mu.mass(a) <= eps - MASS_TOL {
        return Err(Error::input("set does not carry more than eps mass"));
    }
    let atoms: Vec<usize> = a.atoms().collect();
    for &x in &atoms {
        if mu.prob(x) > eps + MASS_TOL {
            return Err(Error::input(format!(
                "atom {x} carries more than eps inside the set"
            )));
        }
    }
    if let Some(&x) = atoms
        .iter()
        .find(|&&x| mu.prob(x) > 0.5 * eps && mass_le(mu.prob(x), eps))
    {
        return Ok(Subset::singleton(x));
    }
    let mut by_mass = atoms;
    by_mass.sort_by(|&x, &y| mu.prob(y).partial_cmp(&mu.prob(x)).unwrap().then(x.cmp(&y)));
    let mut out = Subset::EMPTY;
    let mut sum = 0.0;
    for &x in &by_mass {
        out = out.union(Subset::singleton(x));
        sum += mu.prob(x);
        if sum > 0.5 * eps {
            break;
        }
    }
    debug_assert!(sum > 0.5 * eps && mass_le(sum, eps));
    Ok(out)
}

/// Simulates `runs` independent `t_rounds`-round games in which the
/// adversary plays, every round, the family member whose coupled step
/// reroutes the most mass; returns the per-run counts of dummy rounds
/// (rounds whose real sample fell in the dropped region).
pub fn simulate_dummy_counts(
    family: &DistributionFamily,
    mu0: &Distribution,
    profile: &ToleranceProfile,
    eps: f64,
    t_rounds: usize,
    runs: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let steps: Vec<CoupledStep> = family
        .members()
        .iter()
        .map(|m| couple_step(m, mu0, profile, eps))
        .collect::<Result<_>>()?;
    let worst = steps
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.dummy_prob.partial_cmp(&b.1.dummy_prob).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let member = family.member(worst);
    let kept = steps[worst].kept_mask;
    let mut counts = Vec::with_capacity(runs);
    use rand::SeedableRng;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for _ in 0..runs {
        let mut c = 0;
        for _ in 0..t_rounds {
            let x = member.sample(&mut rng);
            if !kept.contains(x) {
                c += 1;
            }
        }
        counts.push(c);
    }
    Ok(counts)
}

/// Checks the per-atom contracts of a coupled step: marginal consistency
/// on kept atoms, the real-atom ratio bound, and the dummy ratio bound.
pub fn check_step_contracts(
    step: &CoupledStep,
    mu_t: &Distribution,
    mu0: &Distribution,
) -> Result<()> {
    let n = mu0.space().atom_count();
    for x in 0..n {
        let want = if step.kept_mask.contains(x) {
            mu_t.prob(x)
        } else {
            0.0
        };
        if step.coupled_dist.prob(x) != want {
            return Err(Error::input(format!(
                "coupled mass at atom {x} is {} not {want}",
                step.coupled_dist.prob(x)
            )));
        }
    }
    let (real, dummy) = step.density_ratios(mu0);
    if !mass_le(real, step.smooth_bound) {
        return Err(Error::input(format!(
            "real-atom ratio {real} exceeds bound {}",
            step.smooth_bound
        )));
    }
    if !mass_le(dummy, 2.0) {
        return Err(Error::input(format!("dummy ratio {dummy} exceeds 2")));
    }
    if !mass_ge(step.coupled_dist.probs().iter().sum::<f64>(), 1.0) {
        return Err(Error::input("coupled distribution does not sum to 1"));
    }
    Ok(())
}
