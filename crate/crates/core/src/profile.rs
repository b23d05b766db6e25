//! Tolerance profiles: non-decreasing step functions `rho` on `[0, 1]`
//! bounding member mass by base-measure mass.
//!
//! A profile is stored as ascending breakpoints `(z_i, v_i)`; evaluation
//! at `z` returns the value of the covering step, i.e. the value at the
//! smallest breakpoint `z_i >= z` (the step function takes value `v_i` on
//! `(z_{i-1}, z_i]`). On a finite space a grid containing every
//! achievable base mass makes the step representation exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::MASS_TOL;

/// Whether a computed object is exact or a flagged lower bound from a
/// greedy fallback above the exhaustive cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Exactness {
    Exact,
    LowerBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceProfile {
    breakpoints: Vec<(f64, f64)>,
    well_behaved: bool,
    exactness: Exactness,
}

impl ToleranceProfile {
    /// Builds from explicit steps; `z` must be strictly ascending in
    /// `[0, 1]` and values non-negative and non-decreasing.
    pub fn from_steps(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(Error::input("profile needs at least one breakpoint"));
        }
        for w in breakpoints.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::input(
                    "profile breakpoints must be strictly ascending",
                ));
            }
            if w[1].1 < w[0].1 - MASS_TOL {
                return Err(Error::input("profile values must be non-decreasing"));
            }
        }
        for &(z, v) in &breakpoints {
            // accumulated subset masses may overshoot 1 by float dust
            if !(-MASS_TOL..=1.0 + 1e-9).contains(&z) || v < 0.0 || !v.is_finite() {
                return Err(Error::input(format!("bad breakpoint ({z}, {v})")));
            }
        }
        let well_behaved = ratios_non_increasing(&breakpoints);
        Ok(ToleranceProfile {
            breakpoints,
            well_behaved,
            exactness: Exactness::Exact,
        })
    }

    /// Samples a closed-form tolerance function on a grid. The grid should
    /// contain every evaluation point that matters (on a finite space, all
    /// achievable base masses).
    pub fn from_fn(rho: impl Fn(f64) -> f64, grid: &[f64]) -> Result<Self> {
        let mut zs: Vec<f64> = grid.to_vec();
        zs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        zs.dedup();
        let breakpoints = zs.into_iter().map(|z| (z, rho(z))).collect();
        Self::from_steps(breakpoints)
    }

    pub(crate) fn set_exactness(&mut self, e: Exactness) {
        self.exactness = e;
    }

    /// Value of the covering step at `z`: the value at the smallest
    /// breakpoint `>= z` (up to tolerance), or the top value beyond the
    /// last breakpoint.
    pub fn eval(&self, z: f64) -> f64 {
        for &(bz, v) in &self.breakpoints {
            if bz >= z - MASS_TOL {
                return v;
            }
        }
        self.breakpoints.last().unwrap().1
    }

    /// Largest breakpoint `z` with `rho(z) <= bound`; the step-function
    /// inverse used to turn a target disagreement scale into a cover
    /// scale. `None` when even the first step exceeds the bound.
    pub fn inverse(&self, bound: f64) -> Option<f64> {
        self.breakpoints
            .iter()
            .rev()
            .find(|&&(_, v)| v <= bound + MASS_TOL)
            .map(|&(z, _)| z)
    }

    /// Whether `rho(z)/z` is non-increasing across the grid.
    pub fn well_behaved(&self) -> bool {
        self.well_behaved
    }

    pub fn exactness(&self) -> Exactness {
        self.exactness
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }
}

fn ratios_non_increasing(breakpoints: &[(f64, f64)]) -> bool {
    let mut prev: Option<f64> = None;
    for &(z, v) in breakpoints {
        if z <= 0.0 {
            continue;
        }
        let r = v / z;
        if let Some(p) = prev {
            if r > p + MASS_TOL {
                return false;
            }
        }
        prev = Some(r);
    }
    true
}
