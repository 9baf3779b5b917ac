//! Per-instance bookkeeping and the interval calculus over instance weights.
//!
//! Numerators live in the units of the previous evidence epoch: for an
//! instance solved against the current evidence the numerator is its
//! likelihood times its previous weight interval. Every other instance is
//! only known to have a numerator between zero and its cap, the upper end of
//! its previous weight interval. Normalizing by the smallest and largest
//! possible totals gives the weight intervals, and mixing cached
//! per-instance beliefs with those intervals gives posterior bounds.

use alloc::vec;
use alloc::vec::Vec;

use crate::conditioning::SolvedInstance;
use crate::math::{mass_ratio, NeumaierSum};
use crate::network::VarId;

use super::BoundedError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceStatus {
    /// Solved against every observation so far.
    SolvedCurrent,
    /// Solved against every observation except the latest.
    SolvedStale,
    /// Skipped in some earlier epoch; never solved again.
    Frozen,
}

/// Bounds on one instance's normalized weight. `upper_raw` keeps the value
/// before clamping to 1 (possibly infinite when nothing has been solved yet).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightInterval {
    pub lower: f64,
    pub upper: f64,
    pub upper_raw: f64,
}

impl WeightInterval {
    pub fn point(w: f64) -> Self {
        WeightInterval {
            lower: w,
            upper: w,
            upper_raw: w,
        }
    }

    fn from_raw(lower: f64, upper_raw: f64) -> Self {
        WeightInterval {
            lower: lower.min(1.0),
            upper: upper_raw.min(1.0),
            upper_raw,
        }
    }
}

/// Closed interval on a posterior probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, p: f64, tol: f64) -> bool {
        p >= self.lower - tol && p <= self.upper + tol
    }
}

/// How weight intervals are computed for the current epoch.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightMode {
    /// Numerator bounds normalized by the extreme totals.
    Interval,
    /// Per-instance ratio bounds: each instance's own numerator appears in
    /// its denominator.
    Tightened,
    /// Revised weights supplied exactly (complete-state analysis).
    Known(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct LedgerEntry {
    pub status: InstanceStatus,
    /// Weight interval carried over from the previous epoch. Its upper end
    /// caps this epoch's numerator.
    pub previous: WeightInterval,
    /// `[l * previous.lower, l * previous.upper]` once solved this epoch.
    pub numerator: Option<(f64, f64)>,
    /// Likelihood of this epoch's evidence, once solved this epoch.
    pub likelihood: Option<f64>,
    pub interval: WeightInterval,
    /// Raw normalized-previous-weight bound computed when the instance was
    /// frozen: cap / (sum of lower weights + 1 - sum of upper weights) over
    /// the instances solved in the epoch being closed. Audit only.
    pub freeze_bound_raw: Option<f64>,
    pub(crate) solver: SolvedInstance,
}

impl LedgerEntry {
    pub fn cap(&self) -> f64 {
        self.previous.upper
    }

    pub fn solver(&self) -> &SolvedInstance {
        &self.solver
    }
}

#[derive(Debug, Clone)]
pub struct InstanceLedger {
    pub(crate) entries: Vec<LedgerEntry>,
    /// Instances solved against the current evidence.
    pub h: usize,
    /// Instances solved against the previous evidence.
    pub j: usize,
    pub(crate) mode: WeightMode,
}

impl InstanceLedger {
    pub fn n(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn entry(&self, i: usize) -> &LedgerEntry {
        &self.entries[i]
    }

    pub fn mode(&self) -> &WeightMode {
        &self.mode
    }

    pub fn status_count(&self, status: InstanceStatus) -> usize {
        self.entries.iter().filter(|e| e.status == status).count()
    }

    pub fn pending(&self) -> usize {
        self.status_count(InstanceStatus::SolvedStale)
    }

    /// Weight interval of every instance under the current mode.
    pub fn weight_bounds(&self) -> Result<Vec<WeightInterval>, BoundedError> {
        if let WeightMode::Known(w) = &self.mode {
            return Ok(w.iter().map(|&x| WeightInterval::point(x)).collect());
        }
        let mut solved_lower = NeumaierSum::default();
        let mut solved_upper = NeumaierSum::default();
        let mut unsolved_caps = NeumaierSum::default();
        for e in &self.entries {
            match e.numerator {
                Some((lo, hi)) if e.status == InstanceStatus::SolvedCurrent => {
                    solved_lower.add(lo);
                    solved_upper.add(hi);
                }
                _ => unsolved_caps.add(e.cap()),
            }
        }
        let (s_lo, s_hi, caps) = (
            solved_lower.value(),
            solved_upper.value(),
            unsolved_caps.value(),
        );
        if s_hi == 0.0 && self.pending() == 0 && caps == 0.0 {
            return Err(BoundedError::ImpossibleEvidence);
        }
        let tightened = self.mode == WeightMode::Tightened;
        Ok(self
            .entries
            .iter()
            .map(|e| match (e.status, e.numerator) {
                (InstanceStatus::SolvedCurrent, Some((lo, hi))) => {
                    if tightened {
                        WeightInterval::from_raw(
                            mass_ratio(lo, lo + (s_hi - hi) + caps),
                            mass_ratio(hi, hi + (s_lo - lo)),
                        )
                    } else {
                        WeightInterval::from_raw(mass_ratio(lo, s_hi + caps), mass_ratio(hi, s_lo))
                    }
                }
                _ => {
                    let upper = if tightened {
                        mass_ratio(e.cap(), e.cap() + s_lo)
                    } else {
                        mass_ratio(e.cap(), s_lo)
                    };
                    WeightInterval::from_raw(0.0, upper)
                }
            })
            .collect())
    }

    /// Lower bound mixes solved beliefs with lower weights; upper bound mixes
    /// them with upper weights and adds the full upper weight of every
    /// unsolved instance. Both are clamped to [0,1].
    pub fn posterior_bounds(&self, weights: &[WeightInterval], var: VarId) -> Vec<Interval> {
        let mut lower: Vec<NeumaierSum> = Vec::new();
        let mut upper: Vec<NeumaierSum> = Vec::new();
        let mut unsolved = NeumaierSum::default();
        for (e, w) in self.entries.iter().zip(weights) {
            if e.status == InstanceStatus::SolvedCurrent {
                let b = e.solver.belief(var).expect("variable checked by caller");
                if lower.is_empty() {
                    lower = vec![NeumaierSum::default(); b.len()];
                    upper = vec![NeumaierSum::default(); b.len()];
                }
                for (k, &p) in b.iter().enumerate() {
                    lower[k].add(p * w.lower);
                    upper[k].add(p * w.upper);
                }
            } else {
                unsolved.add(w.upper);
            }
        }
        let card = self.entries[0]
            .solver
            .belief(var)
            .expect("variable checked by caller")
            .len();
        let rest = unsolved.value();
        (0..card)
            .map(|k| {
                let lo = lower.get(k).map_or(0.0, NeumaierSum::value);
                let hi = upper.get(k).map_or(0.0, NeumaierSum::value) + rest;
                Interval {
                    lower: lo.clamp(0.0, 1.0),
                    upper: hi.clamp(0.0, 1.0),
                }
            })
            .collect()
    }
}

pub fn weight_bounds(ledger: &InstanceLedger) -> Result<Vec<WeightInterval>, BoundedError> {
    ledger.weight_bounds()
}

pub fn posterior_bounds(
    ledger: &InstanceLedger,
    var: VarId,
) -> Result<Vec<Interval>, BoundedError> {
    let weights = ledger.weight_bounds()?;
    Ok(ledger.posterior_bounds(&weights, var))
}
