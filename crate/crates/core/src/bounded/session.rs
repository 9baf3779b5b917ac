use alloc::vec;
use alloc::vec::Vec;

use crate::conditioning::SolvedInstance;
use crate::cutset::{enumerate_instances, Cutset};
use crate::math::NeumaierSum;
use crate::network::{BeliefNetwork, Evidence, EvidenceStream, VarId};

use super::ledger::{
    InstanceLedger, InstanceStatus, Interval, LedgerEntry, WeightInterval, WeightMode,
};
use super::BoundedError;

/// Order in which stale instances are solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PendingOrder {
    /// Heaviest upper weight first, ties by instance index.
    #[default]
    WeightDescending,
    /// Lightest first. Only useful as a baseline.
    WeightAscending,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SessionOptions {
    pub order: PendingOrder,
    /// Use per-instance ratio bounds instead of the plain interval calculus.
    pub tightened: bool,
}

/// Posterior intervals for every tracked variable at one point in a run.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundSnapshot {
    pub step: usize,
    pub epoch: usize,
    /// `None` for observed variables.
    pub bounds: Vec<Option<Vec<Interval>>>,
    /// Largest `upper - lower` over tracked variable-states.
    pub width: f64,
}

impl BoundSnapshot {
    fn new(step: usize, epoch: usize, bounds: Vec<Option<Vec<Interval>>>) -> Self {
        let width = bounds
            .iter()
            .flatten()
            .flatten()
            .map(Interval::width)
            .fold(0.0, f64::max);
        BoundSnapshot {
            step,
            epoch,
            bounds,
            width,
        }
    }

    pub fn interval(&self, var: VarId, state: usize) -> Option<Interval> {
        self.bounds.get(var.0)?.as_ref()?.get(state).copied()
    }

    pub fn tracked(&self) -> impl Iterator<Item = (VarId, &[Interval])> {
        self.bounds
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.as_deref().map(|b| (VarId(i), b)))
    }
}

/// One solved instance.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub step: usize,
    pub epoch: usize,
    pub instance: usize,
    /// Upper weight of the instance when it was picked.
    pub instance_w_upper: f64,
    pub work_units: usize,
    pub snapshot: BoundSnapshot,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StopCriteria {
    pub epsilon: Option<f64>,
    pub max_steps: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    WidthReached,
    BudgetExhausted,
    NothingPending,
}

/// Bounded conditioning over one cutset.
#[derive(Debug, Clone)]
pub struct Session<'n> {
    net: &'n BeliefNetwork,
    cutset: Cutset,
    ledger: InstanceLedger,
    history: Vec<Evidence>,
    observed: Evidence,
    trace: Vec<TraceRecord>,
    init_steps: usize,
    solve_calls: usize,
    options: SessionOptions,
    snapshot: BoundSnapshot,
}

impl<'n> Session<'n> {
    /// Solves every instance for the prior. Each initialization solve is
    /// traced in epoch 0 with bounds that treat the unsolved prior mass as
    /// unknown.
    pub fn begin(
        net: &'n BeliefNetwork,
        cutset: Cutset,
        options: SessionOptions,
    ) -> Result<Self, BoundedError> {
        if !cutset.verify(net) {
            return Err(crate::cutset::CutsetError::NotVerified.into());
        }
        let instances = enumerate_instances(net, &cutset)?;
        let n = instances.len();
        let mut entries: Vec<LedgerEntry> = Vec::with_capacity(n);
        let mut trace = Vec::with_capacity(n);
        let mut solved_mass = NeumaierSum::default();
        let mut lower: Vec<Vec<NeumaierSum>> = net
            .ids()
            .map(|v| vec![NeumaierSum::default(); net.cardinality(v)])
            .collect();
        for inst in instances {
            let index = inst.index;
            let (solver, w) = SolvedInstance::solve(net, &cutset, inst)?;
            solved_mass.add(w);
            for v in net.ids() {
                for (acc, p) in lower[v.0].iter_mut().zip(solver.belief(v)?) {
                    acc.add(p * w);
                }
            }
            let residual = 1.0 - solved_mass.value();
            let bounds = lower
                .iter()
                .map(|acc| {
                    Some(
                        acc.iter()
                            .map(|s| Interval {
                                lower: s.value().clamp(0.0, 1.0),
                                upper: (s.value() + residual).clamp(0.0, 1.0),
                            })
                            .collect(),
                    )
                })
                .collect();
            let step = index + 1;
            trace.push(TraceRecord {
                step,
                epoch: 0,
                instance: index,
                instance_w_upper: w,
                work_units: step,
                snapshot: BoundSnapshot::new(step, 0, bounds),
            });
            entries.push(LedgerEntry {
                status: InstanceStatus::SolvedCurrent,
                previous: WeightInterval::point(1.0),
                numerator: Some((w, w)),
                likelihood: Some(w),
                interval: WeightInterval::point(w),
                freeze_bound_raw: None,
                solver,
            });
        }
        let ledger = InstanceLedger {
            entries,
            h: n,
            j: n,
            mode: if options.tightened {
                WeightMode::Tightened
            } else {
                WeightMode::Interval
            },
        };
        let mut session = Session {
            net,
            cutset,
            ledger,
            history: Vec::new(),
            observed: Evidence::new(),
            trace,
            init_steps: n,
            solve_calls: 0,
            options,
            snapshot: BoundSnapshot::new(0, 0, Vec::new()),
        };
        session.refresh(n)?;
        Ok(session)
    }

    pub fn network(&self) -> &'n BeliefNetwork {
        self.net
    }

    pub fn cutset(&self) -> &Cutset {
        &self.cutset
    }

    pub fn ledger(&self) -> &InstanceLedger {
        &self.ledger
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn snapshot(&self) -> &BoundSnapshot {
        &self.snapshot
    }

    pub fn epoch(&self) -> usize {
        self.history.len()
    }

    pub fn history(&self) -> &[Evidence] {
        &self.history
    }

    /// Union of all evidence observed so far.
    pub fn observed(&self) -> &Evidence {
        &self.observed
    }

    pub fn options(&self) -> SessionOptions {
        self.options
    }

    pub fn init_steps(&self) -> usize {
        self.init_steps
    }

    pub fn solve_calls(&self) -> usize {
        self.solve_calls
    }

    /// Instance solves so far, initialization included.
    pub fn work_units(&self) -> usize {
        self.init_steps + self.solve_calls
    }

    pub fn is_complete(&self) -> bool {
        self.ledger.h == self.ledger.n() && self.ledger.j == self.ledger.n()
    }

    fn check_evidence(&self, ev: &Evidence) -> Result<(), BoundedError> {
        for (v, s) in ev.iter() {
            if v.0 >= self.net.len() || s >= self.net.cardinality(v) {
                return Err(BoundedError::InvalidEvidence(v));
            }
        }
        Ok(())
    }

    /// Starts a new evidence epoch. Instances solved for the previous
    /// evidence become stale (pending); instances that were still pending
    /// are frozen for good.
    pub fn observe(&mut self, ev: Evidence) -> Result<(), BoundedError> {
        self.check_evidence(&ev)?;
        self.close_epoch();
        self.ledger.mode = if self.options.tightened {
            WeightMode::Tightened
        } else {
            WeightMode::Interval
        };
        self.open_epoch(ev)
    }

    /// Starts a new epoch from a complete state with the revised weights
    /// already known, so the bounds follow the complete-state formulas: the
    /// gap between them is exactly the unsolved weight.
    pub fn observe_with_known_weights(
        &mut self,
        ev: Evidence,
        weights: Vec<f64>,
    ) -> Result<(), BoundedError> {
        self.check_evidence(&ev)?;
        if !self.is_complete() {
            return Err(BoundedError::NotComplete);
        }
        if weights.len() != self.ledger.n() {
            return Err(BoundedError::WeightCount {
                expected: self.ledger.n(),
                found: weights.len(),
            });
        }
        self.close_epoch();
        self.ledger.mode = WeightMode::Known(weights);
        self.open_epoch(ev)
    }

    fn close_epoch(&mut self) {
        let mut solved_lower = 0.0;
        let mut solved_upper = 0.0;
        for e in &self.ledger.entries {
            if e.status == InstanceStatus::SolvedCurrent {
                solved_lower += e.interval.lower;
                solved_upper += e.interval.upper;
            }
        }
        let denom = solved_lower + (1.0 - solved_upper);
        for e in &mut self.ledger.entries {
            match e.status {
                InstanceStatus::SolvedCurrent => e.status = InstanceStatus::SolvedStale,
                InstanceStatus::SolvedStale => {
                    e.status = InstanceStatus::Frozen;
                    e.freeze_bound_raw = Some(mass_ratio_signed(e.cap(), denom));
                }
                InstanceStatus::Frozen => {}
            }
            e.previous = e.interval;
            e.numerator = None;
            e.likelihood = None;
        }
        self.ledger.j = self.ledger.h;
        self.ledger.h = 0;
    }

    fn open_epoch(&mut self, ev: Evidence) -> Result<(), BoundedError> {
        self.observed = match self.observed.union(&ev) {
            Some(u) => u,
            // Contradicting an earlier observation: every instance will
            // report likelihood zero. Keep the earlier state in the union.
            None => self.observed.clone(),
        };
        self.history.push(ev);
        let step = self.work_units();
        self.refresh(step)
    }

    /// Stale instances in solve order.
    pub fn order_pending(&self) -> Vec<usize> {
        let key = |i: usize| match &self.ledger.mode {
            WeightMode::Known(w) => w[i],
            _ => self.ledger.entries[i].cap(),
        };
        let mut pending: Vec<usize> = (0..self.ledger.n())
            .filter(|&i| self.ledger.entries[i].status == InstanceStatus::SolvedStale)
            .collect();
        pending.sort_by(|&a, &b| {
            let ord = match self.options.order {
                PendingOrder::WeightDescending => key(b).total_cmp(&key(a)),
                PendingOrder::WeightAscending => key(a).total_cmp(&key(b)),
            };
            ord.then(a.cmp(&b))
        });
        pending
    }

    /// Solves the next pending instance against the current evidence.
    pub fn solve_next(&mut self) -> Result<&TraceRecord, BoundedError> {
        let Some(&i) = self.order_pending().first() else {
            return Err(BoundedError::NothingPending);
        };
        let ev = self
            .history
            .last()
            .cloned()
            .expect("stale instances only exist after an observation");
        let picked_upper = self.ledger.entries[i].interval.upper;
        let entry = &mut self.ledger.entries[i];
        let l = entry.solver.absorb(&ev)?;
        entry.likelihood = Some(l);
        entry.numerator = Some((l * entry.previous.lower, l * entry.previous.upper));
        entry.status = InstanceStatus::SolvedCurrent;
        self.ledger.h += 1;
        self.solve_calls += 1;

        let step = self.work_units();
        self.refresh(step)?;
        self.trace.push(TraceRecord {
            step,
            epoch: self.epoch(),
            instance: i,
            instance_w_upper: picked_upper,
            work_units: step,
            snapshot: self.snapshot.clone(),
        });
        Ok(self.trace.last().unwrap())
    }

    /// Solves pending instances until the width drops to `epsilon`, the step
    /// budget runs out, or nothing is pending, whichever comes first.
    pub fn run_until(&mut self, stop: StopCriteria) -> Result<(usize, StopReason), BoundedError> {
        let mut steps = 0;
        loop {
            if stop.epsilon.is_some_and(|eps| self.snapshot.width <= eps) {
                return Ok((steps, StopReason::WidthReached));
            }
            if stop.max_steps.is_some_and(|max| steps >= max) {
                return Ok((steps, StopReason::BudgetExhausted));
            }
            if self.ledger.pending() == 0 {
                return Ok((steps, StopReason::NothingPending));
            }
            self.solve_next()?;
            steps += 1;
        }
    }

    /// Replays an evidence stream. The clock is the number of `solve_next`
    /// calls: an item becomes visible once the clock reaches its arrival
    /// step, or earlier if nothing is left to solve. `stop` applies to the
    /// final epoch; `max_steps` caps the whole replay.
    pub fn replay(
        &mut self,
        stream: &EvidenceStream,
        stop: StopCriteria,
    ) -> Result<(usize, StopReason), BoundedError> {
        let start = self.solve_calls;
        let mut next = 0;
        let items = stream.items();
        loop {
            while next < items.len() && items[next].1 <= self.solve_calls - start {
                self.observe(items[next].0.clone())?;
                next += 1;
            }
            let steps = self.solve_calls - start;
            if stop.max_steps.is_some_and(|max| steps >= max) {
                return Ok((steps, StopReason::BudgetExhausted));
            }
            let settled = self.ledger.pending() == 0
                || stop.epsilon.is_some_and(|eps| self.snapshot.width <= eps);
            if settled {
                if next < items.len() {
                    self.observe(items[next].0.clone())?;
                    next += 1;
                    continue;
                }
                let reason = if self.ledger.pending() == 0 {
                    StopReason::NothingPending
                } else {
                    StopReason::WidthReached
                };
                return Ok((steps, reason));
            }
            self.solve_next()?;
        }
    }

    fn refresh(&mut self, step: usize) -> Result<(), BoundedError> {
        let weights = self.ledger.weight_bounds()?;
        for (e, w) in self.ledger.entries.iter_mut().zip(&weights) {
            e.interval = *w;
        }
        let bounds = self
            .net
            .ids()
            .map(|v| {
                if self.observed.get(v).is_some() {
                    None
                } else {
                    Some(self.ledger.posterior_bounds(&weights, v))
                }
            })
            .collect();
        self.snapshot = BoundSnapshot::new(step, self.epoch(), bounds);
        Ok(())
    }
}

/// `a / b` allowing a non-positive denominator (reported as infinity).
fn mass_ratio_signed(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else if b <= 0.0 {
        f64::INFINITY
    } else {
        a / b
    }
}

pub fn begin_session(net: &BeliefNetwork, cutset: Cutset) -> Result<Session<'_>, BoundedError> {
    Session::begin(net, cutset, SessionOptions::default())
}
