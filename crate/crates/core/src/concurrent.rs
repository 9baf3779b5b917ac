//! Several bounded analyses over different cutsets, run side by side on the
//! same evidence, with their bounds intersected after every turn.

use alloc::vec::Vec;

use thiserror::Error;

use crate::bounded::{BoundSnapshot, BoundedError, Interval, Session, SessionOptions};
use crate::cutset::Cutset;
use crate::network::{BeliefNetwork, EvidenceStream};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConcurrentError {
    #[error("no snapshots to combine")]
    Empty,
    #[error("snapshot {0} tracks different variables or states")]
    Mismatch(usize),
    #[error("analysis {analysis}: {source}")]
    Analysis {
        analysis: usize,
        #[source]
        source: BoundedError,
    },
}

/// Greatest lower and least upper bound per tracked variable-state.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedBounds {
    pub bounds: Vec<Option<Vec<Interval>>>,
    pub width: f64,
}

impl CombinedBounds {
    pub fn interval(&self, var: usize, state: usize) -> Option<Interval> {
        self.bounds.get(var)?.as_ref()?.get(state).copied()
    }
}

fn same_shape(a: &BoundSnapshot, b: &BoundSnapshot) -> bool {
    a.bounds.len() == b.bounds.len()
        && a.bounds.iter().zip(&b.bounds).all(|(x, y)| match (x, y) {
            (Some(x), Some(y)) => x.len() == y.len(),
            (None, None) => true,
            _ => false,
        })
}

pub fn combine_bounds(snapshots: &[&BoundSnapshot]) -> Result<CombinedBounds, ConcurrentError> {
    let (first, rest) = snapshots.split_first().ok_or(ConcurrentError::Empty)?;
    if let Some(i) = rest.iter().position(|s| !same_shape(first, s)) {
        return Err(ConcurrentError::Mismatch(i + 1));
    }
    let mut bounds = first.bounds.clone();
    for s in rest {
        for (acc, b) in bounds.iter_mut().zip(&s.bounds) {
            if let (Some(acc), Some(b)) = (acc, b) {
                for (a, x) in acc.iter_mut().zip(b) {
                    a.lower = a.lower.max(x.lower);
                    a.upper = a.upper.min(x.upper);
                }
            }
        }
    }
    let width = bounds
        .iter()
        .flatten()
        .flatten()
        .map(Interval::width)
        .fold(0.0, f64::max);
    Ok(CombinedBounds { bounds, width })
}

/// How many solves each analysis gets per turn.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Schedule {
    /// One solve per analysis per turn.
    #[default]
    RoundRobin,
    /// `shares[a]` solves for analysis `a` per turn.
    Weighted(Vec<usize>),
}

impl Schedule {
    fn share(&self, analysis: usize) -> usize {
        match self {
            Schedule::RoundRobin => 1,
            Schedule::Weighted(shares) => shares.get(analysis).copied().unwrap_or(0),
        }
    }
}

/// State of every analysis after one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcurrentRow {
    pub turn: usize,
    pub epoch: usize,
    /// Analysis that just solved, `None` for snapshots taken at evidence
    /// arrivals and at the start.
    pub analysis: Option<usize>,
    pub instance: Option<usize>,
    pub instance_w_upper: Option<f64>,
    pub snapshots: Vec<BoundSnapshot>,
    pub combined: CombinedBounds,
    /// Solves charged so far across all analyses.
    pub work_units: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcurrentRun {
    pub rows: Vec<ConcurrentRow>,
    /// Solves per analysis, initialization excluded.
    pub solves: Vec<usize>,
    /// Initialization solves per analysis.
    pub init_solves: Vec<usize>,
}

impl ConcurrentRun {
    pub fn total_work(&self) -> usize {
        self.solves.iter().sum()
    }
}

fn row(
    sessions: &[Session<'_>],
    turn: usize,
    solved: Option<(usize, usize, f64)>,
    work_units: usize,
) -> Result<ConcurrentRow, ConcurrentError> {
    let snapshots: Vec<BoundSnapshot> = sessions.iter().map(|s| s.snapshot().clone()).collect();
    let refs: Vec<&BoundSnapshot> = snapshots.iter().collect();
    let combined = combine_bounds(&refs)?;
    Ok(ConcurrentRow {
        turn,
        epoch: sessions[0].epoch(),
        analysis: solved.map(|s| s.0),
        instance: solved.map(|s| s.1),
        instance_w_upper: solved.map(|s| s.2),
        snapshots,
        combined,
        work_units,
    })
}

/// Runs one analysis per cutset until `budget` solves have been spent or
/// nothing is left to do. Evidence arrival steps count turns; every
/// analysis sees each item at the same turn. When no analysis has pending
/// work the next item arrives early.
pub fn run_concurrent(
    net: &BeliefNetwork,
    cutsets: &[Cutset],
    budget: usize,
    stream: &EvidenceStream,
    schedule: &Schedule,
) -> Result<ConcurrentRun, ConcurrentError> {
    let mut sessions = cutsets
        .iter()
        .enumerate()
        .map(|(a, cs)| {
            Session::begin(net, cs.clone(), SessionOptions::default()).map_err(|source| {
                ConcurrentError::Analysis {
                    analysis: a,
                    source,
                }
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if sessions.is_empty() {
        return Err(ConcurrentError::Empty);
    }
    let init_solves = sessions.iter().map(Session::init_steps).collect();
    let mut solves = alloc::vec![0usize; sessions.len()];
    let items = stream.items();
    let mut next = 0;
    let mut turn = 0;
    let mut spent = 0;

    let deliver = |sessions: &mut [Session<'_>], i: usize| -> Result<(), ConcurrentError> {
        for (a, s) in sessions.iter_mut().enumerate() {
            s.observe(items[i].0.clone())
                .map_err(|source| ConcurrentError::Analysis {
                    analysis: a,
                    source,
                })?;
        }
        Ok(())
    };

    while next < items.len() && items[next].1 == 0 {
        deliver(&mut sessions, next)?;
        next += 1;
    }
    let mut rows = alloc::vec![row(&sessions, 0, None, 0)?];

    while spent < budget {
        let idle = sessions.iter().all(|s| s.ledger().pending() == 0);
        if idle {
            if next == items.len() {
                break;
            }
            deliver(&mut sessions, next)?;
            next += 1;
            rows.push(row(&sessions, turn, None, spent)?);
            continue;
        }
        turn += 1;
        let before = spent;
        for a in 0..sessions.len() {
            for _ in 0..schedule.share(a) {
                if spent == budget || sessions[a].ledger().pending() == 0 {
                    break;
                }
                let rec = sessions[a]
                    .solve_next()
                    .map_err(|source| ConcurrentError::Analysis {
                        analysis: a,
                        source,
                    })?;
                let solved = (a, rec.instance, rec.instance_w_upper);
                solves[a] += 1;
                spent += 1;
                rows.push(row(&sessions, turn, Some(solved), spent)?);
            }
        }
        if spent == before {
            break;
        }
        let mut arrived = false;
        while next < items.len() && items[next].1 <= turn {
            deliver(&mut sessions, next)?;
            next += 1;
            arrived = true;
        }
        if arrived {
            rows.push(row(&sessions, turn, None, spent)?);
        }
    }
    Ok(ConcurrentRun {
        rows,
        solves,
        init_solves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounded::begin_session;
    use crate::cutset::find_loop_cutset;
    use crate::fixtures::*;
    use crate::network::{Evidence, VarId};
    use alloc::vec;

    fn snap(bounds: Vec<Option<Vec<Interval>>>) -> BoundSnapshot {
        let net = diamond();
        let mut s = begin_session(&net, find_loop_cutset(&net))
            .unwrap()
            .snapshot()
            .clone();
        s.bounds = bounds;
        s
    }

    fn iv(lower: f64, upper: f64) -> Interval {
        Interval { lower, upper }
    }

    #[test]
    fn combine_picks_tightest() {
        let a = snap(vec![Some(vec![iv(0.2, 0.9)])]);
        let b = snap(vec![Some(vec![iv(0.4, 0.95)])]);
        let c = combine_bounds(&[&a, &b]).unwrap();
        assert_eq!(c.interval(0, 0), Some(iv(0.4, 0.9)));
        assert!((c.width - 0.5).abs() < 1e-15);
        let single = combine_bounds(&[&a]).unwrap();
        assert_eq!(single.bounds, a.bounds);
    }

    #[test]
    fn combine_rejects_mismatch() {
        let a = snap(vec![Some(vec![iv(0.2, 0.9)])]);
        let b = snap(vec![None]);
        let c = snap(vec![Some(vec![iv(0.0, 1.0), iv(0.0, 1.0)])]);
        assert_eq!(combine_bounds(&[&a, &b]), Err(ConcurrentError::Mismatch(1)));
        assert_eq!(
            combine_bounds(&[&a, &a, &c]),
            Err(ConcurrentError::Mismatch(2))
        );
        assert_eq!(combine_bounds(&[]), Err(ConcurrentError::Empty));
    }

    fn stream() -> EvidenceStream {
        EvidenceStream::new(vec![(Evidence::new().with(VarId(3), 0), 0)]).unwrap()
    }

    #[test]
    fn zero_budget_is_initial_snapshot() {
        let net = diamond();
        let cs = find_loop_cutset(&net);
        let run =
            run_concurrent(&net, &[cs.clone(), cs], 0, &stream(), &Schedule::default()).unwrap();
        assert_eq!(run.rows.len(), 1);
        assert_eq!(run.total_work(), 0);
    }

    #[test]
    fn identical_cutsets_agree() {
        let net = diamond();
        let cs = find_loop_cutset(&net);
        let run =
            run_concurrent(&net, &[cs.clone(), cs], 10, &stream(), &Schedule::default()).unwrap();
        assert_eq!(run.solves, vec![2, 2]);
        for r in &run.rows {
            // the analysis that has solved more is at least as tight
            let ahead = if r.analysis == Some(0) { 0 } else { 1 };
            assert_eq!(r.combined.bounds, r.snapshots[ahead].bounds);
        }
        let last = run.rows.last().unwrap();
        assert_eq!(last.snapshots[0].bounds, last.snapshots[1].bounds);
    }

    #[test]
    fn distinct_cutsets_contained() {
        let net = diamond();
        let a = find_loop_cutset(&net);
        let b = Cutset::new(&net, vec![VarId(0), VarId(1)]).unwrap();
        let run = run_concurrent(&net, &[a, b], 100, &stream(), &Schedule::default()).unwrap();
        assert_eq!(run.solves, vec![2, 4]);
        assert_eq!(run.total_work(), 6);
        for r in &run.rows {
            for s in &r.snapshots {
                assert!(r.combined.width <= s.width + 1e-15);
                for (c, b) in r.combined.bounds.iter().zip(&s.bounds) {
                    for (c, b) in c.iter().flatten().zip(b.iter().flatten()) {
                        assert!(c.lower >= b.lower && c.upper <= b.upper);
                    }
                }
            }
        }
    }

    #[test]
    fn weighted_schedule() {
        let net = diamond();
        let a = find_loop_cutset(&net);
        let b = Cutset::new(&net, vec![VarId(0), VarId(1)]).unwrap();
        let run =
            run_concurrent(&net, &[a, b], 3, &stream(), &Schedule::Weighted(vec![0, 3])).unwrap();
        assert_eq!(run.solves, vec![0, 3]);
    }
}
