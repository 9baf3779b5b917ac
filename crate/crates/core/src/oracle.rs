//! Brute-force inference by enumerating the full joint distribution.
//!
//! Deliberately naive: this is the reference every other inference path is
//! checked against.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::math::NeumaierSum;
use crate::network::{BeliefNetwork, Evidence, VarId};

pub const DEFAULT_JOINT_CAP: u64 = 1 << 22;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("joint has {size} states, cap is {cap}")]
    CapExceeded { size: u64, cap: u64 },
    #[error("evidence has probability zero")]
    ImpossibleEvidence,
    #[error("unknown variable {0}")]
    UnknownVariable(VarId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointQuery {
    pub evidence: Evidence,
    pub target: VarId,
}

/// Posterior marginals of every variable plus `p(evidence)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Enumeration {
    pub evidence_probability: f64,
    pub marginals: Vec<Vec<f64>>,
}

pub fn enumerate_posteriors(
    net: &BeliefNetwork,
    evidence: &Evidence,
    cap: u64,
) -> Result<Enumeration, OracleError> {
    let size = net.joint_size().unwrap_or(u64::MAX);
    if size > cap {
        return Err(OracleError::CapExceeded { size, cap });
    }
    for (v, _) in evidence.iter() {
        if v.0 >= net.len() {
            return Err(OracleError::UnknownVariable(v));
        }
    }
    let n = net.len();
    let cards: Vec<usize> = net.ids().map(|v| net.cardinality(v)).collect();
    let fixed: Vec<Option<usize>> = net.ids().map(|v| evidence.get(v)).collect();
    let free: Vec<usize> = (0..n).filter(|&i| fixed[i].is_none()).collect();

    let mut assignment: Vec<usize> = fixed.iter().map(|f| f.unwrap_or(0)).collect();
    let mut total = NeumaierSum::default();
    let mut sums: Vec<Vec<NeumaierSum>> = cards
        .iter()
        .map(|&c| vec![NeumaierSum::default(); c])
        .collect();

    loop {
        let mut p = 1.0;
        for x in net.ids() {
            let t = net.table(x);
            let row = t
                .parents
                .iter()
                .fold(0, |acc, q| acc * cards[q.0] + assignment[q.0]);
            p *= t.rows[row][assignment[x.0]];
            if p == 0.0 {
                break;
            }
        }
        if p != 0.0 {
            total.add(p);
            for (x, acc) in sums.iter_mut().enumerate() {
                acc[assignment[x]].add(p);
            }
        }
        // Advance the free variables, last one fastest.
        let mut k = free.len();
        loop {
            if k == 0 {
                let z = total.value();
                if z == 0.0 {
                    return Err(OracleError::ImpossibleEvidence);
                }
                let marginals = sums
                    .iter()
                    .map(|acc| acc.iter().map(|s| s.value() / z).collect())
                    .collect();
                return Ok(Enumeration {
                    evidence_probability: z,
                    marginals,
                });
            }
            k -= 1;
            let x = free[k];
            assignment[x] += 1;
            if assignment[x] < cards[x] {
                break;
            }
            assignment[x] = 0;
        }
    }
}

pub fn exact_posterior_enumeration(
    net: &BeliefNetwork,
    query: &JointQuery,
) -> Result<Vec<f64>, OracleError> {
    if query.target.0 >= net.len() {
        return Err(OracleError::UnknownVariable(query.target));
    }
    let all = enumerate_posteriors(net, &query.evidence, DEFAULT_JOINT_CAP)?;
    Ok(all.marginals[query.target.0].clone())
}
