//! Loop cutsets, their instances, and the conditioning transform.
//!
//! Conditioning on a cutset member removes its outgoing arcs: each child's
//! table is sliced at the member's assigned state, while the member keeps its
//! own parents and is clamped as evidence. A cutset is valid exactly when the
//! resulting structure is singly connected.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::network::{is_forest, BeliefNetwork, Evidence, UnionFind, VarId};
use crate::polytree::PolytreeModel;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CutsetError {
    #[error("instance count overflows")]
    Overflow,
    #[error("conditioning on the cutset does not leave a singly connected network")]
    NotVerified,
    #[error("instance does not match the cutset")]
    BadInstance,
    #[error("cutset member {0} is not a network variable")]
    UnknownMember(VarId),
    #[error("cutset member {0} listed twice")]
    DuplicateMember(VarId),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Cutset {
    members: Vec<VarId>,
}

impl Cutset {
    pub fn new(net: &BeliefNetwork, members: Vec<VarId>) -> Result<Self, CutsetError> {
        for (k, &m) in members.iter().enumerate() {
            if m.0 >= net.len() {
                return Err(CutsetError::UnknownMember(m));
            }
            if members[..k].contains(&m) {
                return Err(CutsetError::DuplicateMember(m));
            }
        }
        Ok(Cutset { members })
    }

    pub fn empty() -> Self {
        Cutset::default()
    }

    pub fn members(&self) -> &[VarId] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, var: VarId) -> bool {
        self.members.contains(&var)
    }

    pub fn cardinalities(&self, net: &BeliefNetwork) -> Vec<usize> {
        self.members.iter().map(|&m| net.cardinality(m)).collect()
    }

    pub fn instance_count(&self, net: &BeliefNetwork) -> Result<usize, CutsetError> {
        count_instances(&self.cardinalities(net))
    }

    /// Decodes a mixed-radix instance index (last member fastest).
    pub fn instance(
        &self,
        net: &BeliefNetwork,
        index: usize,
    ) -> Result<CutsetInstance, CutsetError> {
        let cards = self.cardinalities(net);
        if index >= count_instances(&cards)? {
            return Err(CutsetError::BadInstance);
        }
        let mut assignment = vec![0; cards.len()];
        let mut rest = index;
        for k in (0..cards.len()).rev() {
            assignment[k] = rest % cards[k];
            rest /= cards[k];
        }
        Ok(CutsetInstance { index, assignment })
    }

    pub fn verify(&self, net: &BeliefNetwork) -> bool {
        verify_cutset(net, self)
    }
}

/// One complete assignment to the cutset members.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutsetInstance {
    pub index: usize,
    pub assignment: Vec<usize>,
}

impl CutsetInstance {
    /// The assignment as evidence on the cutset members.
    pub fn clamp(&self, cs: &Cutset) -> Evidence {
        cs.members
            .iter()
            .zip(&self.assignment)
            .fold(Evidence::new(), |ev, (&m, &s)| ev.with(m, s))
    }
}

/// Product of member cardinalities; 1 for the empty cutset.
pub fn count_instances(cards: &[usize]) -> Result<usize, CutsetError> {
    cards
        .iter()
        .try_fold(1usize, |acc, &c| acc.checked_mul(c))
        .ok_or(CutsetError::Overflow)
}

pub fn instance_count(net: &BeliefNetwork, cs: &Cutset) -> Result<usize, CutsetError> {
    cs.instance_count(net)
}

/// Every instance in index order.
pub fn enumerate_instances(
    net: &BeliefNetwork,
    cs: &Cutset,
) -> Result<Vec<CutsetInstance>, CutsetError> {
    let cards = cs.cardinalities(net);
    let count = count_instances(&cards)?;
    let mut out = Vec::with_capacity(count);
    let mut assignment = vec![0usize; cards.len()];
    for index in 0..count {
        out.push(CutsetInstance {
            index,
            assignment: assignment.clone(),
        });
        for k in (0..cards.len()).rev() {
            assignment[k] += 1;
            if assignment[k] < cards[k] {
                break;
            }
            assignment[k] = 0;
        }
    }
    Ok(out)
}

/// Arcs that survive conditioning on `members`.
fn remaining_arcs<'a>(
    net: &'a BeliefNetwork,
    members: &'a [VarId],
) -> impl Iterator<Item = (usize, usize)> + 'a {
    net.arcs()
        .filter(move |(p, _)| !members.contains(p))
        .map(|(p, c)| (p.0, c.0))
}

pub fn verify_cutset(net: &BeliefNetwork, cs: &Cutset) -> bool {
    is_forest(net.len(), remaining_arcs(net, &cs.members))
}

/// Arcs that lie on some undirected cycle.
fn loop_arcs(n: usize, arcs: &[(usize, usize)]) -> Vec<bool> {
    (0..arcs.len())
        .map(|skip| {
            let mut uf = UnionFind::new(n);
            for (k, &(a, b)) in arcs.iter().enumerate() {
                if k != skip {
                    uf.union(a, b);
                }
            }
            let (a, b) = arcs[skip];
            uf.find(a) == uf.find(b)
        })
        .collect()
}

/// Greedy loop-cutset heuristic.
///
/// Repeatedly conditions on the node of largest remaining undirected degree
/// among those with an outgoing arc on some loop (such a node is never the
/// sink of that loop), breaking ties by variable name. Members that turn out
/// redundant afterwards are dropped, latest pick first. Members are returned
/// in variable-index order.
pub fn find_loop_cutset(net: &BeliefNetwork) -> Cutset {
    let n = net.len();
    let mut members: Vec<VarId> = Vec::new();
    loop {
        let arcs: Vec<(usize, usize)> = remaining_arcs(net, &members).collect();
        let on_loop = loop_arcs(n, &arcs);
        if !on_loop.iter().any(|&b| b) {
            break;
        }
        let mut degree = vec![0usize; n];
        for &(a, b) in &arcs {
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut candidate = vec![false; n];
        for (&(p, _), &looped) in arcs.iter().zip(&on_loop) {
            if looped {
                candidate[p] = true;
            }
        }
        let pick = (0..n)
            .filter(|&x| candidate[x])
            .min_by(|&a, &b| {
                degree[b].cmp(&degree[a]).then_with(|| {
                    net.variable(VarId(a))
                        .name
                        .cmp(&net.variable(VarId(b)).name)
                })
            })
            .expect("a loop in a DAG always has a node with an outgoing loop arc");
        members.push(VarId(pick));
    }

    for k in (0..members.len()).rev() {
        let mut without = members.clone();
        without.remove(k);
        if is_forest(n, remaining_arcs(net, &without)) {
            members = without;
        }
    }
    members.sort_unstable();
    Cutset { members }
}

/// A singly connected subproblem: the transformed network plus the clamps
/// on the cutset members.
#[derive(Debug, Clone, PartialEq)]
pub struct Subproblem {
    pub model: PolytreeModel,
    pub clamp: Evidence,
}

pub fn split_network(
    net: &BeliefNetwork,
    cs: &Cutset,
    instance: &CutsetInstance,
) -> Result<Subproblem, CutsetError> {
    if instance.assignment.len() != cs.len()
        || instance
            .assignment
            .iter()
            .zip(&cs.members)
            .any(|(&s, &m)| s >= net.cardinality(m))
    {
        return Err(CutsetError::BadInstance);
    }
    let assigned = |v: VarId| {
        cs.members
            .iter()
            .position(|&m| m == v)
            .map(|k| instance.assignment[k])
    };

    let mut cards = Vec::with_capacity(net.len());
    let mut parents = Vec::with_capacity(net.len());
    let mut tables = Vec::with_capacity(net.len());
    for x in net.ids() {
        let card = net.cardinality(x);
        let ps = net.parents(x);
        let pcards: Vec<usize> = ps.iter().map(|&p| net.cardinality(p)).collect();
        let fixed: Vec<Option<usize>> = ps.iter().map(|&p| assigned(p)).collect();
        let kept: Vec<usize> = ps
            .iter()
            .zip(&fixed)
            .filter(|(_, f)| f.is_none())
            .map(|(p, _)| p.0)
            .collect();

        let rows = &net.table(x).rows;
        let mut flat = Vec::with_capacity(card * rows.len());
        let mut digits = vec![0usize; ps.len()];
        for row in rows {
            if digits
                .iter()
                .zip(&fixed)
                .all(|(d, f)| f.is_none_or(|s| s == *d))
            {
                flat.extend_from_slice(row);
            }
            for k in (0..ps.len()).rev() {
                digits[k] += 1;
                if digits[k] < pcards[k] {
                    break;
                }
                digits[k] = 0;
            }
        }
        cards.push(card);
        parents.push(kept);
        tables.push(flat);
    }
    let model = PolytreeModel::new(cards, parents, tables).map_err(|_| CutsetError::NotVerified)?;
    Ok(Subproblem {
        model,
        clamp: instance.clamp(cs),
    })
}
