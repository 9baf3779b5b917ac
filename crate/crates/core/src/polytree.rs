//! Exact belief propagation on singly connected networks (Kim and Pearl's
//! lambda/pi scheme).
//!
//! Each propagation is a two-phase sweep per connected component: messages
//! are collected toward a fixed pivot (the lowest-index node of the
//! component), then distributed back out. Every collect-phase message is
//! normalized and its scale factor is kept; the product of those factors with
//! the pivot's final sum is the probability of the absorbed evidence.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::network::{is_forest, BeliefNetwork, Evidence, VarId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolytreeError {
    #[error("network is not singly connected")]
    NotSinglyConnected,
    #[error("unknown variable {0}")]
    UnknownVariable(VarId),
    #[error("state {state} out of range for variable {var}")]
    StateOutOfRange { var: VarId, state: usize },
}

/// Which way a node's message to its tree parent travels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Link {
    /// Toward one of the node's DAG parents; a lambda message on `arc`.
    Up { arc: usize, slot: usize },
    /// Toward one of the node's DAG children; a pi message on `arc`.
    Down { arc: usize },
}

/// Structure and tables of a singly connected network, with the traversal
/// schedule precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct PolytreeModel {
    cards: Vec<usize>,
    parents: Vec<Vec<usize>>,
    /// First arc id of each node; arc `arc_offset[c] + k` joins `parents[c][k]`
    /// to `c`.
    arc_offset: Vec<usize>,
    /// Arc ids leaving each node, in child order.
    child_arcs: Vec<Vec<usize>>,
    arc_parent: Vec<usize>,
    arc_child: Vec<usize>,
    /// Flat tables, `tables[c][row * cards[c] + state]`.
    tables: Vec<Vec<f64>>,
    /// Breadth-first order over every component, pivots first.
    order: Vec<usize>,
    link: Vec<Option<Link>>,
    pivots: Vec<usize>,
}

impl PolytreeModel {
    /// `tables[c]` holds one row per parent configuration (last parent
    /// fastest), each row a distribution over `c`'s states.
    pub fn new(
        cards: Vec<usize>,
        parents: Vec<Vec<usize>>,
        tables: Vec<Vec<f64>>,
    ) -> Result<Self, PolytreeError> {
        let n = cards.len();
        debug_assert_eq!(parents.len(), n);
        debug_assert_eq!(tables.len(), n);
        let edges = parents
            .iter()
            .enumerate()
            .flat_map(|(c, ps)| ps.iter().map(move |&p| (p, c)));
        if !is_forest(n, edges) {
            return Err(PolytreeError::NotSinglyConnected);
        }

        let mut arc_offset = Vec::with_capacity(n);
        let mut arc_parent = Vec::new();
        let mut arc_child = Vec::new();
        let mut child_arcs = vec![Vec::new(); n];
        for (c, ps) in parents.iter().enumerate() {
            arc_offset.push(arc_parent.len());
            for &p in ps {
                child_arcs[p].push(arc_parent.len());
                arc_parent.push(p);
                arc_child.push(c);
            }
        }

        let mut order = Vec::with_capacity(n);
        let mut link = vec![None; n];
        let mut pivots = Vec::new();
        let mut seen = vec![false; n];
        for root in 0..n {
            if seen[root] {
                continue;
            }
            seen[root] = true;
            pivots.push(root);
            let start = order.len();
            order.push(root);
            let mut head = start;
            while head < order.len() {
                let x = order[head];
                head += 1;
                for (slot, &p) in parents[x].iter().enumerate() {
                    if !seen[p] {
                        seen[p] = true;
                        link[p] = Some(Link::Down {
                            arc: arc_offset[x] + slot,
                        });
                        order.push(p);
                    }
                }
                for &arc in &child_arcs[x] {
                    let c = arc_child[arc];
                    if !seen[c] {
                        seen[c] = true;
                        link[c] = Some(Link::Up {
                            arc,
                            slot: arc - arc_offset[c],
                        });
                        order.push(c);
                    }
                }
            }
        }

        Ok(PolytreeModel {
            cards,
            parents,
            arc_offset,
            child_arcs,
            arc_parent,
            arc_child,
            tables,
            order,
            link,
            pivots,
        })
    }

    pub fn from_network(net: &BeliefNetwork) -> Result<Self, PolytreeError> {
        let cards = net.ids().map(|v| net.cardinality(v)).collect();
        let parents = net
            .ids()
            .map(|v| net.parents(v).iter().map(|p| p.0).collect())
            .collect();
        let tables = net
            .tables()
            .iter()
            .map(|t| t.rows.iter().flatten().copied().collect())
            .collect();
        Self::new(cards, parents, tables)
    }

    pub fn len(&self) -> usize {
        self.cards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cards.is_empty()
    }

    pub fn cardinality(&self, var: VarId) -> usize {
        self.cards[var.0]
    }

    pub fn parents(&self, var: VarId) -> &[usize] {
        &self.parents[var.0]
    }

    pub fn arc_count(&self) -> usize {
        self.arc_parent.len()
    }

    /// State with no evidence absorbed: beliefs are prior marginals.
    pub fn initial_state(&self) -> PropagationState {
        let evidence = vec![None; self.len()];
        let sweep = self.propagate(&evidence);
        let Sweep::Done(mut state) = sweep else {
            unreachable!("prior propagation cannot be impossible");
        };
        state.normalizer = 1.0;
        state
    }

    fn evidence_factor(&self, x: usize, evidence: &[Option<usize>]) -> Vec<f64> {
        match evidence[x] {
            Some(e) => (0..self.cards[x])
                .map(|s| f64::from(u8::from(s == e)))
                .collect(),
            None => vec![1.0; self.cards[x]],
        }
    }

    /// Calls `f(row, digits)` for every parent configuration of `x`.
    fn for_each_row(&self, x: usize, mut f: impl FnMut(usize, &[usize])) {
        let ps = &self.parents[x];
        let mut digits = vec![0usize; ps.len()];
        let rows = self.tables[x].len() / self.cards[x];
        for row in 0..rows {
            f(row, &digits);
            for k in (0..ps.len()).rev() {
                digits[k] += 1;
                if digits[k] < self.cards[ps[k]] {
                    break;
                }
                digits[k] = 0;
            }
        }
    }

    /// Causal support from all parents' pi messages.
    fn pi_support(&self, x: usize, pi_msg: &[Vec<f64>]) -> Vec<f64> {
        let card = self.cards[x];
        let base = self.arc_offset[x];
        let table = &self.tables[x];
        let mut pi = vec![0.0; card];
        self.for_each_row(x, |row, digits| {
            let w: f64 = digits
                .iter()
                .enumerate()
                .map(|(k, &u)| pi_msg[base + k][u])
                .product();
            if w != 0.0 {
                for (s, acc) in pi.iter_mut().enumerate() {
                    *acc += w * table[row * card + s];
                }
            }
        });
        pi
    }

    /// Evidence factor times lambda messages from every child arc except
    /// `skip`.
    fn lambda_support(
        &self,
        x: usize,
        evidence: &[Option<usize>],
        lambda_msg: &[Vec<f64>],
        skip: Option<usize>,
    ) -> Vec<f64> {
        let mut lambda = self.evidence_factor(x, evidence);
        for &arc in &self.child_arcs[x] {
            if Some(arc) == skip {
                continue;
            }
            for (l, m) in lambda.iter_mut().zip(&lambda_msg[arc]) {
                *l *= m;
            }
        }
        lambda
    }

    fn message_to_child(
        &self,
        x: usize,
        arc: usize,
        evidence: &[Option<usize>],
        pi_msg: &[Vec<f64>],
        lambda_msg: &[Vec<f64>],
    ) -> Vec<f64> {
        let pi = self.pi_support(x, pi_msg);
        let lambda = self.lambda_support(x, evidence, lambda_msg, Some(arc));
        pi.iter().zip(&lambda).map(|(p, l)| p * l).collect()
    }

    fn message_to_parent(
        &self,
        x: usize,
        slot: usize,
        evidence: &[Option<usize>],
        pi_msg: &[Vec<f64>],
        lambda_msg: &[Vec<f64>],
    ) -> Vec<f64> {
        let card = self.cards[x];
        let base = self.arc_offset[x];
        let table = &self.tables[x];
        let lambda = self.lambda_support(x, evidence, lambda_msg, None);
        let target = self.parents[x][slot];
        let mut msg = vec![0.0; self.cards[target]];
        self.for_each_row(x, |row, digits| {
            let expected: f64 = (0..card).map(|s| table[row * card + s] * lambda[s]).sum();
            if expected == 0.0 {
                return;
            }
            let w: f64 = digits
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != slot)
                .map(|(k, &u)| pi_msg[base + k][u])
                .product();
            msg[digits[slot]] += w * expected;
        });
        msg
    }

    fn send(
        &self,
        x: usize,
        link: Link,
        evidence: &[Option<usize>],
        pi_msg: &mut [Vec<f64>],
        lambda_msg: &mut [Vec<f64>],
    ) -> f64 {
        match link {
            Link::Up { arc, slot } => {
                let mut m = self.message_to_parent(x, slot, evidence, pi_msg, lambda_msg);
                let s = normalize_in_place(&mut m);
                lambda_msg[arc] = m;
                s
            }
            Link::Down { arc } => {
                let mut m = self.message_to_child(x, arc, evidence, pi_msg, lambda_msg);
                let s = normalize_in_place(&mut m);
                pi_msg[arc] = m;
                s
            }
        }
    }

    fn propagate(&self, evidence: &[Option<usize>]) -> Sweep {
        let arcs = self.arc_count();
        let mut pi_msg: Vec<Vec<f64>> = (0..arcs)
            .map(|a| vec![1.0; self.cards[self.arc_parent[a]]])
            .collect();
        let mut lambda_msg = pi_msg.clone();

        // Collect toward each pivot, keeping the scale of every message.
        let mut normalizer = 1.0;
        for &x in self.order.iter().rev() {
            if let Some(link) = self.link[x] {
                let scale = self.send(x, link, evidence, &mut pi_msg, &mut lambda_msg);
                if scale == 0.0 {
                    return Sweep::Impossible;
                }
                normalizer *= scale;
            }
        }
        for &p in &self.pivots {
            let pi = self.pi_support(p, &pi_msg);
            let lambda = self.lambda_support(p, evidence, &lambda_msg, None);
            let z: f64 = pi.iter().zip(&lambda).map(|(a, b)| a * b).sum();
            if z == 0.0 {
                return Sweep::Impossible;
            }
            normalizer *= z;
        }

        // Distribute from each node to its tree children.
        for &x in &self.order {
            for (slot, &p) in self.parents[x].iter().enumerate() {
                let arc = self.arc_offset[x] + slot;
                if self.link[p] == Some(Link::Down { arc }) {
                    self.send(
                        x,
                        Link::Up { arc, slot },
                        evidence,
                        &mut pi_msg,
                        &mut lambda_msg,
                    );
                }
            }
            for &arc in &self.child_arcs[x] {
                let c = self.arc_child[arc];
                if matches!(self.link[c], Some(Link::Up { arc: a, .. }) if a == arc) {
                    self.send(
                        x,
                        Link::Down { arc },
                        evidence,
                        &mut pi_msg,
                        &mut lambda_msg,
                    );
                }
            }
        }

        let n = self.len();
        let mut pi = Vec::with_capacity(n);
        let mut lambda = Vec::with_capacity(n);
        let mut belief = Vec::with_capacity(n);
        for x in 0..n {
            let mut p = self.pi_support(x, &pi_msg);
            let mut l = self.lambda_support(x, evidence, &lambda_msg, None);
            let mut b: Vec<f64> = p.iter().zip(&l).map(|(a, c)| a * c).collect();
            normalize_in_place(&mut b);
            normalize_in_place(&mut p);
            normalize_in_place(&mut l);
            pi.push(p);
            lambda.push(l);
            belief.push(b);
        }
        Sweep::Done(PropagationState {
            evidence: evidence.to_vec(),
            pi,
            lambda,
            belief,
            pi_msg,
            lambda_msg,
            normalizer,
            impossible: false,
        })
    }
}

enum Sweep {
    Done(PropagationState),
    Impossible,
}

/// Scales `v` to sum to 1 and returns the original sum (left untouched when
/// the sum is zero).
fn normalize_in_place(v: &mut [f64]) -> f64 {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        for x in v.iter_mut() {
            *x /= s;
        }
    }
    s
}

/// Messages, supports and beliefs after absorbing some evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationState {
    evidence: Vec<Option<usize>>,
    pi: Vec<Vec<f64>>,
    lambda: Vec<Vec<f64>>,
    belief: Vec<Vec<f64>>,
    pi_msg: Vec<Vec<f64>>,
    lambda_msg: Vec<Vec<f64>>,
    /// Probability of all evidence absorbed so far.
    normalizer: f64,
    impossible: bool,
}

impl PropagationState {
    /// Absorbs `ev` and returns `p(ev | previously absorbed evidence)`.
    ///
    /// A likelihood of 0 is a valid outcome, not an error: the state is then
    /// flagged impossible and keeps its pre-evidence beliefs. Re-observing a
    /// variable in a different state takes that same path.
    pub fn absorb(&mut self, model: &PolytreeModel, ev: &Evidence) -> Result<f64, PolytreeError> {
        for (var, state) in ev.iter() {
            if var.0 >= model.len() {
                return Err(PolytreeError::UnknownVariable(var));
            }
            if state >= model.cards[var.0] {
                return Err(PolytreeError::StateOutOfRange { var, state });
            }
        }
        if self.impossible {
            return Ok(0.0);
        }
        let mut evidence = self.evidence.clone();
        let mut changed = false;
        for (var, state) in ev.iter() {
            match evidence[var.0] {
                Some(old) if old != state => {
                    self.mark_impossible();
                    return Ok(0.0);
                }
                Some(_) => {}
                None => {
                    evidence[var.0] = Some(state);
                    changed = true;
                }
            }
        }
        if !changed {
            return Ok(1.0);
        }
        match model.propagate(&evidence) {
            Sweep::Done(next) => {
                let likelihood = next.normalizer / self.normalizer;
                *self = next;
                Ok(likelihood)
            }
            Sweep::Impossible => {
                self.mark_impossible();
                Ok(0.0)
            }
        }
    }

    fn mark_impossible(&mut self) {
        self.impossible = true;
        self.normalizer = 0.0;
    }

    pub fn belief(&self, var: VarId) -> Result<&[f64], PolytreeError> {
        self.belief
            .get(var.0)
            .map(Vec::as_slice)
            .ok_or(PolytreeError::UnknownVariable(var))
    }

    pub fn beliefs(&self) -> &[Vec<f64>] {
        &self.belief
    }

    /// Normalized causal support of `var`.
    pub fn pi(&self, var: VarId) -> &[f64] {
        &self.pi[var.0]
    }

    /// Normalized diagnostic support of `var`.
    pub fn lambda(&self, var: VarId) -> &[f64] {
        &self.lambda[var.0]
    }

    /// Final pi message on arc `arc` (parent to child), normalized.
    pub fn pi_message(&self, arc: usize) -> &[f64] {
        &self.pi_msg[arc]
    }

    /// Final lambda message on arc `arc` (child to parent), normalized.
    pub fn lambda_message(&self, arc: usize) -> &[f64] {
        &self.lambda_msg[arc]
    }

    /// Probability of every piece of evidence absorbed so far.
    pub fn evidence_probability(&self) -> f64 {
        self.normalizer
    }

    pub fn is_impossible(&self) -> bool {
        self.impossible
    }

    pub fn observed(&self, var: VarId) -> Option<usize> {
        self.evidence.get(var.0).copied().flatten()
    }
}

/// Model plus its prior state for a singly connected network.
pub fn init_polytree(
    net: &BeliefNetwork,
) -> Result<(PolytreeModel, PropagationState), PolytreeError> {
    let model = PolytreeModel::from_network(net)?;
    let state = model.initial_state();
    Ok((model, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::*;
    use crate::network::NetworkDescription;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn root_prior_and_observation() {
        let net = NetworkDescription {
            variables: vec![binary("A")],
            tables: vec![table("A", &[], &[&[0.3, 0.7]])],
        }
        .build()
        .unwrap();
        let (model, mut state) = init_polytree(&net).unwrap();
        assert!(close(state.belief(VarId(0)).unwrap(), &[0.3, 0.7], 1e-15));
        assert_eq!(state.evidence_probability(), 1.0);
        let l = state
            .absorb(&model, &Evidence::new().with(VarId(0), 0))
            .unwrap();
        assert!((l - 0.3).abs() < 1e-15);
        assert!(close(state.belief(VarId(0)).unwrap(), &[1.0, 0.0], 0.0));
    }

    #[test]
    fn deterministic_chain() {
        let net = chain();
        let (model, mut state) = init_polytree(&net).unwrap();
        assert!(close(state.belief(VarId(1)).unwrap(), &[0.3, 0.7], 1e-15));
        let l = state
            .absorb(&model, &Evidence::new().with(VarId(1), 0))
            .unwrap();
        assert!((l - 0.3).abs() < 1e-15);
        assert!(close(state.belief(VarId(0)).unwrap(), &[1.0, 0.0], 1e-15));
    }

    #[test]
    fn multiply_connected_rejected() {
        assert_eq!(
            init_polytree(&diamond()).unwrap_err(),
            PolytreeError::NotSinglyConnected
        );
    }

    #[test]
    fn contradictory_reobservation_is_zero_likelihood() {
        let net = chain();
        let (model, mut state) = init_polytree(&net).unwrap();
        state
            .absorb(&model, &Evidence::new().with(VarId(2), 0))
            .unwrap();
        let before = state.beliefs().to_vec();
        let same = state
            .absorb(&model, &Evidence::new().with(VarId(2), 0))
            .unwrap();
        assert_eq!(same, 1.0);
        let l = state
            .absorb(&model, &Evidence::new().with(VarId(2), 1))
            .unwrap();
        assert_eq!(l, 0.0);
        assert!(state.is_impossible());
        assert_eq!(state.beliefs(), &before[..]);
        // invalid calls are still errors, even after an impossible outcome
        assert!(state
            .absorb(&model, &Evidence::new().with(VarId(9), 0))
            .is_err());
        assert!(state
            .absorb(&model, &Evidence::new().with(VarId(0), 5))
            .is_err());
    }

    #[test]
    fn zero_probability_evidence() {
        let net = chain();
        let (model, mut state) = init_polytree(&net).unwrap();
        // B copies A, so A=t with B=f is impossible
        let ev = Evidence::new().with(VarId(0), 0).with(VarId(1), 1);
        assert_eq!(state.absorb(&model, &ev).unwrap(), 0.0);
        assert!(state.is_impossible());
        assert_eq!(state.evidence_probability(), 0.0);
    }

    #[test]
    fn unknown_variable_belief() {
        let (_, state) = init_polytree(&chain()).unwrap();
        assert!(state.belief(VarId(3)).is_err());
    }

    #[test]
    fn forest_components_multiply() {
        let net = NetworkDescription {
            variables: vec![binary("A"), binary("B")],
            tables: vec![
                table("A", &[], &[&[0.2, 0.8]]),
                table("B", &[], &[&[0.6, 0.4]]),
            ],
        }
        .build()
        .unwrap();
        let (model, mut state) = init_polytree(&net).unwrap();
        let l = state
            .absorb(&model, &Evidence::new().with(VarId(0), 1).with(VarId(1), 1))
            .unwrap();
        assert!((l - 0.32).abs() < 1e-15);
    }
}
