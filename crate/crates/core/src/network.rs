//! Discrete belief-network data model.
//!
//! A network is built from a [`NetworkDescription`] (names instead of
//! indices, nothing checked yet). [`validate`] reports every broken
//! invariant; [`NetworkDescription::build`] only succeeds when that report is
//! empty, so a [`BeliefNetwork`] is valid by construction.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

/// Tolerance on conditional-table row sums.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Index of a variable inside a [`BeliefNetwork`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

impl VarId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub states: Vec<String>,
}

impl Variable {
    pub fn new(name: impl Into<String>, states: &[&str]) -> Self {
        Variable {
            name: name.into(),
            states: states.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[inline]
    pub fn cardinality(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }
}

/// `p(child | parents)`. Rows enumerate parent configurations row-major over
/// the parents' state indices, last parent varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalTable {
    pub child: VarId,
    pub parents: Vec<VarId>,
    pub rows: Vec<Vec<f64>>,
}

impl ConditionalTable {
    /// Row index of a parent configuration given as one state per parent.
    pub fn row_index(&self, net: &BeliefNetwork, parent_states: &[usize]) -> usize {
        debug_assert_eq!(parent_states.len(), self.parents.len());
        self.parents
            .iter()
            .zip(parent_states)
            .fold(0, |acc, (p, &s)| acc * net.cardinality(*p) + s)
    }
}

/// A validated, immutable belief network.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefNetwork {
    variables: Vec<Variable>,
    /// `tables[i].child == VarId(i)`.
    tables: Vec<ConditionalTable>,
    children: Vec<Vec<VarId>>,
}

impl BeliefNetwork {
    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = VarId> + '_ {
        (0..self.variables.len()).map(VarId)
    }

    pub fn cardinality(&self, id: VarId) -> usize {
        self.variables[id.0].states.len()
    }

    pub fn table(&self, id: VarId) -> &ConditionalTable {
        &self.tables[id.0]
    }

    pub fn tables(&self) -> &[ConditionalTable] {
        &self.tables
    }

    pub fn parents(&self, id: VarId) -> &[VarId] {
        &self.tables[id.0].parents
    }

    pub fn children(&self, id: VarId) -> &[VarId] {
        &self.children[id.0]
    }

    pub fn find(&self, name: &str) -> Option<VarId> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .map(VarId)
    }

    /// Undirected skeleton edges as `(parent, child)` pairs, ordered by child
    /// then parent slot.
    pub fn arcs(&self) -> impl Iterator<Item = (VarId, VarId)> + '_ {
        self.tables
            .iter()
            .flat_map(|t| t.parents.iter().map(move |&p| (p, t.child)))
    }

    /// Number of joint configurations, `None` on overflow.
    pub fn joint_size(&self) -> Option<u64> {
        self.variables
            .iter()
            .try_fold(1u64, |acc, v| acc.checked_mul(v.states.len() as u64))
    }

    /// Name-based description suitable for serialization.
    pub fn to_description(&self) -> NetworkDescription {
        NetworkDescription {
            variables: self.variables.clone(),
            tables: self
                .tables
                .iter()
                .map(|t| TableDescription {
                    child: self.variables[t.child.0].name.clone(),
                    parents: t
                        .parents
                        .iter()
                        .map(|p| self.variables[p.0].name.clone())
                        .collect(),
                    rows: t.rows.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableDescription {
    pub child: String,
    pub parents: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// An unchecked network referencing variables by name. This is what file
/// formats and generators produce.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NetworkDescription {
    pub variables: Vec<Variable>,
    pub tables: Vec<TableDescription>,
}

impl NetworkDescription {
    pub fn build(&self) -> Result<BeliefNetwork, ValidationReport> {
        let report = validate(self);
        if !report.is_empty() {
            return Err(report);
        }
        let index: BTreeMap<&str, usize> = self
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.as_str(), i))
            .collect();
        let n = self.variables.len();
        let mut tables: Vec<Option<ConditionalTable>> = vec![None; n];
        for t in &self.tables {
            let child = index[t.child.as_str()];
            tables[child] = Some(ConditionalTable {
                child: VarId(child),
                parents: t.parents.iter().map(|p| VarId(index[p.as_str()])).collect(),
                rows: t.rows.clone(),
            });
        }
        let tables: Vec<ConditionalTable> = tables.into_iter().map(|t| t.unwrap()).collect();
        let mut children = vec![Vec::new(); n];
        for t in &tables {
            for p in &t.parents {
                children[p.0].push(t.child);
            }
        }
        Ok(BeliefNetwork {
            variables: self.variables.clone(),
            tables,
            children,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Issue {
    EmptyName,
    DuplicateVariable(String),
    TooFewStates {
        variable: String,
        count: usize,
    },
    DuplicateState {
        variable: String,
        state: String,
    },
    UnknownChild(String),
    UnknownParent {
        child: String,
        parent: String,
    },
    DuplicateParent {
        child: String,
        parent: String,
    },
    MissingTable(String),
    DuplicateTable(String),
    RowCount {
        child: String,
        expected: usize,
        found: usize,
    },
    RowArity {
        child: String,
        row: usize,
        expected: usize,
        found: usize,
    },
    EntryOutOfRange {
        child: String,
        row: usize,
        value: f64,
    },
    RowSum {
        child: String,
        row: usize,
        sum: f64,
    },
    Cycle(Vec<String>),
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::EmptyName => write!(f, "variable with empty name"),
            Issue::DuplicateVariable(v) => write!(f, "duplicate variable {v}"),
            Issue::TooFewStates { variable, count } => {
                write!(f, "variable {variable} has {count} states, need at least 2")
            }
            Issue::DuplicateState { variable, state } => {
                write!(f, "variable {variable} repeats state {state}")
            }
            Issue::UnknownChild(c) => write!(f, "table for unknown variable {c}"),
            Issue::UnknownParent { child, parent } => {
                write!(f, "table for {child} names unknown parent {parent}")
            }
            Issue::DuplicateParent { child, parent } => {
                write!(f, "table for {child} lists parent {parent} twice")
            }
            Issue::MissingTable(v) => write!(f, "variable {v} has no table"),
            Issue::DuplicateTable(v) => write!(f, "variable {v} has more than one table"),
            Issue::RowCount {
                child,
                expected,
                found,
            } => write!(f, "table for {child} has {found} rows, expected {expected}"),
            Issue::RowArity {
                child,
                row,
                expected,
                found,
            } => write!(
                f,
                "arity mismatch: table for {child} row {row} has {found} entries, expected {expected}"
            ),
            Issue::EntryOutOfRange { child, row, value } => {
                write!(f, "table for {child} row {row} has entry {value} outside [0,1]")
            }
            Issue::RowSum { child, row, sum } => {
                write!(f, "table for {child} row {row}: row sum {sum}")
            }
            Issue::Cycle(nodes) => {
                write!(f, "cycle: {}", nodes.join(" -> "))?;
                match nodes.first() {
                    Some(first) => write!(f, " -> {first}"),
                    None => Ok(()),
                }
            }
        }
    }
}

/// Every broken invariant of a [`NetworkDescription`]; empty means valid.
#[derive(Debug, Clone, PartialEq, Default, Error)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn cycles(&self) -> impl Iterator<Item = &[String]> {
        self.issues.iter().filter_map(|i| match i {
            Issue::Cycle(c) => Some(c.as_slice()),
            _ => None,
        })
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

pub fn validate(desc: &NetworkDescription) -> ValidationReport {
    let mut issues = Vec::new();
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, v) in desc.variables.iter().enumerate() {
        if v.name.is_empty() {
            issues.push(Issue::EmptyName);
        }
        if index.insert(v.name.as_str(), i).is_some() {
            issues.push(Issue::DuplicateVariable(v.name.clone()));
        }
        if v.states.len() < 2 {
            issues.push(Issue::TooFewStates {
                variable: v.name.clone(),
                count: v.states.len(),
            });
        }
        for (k, s) in v.states.iter().enumerate() {
            if v.states[..k].contains(s) {
                issues.push(Issue::DuplicateState {
                    variable: v.name.clone(),
                    state: s.clone(),
                });
            }
        }
    }

    let n = desc.variables.len();
    let mut seen_table = vec![false; n];
    // Resolved parent lists, used for the cycle check.
    let mut parents_of: Vec<Vec<usize>> = vec![Vec::new(); n];
    for t in &desc.tables {
        let Some(&child) = index.get(t.child.as_str()) else {
            issues.push(Issue::UnknownChild(t.child.clone()));
            continue;
        };
        if seen_table[child] {
            issues.push(Issue::DuplicateTable(t.child.clone()));
            continue;
        }
        seen_table[child] = true;

        let mut parent_cards = Vec::with_capacity(t.parents.len());
        let mut parents_ok = true;
        for (k, p) in t.parents.iter().enumerate() {
            match index.get(p.as_str()) {
                Some(&pi) => {
                    if t.parents[..k].contains(p) {
                        issues.push(Issue::DuplicateParent {
                            child: t.child.clone(),
                            parent: p.clone(),
                        });
                        parents_ok = false;
                    } else {
                        parents_of[child].push(pi);
                    }
                    parent_cards.push(desc.variables[pi].states.len());
                }
                None => {
                    issues.push(Issue::UnknownParent {
                        child: t.child.clone(),
                        parent: p.clone(),
                    });
                    parents_ok = false;
                }
            }
        }
        if !parents_ok {
            continue;
        }
        let expected_rows = parent_cards
            .iter()
            .try_fold(1usize, |acc, &c| acc.checked_mul(c))
            .unwrap_or(usize::MAX);
        if t.rows.len() != expected_rows {
            issues.push(Issue::RowCount {
                child: t.child.clone(),
                expected: expected_rows,
                found: t.rows.len(),
            });
        }
        let arity = desc.variables[child].states.len();
        for (r, row) in t.rows.iter().enumerate() {
            if row.len() != arity {
                issues.push(Issue::RowArity {
                    child: t.child.clone(),
                    row: r,
                    expected: arity,
                    found: row.len(),
                });
                continue;
            }
            let mut in_range = true;
            for &value in row {
                if !(0.0..=1.0).contains(&value) {
                    issues.push(Issue::EntryOutOfRange {
                        child: t.child.clone(),
                        row: r,
                        value,
                    });
                    in_range = false;
                }
            }
            if in_range {
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    issues.push(Issue::RowSum {
                        child: t.child.clone(),
                        row: r,
                        sum,
                    });
                }
            }
        }
    }
    for (i, seen) in seen_table.iter().enumerate() {
        if !seen && index.get(desc.variables[i].name.as_str()) == Some(&i) {
            issues.push(Issue::MissingTable(desc.variables[i].name.clone()));
        }
    }
    if let Some(cycle) = find_cycle(&parents_of) {
        issues.push(Issue::Cycle(
            cycle
                .into_iter()
                .map(|i| desc.variables[i].name.clone())
                .collect(),
        ));
    }
    ValidationReport { issues }
}

/// Some directed cycle in the parent relation, listed in arc direction and
/// starting from its lowest index, or `None` when acyclic.
fn find_cycle(parents_of: &[Vec<usize>]) -> Option<Vec<usize>> {
    let n = parents_of.len();
    let mut children = vec![Vec::new(); n];
    for (c, ps) in parents_of.iter().enumerate() {
        for &p in ps {
            children[p].push(c);
        }
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut mark = vec![0u8; n];
    let mut stack_path: Vec<usize> = Vec::new();
    for root in 0..n {
        if mark[root] != 0 {
            continue;
        }
        let mut frames: Vec<(usize, usize)> = vec![(root, 0)];
        mark[root] = 1;
        stack_path.push(root);
        while let Some(&mut (node, ref mut next)) = frames.last_mut() {
            if *next < children[node].len() {
                let c = children[node][*next];
                *next += 1;
                match mark[c] {
                    0 => {
                        mark[c] = 1;
                        stack_path.push(c);
                        frames.push((c, 0));
                    }
                    1 => {
                        let start = stack_path.iter().position(|&x| x == c).unwrap();
                        let mut cycle = stack_path[start..].to_vec();
                        let min_pos = cycle
                            .iter()
                            .enumerate()
                            .min_by_key(|(_, &v)| v)
                            .map(|(i, _)| i)
                            .unwrap();
                        cycle.rotate_left(min_pos);
                        return Some(cycle);
                    }
                    _ => {}
                }
            } else {
                mark[node] = 2;
                stack_path.pop();
                frames.pop();
            }
        }
    }
    None
}

/// Disjoint-set forest over `0..n`.
#[derive(Debug, Clone)]
pub(crate) struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false if `a` and `b` were already joined.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            core::cmp::Ordering::Less => self.parent[ra] = rb,
            core::cmp::Ordering::Greater => self.parent[rb] = ra,
            core::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// True iff the undirected graph on `0..n` with the given edges is a forest.
pub(crate) fn is_forest(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> bool {
    let mut uf = UnionFind::new(n);
    edges.into_iter().all(|(a, b)| uf.union(a, b))
}

/// True iff the undirected skeleton of the network has no cycle.
pub fn is_singly_connected(net: &BeliefNetwork) -> bool {
    is_forest(net.len(), net.arcs().map(|(p, c)| (p.0, c.0)))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvidenceError {
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("variable {variable} has no state {state}")]
    UnknownState { variable: String, state: String },
    #[error("variable index {0} out of range")]
    VariableOutOfRange(usize),
    #[error("state {state} out of range for {variable}")]
    StateOutOfRange { variable: String, state: usize },
    #[error("variable {0} observed twice")]
    Repeated(String),
    #[error("arrival steps must be non-decreasing (step {later} after {earlier})")]
    NonMonotoneArrival { earlier: usize, later: usize },
}

/// Observed states, at most one per variable.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Evidence {
    assignments: BTreeMap<VarId, usize>,
}

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds evidence from `(variable, state)` label pairs.
    pub fn from_labels<'a>(
        net: &BeliefNetwork,
        pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self, EvidenceError> {
        let mut ev = Evidence::new();
        for (var, state) in pairs {
            let id = net
                .find(var)
                .ok_or_else(|| EvidenceError::UnknownVariable(var.to_string()))?;
            let s =
                net.variable(id)
                    .state_index(state)
                    .ok_or_else(|| EvidenceError::UnknownState {
                        variable: var.to_string(),
                        state: state.to_string(),
                    })?;
            ev.observe(net, id, s)?;
        }
        Ok(ev)
    }

    /// Adds one observation, rejecting unknown variables, out-of-range
    /// states and repeats.
    pub fn observe(
        &mut self,
        net: &BeliefNetwork,
        var: VarId,
        state: usize,
    ) -> Result<(), EvidenceError> {
        if var.0 >= net.len() {
            return Err(EvidenceError::VariableOutOfRange(var.0));
        }
        if state >= net.cardinality(var) {
            return Err(EvidenceError::StateOutOfRange {
                variable: net.variable(var).name.clone(),
                state,
            });
        }
        if self.assignments.contains_key(&var) {
            return Err(EvidenceError::Repeated(net.variable(var).name.clone()));
        }
        self.assignments.insert(var, state);
        Ok(())
    }

    /// Unchecked insert, used where the caller already knows the pair is
    /// valid (e.g. cutset clamps).
    pub fn with(mut self, var: VarId, state: usize) -> Self {
        self.assignments.insert(var, state);
        self
    }

    pub fn get(&self, var: VarId) -> Option<usize> {
        self.assignments.get(&var).copied()
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, usize)> + '_ {
        self.assignments.iter().map(|(&v, &s)| (v, s))
    }

    /// Union of two evidence sets; `None` if they disagree on a variable.
    pub fn union(&self, other: &Evidence) -> Option<Evidence> {
        let mut out = self.clone();
        for (v, s) in other.iter() {
            match out.assignments.get(&v) {
                Some(&old) if old != s => return None,
                _ => {
                    out.assignments.insert(v, s);
                }
            }
        }
        Some(out)
    }

    pub fn describe(&self, net: &BeliefNetwork) -> String {
        let parts: Vec<String> = self
            .iter()
            .map(|(v, s)| {
                let var = net.variable(v);
                format!("{}={}", var.name, var.states[s])
            })
            .collect();
        parts.join(",")
    }
}

/// Evidence items with the work step at which each becomes visible.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvidenceStream {
    items: Vec<(Evidence, usize)>,
}

impl EvidenceStream {
    pub fn new(items: Vec<(Evidence, usize)>) -> Result<Self, EvidenceError> {
        for w in items.windows(2) {
            if w[1].1 < w[0].1 {
                return Err(EvidenceError::NonMonotoneArrival {
                    earlier: w[0].1,
                    later: w[1].1,
                });
            }
        }
        Ok(EvidenceStream { items })
    }

    pub fn items(&self) -> &[(Evidence, usize)] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}
