//! Small hand-built networks for examples and tests.

use alloc::string::ToString;
use alloc::vec;

use crate::network::{BeliefNetwork, NetworkDescription, TableDescription, Variable};

pub fn binary(name: &str) -> Variable {
    Variable::new(name, &["t", "f"])
}

pub fn table(child: &str, parents: &[&str], rows: &[&[f64]]) -> TableDescription {
    TableDescription {
        child: child.to_string(),
        parents: parents.iter().map(|p| p.to_string()).collect(),
        rows: rows.iter().map(|r| r.to_vec()).collect(),
    }
}

/// A -> B, A -> C, B -> D, C -> D with p(A=t) = 0.3.
pub fn diamond() -> BeliefNetwork {
    NetworkDescription {
        variables: vec![binary("A"), binary("B"), binary("C"), binary("D")],
        tables: vec![
            table("A", &[], &[&[0.3, 0.7]]),
            table("B", &["A"], &[&[0.8, 0.2], &[0.1, 0.9]]),
            table("C", &["A"], &[&[0.4, 0.6], &[0.7, 0.3]]),
            table(
                "D",
                &["B", "C"],
                &[&[0.9, 0.1], &[0.6, 0.4], &[0.5, 0.5], &[0.05, 0.95]],
            ),
        ],
    }
    .build()
    .unwrap()
}

/// The diamond with every table entry 0.5.
pub fn uniform_diamond() -> BeliefNetwork {
    let h: &[f64] = &[0.5, 0.5];
    NetworkDescription {
        variables: vec![binary("A"), binary("B"), binary("C"), binary("D")],
        tables: vec![
            table("A", &[], &[h]),
            table("B", &["A"], &[h, h]),
            table("C", &["A"], &[h, h]),
            table("D", &["B", "C"], &[h, h, h, h]),
        ],
    }
    .build()
    .unwrap()
}

/// A -> B -> C where B copies A.
pub fn chain() -> BeliefNetwork {
    NetworkDescription {
        variables: vec![binary("A"), binary("B"), binary("C")],
        tables: vec![
            table("A", &[], &[&[0.3, 0.7]]),
            table("B", &["A"], &[&[1.0, 0.0], &[0.0, 1.0]]),
            table("C", &["B"], &[&[0.25, 0.75], &[0.6, 0.4]]),
        ],
    }
    .build()
    .unwrap()
}
