//! Seeded random belief-network generator.
//!
//! Construction: a random topological rank is fixed first, then a random
//! spanning polytree is grown (every arc points from lower to higher rank),
//! then exactly `loop_target` extra arcs are added inside components, each one
//! closing one independent undirected loop.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::network::{BeliefNetwork, NetworkDescription, TableDescription, UnionFind, Variable};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorParams {
    pub node_count: usize,
    pub max_parents: usize,
    pub max_states: usize,
    pub loop_target: usize,
    /// When set, state 0 of every row receives exactly this mass and the
    /// remaining states share the rest.
    pub asymmetry: Option<f64>,
}

impl GeneratorParams {
    pub fn new(
        node_count: usize,
        max_parents: usize,
        max_states: usize,
        loop_target: usize,
    ) -> Self {
        GeneratorParams {
            node_count,
            max_parents,
            max_states,
            loop_target,
            asymmetry: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenerateError {
    #[error("node_count must be at least 1")]
    NoNodes,
    #[error("max_states must be at least 2")]
    TooFewStates,
    #[error("asymmetry {0} outside [0,1]")]
    BadAsymmetry(f64),
    #[error("cannot place {target} loops: only {placed} fit with node_count={nodes}, max_parents={max_parents}")]
    Infeasible {
        target: usize,
        placed: usize,
        nodes: usize,
        max_parents: usize,
    },
}

pub fn generate_random(
    params: &GeneratorParams,
    seed: u64,
) -> Result<BeliefNetwork, GenerateError> {
    let desc = generate_description(params, seed)?;
    Ok(desc.build().expect("generator produced an invalid network"))
}

pub fn generate_description(
    params: &GeneratorParams,
    seed: u64,
) -> Result<NetworkDescription, GenerateError> {
    let n = params.node_count;
    if n == 0 {
        return Err(GenerateError::NoNodes);
    }
    if params.max_states < 2 {
        return Err(GenerateError::TooFewStates);
    }
    if let Some(p) = params.asymmetry {
        if !(0.0..=1.0).contains(&p) {
            return Err(GenerateError::BadAsymmetry(p));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut rank: Vec<usize> = (0..n).collect();
    rank.shuffle(&mut rng);
    let cards: Vec<usize> = (0..n)
        .map(|_| rng.gen_range(2..=params.max_states))
        .collect();

    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut uf = UnionFind::new(n);
    let orient = |a: usize, b: usize| if rank[a] < rank[b] { (a, b) } else { (b, a) };

    for j in 1..n {
        let candidates: Vec<usize> = (0..j)
            .filter(|&i| {
                let (_, child) = orient(i, j);
                parents[child].len() < params.max_parents
            })
            .collect();
        if let Some(&i) = candidates.choose(&mut rng) {
            let (p, c) = orient(i, j);
            parents[c].push(p);
            uf.union(p, c);
        }
    }

    for placed in 0..params.loop_target {
        let mut candidates = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                let (p, c) = orient(a, b);
                if parents[c].len() < params.max_parents
                    && !parents[c].contains(&p)
                    && uf.find(a) == uf.find(b)
                {
                    candidates.push((p, c));
                }
            }
        }
        let Some(&(p, c)) = candidates.choose(&mut rng) else {
            return Err(GenerateError::Infeasible {
                target: params.loop_target,
                placed,
                nodes: n,
                max_parents: params.max_parents,
            });
        };
        parents[c].push(p);
    }

    let width = format!("{}", n - 1).len();
    let names: Vec<String> = (0..n).map(|i| format!("X{:0width$}", i)).collect();
    let variables = (0..n)
        .map(|i| Variable {
            name: names[i].clone(),
            states: (0..cards[i]).map(|s| format!("s{s}")).collect(),
        })
        .collect();

    let mut tables = Vec::with_capacity(n);
    for (c, ps) in parents.iter_mut().enumerate() {
        ps.sort_unstable();
        let row_count: usize = ps.iter().map(|&p| cards[p]).product();
        let rows = (0..row_count)
            .map(|_| random_row(&mut rng, cards[c], params.asymmetry))
            .collect();
        tables.push(TableDescription {
            child: names[c].clone(),
            parents: ps.iter().map(|&p| names[p].clone()).collect(),
            rows,
        });
    }
    Ok(NetworkDescription { variables, tables })
}

fn random_row(rng: &mut ChaCha8Rng, card: usize, asymmetry: Option<f64>) -> Vec<f64> {
    match asymmetry {
        None => normalized(rng, card, 1.0),
        Some(p) => {
            let mut row = Vec::with_capacity(card);
            row.push(p);
            row.extend(normalized(rng, card - 1, 1.0 - p));
            row
        }
    }
}

fn normalized(rng: &mut ChaCha8Rng, len: usize, mass: f64) -> Vec<f64> {
    // Draws in (0,1] so the total is never zero.
    let draws: Vec<f64> = (0..len).map(|_| 1.0 - rng.gen::<f64>()).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|d| mass * d / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{is_singly_connected, validate, ROW_SUM_TOLERANCE};

    #[test]
    fn single_root() {
        let net = generate_random(&GeneratorParams::new(1, 0, 2, 0), 7).unwrap();
        assert_eq!(net.len(), 1);
        assert_eq!(net.cardinality(crate::VarId(0)), 2);
        assert!(net.parents(crate::VarId(0)).is_empty());
    }

    #[test]
    fn icu_scale_network_is_multiply_connected() {
        let desc = generate_description(&GeneratorParams::new(37, 4, 4, 5), 1).unwrap();
        assert!(validate(&desc).is_empty());
        let net = desc.build().unwrap();
        assert_eq!(net.len(), 37);
        assert!(!is_singly_connected(&net));
        let arcs = net.arcs().count();
        // spanning tree plus exactly five loop-closing arcs
        assert_eq!(arcs, 36 + 5);
    }

    #[test]
    fn deterministic_per_seed() {
        let p = GeneratorParams::new(37, 4, 4, 5);
        assert_eq!(generate_description(&p, 1), generate_description(&p, 1));
        assert_ne!(generate_description(&p, 1), generate_description(&p, 2));
    }

    #[test]
    fn infeasible_loops_rejected() {
        assert!(matches!(
            generate_random(&GeneratorParams::new(3, 1, 2, 1), 0),
            Err(GenerateError::Infeasible { .. })
        ));
        assert!(matches!(
            generate_random(&GeneratorParams::new(3, 2, 2, 2), 0),
            Err(GenerateError::Infeasible { placed: 1, .. })
        ));
        assert!(generate_random(&GeneratorParams::new(0, 1, 2, 0), 0).is_err());
        assert!(generate_random(&GeneratorParams::new(2, 1, 1, 0), 0).is_err());
    }

    #[test]
    fn asymmetry_pins_first_state() {
        let mut p = GeneratorParams::new(6, 2, 3, 1);
        p.asymmetry = Some(0.75);
        let net = generate_random(&p, 11).unwrap();
        for t in net.tables() {
            for row in &t.rows {
                assert_eq!(row[0], 0.75);
            }
        }
    }

    #[test]
    fn rows_normalized_across_seeds() {
        for seed in 0..100 {
            let p = GeneratorParams::new(12, 3, 4, 3);
            let net = generate_random(&p, seed).unwrap();
            for t in net.tables() {
                for row in &t.rows {
                    let s: f64 = row.iter().sum();
                    assert!((s - 1.0).abs() <= ROW_SUM_TOLERANCE);
                }
            }
        }
    }
}
