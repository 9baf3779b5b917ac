//! Exact method of conditioning: solve every cutset instance, weight each by
//! its probability, and mix the per-instance beliefs.

use alloc::vec::Vec;

use thiserror::Error;

use crate::cutset::{enumerate_instances, split_network, Cutset, CutsetError, CutsetInstance};
use crate::math::NeumaierSum;
use crate::network::{BeliefNetwork, Evidence, VarId};
use crate::polytree::{PolytreeError, PolytreeModel, PropagationState};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConditioningError {
    #[error(transparent)]
    Cutset(#[from] CutsetError),
    #[error(transparent)]
    Polytree(#[from] PolytreeError),
    #[error("evidence has probability zero")]
    ImpossibleEvidence,
    #[error("{found} instances solved, {expected} required")]
    Unsolved { expected: usize, found: usize },
}

/// One cutset instance with its subproblem and propagation state.
#[derive(Debug, Clone)]
pub struct SolvedInstance {
    pub instance: CutsetInstance,
    model: PolytreeModel,
    state: PropagationState,
}

impl SolvedInstance {
    /// Builds the instance's subproblem and absorbs the cutset clamps.
    /// Returns the instance together with its prior weight `p(c_1..c_m)`.
    pub fn solve(
        net: &BeliefNetwork,
        cs: &Cutset,
        instance: CutsetInstance,
    ) -> Result<(Self, f64), ConditioningError> {
        let sub = split_network(net, cs, &instance)?;
        let mut state = sub.model.initial_state();
        let weight = state.absorb(&sub.model, &sub.clamp)?;
        Ok((
            SolvedInstance {
                instance,
                model: sub.model,
                state,
            },
            weight,
        ))
    }

    /// Absorbs further evidence, returning `p(ev | earlier evidence, instance)`.
    pub fn absorb(&mut self, ev: &Evidence) -> Result<f64, PolytreeError> {
        self.state.absorb(&self.model, ev)
    }

    pub fn belief(&self, var: VarId) -> Result<&[f64], PolytreeError> {
        self.state.belief(var)
    }

    pub fn state(&self) -> &PropagationState {
        &self.state
    }
}

/// Normalized instance weights, indexed by instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceWeightTable {
    weights: Vec<f64>,
}

impl InstanceWeightTable {
    pub fn new(weights: Vec<f64>) -> Self {
        InstanceWeightTable { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.weights
            .iter()
            .copied()
            .collect::<NeumaierSum>()
            .value()
    }
}

/// Solves every instance for the prior. Weights are the joint probabilities
/// of the cutset assignments.
pub fn solve_all_instances(
    net: &BeliefNetwork,
    cs: &Cutset,
) -> Result<(Vec<SolvedInstance>, InstanceWeightTable), ConditioningError> {
    let instances = enumerate_instances(net, cs)?;
    let mut solved = Vec::with_capacity(instances.len());
    let mut weights = Vec::with_capacity(instances.len());
    for inst in instances {
        let (s, w) = SolvedInstance::solve(net, cs, inst)?;
        solved.push(s);
        weights.push(w);
    }
    Ok((solved, InstanceWeightTable::new(weights)))
}

pub fn init_instance_weights(
    net: &BeliefNetwork,
    cs: &Cutset,
) -> Result<InstanceWeightTable, ConditioningError> {
    solve_all_instances(net, cs).map(|(_, w)| w)
}

/// `sum_i p(var | instance i) * w_i`. With prior weights this is the prior
/// marginal; with updated weights it is the posterior.
fn mix(
    solved: &[SolvedInstance],
    weights: &InstanceWeightTable,
    var: VarId,
) -> Result<Vec<f64>, ConditioningError> {
    if solved.len() != weights.len() {
        return Err(ConditioningError::Unsolved {
            expected: weights.len(),
            found: solved.len(),
        });
    }
    let card = solved
        .first()
        .ok_or(ConditioningError::Unsolved {
            expected: 1,
            found: 0,
        })?
        .belief(var)?
        .len();
    let mut acc = alloc::vec![NeumaierSum::default(); card];
    for (inst, &w) in solved.iter().zip(weights.weights()) {
        if w == 0.0 {
            continue;
        }
        for (a, b) in acc.iter_mut().zip(inst.belief(var)?) {
            a.add(b * w);
        }
    }
    Ok(acc.iter().map(NeumaierSum::value).collect())
}

pub fn prior_marginal(
    solved: &[SolvedInstance],
    weights: &InstanceWeightTable,
    var: VarId,
) -> Result<Vec<f64>, ConditioningError> {
    mix(solved, weights, var)
}

pub fn exact_posterior(
    solved: &[SolvedInstance],
    weights: &InstanceWeightTable,
    var: VarId,
) -> Result<Vec<f64>, ConditioningError> {
    mix(solved, weights, var)
}

/// `w_i* = l_i w_i / sum_k l_k w_k`; also returns the normalizer, which is
/// the probability of the new evidence given the old.
pub fn exact_update(
    weights: &InstanceWeightTable,
    likelihoods: &[f64],
) -> Result<(InstanceWeightTable, f64), ConditioningError> {
    if likelihoods.len() != weights.len() {
        return Err(ConditioningError::Unsolved {
            expected: weights.len(),
            found: likelihoods.len(),
        });
    }
    let joint: Vec<f64> = weights
        .weights()
        .iter()
        .zip(likelihoods)
        .map(|(w, l)| w * l)
        .collect();
    let z = joint.iter().copied().collect::<NeumaierSum>().value();
    if z == 0.0 {
        return Err(ConditioningError::ImpossibleEvidence);
    }
    Ok((
        InstanceWeightTable::new(joint.into_iter().map(|m| m / z).collect()),
        z,
    ))
}

/// The full exact pipeline over one cutset.
#[derive(Debug, Clone)]
pub struct Conditioning {
    instances: Vec<SolvedInstance>,
    weights: InstanceWeightTable,
    evidence_probability: f64,
}

impl Conditioning {
    pub fn new(net: &BeliefNetwork, cs: &Cutset) -> Result<Self, ConditioningError> {
        let (instances, weights) = solve_all_instances(net, cs)?;
        Ok(Conditioning {
            instances,
            weights,
            evidence_probability: 1.0,
        })
    }

    /// Propagates `ev` through every instance and reweights. Returns
    /// `p(ev | earlier evidence)`.
    pub fn observe(&mut self, ev: &Evidence) -> Result<f64, ConditioningError> {
        let likelihoods = self
            .instances
            .iter_mut()
            .map(|inst| inst.absorb(ev))
            .collect::<Result<Vec<_>, _>>()?;
        let (weights, z) = exact_update(&self.weights, &likelihoods)?;
        self.weights = weights;
        self.evidence_probability *= z;
        Ok(z)
    }

    pub fn posterior(&self, var: VarId) -> Result<Vec<f64>, ConditioningError> {
        exact_posterior(&self.instances, &self.weights, var)
    }

    pub fn weights(&self) -> &InstanceWeightTable {
        &self.weights
    }

    pub fn instances(&self) -> &[SolvedInstance] {
        &self.instances
    }

    /// Probability of all evidence observed so far.
    pub fn evidence_probability(&self) -> f64 {
        self.evidence_probability
    }
}
