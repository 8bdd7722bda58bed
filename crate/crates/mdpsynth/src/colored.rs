//! Colored MDPs: guarded state-action pairs over a constrained parameter
//! space, induced-MDP construction, dependence analysis and conflict
//! restriction.

use std::collections::BTreeSet;

use crate::model::Mdp;
use crate::params::{
    enumerate_space, eval_formula, Assignment, Formula, Kleene, ParamId, ParamSet,
    PartialAssignment,
};
use crate::{Error, Result};

/// An MDP whose state-action pairs carry partial-assignment guards. For every
/// total assignment in the constrained space, exactly one action per state is
/// compatible with the guards.
#[derive(Debug, Clone)]
pub struct ColoredMdp {
    pub mdp: Mdp,
    pub params: ParamSet,
    pub tau: Formula,
    /// Per (state, action index): the guard partial assignment.
    pub guards: Vec<Vec<PartialAssignment>>,
}

/// Outcome of dependence analysis under a partial assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependenceReport {
    pub dependent: BTreeSet<ParamId>,
    pub reachable: Vec<usize>,
}

/// A coloring-invariant violation found by [`ColoredMdp::validate_coloring`].
#[derive(Debug, Clone)]
pub enum ColoringViolation {
    /// A total assignment selects `count` actions at `state` instead of one.
    AssignmentActionCount { state: usize, assignment: Vec<i64>, count: usize },
    /// Guards of a state are structurally unable to partition the space.
    GuardStructure { state: usize, detail: String },
}

impl std::fmt::Display for ColoringViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ColoringViolation::AssignmentActionCount { state, assignment, count } => write!(
                f,
                "state {state}: assignment {assignment:?} selects {count} actions, expected 1"
            ),
            ColoringViolation::GuardStructure { state, detail } => {
                write!(f, "state {state}: {detail}")
            }
        }
    }
}

impl ColoredMdp {
    pub fn new(
        mdp: Mdp,
        params: ParamSet,
        tau: Formula,
        guards: Vec<Vec<PartialAssignment>>,
    ) -> Result<ColoredMdp> {
        if guards.len() != mdp.num_states() {
            return Err(Error::Model("guard table length differs from state count".into()));
        }
        for (s, g) in guards.iter().enumerate() {
            if g.len() != mdp.actions(s).len() {
                return Err(Error::Model(format!(
                    "state {s}: {} guards for {} actions",
                    g.len(),
                    mdp.actions(s).len()
                )));
            }
            for guard in g {
                for (id, v) in guard.iter() {
                    if id.0 >= params.len() {
                        return Err(Error::Model(format!(
                            "state {s}: guard references undeclared parameter id {}",
                            id.0
                        )));
                    }
                    if !params.get(id).contains(v) {
                        return Err(Error::Model(format!(
                            "state {s}: guard value {v} outside domain of {}",
                            params.get(id).name
                        )));
                    }
                }
            }
        }
        Ok(ColoredMdp { mdp, params, tau, guards })
    }

    /// Checks the exactly-one-action-per-assignment invariant. Exhaustive over
    /// the constrained space when it has at most `exhaustive_limit` members,
    /// otherwise a per-state structural check on the guards.
    pub fn validate_coloring(&self, exhaustive_limit: u64) -> Vec<ColoringViolation> {
        if crate::params::space_size(&self.params) <= exhaustive_limit {
            self.validate_exhaustive()
        } else {
            self.validate_syntactic()
        }
    }

    fn validate_exhaustive(&self) -> Vec<ColoringViolation> {
        let mut violations = Vec::new();
        for theta in enumerate_space(&self.params, &self.tau) {
            let k = theta.as_partial();
            for s in 0..self.mdp.num_states() {
                let count = self.guards[s]
                    .iter()
                    .filter(|g| g.consistent_with(&k))
                    .count();
                if count != 1 {
                    violations.push(ColoringViolation::AssignmentActionCount {
                        state: s,
                        assignment: self.params.ids().map(|id| theta.get(id)).collect(),
                        count,
                    });
                    if violations.len() >= 20 {
                        return violations;
                    }
                }
            }
        }
        violations
    }

    fn validate_syntactic(&self) -> Vec<ColoringViolation> {
        let mut violations = Vec::new();
        for (s, guards) in self.guards.iter().enumerate() {
            if guards.len() == 1 && guards[0].is_empty() {
                continue; // unconditionally selected
            }
            let param_set: BTreeSet<ParamId> = guards[0].params().collect();
            if guards.iter().any(|g| g.params().collect::<BTreeSet<_>>() != param_set) {
                violations.push(ColoringViolation::GuardStructure {
                    state: s,
                    detail: "guards mention differing parameter sets".into(),
                });
                continue;
            }
            let mut tuples = BTreeSet::new();
            for g in guards {
                let tuple: Vec<i64> = param_set.iter().map(|id| g.get(*id).unwrap()).collect();
                if !tuples.insert(tuple) {
                    violations.push(ColoringViolation::GuardStructure {
                        state: s,
                        detail: "two guards assign the identical value tuple".into(),
                    });
                }
            }
            let product: u64 = param_set
                .iter()
                .map(|id| self.params.get(*id).domain_size())
                .product();
            if tuples.len() as u64 != product {
                violations.push(ColoringViolation::GuardStructure {
                    state: s,
                    detail: format!(
                        "guards cover {} of {} domain combinations",
                        tuples.len(),
                        product
                    ),
                });
            }
        }
        violations
    }

    /// Per state, the original action indices whose guard is consistent with
    /// `k`. Errors if a state is left without actions.
    pub fn surviving_actions(&self, k: &PartialAssignment) -> Result<Vec<Vec<usize>>> {
        let mut out = Vec::with_capacity(self.mdp.num_states());
        for (s, guards) in self.guards.iter().enumerate() {
            let kept: Vec<usize> = guards
                .iter()
                .enumerate()
                .filter(|(_, g)| g.consistent_with(k))
                .map(|(i, _)| i)
                .collect();
            if kept.is_empty() {
                return Err(Error::Coloring(format!(
                    "state {s} has no action compatible with {{{}}}",
                    k.display(&self.params)
                )));
            }
            out.push(kept);
        }
        Ok(out)
    }

    /// The largest sub-MDP whose actions are compatible with `k`. For a total
    /// assignment in the constrained space the result is an MC.
    pub fn induce(&self, k: &PartialAssignment) -> Result<Mdp> {
        let kept = self.surviving_actions(k)?;
        self.build_sub_mdp(&kept)
    }

    fn build_sub_mdp(&self, kept: &[Vec<usize>]) -> Result<Mdp> {
        let actions = kept
            .iter()
            .enumerate()
            .map(|(s, idxs)| {
                idxs.iter()
                    .map(|&i| self.mdp.actions(s)[i].clone())
                    .collect()
            })
            .collect();
        let rewards = (0..self.mdp.num_states()).map(|s| self.mdp.reward(s)).collect();
        Mdp::new(self.mdp.initial(), actions, rewards)
    }

    /// Reachable states of the induced MDP from `from`, and the parameters
    /// occurring in guards of surviving actions at those states.
    pub fn dependent_params(&self, k: &PartialAssignment, from: usize) -> Result<DependenceReport> {
        let kept = self.surviving_actions(k)?;
        self.dependence_over(&kept, from, None)
    }

    /// Dependence computation over a precomputed action table, optionally
    /// restricted to a known superset of the reachable states.
    pub(crate) fn dependence_over(
        &self,
        kept: &[Vec<usize>],
        from: usize,
        within: Option<&[usize]>,
    ) -> Result<DependenceReport> {
        let n = self.mdp.num_states();
        if from >= n {
            return Err(Error::Model(format!("state {from} out of range")));
        }
        let mut allowed = vec![false; n];
        match within {
            Some(states) => {
                for &s in states {
                    allowed[s] = true;
                }
            }
            None => allowed.fill(true),
        }
        let mut seen = vec![false; n];
        let mut stack = vec![from];
        seen[from] = true;
        let mut dependent = BTreeSet::new();
        while let Some(s) = stack.pop() {
            for &ai in &kept[s] {
                for (id, _) in self.guards[s][ai].iter() {
                    dependent.insert(id);
                }
                for succ in self.mdp.actions(s)[ai].dist.support() {
                    if allowed[succ] && !seen[succ] {
                        seen[succ] = true;
                        stack.push(succ);
                    }
                }
            }
        }
        let reachable = (0..n).filter(|&s| seen[s]).collect();
        Ok(DependenceReport { dependent, reachable })
    }

    /// Restricts a known theory conflict `k` to the literals of parameters the
    /// induced MDP depends on; the restriction is again a conflict.
    pub fn restrict_conflict(&self, k: &PartialAssignment) -> Result<PartialAssignment> {
        let report = self.dependent_params(k, self.mdp.initial())?;
        Ok(k.restrict_to(&report.dependent))
    }

    /// True if the total assignment lies in the constrained parameter space.
    pub fn in_space(&self, theta: &Assignment) -> Result<bool> {
        let k = theta.as_partial();
        Ok(eval_formula(&self.tau, &self.params, &k)? == Kleene::True)
    }
}
