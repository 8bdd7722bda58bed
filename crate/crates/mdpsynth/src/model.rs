//! Explicit-state MDP/MC representation and undiscounted indefinite-horizon
//! expected-total-reward computation.
//!
//! Values are least fixed points of `v <- R + P v` over non-divergent states;
//! divergence is decided by graph analysis over end components, never by
//! numeric overflow.

use std::time::Instant;

use crate::{Error, Result};

/// A probability distribution over state indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    entries: Vec<(usize, f64)>,
}

const PROB_SUM_TOL: f64 = 1e-9;

impl Distribution {
    pub fn new(entries: Vec<(usize, f64)>) -> Result<Distribution> {
        let mut seen = std::collections::BTreeSet::new();
        let mut sum = 0.0;
        for &(s, p) in &entries {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::Model(format!("probability {p} outside (0, 1]")));
            }
            if !seen.insert(s) {
                return Err(Error::Model(format!("duplicate successor state {s}")));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::Model(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(Distribution { entries })
    }

    pub fn dirac(state: usize) -> Distribution {
        Distribution { entries: vec![(state, 1.0)] }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|&(s, _)| s)
    }
}

/// One available action of a state: a label and its outcome distribution.
#[derive(Debug, Clone)]
pub struct Action {
    pub label: String,
    pub dist: Distribution,
}

/// An explicit-state MDP. An MC is the special case of exactly one action per
/// state.
#[derive(Debug, Clone)]
pub struct Mdp {
    num_states: usize,
    initial: usize,
    actions: Vec<Vec<Action>>,
    rewards: Vec<f64>,
}

/// Optimization direction for value computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Max,
    Min,
}

impl Mdp {
    pub fn new(initial: usize, actions: Vec<Vec<Action>>, rewards: Vec<f64>) -> Result<Mdp> {
        let num_states = actions.len();
        if rewards.len() != num_states {
            return Err(Error::Model("rewards length differs from state count".into()));
        }
        if initial >= num_states {
            return Err(Error::Model(format!("initial state {initial} out of range")));
        }
        for (s, acts) in actions.iter().enumerate() {
            if acts.is_empty() {
                return Err(Error::Model(format!("state {s} has no available action")));
            }
            for a in acts {
                for succ in a.dist.support() {
                    if succ >= num_states {
                        return Err(Error::Model(format!(
                            "state {s} action {} targets out-of-range state {succ}",
                            a.label
                        )));
                    }
                }
            }
        }
        for (s, &r) in rewards.iter().enumerate() {
            if !(r >= 0.0) {
                return Err(Error::Model(format!("state {s} has negative reward {r}")));
            }
        }
        Ok(Mdp { num_states, initial, actions, rewards })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn actions(&self, state: usize) -> &[Action] {
        &self.actions[state]
    }

    pub fn reward(&self, state: usize) -> f64 {
        self.rewards[state]
    }

    pub fn is_mc(&self) -> bool {
        self.actions.iter().all(|a| a.len() == 1)
    }
}

/// Per-state values of a value computation; divergent states carry `+inf`.
#[derive(Debug, Clone)]
pub struct ValueResult {
    pub values: Vec<f64>,
    pub direction: Direction,
    pub precision: f64,
}

impl ValueResult {
    pub fn at_initial(&self, mdp: &Mdp) -> f64 {
        self.values[mdp.initial()]
    }
}

/// Forward-closed set of states reachable from `from` under all available
/// actions.
pub fn reachable(mdp: &Mdp, from: usize) -> Result<Vec<usize>> {
    if from >= mdp.num_states() {
        return Err(Error::Model(format!("state {from} out of range")));
    }
    let mut seen = vec![false; mdp.num_states()];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(s) = stack.pop() {
        for a in mdp.actions(s) {
            for succ in a.dist.support() {
                if !seen[succ] {
                    seen[succ] = true;
                    stack.push(succ);
                }
            }
        }
    }
    Ok((0..mdp.num_states()).filter(|&s| seen[s]).collect())
}

/// Maximal end component decomposition. Returns, per state, the index of its
/// MEC or `None` if it belongs to none.
pub fn mec_decomposition(mdp: &Mdp) -> Vec<Option<usize>> {
    // Iteratively: SCCs of the remaining sub-MDP, drop actions leaving their
    // SCC, drop states left without actions, repeat until stable.
    let n = mdp.num_states();
    let mut action_alive: Vec<Vec<bool>> = mdp
        .actions
        .iter()
        .map(|acts| vec![true; acts.len()])
        .collect();
    let mut state_alive = vec![true; n];

    loop {
        let mut graph = petgraph::graph::DiGraph::<(), ()>::new();
        let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
        for s in 0..n {
            if !state_alive[s] {
                continue;
            }
            for (ai, a) in mdp.actions(s).iter().enumerate() {
                if !action_alive[s][ai] {
                    continue;
                }
                for succ in a.dist.support() {
                    graph.add_edge(nodes[s], nodes[succ], ());
                }
            }
        }
        let sccs = petgraph::algo::tarjan_scc(&graph);
        let mut comp = vec![usize::MAX; n];
        for (ci, scc) in sccs.iter().enumerate() {
            for node in scc {
                comp[node.index()] = ci;
            }
        }
        let mut changed = false;
        for s in 0..n {
            if !state_alive[s] {
                continue;
            }
            let mut any = false;
            for (ai, a) in mdp.actions(s).iter().enumerate() {
                if !action_alive[s][ai] {
                    continue;
                }
                if a.dist.support().any(|succ| !state_alive[succ] || comp[succ] != comp[s]) {
                    action_alive[s][ai] = false;
                    changed = true;
                } else {
                    any = true;
                }
            }
            if !any {
                state_alive[s] = false;
                changed = true;
            }
        }
        if !changed {
            // Remaining nontrivial SCCs are the MECs. A singleton without a
            // surviving self-loop action was already deactivated above.
            let mut mec_of = vec![None; n];
            let mut next = 0;
            let mut comp_to_mec = std::collections::HashMap::new();
            for s in 0..n {
                if state_alive[s] {
                    let id = *comp_to_mec.entry(comp[s]).or_insert_with(|| {
                        let id = next;
                        next += 1;
                        id
                    });
                    mec_of[s] = Some(id);
                }
            }
            return mec_of;
        }
    }
}

/// States whose optimal (per `direction`) expected total reward diverges.
pub fn classify_infinite(mdp: &Mdp, direction: Direction) -> Vec<bool> {
    let n = mdp.num_states();
    let mec_of = mec_decomposition(mdp);

    // MECs containing a positive-reward state: staying inside accumulates
    // infinite reward.
    let num_mecs = mec_of.iter().flatten().max().map_or(0, |m| m + 1);
    let mut mec_positive = vec![false; num_mecs];
    for s in 0..n {
        if let Some(m) = mec_of[s] {
            if mdp.reward(s) > 0.0 {
                mec_positive[m] = true;
            }
        }
    }
    let in_positive_mec: Vec<bool> = (0..n)
        .map(|s| mec_of[s].map_or(false, |m| mec_positive[m]))
        .collect();

    match direction {
        Direction::Max => {
            // Divergent iff some action sequence reaches a positive-reward MEC.
            backward_exists_reach(mdp, &in_positive_mec)
        }
        Direction::Min => {
            // Finite iff the controller can almost surely reach a zero-reward
            // end component and stay there. Zero ECs are the MECs of the
            // sub-MDP restricted to zero-reward states and actions whose
            // support stays inside that region.
            let zero_target = zero_ec_states(mdp);
            let safe = almost_sure_reach(mdp, &zero_target);
            (0..n).map(|s| !safe[s]).collect()
        }
    }
}

/// States in some end component whose states all carry zero reward.
fn zero_ec_states(mdp: &Mdp) -> Vec<bool> {
    let n = mdp.num_states();
    let zero: Vec<bool> = (0..n).map(|s| mdp.reward(s) == 0.0).collect();
    // Build the zero-restricted sub-MDP; states without an admissible action
    // get a fresh dead self-loop so Mdp stays well-formed, and are excluded
    // from the result.
    let mut sub_actions: Vec<Vec<Action>> = Vec::with_capacity(n);
    let mut has_action = vec![false; n];
    for s in 0..n {
        let mut acts = Vec::new();
        if zero[s] {
            for a in mdp.actions(s) {
                if a.dist.support().all(|succ| zero[succ]) {
                    acts.push(a.clone());
                }
            }
        }
        if acts.is_empty() {
            acts.push(Action { label: "dead".into(), dist: Distribution::dirac(s) });
        } else {
            has_action[s] = true;
        }
        sub_actions.push(acts);
    }
    let sub = Mdp::new(mdp.initial(), sub_actions, vec![0.0; n]).expect("valid sub-MDP");
    let mec_of = mec_decomposition(&sub);
    (0..n)
        .map(|s| has_action[s] && zero[s] && mec_of[s].is_some())
        .collect()
}

/// States that can reach `target` under some resolution of nondeterminism.
fn backward_exists_reach(mdp: &Mdp, target: &[bool]) -> Vec<bool> {
    let n = mdp.num_states();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for s in 0..n {
        for a in mdp.actions(s) {
            for succ in a.dist.support() {
                preds[succ].push(s);
            }
        }
    }
    let mut reach = target.to_vec();
    let mut stack: Vec<usize> = (0..n).filter(|&s| reach[s]).collect();
    while let Some(s) = stack.pop() {
        for &p in &preds[s] {
            if !reach[p] {
                reach[p] = true;
                stack.push(p);
            }
        }
    }
    reach
}

/// States from which the controller can reach `target` with probability one.
/// Standard qualitative fixed point: start from all states, repeatedly remove
/// states with no action that both avoids the removed set and keeps a path to
/// the target inside the candidate set.
fn almost_sure_reach(mdp: &Mdp, target: &[bool]) -> Vec<bool> {
    let n = mdp.num_states();
    let mut candidate = vec![true; n];
    loop {
        // Within the candidate set, keep actions whose full support stays in
        // the candidate set; compute which states can reach the target using
        // only such actions.
        let mut can_reach = target.to_vec();
        loop {
            let mut grew = false;
            for s in 0..n {
                if can_reach[s] || !candidate[s] {
                    continue;
                }
                let ok = mdp.actions(s).iter().any(|a| {
                    a.dist.support().all(|succ| candidate[succ])
                        && a.dist.support().any(|succ| can_reach[succ])
                });
                if ok {
                    can_reach[s] = true;
                    grew = true;
                }
            }
            if !grew {
                break;
            }
        }
        let mut changed = false;
        for s in 0..n {
            if candidate[s] && !can_reach[s] && !target[s] {
                candidate[s] = false;
                changed = true;
            }
        }
        if !changed {
            // States remaining are exactly those with a policy reaching the
            // target almost surely.
            return (0..n).map(|s| candidate[s]).collect();
        }
    }
}

/// Optimal expected total reward per state via Gauss-Seidel value iteration.
///
/// Iterates from the all-zero vector until successive sweeps differ by less
/// than `precision / 100` in sup-norm; the margin covers the geometric tail
/// left after the last sweep, keeping the final error below `precision` for
/// moderately mixing chains. Divergent states (per [`classify_infinite`])
/// carry `+inf`.
pub fn value_opt(mdp: &Mdp, direction: Direction, precision: f64) -> Result<ValueResult> {
    value_opt_deadline(mdp, direction, precision, None)
}

pub fn value_opt_deadline(
    mdp: &Mdp,
    direction: Direction,
    precision: f64,
    deadline: Option<Instant>,
) -> Result<ValueResult> {
    if !(precision > 0.0) {
        return Err(Error::Model(format!("precision {precision} must be positive")));
    }
    let n = mdp.num_states();
    let infinite = classify_infinite(mdp, direction);
    let mut values = vec![0.0f64; n];
    for s in 0..n {
        if infinite[s] {
            values[s] = f64::INFINITY;
        }
    }
    loop {
        if let Some(d) = deadline {
            if Instant::now() >= d {
                return Err(Error::Timeout);
            }
        }
        let mut delta = 0.0f64;
        for s in 0..n {
            if infinite[s] {
                continue;
            }
            let mut best: Option<f64> = None;
            for a in mdp.actions(s) {
                // Actions leading into divergent states: value +inf. For max
                // such actions cannot exist at a finite state; for min they
                // are dominated and skipped.
                if a.dist.support().any(|succ| infinite[succ]) {
                    continue;
                }
                let q: f64 = a
                    .dist
                    .entries()
                    .iter()
                    .map(|&(succ, p)| p * values[succ])
                    .sum();
                best = Some(match (best, direction) {
                    (None, _) => q,
                    (Some(b), Direction::Max) => b.max(q),
                    (Some(b), Direction::Min) => b.min(q),
                });
            }
            let new = mdp.reward(s)
                + best.ok_or_else(|| {
                    Error::Model(format!("finite state {s} has only divergent actions"))
                })?;
            delta = delta.max((new - values[s]).abs());
            values[s] = new;
        }
        if delta < precision / 100.0 {
            break;
        }
    }
    Ok(ValueResult { values, direction, precision })
}

/// Value of a Markov chain. Rejects inputs with nondeterministic states.
pub fn value_mc(mc: &Mdp, precision: f64) -> Result<ValueResult> {
    value_mc_deadline(mc, precision, None)
}

pub fn value_mc_deadline(
    mc: &Mdp,
    precision: f64,
    deadline: Option<Instant>,
) -> Result<ValueResult> {
    if !mc.is_mc() {
        return Err(Error::Model("value_mc requires exactly one action per state".into()));
    }
    value_opt_deadline(mc, Direction::Max, precision, deadline)
}
