//! Conflict-driven finite-domain search over parameter assignments with
//! nogood learning and a pluggable theory hook.
//!
//! A nogood is a forbidden combination of parameter literals. Propagation
//! prunes domain values that would complete a nogood; conflicts are explained
//! in terms of decision literals, learned with subsumption, and resolved by
//! backjumping.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::Instant;

use crate::params::{
    eval_formula, Formula, Kleene, ParamId, ParamSet, PartialAssignment,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Sat,
    Unsat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Constraint,
    Theory,
    Quantifier,
}

/// A forbidden combination of literals. Empty literals encode global UNSAT.
#[derive(Debug, Clone)]
pub struct Nogood {
    pub literals: PartialAssignment,
    pub provenance: Provenance,
}

impl Nogood {
    pub fn new(literals: PartialAssignment, provenance: Provenance) -> Nogood {
        Nogood { literals, provenance }
    }
}

/// Theory callbacks invoked by the solver: `on_partial` after each
/// decision-plus-propagation round, `on_full` at total assignments. A returned
/// nogood must only use literals from the queried assignment.
pub trait TheoryHook {
    fn on_partial(&mut self, k: &PartialAssignment) -> Result<Option<Nogood>>;
    fn on_full(&mut self, k: &PartialAssignment) -> Result<Option<Nogood>>;
    /// Cache hits accumulated by the hook, surfaced into solver stats.
    fn cache_hits(&self) -> u64 {
        0
    }
}

/// Hook that accepts everything.
pub struct NullHook;

impl TheoryHook for NullHook {
    fn on_partial(&mut self, _k: &PartialAssignment) -> Result<Option<Nogood>> {
        Ok(None)
    }
    fn on_full(&mut self, _k: &PartialAssignment) -> Result<Option<Nogood>> {
        Ok(None)
    }
}

#[derive(Debug, Clone, Copy, Default, serde::Serialize)]
pub struct SolveStats {
    pub decisions: u64,
    pub conflicts: u64,
    pub propagations: u64,
    pub theory_calls: u64,
    pub cache_hits: u64,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub verdict: Verdict,
    /// Total over the searched and fixed parameters when sat.
    pub witness: Option<PartialAssignment>,
    pub stats: SolveStats,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Suppress partial-assignment theory checks until the first total
    /// assignment has been evaluated.
    pub lazy_start: bool,
    /// Hard cap on decisions; exceeding it is an internal fault.
    pub max_decisions: Option<u64>,
    pub deadline: Option<Instant>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { lazy_start: true, max_decisions: None, deadline: None }
    }
}

/// A search instance: branch over `search`, treat `fixed` as pre-assigned.
/// The theory hook sees the union of both.
pub struct SearchProblem<'a> {
    pub params: &'a ParamSet,
    pub search: Vec<ParamId>,
    pub fixed: PartialAssignment,
    pub tau: &'a Formula,
    pub seed_nogoods: Vec<Nogood>,
}

impl<'a> SearchProblem<'a> {
    /// Search over every declared parameter.
    pub fn over_all(params: &'a ParamSet, tau: &'a Formula) -> SearchProblem<'a> {
        SearchProblem {
            params,
            search: params.ids().collect(),
            fixed: PartialAssignment::new(),
            tau,
            seed_nogoods: Vec::new(),
        }
    }
}

/// Outcome of one standalone propagation fixpoint.
#[derive(Debug, Clone, PartialEq)]
pub enum Propagation {
    Implied(Vec<(ParamId, i64)>),
    Conflict(PartialAssignment),
}

/// Runs nogood unit propagation to fixpoint over explicit domains. A nogood
/// with all but one literal matched prunes the remaining value; a parameter
/// left with a single value is assigned; a wiped-out domain is a conflict
/// explained by the union of the responsible nogoods' matched literals.
pub fn propagate(
    k: &PartialAssignment,
    nogoods: &[Nogood],
    domains: &BTreeMap<ParamId, Vec<i64>>,
) -> Propagation {
    let mut cur = k.clone();
    let mut doms: BTreeMap<ParamId, Vec<i64>> = domains.clone();
    let mut prune_expl: BTreeMap<ParamId, PartialAssignment> = BTreeMap::new();
    let mut implied = Vec::new();
    // Resolves implied literals in an explanation down to literals of k.
    let resolve = |expl: PartialAssignment,
                   reasons: &BTreeMap<ParamId, PartialAssignment>,
                   k: &PartialAssignment| {
        let mut out = PartialAssignment::new();
        let mut work: Vec<(ParamId, i64)> = expl.iter().collect();
        while let Some((p, v)) = work.pop() {
            if k.get(p) == Some(v) {
                out.set(p, v);
            } else if let Some(reason) = reasons.get(&p) {
                work.extend(reason.iter());
            }
        }
        out
    };
    let mut reasons: BTreeMap<ParamId, PartialAssignment> = BTreeMap::new();
    loop {
        let mut changed = false;
        for ng in nogoods {
            let mut unmatched = None;
            let mut matched = PartialAssignment::new();
            let mut satisfied = false;
            for (p, v) in ng.literals.iter() {
                match cur.get(p) {
                    Some(w) if w == v => matched.set(p, v),
                    Some(_) => {
                        satisfied = true;
                        break;
                    }
                    None => {
                        if unmatched.replace((p, v)).is_some() {
                            satisfied = true; // two free literals: no propagation
                            break;
                        }
                    }
                }
            }
            if satisfied {
                continue;
            }
            match unmatched {
                None => return Propagation::Conflict(resolve(matched, &reasons, k)),
                Some((p, v)) => {
                    let dom = doms.entry(p).or_default();
                    if let Some(pos) = dom.iter().position(|&x| x == v) {
                        dom.remove(pos);
                        changed = true;
                        let expl = prune_expl.entry(p).or_default();
                        *expl = expl.union(&matched);
                        if dom.is_empty() {
                            let expl = prune_expl.remove(&p).unwrap();
                            return Propagation::Conflict(resolve(expl, &reasons, k));
                        }
                        if dom.len() == 1 {
                            let only = dom[0];
                            cur.set(p, only);
                            reasons.insert(p, prune_expl.get(&p).cloned().unwrap_or_default());
                            implied.push((p, only));
                        }
                    }
                }
            }
        }
        if !changed {
            return Propagation::Implied(implied);
        }
    }
}

pub fn solve(
    problem: &SearchProblem,
    hook: &mut dyn TheoryHook,
    config: &SolverConfig,
) -> Result<SolveOutcome> {
    Solver::new(problem, config)?.run(hook)
}

struct Pruning {
    expl: PartialAssignment,
}

struct AssignInfo {
    value: i64,
    level: usize,
    /// Explanation literals when implied; `None` for decisions.
    reason: Option<PartialAssignment>,
}

struct VarState {
    values: Vec<i64>,
    pruned: Vec<Option<Pruning>>,
    assigned: Option<AssignInfo>,
}

impl VarState {
    fn active(&self) -> impl Iterator<Item = i64> + '_ {
        self.values
            .iter()
            .zip(&self.pruned)
            .filter(|(_, p)| p.is_none())
            .map(|(&v, _)| v)
    }

    fn active_count(&self) -> usize {
        self.pruned.iter().filter(|p| p.is_none()).count()
    }
}

enum Event {
    Prune { var: usize, vidx: usize },
    Assign { var: usize },
}

struct Conflict {
    expl: PartialAssignment,
    provenance: Provenance,
}

struct Solver<'a> {
    problem: &'a SearchProblem<'a>,
    config: &'a SolverConfig,
    var_of: HashMap<ParamId, usize>,
    vars: Vec<VarState>,
    assignment: PartialAssignment,
    nogoods: Vec<Nogood>,
    trail: Vec<Event>,
    level_start: Vec<usize>,
    tau_conjunct_params: Vec<BTreeSet<ParamId>>,
    stats: SolveStats,
    first_total_done: bool,
    root_unsat: bool,
}

impl<'a> Solver<'a> {
    fn new(problem: &'a SearchProblem<'a>, config: &'a SolverConfig) -> Result<Solver<'a>> {
        let mut var_of = HashMap::new();
        let mut vars = Vec::new();
        for &p in &problem.search {
            if problem.fixed.get(p).is_some() {
                return Err(Error::Solver(format!(
                    "parameter {} is both searched and fixed",
                    problem.params.get(p).name
                )));
            }
            if var_of.insert(p, vars.len()).is_some() {
                return Err(Error::Solver("duplicate search parameter".into()));
            }
            let decl = problem.params.get(p);
            let values: Vec<i64> = (decl.lo..=decl.hi).collect();
            let pruned = values.iter().map(|_| None).collect();
            vars.push(VarState { values, pruned, assigned: None });
        }
        let mut solver = Solver {
            problem,
            config,
            var_of,
            vars,
            assignment: PartialAssignment::new(),
            nogoods: Vec::new(),
            trail: Vec::new(),
            level_start: vec![0],
            tau_conjunct_params: problem.tau.conjuncts().iter().map(|f| f.params()).collect(),
            stats: SolveStats::default(),
            first_total_done: false,
            root_unsat: false,
        };
        for ng in &problem.seed_nogoods {
            solver.store_nogood(ng.clone());
        }
        Ok(solver)
    }

    fn level(&self) -> usize {
        self.level_start.len() - 1
    }

    fn full_view(&self) -> PartialAssignment {
        self.problem.fixed.union(&self.assignment)
    }

    /// Drops literals over non-search parameters. Returns `None` when the
    /// nogood can never be matched (a literal contradicts a fixed value or
    /// falls outside a domain), i.e. it is vacuous.
    fn restrict_literals(&self, lits: &PartialAssignment) -> Option<PartialAssignment> {
        let mut out = PartialAssignment::new();
        for (p, v) in lits.iter() {
            if let Some(&var) = self.var_of.get(&p) {
                if !self.vars[var].values.contains(&v) {
                    return None;
                }
                out.set(p, v);
            } else {
                match self.problem.fixed.get(p) {
                    Some(w) if w == v => {} // always matched, drop
                    _ => return None,
                }
            }
        }
        Some(out)
    }

    /// Adds a nogood with subsumption. Empty literals flag global UNSAT.
    fn store_nogood(&mut self, ng: Nogood) {
        let lits = match self.restrict_literals(&ng.literals) {
            Some(l) => l,
            None => return,
        };
        if lits.is_empty() {
            self.root_unsat = true;
            return;
        }
        if self.nogoods.iter().any(|g| g.literals.subset_of(&lits)) {
            return;
        }
        self.nogoods.retain(|g| !lits.subset_of(&g.literals));
        self.nogoods.push(Nogood { literals: lits, provenance: ng.provenance });
    }

    fn prune(&mut self, var: usize, value: i64, expl: PartialAssignment) {
        let vidx = self.vars[var]
            .values
            .iter()
            .position(|&x| x == value)
            .expect("value in domain");
        if self.vars[var].pruned[vidx].is_some() {
            return;
        }
        self.vars[var].pruned[vidx] = Some(Pruning { expl });
        self.trail.push(Event::Prune { var, vidx });
        self.stats.propagations += 1;
    }

    fn assign(&mut self, var: usize, value: i64, reason: Option<PartialAssignment>) {
        let p = self.problem.search[var];
        debug_assert!(self.vars[var].assigned.is_none());
        self.vars[var].assigned = Some(AssignInfo { value, level: self.level(), reason });
        self.assignment.set(p, value);
        self.trail.push(Event::Assign { var });
    }

    /// Union of the pruning explanations of every inactive value except
    /// `keep`, used both as an implication reason and a wipe-out explanation.
    fn pruning_explanation(&self, var: usize, keep: Option<i64>) -> PartialAssignment {
        let mut out = PartialAssignment::new();
        for (i, pr) in self.vars[var].pruned.iter().enumerate() {
            if keep == Some(self.vars[var].values[i]) {
                continue;
            }
            if let Some(pr) = pr {
                out = out.union(&pr.expl);
            }
        }
        out
    }

    fn propagate_round(&mut self) -> Option<Conflict> {
        loop {
            let mut changed = false;
            for ng_idx in 0..self.nogoods.len() {
                let ng = &self.nogoods[ng_idx];
                let mut unmatched = None;
                let mut matched = PartialAssignment::new();
                let mut satisfied = false;
                for (p, v) in ng.literals.iter() {
                    match self.assignment.get(p) {
                        Some(w) if w == v => matched.set(p, v),
                        Some(_) => {
                            satisfied = true;
                            break;
                        }
                        None => {
                            if unmatched.replace((p, v)).is_some() {
                                satisfied = true;
                                break;
                            }
                        }
                    }
                }
                if satisfied {
                    continue;
                }
                let provenance = ng.provenance;
                match unmatched {
                    None => {
                        return Some(Conflict { expl: matched, provenance });
                    }
                    Some((p, v)) => {
                        let var = self.var_of[&p];
                        let vidx = self.vars[var].values.iter().position(|&x| x == v);
                        let Some(vidx) = vidx else { continue };
                        if self.vars[var].pruned[vidx].is_some() {
                            continue;
                        }
                        self.prune(var, v, matched);
                        changed = true;
                        match self.vars[var].active_count() {
                            0 => {
                                return Some(Conflict {
                                    expl: self.pruning_explanation(var, None),
                                    provenance,
                                });
                            }
                            1 => {
                                let only = self.vars[var].active().next().unwrap();
                                let reason = self.pruning_explanation(var, Some(only));
                                self.assign(var, only, Some(reason));
                            }
                            _ => {}
                        }
                    }
                }
            }
            let view = self.full_view();
            for (ci, conjunct) in self.problem.tau.conjuncts().iter().enumerate() {
                if let Ok(Kleene::False) = eval_formula(conjunct, self.problem.params, &view) {
                    // Coarse explanation: every assigned search literal whose
                    // parameter occurs in the falsified conjunct.
                    let mut expl = PartialAssignment::new();
                    for (p, v) in self.assignment.iter() {
                        if self.tau_conjunct_params[ci].contains(&p) {
                            expl.set(p, v);
                        }
                    }
                    return Some(Conflict { expl, provenance: Provenance::Constraint });
                }
            }
            if !changed {
                return None;
            }
        }
    }

    /// Resolves a conflict explanation down to decision literals.
    fn analyze(&self, expl: PartialAssignment, provenance: Provenance) -> Nogood {
        let mut work: Vec<(ParamId, i64)> = expl.iter().collect();
        let mut out = PartialAssignment::new();
        let mut seen = BTreeSet::new();
        while let Some((p, v)) = work.pop() {
            if !seen.insert((p, v)) {
                continue;
            }
            let var = self.var_of[&p];
            let info = self.vars[var].assigned.as_ref().expect("explanation literal assigned");
            debug_assert_eq!(info.value, v);
            match &info.reason {
                None => out.set(p, v),
                Some(reason) => work.extend(reason.iter()),
            }
        }
        Nogood { literals: out, provenance }
    }

    fn backjump(&mut self, to_level: usize) {
        let keep = self.level_start[to_level + 1];
        while self.trail.len() > keep {
            match self.trail.pop().unwrap() {
                Event::Prune { var, vidx } => self.vars[var].pruned[vidx] = None,
                Event::Assign { var } => {
                    self.vars[var].assigned = None;
                    self.assignment.remove(self.problem.search[var]);
                }
            }
        }
        self.level_start.truncate(to_level + 1);
    }

    /// Learns the analyzed nogood and backjumps to the deepest level at which
    /// it has exactly one unmatched literal. Returns false on global UNSAT.
    fn resolve_conflict(&mut self, conflict: Conflict) -> bool {
        self.stats.conflicts += 1;
        let learned = self.analyze(conflict.expl, conflict.provenance);
        if learned.literals.is_empty() {
            return false;
        }
        let mut levels: Vec<usize> = learned
            .literals
            .params()
            .map(|p| self.vars[self.var_of[&p]].assigned.as_ref().unwrap().level)
            .collect();
        levels.sort_unstable_by(|a, b| b.cmp(a));
        let target = if levels.len() >= 2 { levels[1] } else { 0 };
        self.backjump(target);
        self.store_nogood(learned);
        !self.root_unsat
    }

    fn check_hook_contract(&self, queried: &PartialAssignment, ng: &Nogood) -> Result<()> {
        if !ng.literals.subset_of(queried) {
            return Err(Error::Solver(
                "theory hook returned a literal outside the queried assignment".into(),
            ));
        }
        Ok(())
    }

    fn decide(&mut self) -> Result<()> {
        if let Some(deadline) = self.config.deadline {
            if Instant::now() >= deadline {
                return Err(Error::Timeout);
            }
        }
        self.stats.decisions += 1;
        if let Some(cap) = self.config.max_decisions {
            if self.stats.decisions > cap {
                return Err(Error::Solver("decision cap exceeded".into()));
            }
        }
        // Smallest remaining domain, ties by declaration order; values
        // ascending.
        let var = (0..self.vars.len())
            .filter(|&v| self.vars[v].assigned.is_none())
            .min_by_key(|&v| self.vars[v].active_count())
            .expect("an unassigned variable exists");
        let value = self.vars[var].active().next().expect("nonempty domain");
        self.level_start.push(self.trail.len());
        self.assign(var, value, None);
        Ok(())
    }

    fn outcome(&self, verdict: Verdict, witness: Option<PartialAssignment>) -> SolveOutcome {
        SolveOutcome { verdict, witness, stats: self.stats }
    }

    fn run(&mut self, hook: &mut dyn TheoryHook) -> Result<SolveOutcome> {
        loop {
            self.stats.cache_hits = hook.cache_hits();
            if self.root_unsat {
                return Ok(self.outcome(Verdict::Unsat, None));
            }
            if let Some(conflict) = self.propagate_round() {
                if !self.resolve_conflict(conflict) {
                    return Ok(self.outcome(Verdict::Unsat, None));
                }
                continue;
            }
            if self.assignment.len() == self.problem.search.len() {
                let view = self.full_view();
                self.stats.theory_calls += 1;
                let verdict = hook.on_full(&view)?;
                self.first_total_done = true;
                match verdict {
                    None => {
                        self.stats.cache_hits = hook.cache_hits();
                        return Ok(self.outcome(Verdict::Sat, Some(view)));
                    }
                    Some(ng) => {
                        self.check_hook_contract(&view, &ng)?;
                        let Some(lits) = self.restrict_literals(&ng.literals) else {
                            return Err(Error::Solver(
                                "theory hook returned a vacuous nogood".into(),
                            ));
                        };
                        if lits.is_empty() {
                            return Ok(self.outcome(Verdict::Unsat, None));
                        }
                        let provenance = ng.provenance;
                        self.store_nogood(Nogood { literals: lits.clone(), provenance });
                        if !self.resolve_conflict(Conflict { expl: lits, provenance }) {
                            return Ok(self.outcome(Verdict::Unsat, None));
                        }
                        continue;
                    }
                }
            }
            if !self.config.lazy_start || self.first_total_done {
                let view = self.full_view();
                self.stats.theory_calls += 1;
                if let Some(ng) = hook.on_partial(&view)? {
                    self.check_hook_contract(&view, &ng)?;
                    if let Some(lits) = self.restrict_literals(&ng.literals) {
                        if lits.is_empty() {
                            return Ok(self.outcome(Verdict::Unsat, None));
                        }
                        let provenance = ng.provenance;
                        self.store_nogood(Nogood { literals: lits.clone(), provenance });
                        if !self.resolve_conflict(Conflict { expl: lits, provenance }) {
                            return Ok(self.outcome(Verdict::Unsat, None));
                        }
                        continue;
                    }
                }
            }
            self.decide()?;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{Param, ParamKind};

    fn two_params(hi: i64) -> ParamSet {
        let mut ps = ParamSet::new();
        for name in ["a", "b"] {
            ps.add(Param {
                name: name.into(),
                lo: 0,
                hi,
                kind: ParamKind::Controllable,
                features: None,
            })
            .unwrap();
        }
        ps
    }

    fn lit(pairs: &[(usize, i64)]) -> PartialAssignment {
        PartialAssignment::from_literals(pairs.iter().map(|&(p, v)| (ParamId(p), v)))
    }

    #[test]
    fn propagate_unit_prunes_binary_domain() {
        let nogoods = vec![Nogood::new(lit(&[(0, 1), (1, 2)]), Provenance::Constraint)];
        let mut domains = BTreeMap::new();
        domains.insert(ParamId(1), vec![1, 2]);
        let out = propagate(&lit(&[(0, 1)]), &nogoods, &domains);
        assert_eq!(out, Propagation::Implied(vec![(ParamId(1), 1)]));
    }

    #[test]
    fn propagate_domain_wipeout_is_root_conflict() {
        let nogoods = vec![
            Nogood::new(lit(&[(0, 0)]), Provenance::Constraint),
            Nogood::new(lit(&[(0, 1)]), Provenance::Constraint),
        ];
        let mut domains = BTreeMap::new();
        domains.insert(ParamId(0), vec![0, 1]);
        match propagate(&PartialAssignment::new(), &nogoods, &domains) {
            Propagation::Conflict(expl) => assert!(expl.is_empty()),
            other => panic!("expected conflict, got {other:?}"),
        }
    }

    #[test]
    fn propagate_no_matching_nogood() {
        let nogoods = vec![Nogood::new(lit(&[(0, 1), (1, 2)]), Provenance::Constraint)];
        let mut domains = BTreeMap::new();
        domains.insert(ParamId(0), vec![0, 1]);
        domains.insert(ParamId(1), vec![0, 1, 2]);
        let out = propagate(&lit(&[(0, 0)]), &nogoods, &domains);
        assert_eq!(out, Propagation::Implied(vec![]));
    }

    #[test]
    fn single_param_equality_sat() {
        let mut ps = ParamSet::new();
        let a = ps
            .add(Param { name: "a".into(), lo: 0, hi: 1, kind: ParamKind::Controllable, features: None })
            .unwrap();
        let tau = Formula::eq_const(a, 1);
        let problem = SearchProblem::over_all(&ps, &tau);
        let out = solve(&problem, &mut NullHook, &SolverConfig::default()).unwrap();
        assert_eq!(out.verdict, Verdict::Sat);
        assert_eq!(out.witness.unwrap().get(a), Some(1));
    }

    #[test]
    fn contradictory_constraint_unsat() {
        let mut ps = ParamSet::new();
        let a = ps
            .add(Param { name: "a".into(), lo: 0, hi: 1, kind: ParamKind::Controllable, features: None })
            .unwrap();
        let tau = Formula::And(vec![Formula::eq_const(a, 1), Formula::eq_const(a, 0)]);
        let problem = SearchProblem::over_all(&ps, &tau);
        let out = solve(&problem, &mut NullHook, &SolverConfig::default()).unwrap();
        assert_eq!(out.verdict, Verdict::Unsat);
    }

    #[test]
    fn seed_nogoods_prune_solutions() {
        let ps = two_params(1);
        let tau = Formula::True;
        let mut problem = SearchProblem::over_all(&ps, &tau);
        // Forbid every combination except a=1, b=1.
        for (a, b) in [(0, 0), (0, 1), (1, 0)] {
            problem
                .seed_nogoods
                .push(Nogood::new(lit(&[(0, a), (1, b)]), Provenance::Constraint));
        }
        let out = solve(&problem, &mut NullHook, &SolverConfig::default()).unwrap();
        assert_eq!(out.verdict, Verdict::Sat);
        let w = out.witness.unwrap();
        assert_eq!((w.get(ParamId(0)), w.get(ParamId(1))), (Some(1), Some(1)));
    }

    #[test]
    fn all_combinations_forbidden_unsat() {
        let ps = two_params(1);
        let tau = Formula::True;
        let mut problem = SearchProblem::over_all(&ps, &tau);
        for a in 0..2 {
            for b in 0..2 {
                problem
                    .seed_nogoods
                    .push(Nogood::new(lit(&[(0, a), (1, b)]), Provenance::Constraint));
            }
        }
        let out = solve(&problem, &mut NullHook, &SolverConfig::default()).unwrap();
        assert_eq!(out.verdict, Verdict::Unsat);
    }

    #[test]
    fn empty_seed_nogood_is_global_unsat() {
        let ps = two_params(1);
        let tau = Formula::True;
        let mut problem = SearchProblem::over_all(&ps, &tau);
        problem
            .seed_nogoods
            .push(Nogood::new(PartialAssignment::new(), Provenance::Theory));
        let out = solve(&problem, &mut NullHook, &SolverConfig::default()).unwrap();
        assert_eq!(out.verdict, Verdict::Unsat);
    }

    #[test]
    fn subsumed_nogood_not_stored() {
        let ps = two_params(3);
        let tau = Formula::True;
        let problem = SearchProblem::over_all(&ps, &tau);
        let config = SolverConfig::default();
        let mut solver = Solver::new(&problem, &config).unwrap();
        solver.store_nogood(Nogood::new(lit(&[(0, 1)]), Provenance::Constraint));
        solver.store_nogood(Nogood::new(lit(&[(0, 1), (1, 2)]), Provenance::Constraint));
        assert_eq!(solver.nogoods.len(), 1);
        // The reverse order replaces the wider nogood.
        let mut solver = Solver::new(&problem, &config).unwrap();
        solver.store_nogood(Nogood::new(lit(&[(0, 1), (1, 2)]), Provenance::Constraint));
        solver.store_nogood(Nogood::new(lit(&[(0, 1)]), Provenance::Constraint));
        assert_eq!(solver.nogoods.len(), 1);
        assert_eq!(solver.nogoods[0].literals.len(), 1);
    }

    #[test]
    fn fixed_literals_are_dropped_from_nogoods() {
        let ps = two_params(1);
        let tau = Formula::True;
        let mut problem = SearchProblem::over_all(&ps, &tau);
        problem.search = vec![ParamId(1)];
        problem.fixed = lit(&[(0, 1)]);
        // Matches the fixed part, so it reduces to b=0.
        problem
            .seed_nogoods
            .push(Nogood::new(lit(&[(0, 1), (1, 0)]), Provenance::Theory));
        // Contradicts the fixed part: vacuous, ignored.
        problem
            .seed_nogoods
            .push(Nogood::new(lit(&[(0, 0), (1, 1)]), Provenance::Theory));
        let out = solve(&problem, &mut NullHook, &SolverConfig::default()).unwrap();
        assert_eq!(out.verdict, Verdict::Sat);
        assert_eq!(out.witness.unwrap().get(ParamId(1)), Some(1));
    }

    /// Hook that rejects totals until a given count, recording call order.
    struct RejectingHook {
        rejections_left: usize,
        partial_calls: u64,
        full_calls: u64,
    }

    impl TheoryHook for RejectingHook {
        fn on_partial(&mut self, _k: &PartialAssignment) -> Result<Option<Nogood>> {
            self.partial_calls += 1;
            Ok(None)
        }
        fn on_full(&mut self, k: &PartialAssignment) -> Result<Option<Nogood>> {
            self.full_calls += 1;
            if self.rejections_left > 0 {
                self.rejections_left -= 1;
                Ok(Some(Nogood::new(k.clone(), Provenance::Theory)))
            } else {
                Ok(None)
            }
        }
    }

    #[test]
    fn hook_rejections_enumerate_totals() {
        let ps = two_params(1);
        let tau = Formula::True;
        let problem = SearchProblem::over_all(&ps, &tau);
        let mut hook = RejectingHook { rejections_left: 3, partial_calls: 0, full_calls: 0 };
        let out = solve(&problem, &mut NullHook, &SolverConfig::default()).unwrap();
        assert_eq!(out.verdict, Verdict::Sat);
        let out = solve(&problem, &mut hook, &SolverConfig::default()).unwrap();
        assert_eq!(out.verdict, Verdict::Sat);
        assert_eq!(hook.full_calls, 4);
        // Rejecting every total proves unsat.
        let mut hook = RejectingHook { rejections_left: 4, partial_calls: 0, full_calls: 0 };
        let out = solve(&problem, &mut hook, &SolverConfig::default()).unwrap();
        assert_eq!(out.verdict, Verdict::Unsat);
    }

    #[test]
    fn lazy_start_defers_partial_checks() {
        let ps = two_params(1);
        let tau = Formula::True;
        let problem = SearchProblem::over_all(&ps, &tau);
        let mut lazy = RejectingHook { rejections_left: 0, partial_calls: 0, full_calls: 0 };
        solve(&problem, &mut lazy, &SolverConfig::default()).unwrap();
        assert_eq!(lazy.partial_calls, 0);
        let mut eager = RejectingHook { rejections_left: 0, partial_calls: 0, full_calls: 0 };
        let config = SolverConfig { lazy_start: false, ..SolverConfig::default() };
        solve(&problem, &mut eager, &config).unwrap();
        assert!(eager.partial_calls > 0);
    }

    /// Hook violating the subset contract: returns a literal never queried.
    struct RogueHook;

    impl TheoryHook for RogueHook {
        fn on_partial(&mut self, _k: &PartialAssignment) -> Result<Option<Nogood>> {
            Ok(None)
        }
        fn on_full(&mut self, k: &PartialAssignment) -> Result<Option<Nogood>> {
            let mut lits = PartialAssignment::new();
            let p = k.params().next().unwrap();
            lits.set(p, k.get(p).unwrap() + 40);
            Ok(Some(Nogood::new(lits, Provenance::Theory)))
        }
    }

    #[test]
    fn rogue_hook_is_an_internal_fault() {
        let ps = two_params(1);
        let tau = Formula::True;
        let problem = SearchProblem::over_all(&ps, &tau);
        let err = solve(&problem, &mut RogueHook, &SolverConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Solver(_)));
    }

    #[test]
    fn backjump_prunes_at_earlier_level() {
        // Learn {a=0, b=1} while a=0 was decided at level 1 and b=1 at a
        // deeper level: search must still find a solution with a=0, b!=1.
        let mut ps = ParamSet::new();
        for name in ["a", "b", "c"] {
            ps.add(Param {
                name: name.into(),
                lo: 0,
                hi: 2,
                kind: ParamKind::Controllable,
                features: None,
            })
            .unwrap();
        }
        struct BlockAB;
        impl TheoryHook for BlockAB {
            fn on_partial(&mut self, _k: &PartialAssignment) -> Result<Option<Nogood>> {
                Ok(None)
            }
            fn on_full(&mut self, k: &PartialAssignment) -> Result<Option<Nogood>> {
                if k.get(ParamId(0)) == Some(0) && k.get(ParamId(1)) == Some(0) {
                    Ok(Some(Nogood::new(
                        lit(&[(0, 0), (1, 0)]),
                        Provenance::Theory,
                    )))
                } else {
                    Ok(None)
                }
            }
        }
        let tau = Formula::True;
        let problem = SearchProblem::over_all(&ps, &tau);
        let out = solve(&problem, &mut BlockAB, &SolverConfig::default()).unwrap();
        assert_eq!(out.verdict, Verdict::Sat);
        let w = out.witness.unwrap();
        assert!(!(w.get(ParamId(0)) == Some(0) && w.get(ParamId(1)) == Some(0)));
    }

    #[test]
    fn decision_cap_is_enforced() {
        let ps = two_params(3);
        let tau = Formula::True;
        let problem = SearchProblem::over_all(&ps, &tau);
        let config = SolverConfig { max_decisions: Some(0), ..SolverConfig::default() };
        let err = solve(&problem, &mut RejectingHook { rejections_left: 99, partial_calls: 0, full_calls: 0 }, &config)
            .unwrap_err();
        assert!(matches!(err, Error::Solver(_)));
    }

    #[test]
    fn empty_search_space_consults_hook_once() {
        let ps = two_params(1);
        let tau = Formula::True;
        let mut problem = SearchProblem::over_all(&ps, &tau);
        problem.search = vec![];
        problem.fixed = lit(&[(0, 0), (1, 0)]);
        let mut hook = RejectingHook { rejections_left: 0, partial_calls: 0, full_calls: 0 };
        let out = solve(&problem, &mut hook, &SolverConfig::default()).unwrap();
        assert_eq!(out.verdict, Verdict::Sat);
        assert_eq!(hook.full_calls, 1);
        let mut hook = RejectingHook { rejections_left: 1, partial_calls: 0, full_calls: 0 };
        let out = solve(&problem, &mut hook, &SolverConfig::default()).unwrap();
        assert_eq!(out.verdict, Verdict::Unsat);
    }
}
