//! Robust feasibility: does some controllable assignment meet the threshold
//! under every compatible uncontrollable completion?
//!
//! Decided by a candidate/counterexample loop: an outer search proposes
//! controllable assignments, an inner search with flipped polarity hunts for
//! a refuting completion, and each refutation is certified as a value
//! conflict, minimized, and turned into a block on future candidates.

use std::collections::BTreeSet;
use std::time::Instant;

use crate::colored::ColoredMdp;
use crate::model::value_mc_deadline;
use crate::params::{
    eval_formula, Formula, Kleene, ParamId, ParamKind, ParamSet, PartialAssignment,
};
use crate::solver::{
    solve, Nogood, NullHook, Provenance, SearchProblem, SolveStats, SolverConfig, TheoryHook,
    Verdict,
};
use crate::theory::{as_hook, theory_check_full, Polarity, TheoryCache, TheoryQuery, TheorySettings};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct RobustConfig {
    pub precision: f64,
    pub lazy_start: bool,
    pub use_cache: bool,
    /// Prune partial candidates whose optimistic value already fails.
    pub outer_prune: bool,
    pub max_decisions: Option<u64>,
    pub deadline: Option<Instant>,
}

impl Default for RobustConfig {
    fn default() -> Self {
        RobustConfig {
            precision: 1e-4,
            lazy_start: true,
            use_cache: true,
            outer_prune: true,
            max_decisions: None,
            deadline: None,
        }
    }
}

impl RobustConfig {
    fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            lazy_start: self.lazy_start,
            max_decisions: self.max_decisions,
            deadline: self.deadline,
        }
    }

    fn settings(&self, nu: f64) -> TheorySettings {
        TheorySettings { nu, precision: self.precision, deadline: self.deadline }
    }
}

/// One refutation: the candidate part that provably fails, the completion
/// that witnessed it, and the full minimized conflict.
#[derive(Debug, Clone)]
pub struct CexRecord {
    pub x_literals: PartialAssignment,
    pub y_witness: PartialAssignment,
    pub generalized: PartialAssignment,
}

#[derive(Debug, Clone, Copy, Default, serde::Serialize)]
pub struct RobustStats {
    pub iterations: u64,
    pub decisions: u64,
    pub conflicts: u64,
    pub theory_calls: u64,
    pub cache_hits: u64,
}

impl RobustStats {
    fn absorb(&mut self, s: &SolveStats) {
        self.decisions += s.decisions;
        self.conflicts += s.conflicts;
        self.theory_calls += s.theory_calls;
    }
}

#[derive(Debug, Clone)]
pub struct RobustOutcome {
    pub verdict: Verdict,
    /// Total over the controllable parameters when sat.
    pub witness_x: Option<PartialAssignment>,
    /// Every (candidate, refuting completion) pair encountered, in order.
    pub counterexample_trace: Vec<(PartialAssignment, PartialAssignment)>,
    pub stats: RobustStats,
}

/// Exact membership and value check for one total assignment.
pub fn verify_assignment(
    c: &ColoredMdp,
    nu: f64,
    theta: &PartialAssignment,
    precision: f64,
) -> Result<(bool, f64)> {
    if theta.len() != c.params.len() {
        return Err(Error::Solver("assignment is not total".into()));
    }
    if eval_formula(&c.tau, &c.params, theta)? != Kleene::True {
        return Err(Error::Solver("assignment violates the constraint".into()));
    }
    let mc = c.induce(theta)?;
    let value = value_mc_deadline(&mc, precision, None)?.at_initial(&mc);
    Ok((value >= nu - precision, value))
}

fn kinds(params: &ParamSet) -> (Vec<ParamId>, Vec<ParamId>) {
    (params.of_kind(ParamKind::Controllable), params.of_kind(ParamKind::Uncontrollable))
}

/// Searches for an uncontrollable completion of `theta_x` that is compatible
/// with the constraint and fails the threshold. `None` certifies that every
/// compatible completion passes. A candidate with no compatible completion at
/// all is an error.
pub fn find_counterexample(
    c: &ColoredMdp,
    nu: f64,
    theta_x: &PartialAssignment,
    config: &RobustConfig,
) -> Result<Option<PartialAssignment>> {
    let mut cache = TheoryCache::new(config.use_cache);
    let mut stats = RobustStats::default();
    find_cex_inner(c, nu, theta_x, config, &mut cache, &mut stats)
}

fn find_cex_inner(
    c: &ColoredMdp,
    nu: f64,
    theta_x: &PartialAssignment,
    config: &RobustConfig,
    cache: &mut TheoryCache,
    stats: &mut RobustStats,
) -> Result<Option<PartialAssignment>> {
    let (x_params, y_params) = kinds(&c.params);
    for &p in &x_params {
        if theta_x.get(p).is_none() {
            return Err(Error::Solver(format!(
                "candidate leaves controllable parameter {} unassigned",
                c.params.get(p).name
            )));
        }
    }
    // First make sure some compatible completion exists at all; a vacuous
    // candidate is outside the candidate space.
    let feasibility = SearchProblem {
        params: &c.params,
        search: y_params.clone(),
        fixed: theta_x.clone(),
        tau: &c.tau,
        seed_nogoods: Vec::new(),
    };
    let out = solve(&feasibility, &mut NullHook, &config.solver_config())?;
    stats.absorb(&out.stats);
    if out.verdict == Verdict::Unsat {
        return Err(Error::Solver(
            "candidate has no compatible uncontrollable completion".into(),
        ));
    }
    let problem = SearchProblem {
        params: &c.params,
        search: y_params,
        fixed: theta_x.clone(),
        tau: &c.tau,
        seed_nogoods: Vec::new(),
    };
    let mut hook = as_hook(c, config.settings(nu), Polarity::Negative, Some(cache));
    let out = solve(&problem, &mut hook, &config.solver_config())?;
    stats.absorb(&out.stats);
    stats.cache_hits = cache.hits;
    match out.verdict {
        Verdict::Unsat => Ok(None),
        Verdict::Sat => {
            let y_set: BTreeSet<ParamId> =
                c.params.of_kind(ParamKind::Uncontrollable).into_iter().collect();
            Ok(Some(out.witness.unwrap().restrict_to(&y_set)))
        }
    }
}

/// Controllable parameters that share a constraint conjunct with an
/// uncontrollable one. Pinning these in a learned block keeps a stored
/// refuting completion compatible with every candidate the block matches.
fn coupled_x_params(tau: &Formula, params: &ParamSet) -> BTreeSet<ParamId> {
    let mut coupled = BTreeSet::new();
    for conjunct in tau.conjuncts() {
        let ps = conjunct.params();
        let mentions_y = ps
            .iter()
            .any(|&p| params.get(p).kind == ParamKind::Uncontrollable);
        if mentions_y {
            for p in ps {
                if params.get(p).kind == ParamKind::Controllable {
                    coupled.insert(p);
                }
            }
        }
    }
    coupled
}

struct QuantifierHook<'a> {
    colored: &'a ColoredMdp,
    nu: f64,
    config: &'a RobustConfig,
    cache: TheoryCache,
    coupled: BTreeSet<ParamId>,
    records: Vec<CexRecord>,
    trace: Vec<(PartialAssignment, PartialAssignment)>,
    stats: RobustStats,
}

impl QuantifierHook<'_> {
    fn block(&self, record: &CexRecord, theta_x: &PartialAssignment) -> Nogood {
        let lits = record.x_literals.union(&theta_x.restrict_to(&self.coupled));
        Nogood::new(lits, Provenance::Quantifier)
    }
}

impl TheoryHook for QuantifierHook<'_> {
    fn on_partial(&mut self, k: &PartialAssignment) -> Result<Option<Nogood>> {
        if !self.config.outer_prune {
            return Ok(None);
        }
        // If even the best completion over everything unassigned misses the
        // threshold, no extension of this candidate can be robust.
        let q = TheoryQuery { literals: k.clone(), polarity: Polarity::Positive };
        let out = theory_check_full(
            self.colored,
            &self.config.settings(self.nu),
            &q,
            Some(&mut self.cache),
            None,
        )?;
        self.stats.theory_calls += 1;
        Ok(out.conflict)
    }

    fn on_full(&mut self, theta_x: &PartialAssignment) -> Result<Option<Nogood>> {
        // Replay stored refutations first.
        for i in 0..self.records.len() {
            let record = &self.records[i];
            if record.x_literals.subset_of(theta_x) {
                let combined = theta_x.union(&record.y_witness);
                if eval_formula(&self.colored.tau, &self.colored.params, &combined)?
                    == Kleene::True
                {
                    let record = self.records[i].clone();
                    return Ok(Some(self.block(&record, theta_x)));
                }
            }
        }
        self.stats.iterations += 1;
        let cex = find_cex_inner(
            self.colored,
            self.nu,
            theta_x,
            self.config,
            &mut self.cache,
            &mut self.stats,
        );
        let theta_y = match cex {
            Ok(Some(theta_y)) => theta_y,
            Ok(None) => return Ok(None),
            Err(Error::Solver(_)) => {
                // Vacuous candidate: block every candidate that agrees on the
                // constraint-relevant part, since vacuity only depends on it.
                let tau_params = self.colored.tau.params();
                let lits = theta_x.restrict_to(&tau_params);
                return Ok(Some(Nogood::new(lits, Provenance::Quantifier)));
            }
            Err(e) => return Err(e),
        };
        // Certify and minimize the refutation.
        let combined = theta_x.union(&theta_y);
        let q = TheoryQuery { literals: combined, polarity: Polarity::Positive };
        let out = theory_check_full(
            self.colored,
            &self.config.settings(self.nu),
            &q,
            Some(&mut self.cache),
            None,
        )?;
        self.stats.theory_calls += 1;
        if out.conflict.is_none() {
            return Err(Error::Solver(
                "refuting completion failed conflict certification".into(),
            ));
        }
        let x_set: BTreeSet<ParamId> = self
            .colored
            .params
            .of_kind(ParamKind::Controllable)
            .into_iter()
            .collect();
        let record = CexRecord {
            x_literals: out.restricted.restrict_to(&x_set),
            y_witness: theta_y.clone(),
            generalized: out.restricted,
        };
        self.trace.push((theta_x.clone(), theta_y));
        let block = self.block(&record, theta_x);
        self.records.push(record);
        Ok(Some(block))
    }

    fn cache_hits(&self) -> u64 {
        self.cache.hits
    }
}

pub fn solve_robust(c: &ColoredMdp, nu: f64, config: &RobustConfig) -> Result<RobustOutcome> {
    let (x_params, _) = kinds(&c.params);
    if x_params.is_empty() {
        return Err(Error::Solver("no controllable parameters to synthesize".into()));
    }
    let problem = SearchProblem {
        params: &c.params,
        search: x_params,
        fixed: PartialAssignment::new(),
        tau: &c.tau,
        seed_nogoods: Vec::new(),
    };
    let mut hook = QuantifierHook {
        colored: c,
        nu,
        config,
        cache: TheoryCache::new(config.use_cache),
        coupled: coupled_x_params(&c.tau, &c.params),
        records: Vec::new(),
        trace: Vec::new(),
        stats: RobustStats::default(),
    };
    let out = solve(&problem, &mut hook, &config.solver_config())?;
    let mut stats = hook.stats;
    stats.absorb(&out.stats);
    stats.cache_hits = hook.cache.hits;
    Ok(RobustOutcome {
        verdict: out.verdict,
        witness_x: out.witness,
        counterexample_trace: hook.trace,
        stats,
    })
}
