//! Value-threshold theory checks over induced MDPs.
//!
//! A query asks whether a (partial) parameter assignment can still meet the
//! reward threshold. When the optimistic bound already fails, the assignment
//! is a conflict; the reported nogood is restricted to the parameters the
//! initial fragment actually depends on, which keeps it short and makes the
//! cache key insensitive to irrelevant literals.

use std::collections::HashMap;
use std::time::Instant;

use crate::colored::ColoredMdp;
use crate::model::{value_opt_deadline, Direction};
use crate::params::{ParamId, PartialAssignment};
use crate::solver::{Nogood, Provenance, TheoryHook};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    /// Seeking assignments with value >= threshold; prunes via the max bound.
    Positive,
    /// Seeking assignments with value < threshold; prunes via the min bound.
    Negative,
}

impl Polarity {
    pub fn direction(self) -> Direction {
        match self {
            Polarity::Positive => Direction::Max,
            Polarity::Negative => Direction::Min,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TheoryQuery {
    pub literals: PartialAssignment,
    pub polarity: Polarity,
}

#[derive(Debug, Clone, Copy)]
pub struct TheorySettings {
    pub nu: f64,
    pub precision: f64,
    pub deadline: Option<Instant>,
}

impl TheorySettings {
    pub fn new(nu: f64, precision: f64) -> TheorySettings {
        TheorySettings { nu, precision, deadline: None }
    }
}

/// Memoizes optimal values keyed by the dependent-restricted literal set and
/// optimization direction. Verdicts are recomputed from the value, so one
/// entry serves both partial and total queries.
#[derive(Debug, Default)]
pub struct TheoryCache {
    enabled: bool,
    map: HashMap<(Vec<(ParamId, i64)>, Direction), f64>,
    pub hits: u64,
    pub misses: u64,
}

impl TheoryCache {
    pub fn new(enabled: bool) -> TheoryCache {
        TheoryCache { enabled, ..TheoryCache::default() }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

pub struct CheckOutcome {
    pub conflict: Option<Nogood>,
    /// Query literals restricted to the dependent parameters.
    pub restricted: PartialAssignment,
    pub reachable: Vec<usize>,
    pub value: f64,
}

/// Full check with an optional reachability hint: when the current literals
/// extend `hint`'s literals, exploration is confined to `hint`'s reachable
/// states. Results are identical with or without the hint.
pub fn theory_check_full(
    c: &ColoredMdp,
    settings: &TheorySettings,
    q: &TheoryQuery,
    mut cache: Option<&mut TheoryCache>,
    hint: Option<&(PartialAssignment, Vec<usize>)>,
) -> Result<CheckOutcome> {
    let kept = c.surviving_actions(&q.literals)?;
    let within = hint
        .filter(|(base, _)| base.subset_of(&q.literals))
        .map(|(_, reach)| reach.as_slice());
    let report = c.dependence_over(&kept, c.mdp.initial(), within)?;
    let restricted = q.literals.restrict_to(&report.dependent);
    let direction = q.polarity.direction();

    let key = (restricted.iter().collect::<Vec<_>>(), direction);
    let cached = cache
        .as_deref()
        .filter(|cache| cache.enabled)
        .and_then(|cache| cache.map.get(&key).copied());
    let value = match cached {
        Some(v) => {
            if let Some(cache) = cache.as_deref_mut() {
                cache.hits += 1;
            }
            v
        }
        None => {
            let mdp = c.induce(&q.literals)?;
            let v = value_opt_deadline(&mdp, direction, settings.precision, settings.deadline)?
                .at_initial(&mdp);
            if let Some(cache) = cache.as_deref_mut() {
                if cache.enabled {
                    cache.misses += 1;
                    cache.map.insert(key, v);
                }
            }
            v
        }
    };

    // Value iteration converges from below, so an exact value of nu computes
    // as slightly less. Totals therefore count as meeting the threshold from
    // nu - precision on; partial-assignment pruning takes twice that slack so
    // it stays strictly more conservative. Assignments whose exact value lies
    // within the slack of nu may be decided either way: that is the tolerance
    // contract. A divergent initial value meets any threshold in both
    // directions.
    let total = q.literals.len() == c.params.len();
    let meets_from = if total {
        settings.nu - settings.precision
    } else {
        settings.nu + 2.0 * settings.precision
    };
    let is_conflict = match direction {
        Direction::Max => {
            let cutoff = if total { meets_from } else { settings.nu - 2.0 * settings.precision };
            value < cutoff
        }
        Direction::Min => value >= meets_from,
    };
    let conflict =
        is_conflict.then(|| Nogood::new(restricted.clone(), Provenance::Theory));
    Ok(CheckOutcome { conflict, restricted, reachable: report.reachable, value })
}

pub fn theory_check(
    c: &ColoredMdp,
    nu: f64,
    q: &TheoryQuery,
    precision: f64,
    cache: Option<&mut TheoryCache>,
) -> Result<Option<Nogood>> {
    let settings = TheorySettings::new(nu, precision);
    Ok(theory_check_full(c, &settings, q, cache, None)?.conflict)
}

/// Solver hook wrapping [`theory_check_full`]. Remembers the reachable set of
/// the previous query so that successive supersets (the common case while the
/// solver extends one branch) skip re-exploring pruned regions.
pub struct PmcHook<'a> {
    colored: &'a ColoredMdp,
    settings: TheorySettings,
    polarity: Polarity,
    cache: Option<&'a mut TheoryCache>,
    frontier: Option<(PartialAssignment, Vec<usize>)>,
    /// Every conflict returned to the solver, in order.
    pub emitted: Vec<Nogood>,
}

/// Adapts the theory check to the solver hook interface.
pub fn as_hook<'a>(
    c: &'a ColoredMdp,
    settings: TheorySettings,
    polarity: Polarity,
    cache: Option<&'a mut TheoryCache>,
) -> PmcHook<'a> {
    PmcHook { colored: c, settings, polarity, cache, frontier: None, emitted: Vec::new() }
}

impl PmcHook<'_> {
    fn check(&mut self, k: &PartialAssignment) -> Result<Option<Nogood>> {
        let q = TheoryQuery { literals: k.clone(), polarity: self.polarity };
        let out = theory_check_full(
            self.colored,
            &self.settings,
            &q,
            self.cache.as_deref_mut(),
            self.frontier.as_ref(),
        )?;
        self.frontier = Some((k.clone(), out.reachable));
        if let Some(ng) = &out.conflict {
            self.emitted.push(ng.clone());
        }
        Ok(out.conflict)
    }
}

impl TheoryHook for PmcHook<'_> {
    fn on_partial(&mut self, k: &PartialAssignment) -> Result<Option<Nogood>> {
        self.check(k)
    }

    fn on_full(&mut self, k: &PartialAssignment) -> Result<Option<Nogood>> {
        self.check(k)
    }

    fn cache_hits(&self) -> u64 {
        self.cache.as_ref().map(|c| c.hits).unwrap_or(0)
    }
}
