//! Shared helpers for the integration suites: a seeded random instance
//! generator and a brute-force decision-tree enumerator.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mdpsynth::colored::ColoredMdp;
use mdpsynth::model::{Action, Distribution, Mdp};
use mdpsynth::params::{
    enumerate_space, CmpOp, Formula, Param, ParamId, ParamKind, ParamSet, PartialAssignment, Term,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Shape knobs for [`random_colored`].
pub struct GenConfig {
    pub max_states: usize,
    pub max_params: usize,
    pub max_domain: i64,
    pub uncontrollable: usize,
    pub max_clauses: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_states: 15,
            max_params: 4,
            max_domain: 4,
            uncontrollable: 0,
            max_clauses: 3,
        }
    }
}

fn random_dist(rng: &mut ChaCha8Rng, n_states: usize) -> Distribution {
    // Well-conditioned splits only, so value iteration converges fast and
    // exact enumeration stays cheap.
    let kind = rng.gen_range(0..3);
    let a = rng.gen_range(0..n_states);
    let entries = match kind {
        0 => vec![(a, 1.0)],
        _ => {
            let mut b = rng.gen_range(0..n_states);
            if b == a {
                b = (b + 1) % n_states;
            }
            if kind == 1 {
                vec![(a, 0.5), (b, 0.5)]
            } else {
                vec![(a, 0.25), (b, 0.75)]
            }
        }
    };
    Distribution::new(entries).unwrap()
}

fn random_clause(rng: &mut ChaCha8Rng, params: &ParamSet) -> Formula {
    let ids: Vec<ParamId> = params.ids().collect();
    let n_lits = rng.gen_range(1..=2);
    let lits = (0..n_lits)
        .map(|_| {
            let p = ids[rng.gen_range(0..ids.len())];
            let decl = params.get(p);
            let c = rng.gen_range(decl.lo..=decl.hi);
            let op = match rng.gen_range(0..4) {
                0 => CmpOp::Eq,
                1 => CmpOp::Ne,
                2 => CmpOp::Le,
                _ => CmpOp::Ge,
            };
            Formula::Cmp(op, Term::Param(p), Term::Const(c))
        })
        .collect();
    Formula::Or(lits)
}

/// Seeded random colored MDP with a per-state single-parameter guard
/// partition, so exactly one action survives at every total assignment.
/// Returns the model and a threshold drawn near the realizable value range.
pub fn random_colored(rng: &mut ChaCha8Rng, cfg: &GenConfig) -> (ColoredMdp, f64) {
    let n_states = rng.gen_range(3..=cfg.max_states);
    let n_params = rng.gen_range(1..=cfg.max_params);

    let mut params = ParamSet::new();
    let mut ids = Vec::new();
    for i in 0..n_params {
        let kind = if i < n_params.saturating_sub(cfg.uncontrollable) {
            ParamKind::Controllable
        } else {
            ParamKind::Uncontrollable
        };
        let hi = rng.gen_range(1..cfg.max_domain);
        let name = match kind {
            ParamKind::Controllable => format!("x{i}"),
            ParamKind::Uncontrollable => format!("y{i}"),
        };
        ids.push(
            params
                .add(Param { name, lo: 0, hi, kind, features: Some(vec![i as i64]) })
                .unwrap(),
        );
    }

    let mut actions = Vec::with_capacity(n_states);
    let mut guards = Vec::with_capacity(n_states);
    let mut rewards = Vec::with_capacity(n_states);
    for s in 0..n_states {
        // The last state is an absorbing zero-reward sink so most runs can
        // terminate; other states sometimes guard on one parameter.
        if s == n_states - 1 {
            actions.push(vec![Action {
                label: "stay".into(),
                dist: Distribution::new(vec![(s, 1.0)]).unwrap(),
            }]);
            guards.push(vec![PartialAssignment::new()]);
            rewards.push(0.0);
            continue;
        }
        rewards.push(if rng.gen_bool(0.3) { rng.gen_range(1..=2) as f64 } else { 0.0 });
        if rng.gen_bool(0.4) {
            let p = ids[rng.gen_range(0..ids.len())];
            let decl = params.get(p);
            let mut acts = Vec::new();
            let mut gs = Vec::new();
            for v in decl.lo..=decl.hi {
                // Bias toward the sink to keep values finite most of the time.
                let dist = if rng.gen_bool(0.4) {
                    Distribution::new(vec![(n_states - 1, 1.0)]).unwrap()
                } else {
                    random_dist(rng, n_states)
                };
                acts.push(Action { label: format!("a{v}"), dist });
                gs.push(PartialAssignment::from_literals(vec![(p, v)]));
            }
            actions.push(acts);
            guards.push(gs);
        } else {
            let dist = if rng.gen_bool(0.5) {
                Distribution::new(vec![(n_states - 1, 1.0)]).unwrap()
            } else {
                random_dist(rng, n_states)
            };
            actions.push(vec![Action { label: "go".into(), dist }]);
            guards.push(vec![PartialAssignment::new()]);
        }
    }

    let mdp = Mdp::new(0, actions, rewards).unwrap();
    let n_clauses = rng.gen_range(0..=cfg.max_clauses);
    let tau = if n_clauses == 0 {
        Formula::True
    } else {
        Formula::And((0..n_clauses).map(|_| random_clause(rng, &params)).collect())
    };
    let c = ColoredMdp::new(mdp, params, tau, guards).unwrap();
    let nu = rng.gen_range(0.0..2.5);
    (c, nu)
}

/// All controllable assignments expressible by a tree of exactly `n_nodes`
/// over the given observation parameters. Supports sizes 1 and 3, which is
/// all the brute-force acceptance check needs.
pub fn tree_expressible(
    c: &ColoredMdp,
    n_nodes: usize,
) -> BTreeSet<Vec<(ParamId, i64)>> {
    let obs: Vec<ParamId> = c.params.of_kind(ParamKind::Controllable);
    assert!(!obs.is_empty());
    let feat_dim = c.params.get(obs[0]).features.as_ref().unwrap().len();
    let acts: Vec<i64> = {
        let d = c.params.get(obs[0]);
        (d.lo..=d.hi).collect()
    };
    let feats: Vec<&Vec<i64>> =
        obs.iter().map(|&p| c.params.get(p).features.as_ref().unwrap()).collect();

    let assign_for = |f: &dyn Fn(&[i64]) -> i64| -> Vec<(ParamId, i64)> {
        obs.iter().zip(&feats).map(|(&p, fv)| (p, f(fv))).collect()
    };

    let mut out = BTreeSet::new();
    match n_nodes {
        1 => {
            for &a in &acts {
                out.insert(assign_for(&|_: &[i64]| a));
            }
        }
        3 => {
            let mut cuts: BTreeSet<i64> = BTreeSet::new();
            for fv in &feats {
                cuts.extend(fv.iter().copied());
            }
            for dim in 0..feat_dim {
                for &cut in &cuts {
                    for &lo in &acts {
                        for &hi in &acts {
                            out.insert(assign_for(&|fv: &[i64]| {
                                if fv[dim] >= cut {
                                    hi
                                } else {
                                    lo
                                }
                            }));
                        }
                    }
                }
            }
        }
        _ => panic!("unsupported tree size {n_nodes}"),
    }
    out
}

/// Controllable assignments that withstand every compatible completion,
/// computed by plain enumeration.
pub fn robust_viable_set(
    c: &ColoredMdp,
    nu: f64,
    precision: f64,
) -> BTreeSet<Vec<(ParamId, i64)>> {
    let x_params: BTreeSet<ParamId> =
        c.params.of_kind(ParamKind::Controllable).into_iter().collect();
    let mut groups: std::collections::BTreeMap<Vec<(ParamId, i64)>, bool> = Default::default();
    for theta in enumerate_space(&c.params, &c.tau) {
        let k = theta.as_partial();
        let mc = c.induce(&k).unwrap();
        let value = mdpsynth::model::value_mc(&mc, precision).unwrap().at_initial(&mc);
        let ok = value >= nu - precision;
        let key: Vec<_> = k.restrict_to(&x_params).iter().collect();
        groups.entry(key).and_modify(|all| *all &= ok).or_insert(ok);
    }
    groups.into_iter().filter(|(_, ok)| *ok).map(|(k, _)| k).collect()
}
