//! Decision-tree policy synthesis.
//!
//! The shape and content of an N-node tree over observation features become
//! extra finite-domain parameters: per node a leaf flag, a feature index, a
//! threshold-or-action constant, and two child indices. Auxiliary 0/1 reach
//! parameters per (observation, node) pair tie the tree's evaluation to the
//! observation parameters, with the feature comparison expanded into a finite
//! case-split since thresholds and feature indices are themselves parameters.

use std::collections::{BTreeMap, BTreeSet};

use crate::colored::ColoredMdp;
use crate::params::{
    CmpOp, Formula, Param, ParamId, ParamKind, ParamSet, PartialAssignment, Term,
};
use crate::robust::{solve_robust, RobustConfig, RobustStats};
use crate::solver::{solve, SearchProblem, Verdict};
use crate::theory::{as_hook, Polarity, TheoryCache};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct NodeParams {
    pub is_leaf: ParamId,
    pub prop: ParamId,
    pub konst: ParamId,
    pub left: ParamId,
    pub right: ParamId,
}

#[derive(Debug, Clone)]
pub struct DtEncoding {
    pub n_nodes: usize,
    pub feature_dim: usize,
    pub action_lo: i64,
    pub action_hi: i64,
    pub nodes: Vec<NodeParams>,
    /// Reach indicator per (observation parameter, node index).
    pub reach: BTreeMap<(ParamId, usize), ParamId>,
    pub structural: Formula,
    pub semantic: Formula,
}

impl DtEncoding {
    /// Every parameter introduced by the encoding.
    pub fn params(&self) -> Vec<ParamId> {
        let mut out = Vec::new();
        for n in &self.nodes {
            out.extend([n.is_leaf, n.prop, n.konst, n.left, n.right]);
        }
        out.extend(self.reach.values().copied());
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DtNode {
    Decision { feature: usize, threshold: i64, no: usize, yes: usize },
    Leaf { action: i64 },
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct DecisionTree {
    pub nodes: Vec<DtNode>,
}

impl DecisionTree {
    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, DtNode::Leaf { .. })).count()
    }

    /// Action selected for a feature vector, following the `yes` child when
    /// the compared feature reaches the threshold.
    pub fn eval(&self, features: &[i64]) -> Result<i64> {
        let mut at = 0usize;
        for _ in 0..=self.nodes.len() {
            match &self.nodes[at] {
                DtNode::Leaf { action } => return Ok(*action),
                DtNode::Decision { feature, threshold, no, yes } => {
                    let f = *features.get(*feature).ok_or_else(|| {
                        Error::Solver(format!("feature index {feature} out of range"))
                    })?;
                    at = if f >= *threshold { *yes } else { *no };
                    if at >= self.nodes.len() {
                        return Err(Error::Solver(format!("child index {at} out of range")));
                    }
                }
            }
        }
        Err(Error::Solver("cyclic decision tree".into()))
    }
}

fn imp(a: Formula, b: Formula) -> Formula {
    Formula::Implies(Box::new(a), Box::new(b))
}

fn cmp_const(op: CmpOp, id: ParamId, v: i64) -> Formula {
    Formula::Cmp(op, Term::Param(id), Term::Const(v))
}

/// Observation parameters with their feature vectors, shared action domain,
/// and feature value span.
struct ObsInfo {
    obs: Vec<(ParamId, Vec<i64>)>,
    feature_dim: usize,
    action_lo: i64,
    action_hi: i64,
    f_min: i64,
    f_max: i64,
}

fn observation_info(params: &ParamSet, obs: &[ParamId]) -> Result<ObsInfo> {
    if obs.is_empty() {
        return Err(Error::Param("no observation parameters".into()));
    }
    let mut rows = Vec::new();
    let mut dims = BTreeSet::new();
    let mut domains = BTreeSet::new();
    for &p in obs {
        let decl = params.get(p);
        let features = decl.features.clone().ok_or_else(|| {
            Error::Param(format!("observation parameter {} has no features", decl.name))
        })?;
        dims.insert(features.len());
        domains.insert((decl.lo, decl.hi));
        rows.push((p, features));
    }
    if dims.len() != 1 {
        return Err(Error::Param("observation feature vectors differ in length".into()));
    }
    if domains.len() != 1 {
        return Err(Error::Param("observation parameters differ in action domain".into()));
    }
    let feature_dim = dims.into_iter().next().unwrap();
    if feature_dim == 0 {
        return Err(Error::Param("observation feature vectors are empty".into()));
    }
    let (action_lo, action_hi) = domains.into_iter().next().unwrap();
    let all: Vec<i64> = rows.iter().flat_map(|(_, f)| f.iter().copied()).collect();
    Ok(ObsInfo {
        obs: rows,
        feature_dim,
        action_lo,
        action_hi,
        f_min: *all.iter().min().unwrap(),
        f_max: *all.iter().max().unwrap(),
    })
}

/// Declares the tree parameters in `params` and builds the structural and
/// semantic constraints for an `n_nodes`-node tree over the given observation
/// parameters.
pub fn encode_dt(params: &mut ParamSet, n_nodes: usize, obs: &[ParamId]) -> Result<DtEncoding> {
    if n_nodes == 0 || n_nodes % 2 == 0 {
        return Err(Error::Param(format!("node count {n_nodes} must be odd and positive")));
    }
    let info = observation_info(params, obs)?;
    let n = n_nodes;
    let konst_lo = info.action_lo.min(info.f_min);
    let konst_hi = info.action_hi.max(info.f_max);
    let child_hi = (n as i64 - 1).max(0);

    let mut nodes = Vec::with_capacity(n);
    for i in 0..n {
        let mut add = |tag: &str, lo: i64, hi: i64| {
            params.add(Param {
                name: format!("dt_{tag}_{i}"),
                lo,
                hi,
                kind: ParamKind::Controllable,
                features: None,
            })
        };
        nodes.push(NodeParams {
            is_leaf: add("leaf", 0, 1)?,
            prop: add("prop", 0, info.feature_dim as i64 - 1)?,
            konst: add("const", konst_lo, konst_hi)?,
            left: add("left", 0, child_hi)?,
            right: add("right", 0, child_hi)?,
        });
    }
    let mut reach = BTreeMap::new();
    for &(o, _) in &info.obs {
        for i in 0..n {
            let id = params.add(Param {
                name: format!("dt_reach_{}_{i}", params.get(o).name),
                lo: 0,
                hi: 1,
                kind: ParamKind::Controllable,
                features: None,
            })?;
            reach.insert((o, i), id);
        }
    }

    let leaf = |i: usize| Formula::eq_const(nodes[i].is_leaf, 1);
    let decision = |i: usize| Formula::eq_const(nodes[i].is_leaf, 0);

    let mut structural = Vec::new();
    // Exactly (N + 1) / 2 leaves.
    let count = nodes
        .iter()
        .map(|np| Term::Param(np.is_leaf))
        .reduce(|a, b| Term::Add(Box::new(a), Box::new(b)))
        .unwrap();
    structural.push(Formula::Cmp(CmpOp::Eq, count, Term::Const((n as i64 + 1) / 2)));
    for i in 0..n {
        // Decision children lie strictly below their parent and differ;
        // thresholds stay within the feature span.
        structural.push(imp(decision(i), cmp_const(CmpOp::Gt, nodes[i].left, i as i64)));
        structural.push(imp(decision(i), cmp_const(CmpOp::Gt, nodes[i].right, i as i64)));
        structural.push(imp(
            decision(i),
            Formula::Cmp(CmpOp::Ne, Term::Param(nodes[i].left), Term::Param(nodes[i].right)),
        ));
        structural.push(imp(decision(i), cmp_const(CmpOp::Ge, nodes[i].konst, info.f_min)));
        structural.push(imp(decision(i), cmp_const(CmpOp::Le, nodes[i].konst, info.f_max)));
        // Leaves take canonical shape values and an action constant.
        structural.push(imp(leaf(i), Formula::eq_const(nodes[i].prop, 0)));
        structural.push(imp(leaf(i), Formula::eq_const(nodes[i].left, 0)));
        structural.push(imp(leaf(i), Formula::eq_const(nodes[i].right, 0)));
        structural.push(imp(leaf(i), cmp_const(CmpOp::Ge, nodes[i].konst, info.action_lo)));
        structural.push(imp(leaf(i), cmp_const(CmpOp::Le, nodes[i].konst, info.action_hi)));
    }
    // Every non-root node has exactly one parent slot pointing at it.
    let slot = |i: usize, right: bool, j: usize| {
        let child = if right { nodes[i].right } else { nodes[i].left };
        Formula::And(vec![decision(i), Formula::eq_const(child, j as i64)])
    };
    for j in 1..n {
        let mut any = Vec::new();
        let mut slots = Vec::new();
        for i in 0..j {
            for right in [false, true] {
                any.push(slot(i, right, j));
                slots.push((i, right));
            }
        }
        structural.push(Formula::Or(any));
        for a in 0..slots.len() {
            for b in a + 1..slots.len() {
                let (i1, r1) = slots[a];
                let (i2, r2) = slots[b];
                structural.push(Formula::Not(Box::new(Formula::And(vec![
                    slot(i1, r1, j),
                    slot(i2, r2, j),
                ]))));
            }
        }
    }

    let mut semantic = Vec::new();
    for &(o, ref features) in &info.obs {
        // The root is always reached.
        semantic.push(Formula::eq_const(reach[&(o, 0)], 1));
        for i in 0..n {
            let reached = Formula::eq_const(reach[&(o, i)], 1);
            // Leaf output.
            semantic.push(imp(
                Formula::And(vec![reached.clone(), leaf(i)]),
                Formula::Cmp(CmpOp::Eq, Term::Param(o), Term::Param(nodes[i].konst)),
            ));
            // Routing: case-split on the compared feature and the child
            // index, since both are parameters.
            for (p, &fv) in features.iter().enumerate() {
                for j in i + 1..n {
                    let base = |to: ParamId| {
                        Formula::And(vec![
                            reached.clone(),
                            decision(i),
                            Formula::eq_const(nodes[i].prop, p as i64),
                            Formula::eq_const(to, j as i64),
                        ])
                    };
                    semantic.push(imp(
                        Formula::And(vec![
                            base(nodes[i].right),
                            cmp_const(CmpOp::Le, nodes[i].konst, fv),
                        ]),
                        Formula::eq_const(reach[&(o, j)], 1),
                    ));
                    semantic.push(imp(
                        Formula::And(vec![
                            base(nodes[i].left),
                            cmp_const(CmpOp::Gt, nodes[i].konst, fv),
                        ]),
                        Formula::eq_const(reach[&(o, j)], 1),
                    ));
                }
            }
        }
    }

    Ok(DtEncoding {
        n_nodes: n,
        feature_dim: info.feature_dim,
        action_lo: info.action_lo,
        action_hi: info.action_hi,
        nodes,
        reach,
        structural: Formula::And(structural),
        semantic: Formula::And(semantic),
    })
}

/// Reads a tree out of an assignment over the encoding parameters, rejecting
/// structurally invalid shapes.
pub fn decode_dt(enc: &DtEncoding, theta: &PartialAssignment) -> Result<DecisionTree> {
    let get = |id: ParamId| {
        theta
            .get(id)
            .ok_or_else(|| Error::Solver("assignment misses a tree parameter".into()))
    };
    let n = enc.n_nodes;
    let mut nodes = Vec::with_capacity(n);
    let mut parents = vec![0usize; n];
    for (i, np) in enc.nodes.iter().enumerate() {
        if get(np.is_leaf)? == 1 {
            let action = get(np.konst)?;
            if action < enc.action_lo || action > enc.action_hi {
                return Err(Error::Solver(format!("leaf {i} action {action} out of range")));
            }
            nodes.push(DtNode::Leaf { action });
        } else {
            let (no, yes) = (get(np.left)? as usize, get(np.right)? as usize);
            if no <= i || yes <= i || no >= n || yes >= n || no == yes {
                return Err(Error::Solver(format!("decision {i} has invalid children")));
            }
            parents[no] += 1;
            parents[yes] += 1;
            nodes.push(DtNode::Decision {
                feature: get(np.prop)? as usize,
                threshold: get(np.konst)?,
                no,
                yes,
            });
        }
    }
    let tree = DecisionTree { nodes };
    if tree.leaf_count() != (n + 1) / 2 {
        return Err(Error::Solver(format!(
            "tree has {} leaves, expected {}",
            tree.leaf_count(),
            (n + 1) / 2
        )));
    }
    if parents.iter().skip(1).any(|&c| c != 1) || parents[0] != 0 {
        return Err(Error::Solver("tree nodes are not linked into a single tree".into()));
    }
    Ok(tree)
}

/// Grows a tree by two nodes without changing its behavior: the first leaf
/// becomes a trivial decision whose branches are two copies of it.
pub fn pad_tree(t: &DecisionTree) -> DecisionTree {
    let mut nodes = t.nodes.clone();
    let leaf_at = nodes
        .iter()
        .position(|n| matches!(n, DtNode::Leaf { .. }))
        .expect("a tree has at least one leaf");
    let DtNode::Leaf { action } = nodes[leaf_at] else { unreachable!() };
    let no = nodes.len();
    let yes = nodes.len() + 1;
    nodes[leaf_at] = DtNode::Decision { feature: 0, threshold: 0, no, yes };
    nodes.push(DtNode::Leaf { action });
    nodes.push(DtNode::Leaf { action });
    DecisionTree { nodes }
}

/// Deterministic indented rendering; `name` maps leaf actions to labels.
pub fn render_dt_named(t: &DecisionTree, name: &dyn Fn(i64) -> String) -> String {
    fn walk(
        t: &DecisionTree,
        at: usize,
        indent: usize,
        name: &dyn Fn(i64) -> String,
        out: &mut String,
    ) {
        match &t.nodes[at] {
            DtNode::Leaf { action } => {
                out.push_str(&name(*action));
                out.push('\n');
            }
            DtNode::Decision { feature, threshold, no, yes } => {
                out.push_str(&format!("f[{feature}] >= {threshold}\n"));
                let pad = "  ".repeat(indent + 1);
                out.push_str(&format!("{pad}else: "));
                walk(t, *no, indent + 1, name, out);
                out.push_str(&format!("{pad}then: "));
                walk(t, *yes, indent + 1, name, out);
            }
        }
    }
    let mut out = String::new();
    walk(t, 0, 0, name, &mut out);
    out
}

pub fn render_dt(t: &DecisionTree) -> String {
    render_dt_named(t, &|a| format!("action {a}"))
}

#[derive(Debug, Clone)]
pub struct DtSynthOutcome {
    pub verdict: Verdict,
    /// Observation-parameter assignment realized by the tree (when sat).
    pub policy: Option<PartialAssignment>,
    pub tree: Option<DecisionTree>,
    pub stats: RobustStats,
}

/// Extends the problem with tree parameters and constraints. The observation
/// parameters are the controllable ones.
pub fn extend_with_dt(c: &ColoredMdp, n_nodes: usize) -> Result<(ColoredMdp, DtEncoding)> {
    let obs = c.params.of_kind(ParamKind::Controllable);
    let mut params = c.params.clone();
    let enc = encode_dt(&mut params, n_nodes, &obs)?;
    let tau = Formula::And(vec![c.tau.clone(), enc.structural.clone(), enc.semantic.clone()]);
    let extended = ColoredMdp::new(c.mdp.clone(), params, tau, c.guards.clone())?;
    Ok((extended, enc))
}

/// Is the threshold achievable by a policy representable as an
/// `n_nodes`-node tree? With `robust`, the tree must work for every
/// compatible uncontrollable assignment.
pub fn synth_dt(
    c: &ColoredMdp,
    nu: f64,
    n_nodes: usize,
    robust: bool,
    config: &RobustConfig,
) -> Result<DtSynthOutcome> {
    let (extended, enc) = extend_with_dt(c, n_nodes)?;
    let obs_set: BTreeSet<ParamId> =
        c.params.of_kind(ParamKind::Controllable).into_iter().collect();
    let (verdict, witness, stats) = if robust {
        let out = solve_robust(&extended, nu, config)?;
        (out.verdict, out.witness_x, out.stats)
    } else {
        let problem = SearchProblem::over_all(&extended.params, &extended.tau);
        let mut cache = TheoryCache::new(config.use_cache);
        let mut hook = as_hook(
            &extended,
            crate::theory::TheorySettings {
                nu,
                precision: config.precision,
                deadline: config.deadline,
            },
            Polarity::Positive,
            Some(&mut cache),
        );
        let solver_config = crate::solver::SolverConfig {
            lazy_start: config.lazy_start,
            max_decisions: config.max_decisions,
            deadline: config.deadline,
        };
        let out = solve(&problem, &mut hook, &solver_config)?;
        let mut stats = RobustStats::default();
        stats.decisions = out.stats.decisions;
        stats.conflicts = out.stats.conflicts;
        stats.theory_calls = out.stats.theory_calls;
        stats.cache_hits = out.stats.cache_hits;
        (out.verdict, out.witness, stats)
    };
    match (verdict, witness) {
        (Verdict::Sat, Some(w)) => {
            let tree = decode_dt(&enc, &w)?;
            Ok(DtSynthOutcome {
                verdict: Verdict::Sat,
                policy: Some(w.restrict_to(&obs_set)),
                tree: Some(tree),
                stats,
            })
        }
        _ => Ok(DtSynthOutcome { verdict: Verdict::Unsat, policy: None, tree: None, stats }),
    }
}

#[derive(Debug, Clone)]
pub struct DtSweepOutcome {
    pub per_size: Vec<(usize, Verdict)>,
    /// Smallest feasible size with its synthesis result.
    pub best: Option<(usize, DtSynthOutcome)>,
}

/// Runs [`synth_dt`] for each listed size in ascending order.
pub fn min_dt_sweep(
    c: &ColoredMdp,
    nu: f64,
    sizes: &[usize],
    robust: bool,
    config: &RobustConfig,
) -> Result<DtSweepOutcome> {
    if sizes.windows(2).any(|w| w[0] >= w[1]) || sizes.iter().any(|&s| s % 2 == 0) {
        return Err(Error::Param("sizes must be odd and strictly ascending".into()));
    }
    let mut per_size = Vec::new();
    let mut best = None;
    for &n in sizes {
        let out = synth_dt(c, nu, n, robust, config)?;
        per_size.push((n, out.verdict));
        if out.verdict == Verdict::Sat && best.is_none() {
            best = Some((n, out));
        }
    }
    Ok(DtSweepOutcome { per_size, best })
}
