//! Problem file format, constraint s-expression grammar, POMDP-to-colored-MDP
//! conversion with memory unrolling, and built-in example generators.

use serde::{Deserialize, Serialize};

use crate::colored::ColoredMdp;
use crate::model::{Action, Distribution, Mdp};
use crate::params::{CmpOp, Formula, Param, ParamKind, ParamSet, PartialAssignment, Term};
use crate::{Error, Result};

/// A number that may be given as an exact rational string ("3/4"), a decimal
/// string, or a plain JSON number. String forms survive round trips verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NumStr {
    Str(String),
    Num(f64),
}

impl NumStr {
    pub fn to_f64(&self) -> Result<f64> {
        match self {
            NumStr::Num(x) => Ok(*x),
            NumStr::Str(s) => {
                if let Some((num, den)) = self.as_rational() {
                    Ok(num as f64 / den as f64)
                } else {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("invalid number {s:?}")))
                }
            }
        }
    }

    /// Exact `(numerator, denominator)` when the value is "p/q" or an integer
    /// string.
    pub fn as_rational(&self) -> Option<(i128, i128)> {
        let s = match self {
            NumStr::Str(s) => s.trim(),
            NumStr::Num(_) => return None,
        };
        if let Some((p, q)) = s.split_once('/') {
            let num = p.trim().parse::<i128>().ok()?;
            let den = q.trim().parse::<i128>().ok()?;
            if den > 0 {
                return Some((num, den));
            }
            return None;
        }
        s.parse::<i128>().ok().map(|n| (n, 1))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamDecl {
    pub name: String,
    pub lo: i64,
    pub hi: i64,
    pub kind: ParamKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<i64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActionDecl {
    pub label: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub guard: Vec<String>,
    pub transitions: Vec<(String, NumStr)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateDecl {
    pub name: String,
    pub reward: NumStr,
    pub actions: Vec<ActionDecl>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MdpDecl {
    pub initial: String,
    pub states: Vec<StateDecl>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecDecl {
    pub threshold: NumStr,
    pub direction: String,
}

/// On-disk problem description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemFile {
    pub format_version: u32,
    pub parameters: Vec<ParamDecl>,
    pub tau: String,
    pub mdp: MdpDecl,
    pub spec: SpecDecl,
}

pub const FORMAT_VERSION: u32 = 1;
pub const VALIDATE_LIMIT: u64 = 1_000_000;

pub fn parse_problem(text: &str) -> Result<ProblemFile> {
    let file: ProblemFile =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("problem file: {e}")))?;
    if file.format_version != FORMAT_VERSION {
        return Err(Error::Parse(format!(
            "unsupported format_version {}",
            file.format_version
        )));
    }
    Ok(file)
}

/// Canonical textual form: fixed field order, string-preserved rationals,
/// trailing newline. Byte-stable across runs.
pub fn canonical_json(file: &ProblemFile) -> String {
    let mut s = serde_json::to_string_pretty(file).expect("serializable");
    s.push('\n');
    s
}

/// Parses, builds and fully validates a problem: returns the colored MDP and
/// the value threshold.
pub fn load_problem(text: &str) -> Result<(ColoredMdp, f64)> {
    let file = parse_problem(text)?;
    let (colored, nu) = build_problem(&file)?;
    let violations = colored.validate_coloring(VALIDATE_LIMIT);
    if let Some(v) = violations.first() {
        return Err(Error::Coloring(format!("{v}")));
    }
    Ok((colored, nu))
}

/// Builds the in-memory problem without running coloring validation.
pub fn build_problem(file: &ProblemFile) -> Result<(ColoredMdp, f64)> {
    let mut params = ParamSet::new();
    for d in &file.parameters {
        params.add(Param {
            name: d.name.clone(),
            lo: d.lo,
            hi: d.hi,
            kind: d.kind,
            features: d.features.clone(),
        })?;
    }
    let tau = parse_formula(&file.tau, &params)?;

    let mut state_index = std::collections::HashMap::new();
    for (i, s) in file.mdp.states.iter().enumerate() {
        if state_index.insert(s.name.clone(), i).is_some() {
            return Err(Error::Parse(format!("duplicate state name {}", s.name)));
        }
    }
    let initial = *state_index
        .get(&file.mdp.initial)
        .ok_or_else(|| Error::Parse(format!("unknown initial state {}", file.mdp.initial)))?;

    let mut actions = Vec::with_capacity(file.mdp.states.len());
    let mut guards = Vec::with_capacity(file.mdp.states.len());
    let mut rewards = Vec::with_capacity(file.mdp.states.len());
    for st in &file.mdp.states {
        rewards.push(st.reward.to_f64()?);
        let mut state_actions = Vec::new();
        let mut state_guards = Vec::new();
        for act in &st.actions {
            check_exact_probability_sum(st, act)?;
            let mut entries = Vec::new();
            for (target, prob) in &act.transitions {
                let idx = *state_index.get(target).ok_or_else(|| {
                    Error::Parse(format!(
                        "state {} action {}: unknown target {target}",
                        st.name, act.label
                    ))
                })?;
                entries.push((idx, prob.to_f64()?));
            }
            let dist = Distribution::new(entries).map_err(|e| {
                Error::Parse(format!("state {} action {}: {e}", st.name, act.label))
            })?;
            state_actions.push(Action { label: act.label.clone(), dist });
            state_guards.push(parse_guard(&act.guard, &params).map_err(|e| {
                Error::Parse(format!("state {} action {}: {e}", st.name, act.label))
            })?);
        }
        actions.push(state_actions);
        guards.push(state_guards);
    }
    let mdp = Mdp::new(initial, actions, rewards)?;
    let colored = ColoredMdp::new(mdp, params, tau, guards)?;
    if file.spec.direction != ">=" {
        return Err(Error::Parse(format!(
            "unsupported threshold direction {:?}",
            file.spec.direction
        )));
    }
    let nu = file.spec.threshold.to_f64()?;
    Ok((colored, nu))
}

fn check_exact_probability_sum(st: &StateDecl, act: &ActionDecl) -> Result<()> {
    // When all entries are exact rationals the sum must be exactly 1;
    // decimal entries fall back to the 1e-9 check in Distribution.
    let rats: Vec<_> = act
        .transitions
        .iter()
        .map(|(_, p)| p.as_rational())
        .collect();
    if rats.iter().all(|r| r.is_some()) && !rats.is_empty() {
        let mut num: i128 = 0;
        let mut den: i128 = 1;
        for r in rats.into_iter().flatten() {
            num = num * r.1 + r.0 * den;
            den *= r.1;
            let g = gcd(num.abs().max(1), den);
            num /= g;
            den /= g;
        }
        if (num, den) != (1, 1) {
            return Err(Error::Parse(format!(
                "state {} action {}: probabilities sum to {num}/{den}, not 1",
                st.name, act.label
            )));
        }
    }
    Ok(())
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn parse_guard(literals: &[String], params: &ParamSet) -> Result<PartialAssignment> {
    let mut guard = PartialAssignment::new();
    for lit in literals {
        let (name, value) = lit
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("guard literal {lit:?} is not name=value")))?;
        let id = params
            .lookup(name.trim())
            .ok_or_else(|| Error::Parse(format!("guard references undeclared parameter {name}")))?;
        let v: i64 = value
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("guard literal {lit:?}: bad value")))?;
        if guard.get(id).is_some() {
            return Err(Error::Parse(format!("guard assigns {name} twice")));
        }
        guard.set(id, v);
    }
    Ok(guard)
}

// ---------------------------------------------------------------------------
// Constraint s-expressions

#[derive(Debug, Clone, PartialEq)]
enum Sexpr {
    Sym(String),
    Int(i64),
    List(Vec<Sexpr>),
}

fn tokenize(text: &str) -> Result<Vec<String>> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        match ch {
            '(' | ')' => {
                if !cur.is_empty() {
                    tokens.push(std::mem::take(&mut cur));
                }
                tokens.push(ch.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    tokens.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    Ok(tokens)
}

fn parse_sexpr(tokens: &[String], pos: &mut usize) -> Result<Sexpr> {
    let tok = tokens
        .get(*pos)
        .ok_or_else(|| Error::Parse("unexpected end of constraint expression".into()))?;
    *pos += 1;
    match tok.as_str() {
        "(" => {
            let mut items = Vec::new();
            loop {
                match tokens.get(*pos).map(String::as_str) {
                    Some(")") => {
                        *pos += 1;
                        return Ok(Sexpr::List(items));
                    }
                    Some(_) => items.push(parse_sexpr(tokens, pos)?),
                    None => return Err(Error::Parse("unbalanced parentheses".into())),
                }
            }
        }
        ")" => Err(Error::Parse("unexpected ')'".into())),
        t => {
            if let Ok(n) = t.parse::<i64>() {
                Ok(Sexpr::Int(n))
            } else {
                Ok(Sexpr::Sym(t.to_string()))
            }
        }
    }
}

/// Parses the constraint grammar: atoms are identifiers/integers/true/false;
/// heads: and, or, not, =>, =, distinct, <, <=, >, >=, +, -, *.
pub fn parse_formula(text: &str, params: &ParamSet) -> Result<Formula> {
    let tokens = tokenize(text)?;
    if tokens.is_empty() {
        return Ok(Formula::True);
    }
    let mut pos = 0;
    let sexpr = parse_sexpr(&tokens, &mut pos)?;
    if pos != tokens.len() {
        return Err(Error::Parse("trailing tokens after constraint expression".into()));
    }
    sexpr_to_formula(&sexpr, params)
}

fn sexpr_to_formula(e: &Sexpr, params: &ParamSet) -> Result<Formula> {
    match e {
        Sexpr::Sym(s) if s == "true" => Ok(Formula::True),
        Sexpr::Sym(s) if s == "false" => Ok(Formula::False),
        Sexpr::Sym(s) => Err(Error::Parse(format!("expected formula, found symbol {s}"))),
        Sexpr::Int(n) => Err(Error::Parse(format!("expected formula, found integer {n}"))),
        Sexpr::List(items) => {
            let (head, args) = match items.split_first() {
                Some((Sexpr::Sym(h), rest)) => (h.as_str(), rest),
                _ => return Err(Error::Parse("formula list must start with an operator".into())),
            };
            let cmp = |op: CmpOp| -> Result<Formula> {
                if args.len() != 2 {
                    return Err(Error::Parse(format!("{head} expects 2 arguments")));
                }
                Ok(Formula::Cmp(
                    op,
                    sexpr_to_term(&args[0], params)?,
                    sexpr_to_term(&args[1], params)?,
                ))
            };
            match head {
                "and" => Ok(Formula::And(
                    args.iter().map(|a| sexpr_to_formula(a, params)).collect::<Result<_>>()?,
                )),
                "or" => Ok(Formula::Or(
                    args.iter().map(|a| sexpr_to_formula(a, params)).collect::<Result<_>>()?,
                )),
                "not" => {
                    if args.len() != 1 {
                        return Err(Error::Parse("not expects 1 argument".into()));
                    }
                    Ok(Formula::Not(Box::new(sexpr_to_formula(&args[0], params)?)))
                }
                "=>" => {
                    if args.len() != 2 {
                        return Err(Error::Parse("=> expects 2 arguments".into()));
                    }
                    Ok(Formula::Implies(
                        Box::new(sexpr_to_formula(&args[0], params)?),
                        Box::new(sexpr_to_formula(&args[1], params)?),
                    ))
                }
                "=" => cmp(CmpOp::Eq),
                "<" => cmp(CmpOp::Lt),
                "<=" => cmp(CmpOp::Le),
                ">" => cmp(CmpOp::Gt),
                ">=" => cmp(CmpOp::Ge),
                "distinct" => {
                    if args.len() < 2 {
                        return Err(Error::Parse("distinct expects >= 2 arguments".into()));
                    }
                    let terms: Vec<Term> =
                        args.iter().map(|a| sexpr_to_term(a, params)).collect::<Result<_>>()?;
                    let mut pairs = Vec::new();
                    for i in 0..terms.len() {
                        for j in i + 1..terms.len() {
                            pairs.push(Formula::Cmp(
                                CmpOp::Ne,
                                terms[i].clone(),
                                terms[j].clone(),
                            ));
                        }
                    }
                    Ok(Formula::And(pairs))
                }
                other => Err(Error::Parse(format!("unknown operator {other}"))),
            }
        }
    }
}

fn sexpr_to_term(e: &Sexpr, params: &ParamSet) -> Result<Term> {
    match e {
        Sexpr::Int(n) => Ok(Term::Const(*n)),
        Sexpr::Sym(s) => params
            .lookup(s)
            .map(Term::Param)
            .ok_or_else(|| Error::Parse(format!("undeclared parameter {s}"))),
        Sexpr::List(items) => {
            let (head, args) = match items.split_first() {
                Some((Sexpr::Sym(h), rest)) => (h.as_str(), rest),
                _ => return Err(Error::Parse("term list must start with an operator".into())),
            };
            if args.len() < 2 {
                return Err(Error::Parse(format!("{head} expects >= 2 arguments")));
            }
            let mut terms = args.iter().map(|a| sexpr_to_term(a, params));
            let first = terms.next().unwrap()?;
            terms.try_fold(first, |acc, t| {
                let t = t?;
                Ok(match head {
                    "+" => Term::Add(Box::new(acc), Box::new(t)),
                    "-" => Term::Sub(Box::new(acc), Box::new(t)),
                    "*" => Term::Mul(Box::new(acc), Box::new(t)),
                    other => return Err(Error::Parse(format!("unknown term operator {other}"))),
                })
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Beetle example generator

/// Index of beetle grid cell (row, col); row 0 is the south edge.
pub fn beetle_state_index(row: usize, col: usize) -> usize {
    row * 3 + col
}

const BEETLE_SINK: usize = 9;
const BEETLE_START: usize = 10;

/// Tile colors of the 3x3 beetle grid, `None` for fountain/target cells.
fn beetle_color(row: usize, col: usize) -> Option<&'static str> {
    match (row, col) {
        (0, 0) => Some("d_y"),
        (0, 1) => Some("d_r"),
        (0, 2) => Some("d_g"),
        (1, 0) => Some("d_b"),
        (1, 1) => None, // fountain
        (1, 2) => Some("d_y"),
        (2, 0) => Some("d_b"),
        (2, 1) => Some("d_b"),
        (2, 2) => None, // target
        _ => unreachable!(),
    }
}

/// Generates the 3x3 grid-world running example. Actions 0=N, 1=W, 2=S, 3=E;
/// wall moves self-loop; reward 1 is collected once on the target, which then
/// drops to an absorbing zero-reward sink. With `multi_start`, uncontrollable
/// parameters `s_x`, `s_y` select among three initial corners through a fresh
/// pre-initial state.
pub fn gen_beetle(multi_start: bool) -> ProblemFile {
    // Color feature ids: red=0, blue=1, yellow=2, green=3.
    let mut parameters = vec![
        ParamDecl { name: "d_r".into(), lo: 0, hi: 3, kind: ParamKind::Controllable, features: Some(vec![0]) },
        ParamDecl { name: "d_g".into(), lo: 0, hi: 3, kind: ParamKind::Controllable, features: Some(vec![3]) },
        ParamDecl { name: "d_b".into(), lo: 0, hi: 3, kind: ParamKind::Controllable, features: Some(vec![1]) },
        ParamDecl { name: "d_y".into(), lo: 0, hi: 3, kind: ParamKind::Controllable, features: Some(vec![2]) },
    ];
    let tau = if multi_start {
        parameters.push(ParamDecl {
            name: "s_x".into(),
            lo: 0,
            hi: 2,
            kind: ParamKind::Uncontrollable,
            features: None,
        });
        parameters.push(ParamDecl {
            name: "s_y".into(),
            lo: 0,
            hi: 2,
            kind: ParamKind::Uncontrollable,
            features: None,
        });
        "(and (distinct d_b d_y) (or (and (= s_x 0) (= s_y 0)) (and (= s_x 2) (= s_y 0)) (and (= s_x 0) (= s_y 2))))"
    } else {
        "(distinct d_b d_y)"
    }
    .to_string();

    let name = |s: usize| -> String {
        if s == BEETLE_SINK {
            "sink".into()
        } else if s == BEETLE_START {
            "start".into()
        } else {
            format!("s{}{}", s / 3, s % 3)
        }
    };
    // deltas per action 0=N, 1=W, 2=S, 3=E over (row, col)
    let step = |row: usize, col: usize, dir: usize| -> usize {
        let (r, c) = (row as i64, col as i64);
        let (nr, nc) = match dir {
            0 => (r + 1, c),
            1 => (r, c - 1),
            2 => (r - 1, c),
            3 => (r, c + 1),
            _ => unreachable!(),
        };
        if (0..3).contains(&nr) && (0..3).contains(&nc) {
            beetle_state_index(nr as usize, nc as usize)
        } else {
            beetle_state_index(row, col) // wall: stay in place
        }
    };
    let dir_label = ["N", "W", "S", "E"];

    let mut states = Vec::new();
    for row in 0..3 {
        for col in 0..3 {
            let s = beetle_state_index(row, col);
            let mut actions = Vec::new();
            let mut reward = NumStr::Str("0".into());
            if (row, col) == (2, 2) {
                reward = NumStr::Str("1".into());
                actions.push(ActionDecl {
                    label: "collect".into(),
                    guard: vec![],
                    transitions: vec![(name(BEETLE_SINK), NumStr::Str("1".into()))],
                });
            } else if (row, col) == (1, 1) {
                let quarters = [(2usize, 1usize), (1, 0), (0, 1), (1, 2)];
                actions.push(ActionDecl {
                    label: "spray".into(),
                    guard: vec![],
                    transitions: quarters
                        .iter()
                        .map(|&(r, c)| {
                            (name(beetle_state_index(r, c)), NumStr::Str("1/4".into()))
                        })
                        .collect(),
                });
            } else {
                let color = beetle_color(row, col).unwrap();
                for dir in 0..4 {
                    actions.push(ActionDecl {
                        label: dir_label[dir].into(),
                        guard: vec![format!("{color}={dir}")],
                        transitions: vec![(name(step(row, col, dir)), NumStr::Str("1".into()))],
                    });
                }
            }
            states.push(StateDecl { name: name(s), reward, actions });
        }
    }
    states.push(StateDecl {
        name: "sink".into(),
        reward: NumStr::Str("0".into()),
        actions: vec![ActionDecl {
            label: "stay".into(),
            guard: vec![],
            transitions: vec![("sink".into(), NumStr::Str("1".into()))],
        }],
    });
    if multi_start {
        let mut actions = Vec::new();
        for x in 0..3 {
            for y in 0..3 {
                actions.push(ActionDecl {
                    label: format!("go_{x}_{y}"),
                    guard: vec![format!("s_x={x}"), format!("s_y={y}")],
                    transitions: vec![(name(beetle_state_index(y, x)), NumStr::Str("1".into()))],
                });
            }
        }
        states.push(StateDecl { name: "start".into(), reward: NumStr::Str("0".into()), actions });
    }

    ProblemFile {
        format_version: FORMAT_VERSION,
        parameters,
        tau,
        mdp: MdpDecl {
            initial: if multi_start { "start".into() } else { "s00".into() },
            states,
        },
        spec: SpecDecl { threshold: NumStr::Str("1".into()), direction: ">=".into() },
    }
}

// ---------------------------------------------------------------------------
// POMDPs

/// An MDP together with a per-state observation index.
#[derive(Debug, Clone)]
pub struct Pomdp {
    pub mdp: Mdp,
    pub observations: Vec<usize>,
    pub num_observations: usize,
}

impl Pomdp {
    pub fn new(mdp: Mdp, observations: Vec<usize>, num_observations: usize) -> Result<Pomdp> {
        if observations.len() != mdp.num_states() {
            return Err(Error::Model("observation table length differs from state count".into()));
        }
        if observations.iter().any(|&z| z >= num_observations) {
            return Err(Error::Model("observation index out of range".into()));
        }
        Ok(Pomdp { mdp, observations, num_observations })
    }
}

/// Converts a set of POMDPs sharing states, actions and observations into one
/// colored MDP with `memory` FSC memory nodes.
///
/// Controllable parameters: one action choice per (observation, memory node)
/// pair. With several POMDPs, an uncontrollable selector parameter
/// (`env_param`, default "env") chooses the transition function. Memory
/// advances deterministically by one node per step, saturating at the last.
pub fn pomdp_to_colored(
    pomdps: &[Pomdp],
    env_param: Option<&str>,
    memory: usize,
) -> Result<ColoredMdp> {
    if pomdps.is_empty() {
        return Err(Error::Model("need at least one POMDP".into()));
    }
    if memory == 0 {
        return Err(Error::Model("memory must be >= 1".into()));
    }
    let first = &pomdps[0];
    let n = first.mdp.num_states();
    let num_obs = first.num_observations;
    for (d, p) in pomdps.iter().enumerate().skip(1) {
        if p.mdp.num_states() != n
            || p.num_observations != num_obs
            || p.observations != first.observations
        {
            return Err(Error::Model(format!("POMDP {d} differs in states or observations")));
        }
        for s in 0..n {
            let labels: Vec<&str> = p.mdp.actions(s).iter().map(|a| a.label.as_str()).collect();
            let base: Vec<&str> = first.mdp.actions(s).iter().map(|a| a.label.as_str()).collect();
            if labels != base {
                return Err(Error::Model(format!("POMDP {d} differs in actions at state {s}")));
            }
            if (p.mdp.reward(s) - first.mdp.reward(s)).abs() > 1e-12 {
                return Err(Error::Model(format!("POMDP {d} differs in rewards at state {s}")));
            }
        }
    }
    // States sharing an observation must offer the same number of actions so a
    // single parameter per (observation, memory) is meaningful.
    let mut obs_act_count = vec![None; num_obs];
    for s in 0..n {
        let z = first.observations[s];
        let count = first.mdp.actions(s).len();
        match obs_act_count[z] {
            None => obs_act_count[z] = Some(count),
            Some(c) if c == count => {}
            Some(c) => {
                return Err(Error::Model(format!(
                    "observation {z}: action counts {c} and {count} disagree"
                )))
            }
        }
    }

    let mut params = ParamSet::new();
    let mut act_param = vec![vec![None; memory]; num_obs];
    for z in 0..num_obs {
        if let Some(count) = obs_act_count[z] {
            for m in 0..memory {
                let id = params.add(Param {
                    name: format!("act_z{z}_m{m}"),
                    lo: 0,
                    hi: count as i64 - 1,
                    kind: ParamKind::Controllable,
                    features: None,
                })?;
                act_param[z][m] = Some(id);
            }
        }
    }
    let env = if pomdps.len() > 1 {
        Some(params.add(Param {
            name: env_param.unwrap_or("env").to_string(),
            lo: 0,
            hi: pomdps.len() as i64 - 1,
            kind: ParamKind::Uncontrollable,
            features: None,
        })?)
    } else {
        None
    };

    // Unrolled state (s, m) at index m * n + s; memory saturates.
    let unrolled = |s: usize, m: usize| m * n + s;
    let next_mem = |m: usize| (m + 1).min(memory - 1);
    let mut actions = Vec::with_capacity(n * memory);
    let mut guards = Vec::with_capacity(n * memory);
    let mut rewards = Vec::with_capacity(n * memory);
    for m in 0..memory {
        for s in 0..n {
            let z = first.observations[s];
            rewards.push(first.mdp.reward(s));
            let mut sa = Vec::new();
            let mut sg = Vec::new();
            for (d, pomdp) in pomdps.iter().enumerate() {
                for (i, act) in pomdp.mdp.actions(s).iter().enumerate() {
                    let entries = act
                        .dist
                        .entries()
                        .iter()
                        .map(|&(succ, p)| (unrolled(succ, next_mem(m)), p))
                        .collect();
                    let label = if pomdps.len() > 1 {
                        format!("e{d}:{}", act.label)
                    } else {
                        act.label.clone()
                    };
                    sa.push(Action { label, dist: Distribution::new(entries)? });
                    let mut guard = PartialAssignment::new();
                    if let Some(e) = env {
                        guard.set(e, d as i64);
                    }
                    guard.set(act_param[z][m].expect("observation occurs"), i as i64);
                    sg.push(guard);
                }
            }
            actions.push(sa);
            guards.push(sg);
        }
    }
    let mdp = Mdp::new(unrolled(first.mdp.initial(), 0), actions, rewards)?;
    ColoredMdp::new(mdp, params, Formula::True, guards)
}
