//! Bounded-integer parameter declarations, total/partial assignments, and the
//! constraint formula language over them.

use std::collections::BTreeMap;
use std::fmt;

use crate::{Error, Result};

/// Whether a parameter encodes a policy choice or an environment choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Controllable,
    Uncontrollable,
}

/// Index of a parameter within its [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub usize);

/// A bounded-integer parameter with an inclusive domain `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub lo: i64,
    pub hi: i64,
    pub kind: ParamKind,
    /// Feature vector for decision-tree synthesis over observation-like parameters.
    pub features: Option<Vec<i64>>,
}

impl Param {
    pub fn domain_size(&self) -> u64 {
        (self.hi - self.lo + 1) as u64
    }

    pub fn contains(&self, v: i64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// An ordered collection of parameters with unique names.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    params: Vec<Param>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet { params: Vec::new() }
    }

    pub fn add(&mut self, param: Param) -> Result<ParamId> {
        if param.lo > param.hi {
            return Err(Error::Param(format!(
                "parameter {} has empty domain [{}, {}]",
                param.name, param.lo, param.hi
            )));
        }
        if self.lookup(&param.name).is_some() {
            return Err(Error::Param(format!("duplicate parameter name {}", param.name)));
        }
        self.params.push(param);
        Ok(ParamId(self.params.len() - 1))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn lookup(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn of_kind(&self, kind: ParamKind) -> Vec<ParamId> {
        self.iter().filter(|(_, p)| p.kind == kind).map(|(i, _)| i).collect()
    }
}

/// A partial map from parameters to values, at most one value per parameter.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartialAssignment {
    literals: BTreeMap<ParamId, i64>,
}

impl PartialAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_literals(lits: impl IntoIterator<Item = (ParamId, i64)>) -> Self {
        PartialAssignment { literals: lits.into_iter().collect() }
    }

    pub fn set(&mut self, id: ParamId, value: i64) {
        self.literals.insert(id, value);
    }

    pub fn get(&self, id: ParamId) -> Option<i64> {
        self.literals.get(&id).copied()
    }

    pub fn remove(&mut self, id: ParamId) {
        self.literals.remove(&id);
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, i64)> + '_ {
        self.literals.iter().map(|(&k, &v)| (k, v))
    }

    pub fn params(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.literals.keys().copied()
    }

    /// True if no parameter is assigned differently by `self` and `other`.
    pub fn consistent_with(&self, other: &PartialAssignment) -> bool {
        self.literals
            .iter()
            .all(|(id, v)| other.get(*id).map_or(true, |w| w == *v))
    }

    /// True if every literal of `self` is present in `other`.
    pub fn subset_of(&self, other: &PartialAssignment) -> bool {
        self.literals
            .iter()
            .all(|(id, v)| other.get(*id) == Some(*v))
    }

    /// Union of two consistent partial assignments.
    pub fn union(&self, other: &PartialAssignment) -> PartialAssignment {
        let mut out = self.clone();
        for (id, v) in other.iter() {
            out.set(id, v);
        }
        out
    }

    /// Restriction to the given parameters.
    pub fn restrict_to(&self, keep: &std::collections::BTreeSet<ParamId>) -> PartialAssignment {
        PartialAssignment {
            literals: self
                .literals
                .iter()
                .filter(|(id, _)| keep.contains(id))
                .map(|(&k, &v)| (k, v))
                .collect(),
        }
    }

    pub fn display<'a>(&'a self, params: &'a ParamSet) -> DisplayAssignment<'a> {
        DisplayAssignment { assignment: self, params }
    }
}

pub struct DisplayAssignment<'a> {
    assignment: &'a PartialAssignment,
    params: &'a ParamSet,
}

impl fmt::Display for DisplayAssignment<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (id, v) in self.assignment.iter() {
            if !first {
                write!(f, ", ")?;
            }
            write!(f, "{}={}", self.params.get(id).name, v)?;
            first = false;
        }
        Ok(())
    }
}

/// A total map from every parameter of a [`ParamSet`] to a value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment {
    values: Vec<i64>,
}

impl Assignment {
    pub fn new(values: Vec<i64>) -> Self {
        Assignment { values }
    }

    /// Builds a total assignment from a partial one covering every parameter.
    pub fn from_partial(params: &ParamSet, k: &PartialAssignment) -> Result<Assignment> {
        let mut values = Vec::with_capacity(params.len());
        for id in params.ids() {
            match k.get(id) {
                Some(v) => values.push(v),
                None => {
                    return Err(Error::Param(format!(
                        "assignment missing parameter {}",
                        params.get(id).name
                    )))
                }
            }
        }
        Ok(Assignment { values })
    }

    pub fn get(&self, id: ParamId) -> i64 {
        self.values[id.0]
    }

    pub fn as_partial(&self) -> PartialAssignment {
        PartialAssignment::from_literals(
            self.values.iter().enumerate().map(|(i, &v)| (ParamId(i), v)),
        )
    }

    /// Restriction of the assignment to parameters of the given kind.
    pub fn project(&self, params: &ParamSet, kind: ParamKind) -> PartialAssignment {
        PartialAssignment::from_literals(
            params
                .iter()
                .filter(|(_, p)| p.kind == kind)
                .map(|(id, _)| (id, self.values[id.0])),
        )
    }
}

/// Arithmetic term over parameters and integer constants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Const(i64),
    Param(ParamId),
    Add(Box<Term>, Box<Term>),
    Sub(Box<Term>, Box<Term>),
    Mul(Box<Term>, Box<Term>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    fn apply(self, a: i128, b: i128) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }
}

/// Boolean constraint formula over parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Formula {
    True,
    False,
    Cmp(CmpOp, Term, Term),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
}

/// Three-valued truth value of a formula under a partial assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kleene {
    True,
    False,
    Unknown,
}

impl Kleene {
    fn not(self) -> Kleene {
        match self {
            Kleene::True => Kleene::False,
            Kleene::False => Kleene::True,
            Kleene::Unknown => Kleene::Unknown,
        }
    }
}

impl Term {
    fn eval(&self, params: &ParamSet, k: &PartialAssignment) -> Result<Option<i128>> {
        Ok(match self {
            Term::Const(c) => Some(*c as i128),
            Term::Param(id) => {
                if id.0 >= params.len() {
                    return Err(Error::Param(format!("undeclared parameter id {}", id.0)));
                }
                k.get(*id).map(|v| v as i128)
            }
            Term::Add(a, b) => binop(a.eval(params, k)?, b.eval(params, k)?, |x, y| x + y),
            Term::Sub(a, b) => binop(a.eval(params, k)?, b.eval(params, k)?, |x, y| x - y),
            Term::Mul(a, b) => binop(a.eval(params, k)?, b.eval(params, k)?, |x, y| x * y),
        })
    }

    pub fn collect_params(&self, out: &mut std::collections::BTreeSet<ParamId>) {
        match self {
            Term::Const(_) => {}
            Term::Param(id) => {
                out.insert(*id);
            }
            Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) => {
                a.collect_params(out);
                b.collect_params(out);
            }
        }
    }
}

fn binop(a: Option<i128>, b: Option<i128>, f: impl Fn(i128, i128) -> i128) -> Option<i128> {
    match (a, b) {
        (Some(x), Some(y)) => Some(f(x, y)),
        _ => None,
    }
}

impl Formula {
    pub fn and(fs: impl IntoIterator<Item = Formula>) -> Formula {
        Formula::And(fs.into_iter().collect())
    }

    pub fn or(fs: impl IntoIterator<Item = Formula>) -> Formula {
        Formula::Or(fs.into_iter().collect())
    }

    pub fn eq_const(id: ParamId, v: i64) -> Formula {
        Formula::Cmp(CmpOp::Eq, Term::Param(id), Term::Const(v))
    }

    pub fn collect_params(&self, out: &mut std::collections::BTreeSet<ParamId>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Cmp(_, a, b) => {
                a.collect_params(out);
                b.collect_params(out);
            }
            Formula::Not(f) => f.collect_params(out),
            Formula::And(fs) | Formula::Or(fs) => {
                for f in fs {
                    f.collect_params(out);
                }
            }
            Formula::Implies(a, b) => {
                a.collect_params(out);
                b.collect_params(out);
            }
        }
    }

    pub fn params(&self) -> std::collections::BTreeSet<ParamId> {
        let mut out = std::collections::BTreeSet::new();
        self.collect_params(&mut out);
        out
    }

    /// Top-level conjuncts after flattening nested conjunctions.
    pub fn conjuncts(&self) -> Vec<&Formula> {
        let mut out = Vec::new();
        fn go<'a>(f: &'a Formula, out: &mut Vec<&'a Formula>) {
            match f {
                Formula::And(fs) => {
                    for g in fs {
                        go(g, out);
                    }
                }
                other => out.push(other),
            }
        }
        go(self, &mut out);
        out
    }
}

/// Kleene-style three-valued evaluation. Sound, not complete: a `True`/`False`
/// result is definite under every total extension of `k`; `Unknown` carries no
/// claim. On a total assignment the result is never `Unknown`.
pub fn eval_formula(f: &Formula, params: &ParamSet, k: &PartialAssignment) -> Result<Kleene> {
    Ok(match f {
        Formula::True => Kleene::True,
        Formula::False => Kleene::False,
        Formula::Cmp(op, a, b) => match (a.eval(params, k)?, b.eval(params, k)?) {
            (Some(x), Some(y)) => {
                if op.apply(x, y) {
                    Kleene::True
                } else {
                    Kleene::False
                }
            }
            _ => Kleene::Unknown,
        },
        Formula::Not(g) => eval_formula(g, params, k)?.not(),
        Formula::And(fs) => {
            let mut acc = Kleene::True;
            for g in fs {
                match eval_formula(g, params, k)? {
                    Kleene::False => return Ok(Kleene::False),
                    Kleene::Unknown => acc = Kleene::Unknown,
                    Kleene::True => {}
                }
            }
            acc
        }
        Formula::Or(fs) => {
            let mut acc = Kleene::False;
            for g in fs {
                match eval_formula(g, params, k)? {
                    Kleene::True => return Ok(Kleene::True),
                    Kleene::Unknown => acc = Kleene::Unknown,
                    Kleene::False => {}
                }
            }
            acc
        }
        Formula::Implies(a, b) => {
            match (eval_formula(a, params, k)?, eval_formula(b, params, k)?) {
                (Kleene::False, _) | (_, Kleene::True) => Kleene::True,
                (Kleene::True, Kleene::False) => Kleene::False,
                _ => Kleene::Unknown,
            }
        }
    })
}

/// Enumerates exactly the total assignments satisfying `f`, in lexicographic
/// order: declaration order of parameters, ascending values.
pub fn enumerate_space<'a>(
    params: &'a ParamSet,
    f: &'a Formula,
) -> impl Iterator<Item = Assignment> + 'a {
    SpaceIter {
        params,
        formula: f,
        current: params.iter().map(|(_, p)| p.lo).collect(),
        done: params.is_empty() && false,
        started: false,
    }
}

struct SpaceIter<'a> {
    params: &'a ParamSet,
    formula: &'a Formula,
    current: Vec<i64>,
    done: bool,
    started: bool,
}

impl SpaceIter<'_> {
    fn advance(&mut self) -> bool {
        // Odometer over declaration order; last parameter varies fastest.
        for i in (0..self.current.len()).rev() {
            let p = self.params.get(ParamId(i));
            if self.current[i] < p.hi {
                self.current[i] += 1;
                for j in i + 1..self.current.len() {
                    self.current[j] = self.params.get(ParamId(j)).lo;
                }
                return true;
            }
        }
        false
    }
}

impl Iterator for SpaceIter<'_> {
    type Item = Assignment;

    fn next(&mut self) -> Option<Assignment> {
        if self.done {
            return None;
        }
        loop {
            if self.started {
                if !self.advance() {
                    self.done = true;
                    return None;
                }
            } else {
                self.started = true;
                if self.current.is_empty() {
                    // Zero parameters: the single empty assignment.
                    self.done = true;
                    let a = Assignment::new(Vec::new());
                    let k = a.as_partial();
                    match eval_formula(self.formula, self.params, &k) {
                        Ok(Kleene::True) => return Some(a),
                        _ => return None,
                    }
                }
            }
            let a = Assignment::new(self.current.clone());
            let k = a.as_partial();
            if matches!(eval_formula(self.formula, self.params, &k), Ok(Kleene::True)) {
                return Some(a);
            }
        }
    }
}

/// Total number of unconstrained assignments, saturating at `u64::MAX`.
pub fn space_size(params: &ParamSet) -> u64 {
    params
        .iter()
        .map(|(_, p)| p.domain_size())
        .try_fold(1u64, |acc, d| acc.checked_mul(d))
        .unwrap_or(u64::MAX)
}
