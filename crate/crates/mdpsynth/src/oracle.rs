//! Brute-force reference semantics: exhaustive enumeration with no pruning,
//! used as ground truth for the search engine at small scale.

use std::collections::BTreeMap;

use crate::colored::ColoredMdp;
use crate::model::value_mc;
use crate::params::{enumerate_space, space_size, ParamKind, PartialAssignment};
use crate::solver::Verdict;
use crate::{Error, Result};

pub const DEFAULT_CAP: u64 = 1_000_000;
/// Upper bound on the number of viable assignments listed in a report.
const LIST_CAP: usize = 4096;

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub verdict: Verdict,
    /// Number of constraint-satisfying total assignments (respectively
    /// candidate assignments over the controllable parameters for the robust
    /// check).
    pub space_count: u64,
    pub viable_count: u64,
    /// Viable assignments in enumeration order, truncated at a cap.
    pub viable: Vec<PartialAssignment>,
}

fn check_cap(c: &ColoredMdp, cap: u64) -> Result<()> {
    let size = space_size(&c.params);
    if size > cap {
        return Err(Error::Solver(format!(
            "assignment space of size {size} exceeds the enumeration cap {cap}"
        )));
    }
    Ok(())
}

/// Accepts an assignment exactly when the engine's total-assignment rule does:
/// computed value at least `nu - precision`.
fn meets(c: &ColoredMdp, k: &PartialAssignment, nu: f64, precision: f64) -> Result<bool> {
    let mc = c.induce(k)?;
    let value = value_mc(&mc, precision)?.at_initial(&mc);
    Ok(value >= nu - precision)
}

/// Does any constraint-satisfying total assignment meet the threshold?
pub fn brute_feasible(c: &ColoredMdp, nu: f64, precision: f64, cap: u64) -> Result<OracleReport> {
    check_cap(c, cap)?;
    let mut report = OracleReport {
        verdict: Verdict::Unsat,
        space_count: 0,
        viable_count: 0,
        viable: Vec::new(),
    };
    for theta in enumerate_space(&c.params, &c.tau) {
        report.space_count += 1;
        let k = theta.as_partial();
        if meets(c, &k, nu, precision)? {
            report.viable_count += 1;
            report.verdict = Verdict::Sat;
            if report.viable.len() < LIST_CAP {
                report.viable.push(k);
            }
        }
    }
    Ok(report)
}

/// Does some controllable assignment meet the threshold under every
/// compatible uncontrollable completion? Controllable assignments with no
/// compatible completion at all do not count.
pub fn brute_robust(c: &ColoredMdp, nu: f64, precision: f64, cap: u64) -> Result<OracleReport> {
    check_cap(c, cap)?;
    let x_params: std::collections::BTreeSet<_> =
        c.params.of_kind(ParamKind::Controllable).into_iter().collect();
    // Group the constraint-satisfying totals by their controllable part.
    let mut groups: BTreeMap<Vec<(crate::params::ParamId, i64)>, bool> = BTreeMap::new();
    for theta in enumerate_space(&c.params, &c.tau) {
        let k = theta.as_partial();
        let x_key: Vec<_> = k.restrict_to(&x_params).iter().collect();
        let ok = meets(c, &k, nu, precision)?;
        groups.entry(x_key).and_modify(|all| *all &= ok).or_insert(ok);
    }
    let mut report = OracleReport {
        verdict: Verdict::Unsat,
        space_count: groups.len() as u64,
        viable_count: 0,
        viable: Vec::new(),
    };
    for (x_key, all_pass) in groups {
        if all_pass {
            report.viable_count += 1;
            report.verdict = Verdict::Sat;
            if report.viable.len() < LIST_CAP {
                report.viable.push(PartialAssignment::from_literals(x_key));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{build_problem, gen_beetle};
    use crate::params::Formula;

    fn beetle(multi: bool) -> (ColoredMdp, f64) {
        build_problem(&gen_beetle(multi)).unwrap()
    }

    fn assign(c: &ColoredMdp, pairs: &[(&str, i64)]) -> PartialAssignment {
        let mut k = PartialAssignment::new();
        for &(name, v) in pairs {
            k.set(c.params.lookup(name).unwrap(), v);
        }
        k
    }

    const FRAGILE: &[(&str, i64)] = &[("d_r", 1), ("d_g", 3), ("d_b", 3), ("d_y", 0)];
    const STURDY: &[(&str, i64)] = &[("d_r", 3), ("d_g", 0), ("d_b", 3), ("d_y", 0)];

    #[test]
    fn beetle_single_is_feasible() {
        let (c, nu) = beetle(false);
        let report = brute_feasible(&c, nu, 1e-4, DEFAULT_CAP).unwrap();
        assert_eq!(report.verdict, Verdict::Sat);
        // 4^4 assignments minus those with equal blue and yellow directions.
        assert_eq!(report.space_count, 192);
        let fragile = assign(&c, FRAGILE);
        assert!(report.viable.iter().any(|k| *k == fragile));
    }

    #[test]
    fn unreachable_threshold_is_infeasible() {
        let (c, _) = beetle(false);
        let report = brute_feasible(&c, 2.0, 1e-4, DEFAULT_CAP).unwrap();
        assert_eq!(report.verdict, Verdict::Unsat);
        assert_eq!(report.viable_count, 0);
    }

    #[test]
    fn empty_space_is_infeasible() {
        let (mut c, nu) = beetle(false);
        c.tau = Formula::And(vec![c.tau.clone(), Formula::False]);
        let report = brute_feasible(&c, nu, 1e-4, DEFAULT_CAP).unwrap();
        assert_eq!(report.verdict, Verdict::Unsat);
        assert_eq!(report.space_count, 0);
    }

    #[test]
    fn beetle_multi_robust_verdicts() {
        let (c, nu) = beetle(true);
        let report = brute_robust(&c, nu, 1e-4, DEFAULT_CAP).unwrap();
        assert_eq!(report.verdict, Verdict::Sat);
        let sturdy = assign(&c, STURDY);
        let fragile = assign(&c, FRAGILE);
        assert!(report.viable.iter().any(|k| *k == sturdy));
        assert!(!report.viable.iter().any(|k| *k == fragile));
    }

    #[test]
    fn forced_west_on_blue_is_not_robust() {
        let (mut c, nu) = beetle(true);
        let d_b = c.params.lookup("d_b").unwrap();
        c.tau = Formula::And(vec![c.tau.clone(), Formula::eq_const(d_b, 1)]);
        let report = brute_robust(&c, nu, 1e-4, DEFAULT_CAP).unwrap();
        assert_eq!(report.verdict, Verdict::Unsat);
    }

    #[test]
    fn no_uncontrollables_matches_feasibility() {
        let (c, nu) = beetle(false);
        let flat = brute_feasible(&c, nu, 1e-4, DEFAULT_CAP).unwrap();
        let robust = brute_robust(&c, nu, 1e-4, DEFAULT_CAP).unwrap();
        assert_eq!(flat.verdict, robust.verdict);
        assert_eq!(flat.viable_count, robust.viable_count);
        assert_eq!(flat.viable, robust.viable);
    }

    #[test]
    fn cap_is_enforced() {
        let (c, nu) = beetle(false);
        assert!(brute_feasible(&c, nu, 1e-4, 10).is_err());
    }
}
