//! The bundled grid-search scenario.
//!
//! A robot searches an `n × n` grid (n even) for a person who stays put.
//! `goTo(X,Y,T)` moves the robot to cell `(X,Y)`; the person is *seen* when
//! robot and person share a column and *caught* when they share a cell.
//!
//! The policy: while the person is neither seen nor caught, go to the next
//! patrol waypoint `farthest(X,Y,X1,Y1)`; once seen, go to the person. The
//! waypoint of a cell in the western half is the cell one step east; from
//! the eastern half it is the farthest cell of the row, on the western edge.
//! `farthestDist(X,Y,D)` records the distance to that waypoint.
//!
//! Abstractions: quadrant classes on `coord` with both waypoint relations
//! omitted (coarse), and the refinement that restores them with the
//! distance split at `n` (near / far).

use std::fmt::Write;

use crate::ast::{PredKey, Value};
use crate::error::{Error, Result};
use crate::mapping::{refine_mapping, ClassDef, DomainMapping, Refinement, SortMapping};
use crate::parser::{parse_mapping, parse_program, SourceProgram};
use crate::Program;

pub const POLICY: &str = "\
% patrol until the person is seen, then go to the person
1 { goTo(X1,Y1,T) : farthest(X,Y,X1,Y1) } 1 :- rAt(X,Y,T), not seen(T), not caught(T).
goTo(X,Y,T) :- seen(T), not caught(T), pAt(X,Y,T).
";

fn check(n: i64) -> Result<()> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::Policy(format!("grid size must be even and at least 2, got {n}")));
    }
    Ok(())
}

fn waypoint(n: i64, x: i64, y: i64) -> (i64, i64) {
    if x <= n / 2 {
        (x + 1, y)
    } else {
        (1, y)
    }
}

pub fn domain_text(n: i64) -> Result<String> {
    check(n)?;
    let mut s = String::new();
    writeln!(s, "% {n}x{n} grid search").ok();
    writeln!(s, "sort coord {{1..{n}}}.").ok();
    writeln!(s, "sort dist {{0..{}}}.", 2 * n - 2).ok();
    s.push_str(
        "sort time {0..1}.\n\
         sig rAt(coord,coord,time). sig pAt(coord,coord,time). sig goTo(coord,coord,time).\n\
         sig seen(time). sig caught(time). sig moved(time).\n\
         sig farthest(coord,coord,coord,coord). sig farthestDist(coord,coord,dist).\n\
         fluent rAt/3. fluent pAt/3. fluent seen/1. fluent caught/1.\n\
         action goTo/3.\n\
         % initial states\n\
         1 { rAt(X,Y,0) : dom_coord(X), dom_coord(Y) } 1.\n\
         1 { pAt(X,Y,0) : dom_coord(X), dom_coord(Y) } 1.\n\
         % effects and inertia\n\
         rAt(X,Y,T+1) :- goTo(X,Y,T).\n\
         moved(T) :- goTo(X,Y,T).\n\
         rAt(X,Y,T+1) :- rAt(X,Y,T), not moved(T).\n\
         pAt(X,Y,T+1) :- pAt(X,Y,T).\n\
         % indirect effects\n\
         caught(T) :- rAt(X,Y,T), pAt(X,Y,T).\n\
         seen(T) :- rAt(X,Y,T), pAt(X1,Y1,T), X = X1.\n\
         % patrol waypoints\n",
    );
    for y in 1..=n {
        for x in 1..=n {
            let (x1, y1) = waypoint(n, x, y);
            writeln!(s, "farthest({x},{y},{x1},{y1}). farthestDist({x},{y},{}).", (x - x1).abs() + (y - y1).abs()).ok();
        }
    }
    Ok(s)
}

pub fn coarse_mapping_text(n: i64) -> Result<String> {
    check(n)?;
    let h = n / 2;
    Ok(format!(
        "% quadrants: class 1 = west/north half, class 2 = east/south half\n\
         sort coord;\nclass 1 = {{1..{h}}};\nclass 2 = {{{}..{n}}};\n\
         omit farthest/4, farthestDist/3;\n",
        h + 1
    ))
}

/// Restores the waypoint relations; distances split into near (`0`) and
/// far (`1`).
pub fn refinement(n: i64) -> Result<Refinement> {
    check(n)?;
    let class =
        |name: i64, lo: i64, hi: i64| ClassDef { name: Value::Int(name), members: (lo..=hi).map(Value::Int).collect() };
    Ok(Refinement {
        restore: vec![PredKey::new("farthest", 4), PredKey::new("farthestDist", 3)],
        sorts: vec![SortMapping {
            sort: "dist".into(),
            domain: None,
            classes: vec![class(0, 0, n - 1), class(1, n, 2 * n - 2)],
        }],
    })
}

/// The bundled scenario, parsed.
pub struct Grid {
    pub n: i64,
    pub domain: Program,
    pub policy: Program,
    pub coarse: DomainMapping,
    pub refined: DomainMapping,
}

impl Grid {
    pub fn new(n: i64) -> Result<Self> {
        let domain = parse_program(&SourceProgram::new(domain_text(n)?, format!("grid{n}.lp")))?;
        let policy = crate::parser::parse_program_in(&SourceProgram::new(POLICY, "policy.lp"), &domain)?;
        let coarse = parse_mapping(&coarse_mapping_text(n)?, "coarse.map")?;
        let mut program = domain.clone();
        program.extend(&policy);
        coarse.validate(&program)?;
        let refined = refine_mapping(&coarse, &refinement(n)?, &program)?;
        Ok(Grid { n, domain, policy, coarse, refined })
    }

    /// Domain and policy rules together.
    pub fn program(&self) -> Program {
        let mut p = self.domain.clone();
        p.extend(&self.policy);
        p
    }

    /// Region-level trajectory: the robot stays in the north-west quadrant,
    /// moves east, and moves east again, with the person in the south-east.
    pub fn northwest_east_pattern(&self) -> &'static str {
        "rAt(1,1) & pAt(2,2) ; goTo(1,1) ; rAt(1,1) ; goTo(2,1) ; rAt(2,1) ; goTo(2,1) ; rAt(2,1)"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::print_mapping;
    use crate::policy::*;
    use crate::Limits;

    #[test]
    fn scenario_parses() {
        let g = Grid::new(4).unwrap();
        assert_eq!(g.domain.rules.iter().filter(|r| r.is_fact()).count(), 32);
        assert_eq!(g.policy.rules.len(), 2);
        let text = print_mapping(&g.refined);
        assert!(text.contains("class 0 = {0..3}"), "{text}");
        assert!(g.refined.omitted.is_empty());
    }

    #[test]
    fn odd_sizes_rejected() {
        assert!(Grid::new(3).is_err());
    }

    #[test]
    fn waypoints_leave_the_east() {
        for y in 1..=4 {
            for x in 3..=4 {
                assert!(waypoint(4, x, y).0 <= 2);
            }
        }
        assert_eq!(waypoint(4, 1, 1), (2, 1));
    }

    fn run(g: &Grid, m: &DomainMapping, mode: AbstractionMode, bound: usize) -> super::super::PolicyReport {
        let opts = PolicyCheckOptions {
            bound,
            mode,
            pattern: Some(parse_pattern(g.northwest_east_pattern()).unwrap()),
            domain: Default::default(),
        };
        policy_check(&g.domain, &g.policy, m, &parse_goal("caught").unwrap(), &opts, &Limits::default()).unwrap()
    }

    #[test]
    fn coarse_counterexample_is_spurious_at_step_two() {
        let g = Grid::new(4).unwrap();
        for bound in [3, 5] {
            let r = run(&g, &g.coarse, AbstractionMode::OverApprox, bound);
            let t = r.counterexample.as_ref().expect("abstract counterexample");
            assert!(t.len() >= 3, "{t}");
            match r.verdict.unwrap() {
                Verdict::Spurious { step, kind, .. } => {
                    assert_eq!((step, kind), (2, FailureKind::NoPlan));
                }
                v => panic!("{v}"),
            }
        }
    }

    #[test]
    fn exact_system_is_covered_by_overapprox() {
        let g = Grid::new(4).unwrap();
        let p = g.program();
        let concrete = build_transition_system(&p, &Limits::default()).unwrap();
        let h = StateAbstraction::new(&p, &g.coarse).unwrap();
        let exact = generate_abstract_system(&concrete, &h).unwrap();
        let (over, _) = abstract_program_system(&p, &g.coarse, &Default::default(), &Limits::default()).unwrap();
        let missing: Vec<_> = exact.triples().difference(&over.triples()).cloned().collect();
        assert!(missing.is_empty(), "{missing:?}");
    }

    #[test]
    fn refinement_removes_the_trajectory() {
        let g = Grid::new(4).unwrap();
        let r = run(&g, &g.refined, AbstractionMode::OverApprox, 5);
        assert!(r.counterexample.is_none(), "{r}");
    }
}
