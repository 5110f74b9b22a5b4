//! One line per acceptance criterion; exits non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use aspax_core::check::{check_coverage, CheckOptions};
use aspax_core::domain::{abstract_program, DomainOptions};
use aspax_core::gen::{random_ground_program, random_interval_mapping, random_omission, random_program, rng};
use aspax_core::ground::ground;
use aspax_core::omit::{omit_literals, omit_literals_with, OmitOptions};
use aspax_core::policy::grid::Grid;
use aspax_core::policy::{
    parse_goal, parse_pattern, policy_check, AbstractionMode, FailureKind, PolicyCheckOptions, Verdict,
};
use aspax_core::solve::{answer_sets, brute_force_answer_sets, ground_answer_sets};
use aspax_core::{
    parse_mapping, parse_program_str, print_program, DomainMapping, GroundAtom, Interpretation, Limits, PredKey,
    Program, Rel, RelCase, Value,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($c:expr, $($m:tt)*) => {
        if !$c {
            return Err(format!($($m)*));
        }
    };
}

const PAIRS: &str = "sort s {1..3}.\na(X1,X2) :- c(X1), b(X2).\nd(X1,X2) :- a(X1,X2), X1 <= X2.\n";
const PAIRS_NEG: &str = "sort s {1..3}.\n\
    a(X1,X2) :- c(X1), b(X2).\n\
    d(X1,X2) :- a(X1,X2), X1 <= X2.\n\
    e(X1) :- dom_s(X1), dom_s(X2), not a(X1,X2), X1 = X2.\n";
const ONE_VS_REST: &str = "sort s; class d1 = {1}; class dk = {2,3};";

fn prog(text: &str) -> Program {
    parse_program_str(text).expect("parse")
}

fn sets(p: &Program) -> Vec<String> {
    answer_sets(p, &Limits::default()).expect("solve").iter().map(ToString::to_string).collect()
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let t = start.elapsed();
    ensure!(t < limit, "took {t:?}, limit {limit:?}");
    Ok(t)
}

fn omission_reproduction() -> Outcome {
    let start = Instant::now();
    let got = sets(&prog(&format!("{PAIRS}c(1). b(2).")));
    ensure!(got == ["{a(1,2), b(2), c(1), d(1,2)}"], "c(1),b(2): {got:?}");
    let got = sets(&prog(&format!("{PAIRS}c(2). b(2).")));
    ensure!(got == ["{a(2,2), b(2), c(2), d(2,2)}"], "c(2),b(2): {got:?}");
    let p = prog(&format!("{PAIRS}b(2)."));
    let omitted = [PredKey::new("c", 1)];
    let a = omit_literals(&p, &omitted).map_err(|e| e.to_string())?.program;
    let got = sets(&a);
    for want in ["{a(1,2), b(2), d(1,2)}", "{a(2,2), b(2), d(2,2)}"] {
        ensure!(got.iter().any(|s| s == want), "abstract sets lack {want}: {got:?}");
    }
    let r = check_coverage(&p, &a, &DomainMapping::omitting(omitted), &Limits::default(), CheckOptions::default())
        .map_err(|e| e.to_string())?;
    ensure!(r.is_sound(), "uncovered {}", r.uncovered.len());
    let t = within(Duration::from_secs(1), start)?;
    Ok(format!("{} abstract answer sets, uncovered 0, {t:?}", got.len()))
}

fn relation_typing() -> Outcome {
    let p = prog("sort s {1..3}.");
    let m = parse_mapping(ONE_VS_REST, "map").map_err(|e| e.to_string())?;
    let c = |a: &str, b: &str| m.classify_relation(&p, Rel::Le, ("s", &Value::sym(a)), ("s", &Value::sym(b))).unwrap();
    let got = [c("d1", "d1"), c("d1", "dk"), c("dk", "dk")];
    ensure!(got == [RelCase::I, RelCase::I, RelCase::III], "{got:?}");
    Ok("<= : (d1,d1)=I (d1,dk)=I (dk,dk)=III".into())
}

fn domain_reproduction() -> Outcome {
    let start = Instant::now();
    let m = parse_mapping(ONE_VS_REST, "map").map_err(|e| e.to_string())?;
    let mut a = abstract_program(&prog(PAIRS_NEG), &m, &DomainOptions::default()).map_err(|e| e.to_string())?;
    a.extend(&prog("c(dk). b(dk)."));
    let got = sets(&a);
    let want = "{a(dk,dk), b(dk), c(dk), e(d1), e(dk)}";
    ensure!(got.iter().any(|s| s == want), "missing {want}: {got:?}");
    for facts in ["c(3). b(2).", "c(2). b(3)."] {
        let p = prog(&format!("{PAIRS_NEG}{facts}"));
        let a = abstract_program(&p, &m, &DomainOptions::default()).map_err(|e| e.to_string())?;
        let r = check_coverage(&p, &a, &m, &Limits::default(), CheckOptions::default()).map_err(|e| e.to_string())?;
        ensure!(r.is_sound(), "{facts} uncovered: {:?}", r.uncovered);
    }
    let t = within(Duration::from_secs(1), start)?;
    Ok(format!("answer set present among {}, uncovered 0 for both instances, {t:?}", got.len()))
}

fn property_suite() -> Outcome {
    const N: usize = 500;
    let start = Instant::now();
    let l = Limits::default();
    let mut r = rng(2024);
    let mut concrete = 0;
    let mut covered = |p: &Program, a: &Program, m: &DomainMapping| -> Result<(), String> {
        let rep = check_coverage(p, a, m, &l, CheckOptions { enumerate_abstract: false }).map_err(|e| e.to_string())?;
        concrete += rep.concrete_count;
        ensure!(rep.is_sound(), "uncovered {:?}\n{}--\n{}", rep.uncovered, print_program(p), print_program(a));
        Ok(())
    };
    for _ in 0..N {
        let p = random_program(&mut r);
        let omitted = random_omission(&mut r, &p);
        let a = omit_literals(&p, &omitted).map_err(|e| e.to_string())?.program;
        covered(&p, &a, &DomainMapping::omitting(omitted.clone()))?;

        let mut m = random_interval_mapping(&mut r, &p);
        let a = abstract_program(&p, &m, &DomainOptions::default()).map_err(|e| e.to_string())?;
        covered(&p, &a, &m)?;

        m.omitted = omitted;
        let a = abstract_program(&p, &m, &DomainOptions::default()).map_err(|e| e.to_string())?;
        covered(&p, &a, &m)?;
    }
    let t = within(Duration::from_secs(300), start)?;
    Ok(format!("{N} programs x (omission, interval, both): {concrete} concrete answer sets, uncovered 0, {t:.1?}"))
}

fn solver_oracle() -> Outcome {
    const N: usize = 200;
    let l = Limits::default();
    let mut r = rng(7);
    let mut max_atoms = 0;
    for _ in 0..N {
        let p = random_ground_program(&mut r, 14);
        let gp = ground(&p, &l).map_err(|e| e.to_string())?;
        ensure!(gp.atom_count() <= 14, "{} atoms", gp.atom_count());
        max_atoms = max_atoms.max(gp.atom_count());
        let got = ground_answer_sets(&gp, &l).map_err(|e| e.to_string())?;
        ensure!(got == brute_force_answer_sets(&gp), "mismatch on\n{}", print_program(&p));
    }
    Ok(format!("{N} ground programs (up to {max_atoms} atoms) match brute force"))
}

fn identity() -> Outcome {
    const N: usize = 500;
    let l = Limits::default();
    let mut r = rng(99);
    for _ in 0..N {
        let p = random_program(&mut r);
        let m = DomainMapping::identity(&p);
        let a = abstract_program(&p, &m, &DomainOptions::default()).map_err(|e| e.to_string())?;
        let mut images: Vec<Interpretation> = answer_sets(&p, &l)
            .map_err(|e| e.to_string())?
            .iter()
            .map(|i| m.map_interpretation(&p, i).map(|x| x.projected()))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        images.sort();
        ensure!(images == answer_sets(&a, &l).map_err(|e| e.to_string())?, "differs on\n{}", print_program(&p));
    }
    Ok(format!("{N} programs: identical answer sets"))
}

fn region(atom: &GroundAtom) -> &'static str {
    match (&atom.args[0], &atom.args[1]) {
        (Value::Int(1), Value::Int(1)) => "nw",
        (Value::Int(2), Value::Int(1)) => "ne",
        (Value::Int(1), Value::Int(2)) => "sw",
        _ => "se",
    }
}

fn policy_scenario() -> Outcome {
    let start = Instant::now();
    let g = Grid::new(4).map_err(|e| e.to_string())?;
    let goal = parse_goal("caught").map_err(|e| e.to_string())?;
    let pattern = parse_pattern(g.northwest_east_pattern()).map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    for bound in 3..=5 {
        let opts =
            |m| PolicyCheckOptions { bound, mode: m, pattern: Some(pattern.clone()), domain: DomainOptions::default() };
        let l = Limits::default();
        let r = policy_check(&g.domain, &g.policy, &g.coarse, &goal, &opts(AbstractionMode::OverApprox), &l)
            .map_err(|e| e.to_string())?;
        let t = r.counterexample.as_ref().ok_or(format!("bound {bound}: no abstract counterexample"))?;
        let robot: Vec<&str> =
            t.states.iter().take(4).map(|s| s.iter().find(|a| a.predicate == "rAt").map_or("?", region)).collect();
        ensure!(robot == ["nw", "nw", "ne", "ne"], "bound {bound}: shape {robot:?}");
        ensure!(t.states.iter().all(|s| !goal.holds(s)), "bound {bound}: goal reached");
        match &r.verdict {
            Some(Verdict::Spurious { step, kind: FailureKind::NoPlan, action: Some(a), .. })
                if region(a) == "ne" && *step == 2 => {}
            v => return Err(format!("bound {bound}: verdict {v:?}")),
        }
        let refined = policy_check(&g.domain, &g.policy, &g.refined, &goal, &opts(AbstractionMode::OverApprox), &l)
            .map_err(|e| e.to_string())?;
        ensure!(refined.counterexample.is_none(), "bound {bound}: refined still yields {:?}", refined.counterexample);
        notes.push(format!("b{bound}: {} abstract states", r.abstract_states));
    }
    let t = within(Duration::from_secs(120), start)?;
    Ok(format!(
        "nw,nw,ne,ne spurious at step 2 (no policy goTo(ne)); gone after refinement [{}], {t:.1?}",
        notes.join(", ")
    ))
}

fn shrunk_constraint() -> Outcome {
    let p = prog("a :- not b.\nc :- not a.\n:- a, c.\n");
    let l = [PredKey::new("c", 0)];
    let bad = omit_literals_with(&p, &l, OmitOptions { shrink_constraints: true }).map_err(|e| e.to_string())?.program;
    let r = check_coverage(&p, &bad, &DomainMapping::omitting(l), &Limits::default(), CheckOptions::default())
        .map_err(|e| e.to_string())?;
    ensure!(!r.is_sound(), "bug not caught");
    Ok(format!("uncovered {} ({})", r.uncovered.len(), r.uncovered[0]))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("omission on the join program", omission_reproduction),
        ("relation typing", relation_typing),
        ("domain abstraction on the join program", domain_reproduction),
        ("random over-approximation", property_suite),
        ("solver vs brute force", solver_oracle),
        ("identity faithfulness", identity),
        ("grid policy scenario", policy_scenario),
        ("shrunk constraint caught", shrunk_constraint),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail}", i + 1)
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
