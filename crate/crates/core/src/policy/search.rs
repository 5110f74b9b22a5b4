//! Bounded counterexample search and concretization.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::{Goal, Pattern, State, StateAbstraction, TransitionSystem};
use crate::ast::GroundAtom;
use crate::error::Result;

/// `s0, a0, s1, …, sn`. A `dead_end` trajectory stops in a state where the
/// policy selects no action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub actions: Vec<GroundAtom>,
    pub dead_end: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

impl fmt::Display for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.states.iter().enumerate() {
            if i > 0 {
                write!(f, " --{}--> ", self.actions[i - 1])?;
            }
            write!(f, "{s}")?;
        }
        if self.dead_end {
            f.write_str(" (no action)")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureKind {
    /// No concrete state maps to the first abstract state.
    NoInitialState,
    /// (i) the policy selects no action mapping to the abstract action.
    NoPlan,
    /// (ii) such actions exist, but none leads into the next abstract state.
    NoTransition,
    /// The abstract trajectory ends without an action, the concrete states
    /// all have one.
    NotStuck,
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureKind::NoInitialState => "no concrete initial state",
            FailureKind::NoPlan => "(i) no policy action maps to the abstract action",
            FailureKind::NoTransition => "(ii) no transition into the next abstract state",
            FailureKind::NotStuck => "every concrete state has a policy action",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Concrete(Trajectory),
    Spurious {
        step: usize,
        kind: FailureKind,
        /// The abstract action at the failing step, if any.
        action: Option<GroundAtom>,
        /// Concrete states that reached the failing step.
        reached: usize,
    },
}

impl Verdict {
    pub fn is_spurious(&self) -> bool {
        matches!(self, Verdict::Spurious { .. })
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Concrete(t) => write!(f, "concrete counterexample: {t}"),
            Verdict::Spurious { step, kind, action, reached } => {
                write!(f, "spurious: fails at step {step}")?;
                if let Some(a) = action {
                    write!(f, " on {a}")?;
                }
                write!(f, " from {reached} concrete state(s): {kind}")
            }
        }
    }
}

struct Dfs<'a> {
    ts: &'a TransitionSystem,
    goal: &'a Goal,
    bound: usize,
    pattern: Option<&'a Pattern>,
    failed: BTreeSet<(usize, usize)>,
    states: Vec<usize>,
    actions: Vec<GroundAtom>,
}

impl Dfs<'_> {
    /// `Some(dead_end)` when a counterexample continues from `s`.
    fn visit(&mut self, s: usize, depth: usize) -> Option<bool> {
        let state = &self.ts.states[s];
        if self.goal.holds(state) || self.pattern.is_some_and(|p| !p.state_ok(depth, state)) {
            return None;
        }
        if self.failed.contains(&(s, depth)) {
            return None;
        }
        self.states.push(s);
        if depth == self.bound {
            return Some(false);
        }
        if self.ts.is_sink(s) && self.pattern.is_none_or(|p| depth >= p.actions.len()) {
            return Some(true);
        }
        let moves: Vec<(GroundAtom, usize)> =
            self.ts.moves(s).map(|t| (t.action.clone().expect("move"), t.to)).collect();
        for (a, to) in moves {
            if self.pattern.is_some_and(|p| !p.action_ok(depth, &a)) {
                continue;
            }
            self.actions.push(a);
            if let Some(d) = self.visit(to, depth + 1) {
                return Some(d);
            }
            self.actions.pop();
        }
        self.states.pop();
        self.failed.insert((s, depth));
        None
    }
}

/// Depth-first search, in state order, for a trajectory of length `bound`
/// (or shorter, ending in a state without actions) on which the goal never
/// holds. With a pattern, only trajectories matching it are considered.
pub fn find_counterexample(
    ts: &TransitionSystem,
    goal: &Goal,
    bound: usize,
    pattern: Option<&Pattern>,
) -> Option<Trajectory> {
    let mut init = ts.initial.clone();
    init.sort_by(|a, b| ts.states[*a].cmp(&ts.states[*b]));
    let mut dfs = Dfs { ts, goal, bound, pattern, failed: BTreeSet::new(), states: vec![], actions: vec![] };
    for s in init {
        if let Some(dead_end) = dfs.visit(s, 0) {
            return Some(Trajectory {
                states: dfs.states.iter().map(|&i| ts.states[i].clone()).collect(),
                actions: dfs.actions,
                dead_end,
            });
        }
    }
    None
}

/// Looks for a concrete trajectory through the abstract one, layer by layer.
/// On failure, reports the first step at which no concrete prefix survives.
pub fn check_spurious(traj: &Trajectory, concrete: &TransitionSystem, h: &StateAbstraction<'_>) -> Result<Verdict> {
    let mut image: Vec<Option<State>> = vec![None; concrete.states.len()];
    let mut image_of = |i: usize| -> Result<State> {
        if image[i].is_none() {
            image[i] = Some(h.state(&concrete.states[i])?);
        }
        Ok(image[i].clone().expect("filled"))
    };
    // layer i: reached state -> (predecessor, action)
    let mut layers: Vec<BTreeMap<usize, Option<(usize, GroundAtom)>>> = Vec::new();
    let mut first = BTreeMap::new();
    for &s in &concrete.initial {
        if image_of(s)? == traj.states[0] {
            first.insert(s, None);
        }
    }
    if first.is_empty() {
        return Ok(Verdict::Spurious { step: 0, kind: FailureKind::NoInitialState, action: None, reached: 0 });
    }
    layers.push(first);
    for (i, act) in traj.actions.iter().enumerate() {
        let mut next = BTreeMap::new();
        let mut any_plan = false;
        for &s in layers[i].keys() {
            for t in concrete.moves(s) {
                let a = t.action.as_ref().expect("move");
                if h.atom(a)?.as_ref() != Some(act) {
                    continue;
                }
                any_plan = true;
                if image_of(t.to)? == traj.states[i + 1] {
                    next.entry(t.to).or_insert_with(|| Some((s, a.clone())));
                }
            }
        }
        if next.is_empty() {
            let kind = if any_plan { FailureKind::NoTransition } else { FailureKind::NoPlan };
            return Ok(Verdict::Spurious { step: i, kind, action: Some(act.clone()), reached: layers[i].len() });
        }
        layers.push(next);
    }
    let last = layers.last().expect("nonempty");
    let end = if traj.dead_end {
        match last.keys().find(|&&s| concrete.is_sink(s)) {
            Some(&s) => s,
            None => {
                return Ok(Verdict::Spurious {
                    step: traj.len(),
                    kind: FailureKind::NotStuck,
                    action: None,
                    reached: last.len(),
                })
            }
        }
    } else {
        *last.keys().next().expect("nonempty")
    };
    let mut states = vec![end];
    let mut actions = Vec::new();
    let mut cur = end;
    for layer in layers.iter().rev() {
        if let Some((prev, a)) = &layer[&cur] {
            actions.push(a.clone());
            states.push(*prev);
            cur = *prev;
        }
    }
    states.reverse();
    actions.reverse();
    Ok(Verdict::Concrete(Trajectory {
        states: states.into_iter().map(|i| concrete.states[i].clone()).collect(),
        actions,
        dead_end: traj.dead_end,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::GroundAtom;

    fn s(names: &[&str]) -> State {
        names.iter().map(|n| GroundAtom::new(*n, vec![])).collect()
    }

    fn a(n: &str) -> GroundAtom {
        GroundAtom::new(n, vec![])
    }

    /// a --x--> b --x--> c(goal); a --y--> a
    fn small() -> TransitionSystem {
        TransitionSystem::from_parts(
            [],
            [s(&["a"])],
            [
                (s(&["a"]), Some(a("x")), s(&["b"])),
                (s(&["b"]), Some(a("x")), s(&["c"])),
                (s(&["a"]), Some(a("y")), s(&["a"])),
            ],
        )
    }

    #[test]
    fn bound_zero_checks_initial_states() {
        let ts = small();
        let t = find_counterexample(&ts, &Goal::Designated("c".into()), 0, None).unwrap();
        assert_eq!(t.states, [s(&["a"])]);
        assert!(find_counterexample(&ts, &Goal::Designated("a".into()), 0, None).is_none());
    }

    #[test]
    fn avoids_goal_and_reports_dead_ends() {
        let ts = small();
        let t = find_counterexample(&ts, &Goal::Designated("c".into()), 3, None).unwrap();
        assert_eq!(t.len(), 3);
        assert!(!t.dead_end && t.states.iter().all(|st| !st.contains(&a("c"))));
        // c is a dead end: reaching it without the goal is a counterexample
        let t = find_counterexample(
            &ts,
            &Goal::Designated("zzz".into()),
            5,
            Some(&Pattern { states: vec![], actions: vec![Some(a("x")), Some(a("x"))] }),
        )
        .unwrap();
        assert!(t.dead_end);
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn goal_everywhere_means_no_counterexample() {
        let ts = small();
        let g = Goal::Formula(super::super::Formula::True);
        for b in 0..4 {
            assert!(find_counterexample(&ts, &g, b, None).is_none());
        }
    }
}
