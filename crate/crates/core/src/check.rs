//! Coverage checking: every concrete answer set must map onto an abstract one.

use std::collections::BTreeSet;
use std::fmt::{self, Write};
use std::time::Instant;

use serde::Serialize;

use crate::ast::{Interpretation, Program};
use crate::error::Result;
use crate::ground::ground;
use crate::mapping::DomainMapping;
use crate::solve::{ground_answer_sets, has_answer_set_projecting_to};
use crate::Limits;

#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub concrete_ms: u128,
    pub abstract_ms: u128,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct CoverageReport {
    pub concrete_count: usize,
    /// `None` when abstract answer sets were not enumerated.
    pub abstract_count: Option<usize>,
    /// Concrete answer sets whose image is an abstract answer set.
    pub covered: Vec<Interpretation>,
    /// Concrete answer sets whose image is not. Empty for a sound abstraction.
    pub uncovered: Vec<Interpretation>,
    /// Abstract answer sets that are the image of no concrete answer set.
    pub spurious: Option<Vec<Interpretation>>,
    pub timings: Timings,
}

impl CoverageReport {
    pub fn is_sound(&self) -> bool {
        self.uncovered.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CheckOptions {
    /// Also enumerate the abstract program to find spurious answer sets.
    pub enumerate_abstract: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { enumerate_abstract: true }
    }
}

pub fn check_coverage(
    concrete: &Program,
    abstract_program: &Program,
    m: &DomainMapping,
    limits: &Limits,
    opts: CheckOptions,
) -> Result<CoverageReport> {
    let t0 = Instant::now();
    let concrete_sets = ground_answer_sets(&ground(concrete, limits)?, limits)?;
    let concrete_ms = t0.elapsed().as_millis();
    let t1 = Instant::now();
    let agp = ground(abstract_program, limits)?;
    let mut report = CoverageReport { concrete_count: concrete_sets.len(), ..Default::default() };
    let mut images = BTreeSet::new();
    for i in &concrete_sets {
        let image = m.map_interpretation(concrete, i)?.projected();
        let ok = has_answer_set_projecting_to(&agp, &image, limits)?;
        if ok {
            report.covered.push(i.clone());
        } else {
            log::info!("uncovered: {i} (image {image})");
            report.uncovered.push(i.clone());
        }
        images.insert(image);
    }
    if opts.enumerate_abstract {
        let abstract_sets = ground_answer_sets(&agp, limits)?;
        report.abstract_count = Some(abstract_sets.len());
        report.spurious = Some(abstract_sets.into_iter().filter(|a| !images.contains(a)).collect());
    }
    report.timings = Timings { concrete_ms, abstract_ms: t1.elapsed().as_millis() };
    Ok(report)
}

/// Some concrete answer set mapping onto `target`, if any.
pub fn spurious_witness(
    target: &Interpretation,
    concrete: &Program,
    m: &DomainMapping,
    limits: &Limits,
) -> Result<Option<Interpretation>> {
    let gp = ground(concrete, limits)?;
    let mut found = None;
    let mut err = None;
    crate::solve::enumerate(&gp, limits, |ids| {
        let i: Interpretation = ids.iter().map(|&a| gp.atoms.atom(a).clone()).collect::<Interpretation>().projected();
        match m.map_interpretation(concrete, &i) {
            Ok(img) if img.projected() == *target => {
                found = Some(i);
                false
            }
            Ok(_) => true,
            Err(e) => {
                err = Some(e);
                false
            }
        }
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(found),
    }
}

impl fmt::Display for CoverageReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        writeln!(s, "concrete answer sets: {}", self.concrete_count)?;
        if let Some(n) = self.abstract_count {
            writeln!(s, "abstract answer sets: {n}")?;
        }
        writeln!(s, "covered: {}", self.covered.len())?;
        writeln!(s, "uncovered: {}", self.uncovered.len())?;
        for i in &self.uncovered {
            writeln!(s, "  {i}")?;
        }
        if let Some(sp) = &self.spurious {
            writeln!(s, "spurious: {}", sp.len())?;
            for i in sp {
                writeln!(s, "  {i}")?;
            }
        }
        f.write_str(s.trim_end())
    }
}
