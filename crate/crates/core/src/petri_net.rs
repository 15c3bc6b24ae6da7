//! Labelled Petri nets and workflow nets: firing semantics, reachability,
//! structural checks, soundness, and place insertion.
//!
//! Arcs are unweighted; the nets targeted here are safe and unweighted, and
//! weighted inputs are rejected at parse time.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::event_log::EventLabel;
use crate::transition_system::{StateId, TransitionSystem};

/// Default bound on explored markings for reachability analyses.
pub const DEFAULT_MAX_STATES: usize = 1_000_000;

/// A labelled Petri net. Non-silent labels are pairwise distinct.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PetriNet {
    place_ids: Vec<String>,
    transition_ids: Vec<String>,
    labels: Vec<Option<EventLabel>>,
    pre: Vec<BTreeSet<usize>>,  // per transition: input place indices
    post: Vec<BTreeSet<usize>>, // per transition: output place indices
}

/// Token multiset over the places of a net, dense by place index.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Marking(pub Vec<u32>);

impl Marking {
    pub fn empty(num_places: usize) -> Self {
        Marking(vec![0; num_places])
    }

    pub fn tokens(&self, place: usize) -> u32 {
        self.0[place]
    }

    pub fn is_subset_of(&self, other: &Marking) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }
}

/// Incremental builder for [`PetriNet`].
#[derive(Debug, Default)]
pub struct NetBuilder {
    place_ids: Vec<String>,
    transition_ids: Vec<String>,
    labels: Vec<Option<EventLabel>>,
    pre: Vec<BTreeSet<usize>>,
    post: Vec<BTreeSet<usize>>,
    place_index: HashMap<String, usize>,
    transition_index: HashMap<String, usize>,
}

impl NetBuilder {
    pub fn new() -> Self {
        NetBuilder::default()
    }

    pub fn place(&mut self, id: &str) -> Result<usize> {
        if self.place_index.contains_key(id) {
            return Err(Error::Precondition(format!("duplicate place id '{id}'")));
        }
        let idx = self.place_ids.len();
        self.place_ids.push(id.to_string());
        self.place_index.insert(id.to_string(), idx);
        Ok(idx)
    }

    pub fn transition(&mut self, id: &str, label: Option<EventLabel>) -> Result<usize> {
        if self.transition_index.contains_key(id) {
            return Err(Error::Precondition(format!(
                "duplicate transition id '{id}'"
            )));
        }
        let idx = self.transition_ids.len();
        self.transition_ids.push(id.to_string());
        self.transition_index.insert(id.to_string(), idx);
        self.labels.push(label);
        self.pre.push(BTreeSet::new());
        self.post.push(BTreeSet::new());
        Ok(idx)
    }

    /// Arc place → transition.
    pub fn arc_pt(&mut self, place: usize, transition: usize) {
        self.pre[transition].insert(place);
    }

    /// Arc transition → place.
    pub fn arc_tp(&mut self, transition: usize, place: usize) {
        self.post[transition].insert(place);
    }

    pub fn place_idx(&self, id: &str) -> Option<usize> {
        self.place_index.get(id).copied()
    }

    pub fn transition_idx(&self, id: &str) -> Option<usize> {
        self.transition_index.get(id).copied()
    }

    pub fn build(self) -> Result<PetriNet> {
        let mut seen = BTreeSet::new();
        for label in self.labels.iter().flatten() {
            if !seen.insert(label) {
                return Err(Error::Precondition(format!(
                    "non-silent label '{label}' appears on more than one transition"
                )));
            }
        }
        Ok(PetriNet {
            place_ids: self.place_ids,
            transition_ids: self.transition_ids,
            labels: self.labels,
            pre: self.pre,
            post: self.post,
        })
    }
}

/// Free-choice check result: `ok` iff every transition pair has disjoint or
/// identical presets.
#[derive(Debug, Clone)]
pub struct FreeChoiceReport {
    pub ok: bool,
    pub violations: Vec<(String, String)>,
}

/// Workflow-structure check result.
#[derive(Debug, Clone)]
pub struct WorkflowReport {
    pub ok: bool,
    pub source: Option<usize>,
    pub sink: Option<usize>,
    pub diagnostics: Vec<String>,
}

/// Classic soundness report plus the relaxed can-reach-some-final property.
#[derive(Debug, Clone)]
pub struct SoundnessReport {
    pub is_sound: bool,
    /// Reachable markings from which the final marking `[o]` is unreachable.
    pub unreachable_final_from: Vec<Marking>,
    /// Reachable markings covering `[o]` other than `[o]` itself.
    pub improper_completions: Vec<Marking>,
    pub dead_transitions: Vec<String>,
    /// Relaxed property, reported separately from classic soundness: every
    /// reachable marking can reach SOME declared final marking.
    pub every_marking_reaches_some_final: bool,
}

/// A reachability graph together with its markings and safeness flag.
#[derive(Debug, Clone)]
pub struct ReachabilityGraph {
    pub ts: TransitionSystem,
    pub markings: Vec<Marking>,
    /// False iff some explored marking puts more than one token in a place.
    pub safe: bool,
    /// Transition indices that fired at least once during exploration.
    pub fired: BTreeSet<usize>,
}

impl PetriNet {
    pub fn num_places(&self) -> usize {
        self.place_ids.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.transition_ids.len()
    }

    pub fn place_id(&self, idx: usize) -> &str {
        &self.place_ids[idx]
    }

    pub fn transition_id(&self, idx: usize) -> &str {
        &self.transition_ids[idx]
    }

    pub fn place_index(&self, id: &str) -> Option<usize> {
        self.place_ids.iter().position(|p| p == id)
    }

    pub fn transition_index(&self, id: &str) -> Option<usize> {
        self.transition_ids.iter().position(|t| t == id)
    }

    pub fn label(&self, transition: usize) -> Option<&EventLabel> {
        self.labels[transition].as_ref()
    }

    pub fn transition_by_label(&self, label: &EventLabel) -> Option<usize> {
        self.labels.iter().position(|l| l.as_ref() == Some(label))
    }

    /// Characteristic multiset of input places of `t` (0/1 valued).
    pub fn preset(&self, t: usize) -> Result<Marking> {
        self.check_transition(t)?;
        let mut m = Marking::empty(self.num_places());
        for &p in &self.pre[t] {
            m.0[p] = 1;
        }
        Ok(m)
    }

    /// Characteristic multiset of output places of `t` (0/1 valued).
    pub fn postset(&self, t: usize) -> Result<Marking> {
        self.check_transition(t)?;
        let mut m = Marking::empty(self.num_places());
        for &p in &self.post[t] {
            m.0[p] = 1;
        }
        Ok(m)
    }

    pub fn pre_places(&self, t: usize) -> &BTreeSet<usize> {
        &self.pre[t]
    }

    pub fn post_places(&self, t: usize) -> &BTreeSet<usize> {
        &self.post[t]
    }

    /// Transitions producing into place `p`.
    pub fn producers(&self, p: usize) -> BTreeSet<usize> {
        (0..self.num_transitions())
            .filter(|&t| self.post[t].contains(&p))
            .collect()
    }

    /// Transitions consuming from place `p`.
    pub fn consumers(&self, p: usize) -> BTreeSet<usize> {
        (0..self.num_transitions())
            .filter(|&t| self.pre[t].contains(&p))
            .collect()
    }

    fn check_transition(&self, t: usize) -> Result<()> {
        if t >= self.num_transitions() {
            return Err(Error::Precondition(format!("unknown transition index {t}")));
        }
        Ok(())
    }

    pub fn is_enabled(&self, m: &Marking, t: usize) -> bool {
        self.pre[t].iter().all(|&p| m.0[p] >= 1)
    }

    /// Fires `t`, yielding m − •t + t•. Errors when `t` is not enabled.
    pub fn fire(&self, m: &Marking, t: usize) -> Result<Marking> {
        self.check_transition(t)?;
        if !self.is_enabled(m, t) {
            return Err(Error::Precondition(format!(
                "transition '{}' is not enabled",
                self.transition_ids[t]
            )));
        }
        let mut next = m.clone();
        for &p in &self.pre[t] {
            next.0[p] -= 1;
        }
        for &p in &self.post[t] {
            next.0[p] += 1;
        }
        Ok(next)
    }

    /// Pairwise free-choice check: •t1 ∩ •t2 = ∅ or •t1 = •t2 for all pairs.
    pub fn is_free_choice(&self) -> FreeChoiceReport {
        let mut violations = Vec::new();
        let n = self.num_transitions();
        for t1 in 0..n {
            for t2 in (t1 + 1)..n {
                let disjoint = self.pre[t1].is_disjoint(&self.pre[t2]);
                if !disjoint && self.pre[t1] != self.pre[t2] {
                    violations.push((
                        self.transition_ids[t1].clone(),
                        self.transition_ids[t2].clone(),
                    ));
                }
            }
        }
        FreeChoiceReport {
            ok: violations.is_empty(),
            violations,
        }
    }

    /// Workflow-net structure: unique source place, unique sink place, and
    /// every node on a directed path from source to sink.
    pub fn is_workflow_net(&self) -> WorkflowReport {
        let mut diagnostics = Vec::new();
        let sources: Vec<usize> = (0..self.num_places())
            .filter(|&p| self.producers(p).is_empty())
            .collect();
        let sinks: Vec<usize> = (0..self.num_places())
            .filter(|&p| self.consumers(p).is_empty())
            .collect();
        if sources.len() != 1 {
            diagnostics.push(format!(
                "expected exactly one source place, found {}: [{}]",
                sources.len(),
                sources
                    .iter()
                    .map(|&p| self.place_ids[p].as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            ));
        }
        if sinks.len() != 1 {
            diagnostics.push(format!(
                "expected exactly one sink place, found {}: [{}]",
                sinks.len(),
                sinks
                    .iter()
                    .map(|&p| self.place_ids[p].as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            ));
        }
        let (source, sink) = match (sources.as_slice(), sinks.as_slice()) {
            (&[source], &[sink]) => (Some(source), Some(sink)),
            _ => (None, None),
        };
        if let (Some(source), Some(sink)) = (source, sink) {
            // node graph: place nodes 0..P, transition nodes P..P+T
            let np = self.num_places();
            let node_count = np + self.num_transitions();
            let mut fwd = vec![Vec::new(); node_count];
            let mut rev = vec![Vec::new(); node_count];
            for t in 0..self.num_transitions() {
                for &p in &self.pre[t] {
                    fwd[p].push(np + t);
                    rev[np + t].push(p);
                }
                for &p in &self.post[t] {
                    fwd[np + t].push(p);
                    rev[p].push(np + t);
                }
            }
            let from_source = bfs(&fwd, source);
            let to_sink = bfs(&rev, sink);
            for node in 0..node_count {
                if !(from_source.contains(&node) && to_sink.contains(&node)) {
                    let name = if node < np {
                        format!("place '{}'", self.place_ids[node])
                    } else {
                        format!("transition '{}'", self.transition_ids[node - np])
                    };
                    diagnostics.push(format!("{name} is not on a path from source to sink"));
                }
            }
        }
        WorkflowReport {
            ok: diagnostics.is_empty(),
            source,
            sink,
            diagnostics,
        }
    }

    /// DOT export: places as circles (tokens as dots), transitions as boxes.
    pub fn to_dot(&self, marking: Option<&Marking>) -> String {
        let mut out = String::from("digraph net {\n  rankdir=LR;\n");
        for (p, id) in self.place_ids.iter().enumerate() {
            let tokens = marking.map_or(0, |m| m.0[p]);
            let dot = if tokens > 0 {
                "&bull;".repeat(tokens as usize)
            } else {
                String::new()
            };
            out.push_str(&format!(
                "  p{p} [shape=circle, label=\"{id}\\n{dot}\"];\n"
            ));
        }
        for (t, id) in self.transition_ids.iter().enumerate() {
            let label = self.labels[t]
                .as_ref()
                .map_or_else(|| "τ".to_string(), |l| l.to_string());
            out.push_str(&format!(
                "  t{t} [shape=box, label=\"{label}\", xlabel=\"{id}\"];\n"
            ));
        }
        for t in 0..self.num_transitions() {
            for &p in &self.pre[t] {
                out.push_str(&format!("  p{p} -> t{t};\n"));
            }
            for &p in &self.post[t] {
                out.push_str(&format!("  t{t} -> p{p};\n"));
            }
        }
        out.push_str("}\n");
        out
    }
}

fn bfs(adj: &[Vec<usize>], start: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(n) = queue.pop_front() {
        for &next in &adj[n] {
            if seen.insert(next) {
                queue.push_back(next);
            }
        }
    }
    seen
}

/// A labelled Petri net with an initial marking and a set of final markings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetSystem {
    pub net: PetriNet,
    pub initial: Marking,
    pub finals: BTreeSet<Marking>,
}

impl NetSystem {
    pub fn new(net: PetriNet, initial: Marking, finals: BTreeSet<Marking>) -> Result<Self> {
        let np = net.num_places();
        if initial.0.len() != np || finals.iter().any(|m| m.0.len() != np) {
            return Err(Error::Precondition(
                "marking length does not match the number of places".into(),
            ));
        }
        Ok(NetSystem {
            net,
            initial,
            finals,
        })
    }

    /// Explores reachable markings breadth-first, building the reachability
    /// graph as a transition system (τ allowed on arcs).
    pub fn reachability_graph(&self, max_states: usize) -> Result<ReachabilityGraph> {
        if max_states == 0 {
            return Err(Error::Precondition("max_states must be at least 1".into()));
        }
        let mut ids: HashMap<Marking, StateId> = HashMap::new();
        let mut markings: Vec<Marking> = Vec::new();
        let mut arcs: Vec<(StateId, Option<EventLabel>, StateId)> = Vec::new();
        let mut safe = true;
        let mut fired = BTreeSet::new();
        ids.insert(self.initial.clone(), 0);
        markings.push(self.initial.clone());
        let mut queue = VecDeque::from([0usize]);
        while let Some(id) = queue.pop_front() {
            let m = markings[id].clone();
            if m.0.iter().any(|&tokens| tokens > 1) {
                safe = false;
            }
            for t in 0..self.net.num_transitions() {
                if !self.net.is_enabled(&m, t) {
                    continue;
                }
                fired.insert(t);
                let next = self.net.fire(&m, t).expect("enabled");
                let next_id = match ids.get(&next) {
                    Some(&i) => i,
                    None => {
                        let i = markings.len();
                        if i >= max_states {
                            return Err(Error::StateLimit {
                                context: "reachability graph",
                                limit: max_states,
                            });
                        }
                        ids.insert(next.clone(), i);
                        markings.push(next);
                        queue.push_back(i);
                        i
                    }
                };
                arcs.push((id, self.net.labels[t].clone(), next_id));
            }
        }
        let finals: BTreeSet<StateId> = self
            .finals
            .iter()
            .filter_map(|m| ids.get(m).copied())
            .collect();
        let alphabet: Vec<EventLabel> = self.net.labels.iter().flatten().cloned().collect();
        let ts = TransitionSystem::new(markings.len(), arcs, 0, finals, alphabet)?;
        Ok(ReachabilityGraph {
            ts,
            markings,
            safe,
            fired,
        })
    }

    /// True iff the trace is feasible in the reachability graph.
    pub fn accepts(&self, trace: &[EventLabel], max_states: usize) -> Result<bool> {
        Ok(self.reachability_graph(max_states)?.ts.accepts(trace))
    }

    /// Classic soundness for workflow nets with initial `[i]` and final
    /// `[o]`, evaluated on the reachability graph. The relaxed property
    /// (every marking reaches some declared final) is reported separately.
    pub fn check_soundness(&self, max_states: usize) -> Result<SoundnessReport> {
        let wf = self.net.is_workflow_net();
        let (source, sink) = match (wf.source, wf.sink) {
            (Some(source), Some(sink)) => (source, sink),
            _ => {
                return Err(Error::Precondition(format!(
                    "soundness requires a workflow net: {}",
                    wf.diagnostics.join("; ")
                )))
            }
        };
        let mut expected_initial = Marking::empty(self.net.num_places());
        expected_initial.0[source] = 1;
        if self.initial != expected_initial {
            return Err(Error::Precondition(
                "soundness requires the initial marking [i] with one token in the source place"
                    .into(),
            ));
        }
        let mut classic_final = Marking::empty(self.net.num_places());
        classic_final.0[sink] = 1;

        let rg = self.reachability_graph(max_states)?;
        let n = rg.markings.len();
        // reverse reachability over the marking graph
        let mut rev = vec![Vec::new(); n];
        for (src, _, dst) in rg.ts.arcs() {
            rev[*dst].push(*src);
        }
        let backward = |targets: Vec<StateId>| -> Vec<bool> {
            let mut seen = vec![false; n];
            let mut queue: VecDeque<StateId> = VecDeque::new();
            for t in targets {
                if !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
            while let Some(s) = queue.pop_front() {
                for &p in &rev[s] {
                    if !seen[p] {
                        seen[p] = true;
                        queue.push_back(p);
                    }
                }
            }
            seen
        };

        let final_id = rg.markings.iter().position(|m| *m == classic_final);
        let can_reach_final = backward(final_id.into_iter().collect());
        let unreachable_final_from: Vec<Marking> = (0..n)
            .filter(|&i| !can_reach_final[i])
            .map(|i| rg.markings[i].clone())
            .collect();

        let improper_completions: Vec<Marking> = rg
            .markings
            .iter()
            .filter(|m| m.0[sink] >= 1 && **m != classic_final)
            .cloned()
            .collect();

        let dead_transitions: Vec<String> = (0..self.net.num_transitions())
            .filter(|t| !rg.fired.contains(t))
            .map(|t| self.net.transition_ids[t].clone())
            .collect();

        let declared_final_ids: Vec<StateId> = self
            .finals
            .iter()
            .filter_map(|m| rg.markings.iter().position(|x| x == m))
            .collect();
        let reaches_some = backward(declared_final_ids);
        let every_marking_reaches_some_final = reaches_some.iter().all(|&b| b);

        Ok(SoundnessReport {
            is_sound: unreachable_final_from.is_empty()
                && improper_completions.is_empty()
                && dead_transitions.is_empty(),
            unreachable_final_from,
            improper_completions,
            dead_transitions,
            every_marking_reaches_some_final,
        })
    }

    /// Adds a fresh place with arcs from `entering` and to `exiting`
    /// transitions. Transitions in both sets get self-loop arcs.
    ///
    /// With `mark_initial` the initial marking gains a token in the new
    /// place. With `extend_finals`, for each existing final marking m a new
    /// final marking m + [p] is added alongside it.
    pub fn add_place(
        &self,
        place_id: &str,
        entering: &BTreeSet<usize>,
        exiting: &BTreeSet<usize>,
        mark_initial: bool,
        extend_finals: bool,
    ) -> Result<NetSystem> {
        for &t in entering.iter().chain(exiting) {
            self.net.check_transition(t)?;
        }
        if self.net.place_index(place_id).is_some() {
            return Err(Error::Precondition(format!(
                "place id '{place_id}' already exists"
            )));
        }
        let mut net = self.net.clone();
        let p = net.place_ids.len();
        net.place_ids.push(place_id.to_string());
        for &t in entering {
            net.post[t].insert(p);
        }
        for &t in exiting {
            net.pre[t].insert(p);
        }
        let mut initial = self.initial.clone();
        initial.0.push(u32::from(mark_initial));
        let mut finals: BTreeSet<Marking> = self
            .finals
            .iter()
            .map(|m| {
                let mut ext = m.clone();
                ext.0.push(0);
                ext
            })
            .collect();
        if extend_finals {
            let added: Vec<Marking> = finals
                .iter()
                .map(|m| {
                    let mut plus = m.clone();
                    *plus.0.last_mut().expect("non-empty") = 1;
                    plus
                })
                .collect();
            finals.extend(added);
        }
        NetSystem::new(net, initial, finals)
    }

    /// Markings as labelled multisets keyed by place id, for reports.
    pub fn describe_marking(&self, m: &Marking) -> String {
        let parts: Vec<String> = m
            .0
            .iter()
            .enumerate()
            .filter(|(_, &tokens)| tokens > 0)
            .map(|(p, &tokens)| {
                if tokens == 1 {
                    self.net.place_ids[p].clone()
                } else {
                    format!("{}:{tokens}", self.net.place_ids[p])
                }
            })
            .collect();
        format!("[{}]", parts.join(", "))
    }
}

/// Convenience: marking with one token in each listed place.
pub fn marking_of(net: &PetriNet, places: &[&str]) -> Result<Marking> {
    let mut m = Marking::empty(net.num_places());
    for id in places {
        let p = net
            .place_index(id)
            .ok_or_else(|| Error::Precondition(format!("unknown place '{id}'")))?;
        m.0[p] += 1;
    }
    Ok(m)
}

/// Per-transition label map as a BTreeMap, handy for diagnostics.
pub fn label_map(net: &PetriNet) -> BTreeMap<String, Option<EventLabel>> {
    (0..net.num_transitions())
        .map(|t| (net.transition_id(t).to_string(), net.label(t).cloned()))
        .collect()
}
