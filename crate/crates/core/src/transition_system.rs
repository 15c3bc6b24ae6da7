//! Labelled transition systems: prefix-tree construction from logs,
//! partition-refinement minimization, τ-closure/determinization, and
//! bounded language queries.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::event_log::{EventLabel, EventLog, Trace};

/// Dense state identifier, assigned deterministically (BFS order from the
/// initial state) so outputs are reproducible across runs.
pub type StateId = usize;

/// Arc label: an observable event or the silent label τ.
pub type ArcLabel = Option<EventLabel>;

/// A labelled transition system with an initial state and final-state set.
/// τ may appear on arcs but never in the alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionSystem {
    num_states: usize,
    arcs: Vec<(StateId, ArcLabel, StateId)>,
    out: Vec<Vec<(ArcLabel, StateId)>>,
    initial: StateId,
    finals: BTreeSet<StateId>,
    alphabet: BTreeSet<EventLabel>,
    tau_free: bool,
    deterministic: bool,
}

impl TransitionSystem {
    /// Builds a TS, validating that all endpoints exist. The alphabet is the
    /// union of non-τ arc labels plus any extra labels supplied.
    pub fn new(
        num_states: usize,
        arcs: Vec<(StateId, ArcLabel, StateId)>,
        initial: StateId,
        finals: BTreeSet<StateId>,
        extra_alphabet: impl IntoIterator<Item = EventLabel>,
    ) -> Result<Self> {
        if initial >= num_states {
            return Err(Error::Precondition(format!(
                "initial state {initial} out of range (states: {num_states})"
            )));
        }
        for &s in &finals {
            if s >= num_states {
                return Err(Error::Precondition(format!(
                    "final state {s} out of range (states: {num_states})"
                )));
            }
        }
        let mut alphabet: BTreeSet<EventLabel> = extra_alphabet.into_iter().collect();
        let mut out = vec![Vec::new(); num_states];
        let mut tau_free = true;
        for (src, label, dst) in &arcs {
            if *src >= num_states || *dst >= num_states {
                return Err(Error::Precondition(format!(
                    "arc ({src}, _, {dst}) has an endpoint out of range"
                )));
            }
            match label {
                Some(l) => {
                    alphabet.insert(l.clone());
                }
                None => tau_free = false,
            }
            out[*src].push((label.clone(), *dst));
        }
        let mut deterministic = tau_free;
        if deterministic {
            'det: for succ in &out {
                let mut seen = BTreeSet::new();
                for (label, _) in succ {
                    if !seen.insert(label.as_ref().expect("tau-free")) {
                        deterministic = false;
                        break 'det;
                    }
                }
            }
        }
        Ok(TransitionSystem {
            num_states,
            arcs,
            out,
            initial,
            finals,
            alphabet,
            tau_free,
            deterministic,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn finals(&self) -> &BTreeSet<StateId> {
        &self.finals
    }

    pub fn is_final(&self, s: StateId) -> bool {
        self.finals.contains(&s)
    }

    pub fn alphabet(&self) -> &BTreeSet<EventLabel> {
        &self.alphabet
    }

    pub fn arcs(&self) -> &[(StateId, ArcLabel, StateId)] {
        &self.arcs
    }

    pub fn outgoing(&self, s: StateId) -> &[(ArcLabel, StateId)] {
        &self.out[s]
    }

    pub fn is_tau_free(&self) -> bool {
        self.tau_free
    }

    pub fn is_deterministic(&self) -> bool {
        self.deterministic
    }

    /// Labels with at least one outgoing arc from `s`. Requires a τ-free TS.
    pub fn enabled_events(&self, s: StateId) -> Result<BTreeSet<EventLabel>> {
        if !self.tau_free {
            return Err(Error::Precondition(
                "enabled_events requires a tau-free transition system".into(),
            ));
        }
        if s >= self.num_states {
            return Err(Error::Precondition(format!("unknown state {s}")));
        }
        Ok(self.out[s]
            .iter()
            .map(|(l, _)| l.clone().expect("tau-free"))
            .collect())
    }

    fn tau_closure_of(&self, seed: &BTreeSet<StateId>) -> BTreeSet<StateId> {
        let mut closure = seed.clone();
        let mut queue: VecDeque<StateId> = seed.iter().copied().collect();
        while let Some(s) = queue.pop_front() {
            for (label, dst) in &self.out[s] {
                if label.is_none() && closure.insert(*dst) {
                    queue.push_back(*dst);
                }
            }
        }
        closure
    }

    /// True iff `trace` is feasible: some path from the initial state to a
    /// final state whose non-τ label sequence equals the trace.
    pub fn accepts(&self, trace: &[EventLabel]) -> bool {
        let mut current = self.tau_closure_of(&BTreeSet::from([self.initial]));
        for event in trace {
            let mut next = BTreeSet::new();
            for &s in &current {
                for (label, dst) in &self.out[s] {
                    if label.as_ref() == Some(event) {
                        next.insert(*dst);
                    }
                }
            }
            if next.is_empty() {
                return false;
            }
            current = self.tau_closure_of(&next);
        }
        current.iter().any(|s| self.finals.contains(s))
    }

    /// Exactly the feasible traces of length at most `max_len`.
    pub fn language_bounded(&self, max_len: usize) -> BTreeSet<Trace> {
        let mut result = BTreeSet::new();
        let start = self.tau_closure_of(&BTreeSet::from([self.initial]));
        let mut frontier: Vec<(BTreeSet<StateId>, Trace)> = vec![(start, Vec::new())];
        for _ in 0..=max_len {
            let mut next_frontier = Vec::new();
            for (subset, trace) in frontier.drain(..) {
                if subset.iter().any(|s| self.finals.contains(s)) {
                    result.insert(trace.clone());
                }
                if trace.len() == max_len {
                    continue;
                }
                let mut by_event: BTreeMap<&EventLabel, BTreeSet<StateId>> = BTreeMap::new();
                for &s in &subset {
                    for (label, dst) in &self.out[s] {
                        if let Some(l) = label {
                            by_event.entry(l).or_default().insert(*dst);
                        }
                    }
                }
                for (event, targets) in by_event {
                    let mut extended = trace.clone();
                    extended.push(event.clone());
                    next_frontier.push((self.tau_closure_of(&targets), extended));
                }
            }
            frontier = next_frontier;
        }
        result
    }

    /// States reachable from the initial state.
    fn reachable(&self) -> BTreeSet<StateId> {
        let mut seen = BTreeSet::from([self.initial]);
        let mut queue = VecDeque::from([self.initial]);
        while let Some(s) = queue.pop_front() {
            for (_, dst) in &self.out[s] {
                if seen.insert(*dst) {
                    queue.push_back(*dst);
                }
            }
        }
        seen
    }

    /// States from which some final state is reachable.
    fn co_reachable(&self) -> BTreeSet<StateId> {
        let mut rev = vec![Vec::new(); self.num_states];
        for (src, _, dst) in &self.arcs {
            rev[*dst].push(*src);
        }
        let mut seen: BTreeSet<StateId> = self.finals.clone();
        let mut queue: VecDeque<StateId> = self.finals.iter().copied().collect();
        while let Some(s) = queue.pop_front() {
            for &src in &rev[s] {
                if seen.insert(src) {
                    queue.push_back(src);
                }
            }
        }
        seen
    }

    /// Restricts the TS to reachable states that can also reach a final
    /// state. The initial state is always kept (the trimmed TS of an empty
    /// language is a single initial state with no arcs).
    pub fn trim(&self) -> TransitionSystem {
        let reachable = self.reachable();
        let co_reachable = self.co_reachable();
        let mut live: BTreeSet<StateId> =
            reachable.intersection(&co_reachable).copied().collect();
        live.insert(self.initial);
        self.restrict_renumber(&live)
    }

    /// Keeps only `live` states and renumbers them in BFS order from the
    /// initial state.
    fn restrict_renumber(&self, live: &BTreeSet<StateId>) -> TransitionSystem {
        let mut id_map: HashMap<StateId, StateId> = HashMap::new();
        let mut order = Vec::new();
        let mut queue = VecDeque::from([self.initial]);
        id_map.insert(self.initial, 0);
        order.push(self.initial);
        while let Some(s) = queue.pop_front() {
            // arcs sorted by (label, target) for reproducible numbering
            let mut succ: Vec<&(ArcLabel, StateId)> = self.out[s].iter().collect();
            succ.sort();
            for (_, dst) in succ {
                if live.contains(dst) && !id_map.contains_key(dst) {
                    id_map.insert(*dst, order.len());
                    order.push(*dst);
                    queue.push_back(*dst);
                }
            }
        }
        let mut arcs = Vec::new();
        for (src, label, dst) in &self.arcs {
            if let (Some(&ns), Some(&nd)) = (id_map.get(src), id_map.get(dst)) {
                arcs.push((ns, label.clone(), nd));
            }
        }
        arcs.sort();
        let finals = self
            .finals
            .iter()
            .filter_map(|s| id_map.get(s).copied())
            .collect();
        TransitionSystem::new(
            order.len(),
            arcs,
            0,
            finals,
            self.alphabet.iter().cloned(),
        )
        .expect("restriction preserves validity")
    }

    /// Language-preserving minimization by partition refinement.
    ///
    /// Unreachable and dead (cannot-reach-final) states are removed first;
    /// the result is the unique minimal deterministic TS for the language.
    pub fn minimize(&self) -> Result<TransitionSystem> {
        if !self.tau_free {
            return Err(Error::Precondition(
                "minimize requires a tau-free transition system".into(),
            ));
        }
        if !self.deterministic {
            return Err(Error::Precondition(
                "minimize requires a deterministic transition system".into(),
            ));
        }
        let trimmed = self.trim();
        let n = trimmed.num_states;
        // class 0 = non-final, class 1 = final (when both present)
        let mut class: Vec<usize> = (0..n)
            .map(|s| usize::from(trimmed.finals.contains(&s)))
            .collect();
        loop {
            // signature: own class + sorted (label, successor class) pairs;
            // the transition function is partial, missing arcs stay missing
            let mut groups: BTreeMap<(usize, Vec<(&EventLabel, usize)>), Vec<StateId>> =
                BTreeMap::new();
            for s in 0..n {
                let mut sig: Vec<(&EventLabel, usize)> = trimmed.out[s]
                    .iter()
                    .map(|(l, dst)| (l.as_ref().expect("tau-free"), class[*dst]))
                    .collect();
                sig.sort();
                groups.entry((class[s], sig)).or_default().push(s);
            }
            let class_count = class.iter().copied().collect::<BTreeSet<_>>().len();
            let mut next = vec![0; n];
            for (idx, (_, members)) in groups.iter().enumerate() {
                for &s in members {
                    next[s] = idx;
                }
            }
            let stable = groups.len() == class_count;
            class = next;
            if stable {
                break;
            }
        }
        // quotient construction on representatives
        let mut rep_arcs: BTreeSet<(usize, EventLabel, usize)> = BTreeSet::new();
        for (src, label, dst) in &trimmed.arcs {
            rep_arcs.insert((
                class[*src],
                label.clone().expect("tau-free"),
                class[*dst],
            ));
        }
        let num_classes = {
            let d: BTreeSet<usize> = class.iter().copied().collect();
            d.len()
        };
        let finals: BTreeSet<usize> = trimmed.finals.iter().map(|s| class[*s]).collect();
        let quotient = TransitionSystem::new(
            num_classes,
            rep_arcs
                .into_iter()
                .map(|(s, l, d)| (s, Some(l), d))
                .collect(),
            class[trimmed.initial],
            finals,
            trimmed.alphabet.iter().cloned(),
        )?;
        // renumber densely in BFS order
        let all: BTreeSet<StateId> = (0..quotient.num_states).collect();
        Ok(quotient.restrict_renumber(&all))
    }

    /// ε-closure + subset construction + minimization: a τ-free
    /// deterministic TS with the same language.
    ///
    /// `max_subset_states` bounds the determinization; exceeding it is an
    /// error, never silent truncation.
    pub fn tau_closure(&self, max_subset_states: usize) -> Result<TransitionSystem> {
        let start = self.tau_closure_of(&BTreeSet::from([self.initial]));
        let mut ids: HashMap<BTreeSet<StateId>, StateId> = HashMap::new();
        let mut subsets: Vec<BTreeSet<StateId>> = Vec::new();
        let mut arcs: Vec<(StateId, ArcLabel, StateId)> = Vec::new();
        ids.insert(start.clone(), 0);
        subsets.push(start);
        let mut queue = VecDeque::from([0usize]);
        while let Some(id) = queue.pop_front() {
            let subset = subsets[id].clone();
            let mut by_event: BTreeMap<EventLabel, BTreeSet<StateId>> = BTreeMap::new();
            for &s in &subset {
                for (label, dst) in &self.out[s] {
                    if let Some(l) = label {
                        by_event.entry(l.clone()).or_default().insert(*dst);
                    }
                }
            }
            for (event, targets) in by_event {
                let closure = self.tau_closure_of(&targets);
                let next_id = match ids.get(&closure) {
                    Some(&i) => i,
                    None => {
                        let i = subsets.len();
                        if i >= max_subset_states {
                            return Err(Error::StateLimit {
                                context: "determinization",
                                limit: max_subset_states,
                            });
                        }
                        ids.insert(closure.clone(), i);
                        subsets.push(closure);
                        queue.push_back(i);
                        i
                    }
                };
                arcs.push((id, Some(event), next_id));
            }
        }
        let finals: BTreeSet<StateId> = subsets
            .iter()
            .enumerate()
            .filter(|(_, subset)| subset.iter().any(|s| self.finals.contains(s)))
            .map(|(i, _)| i)
            .collect();
        let dfa = TransitionSystem::new(
            subsets.len(),
            arcs,
            0,
            finals,
            self.alphabet.iter().cloned(),
        )?;
        dfa.minimize()
    }

    /// DOT export: states as circles, finals double-circled, the initial
    /// state marked with an incoming arrow.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph ts {\n  rankdir=LR;\n  __init [shape=point];\n");
        for s in 0..self.num_states {
            let shape = if self.finals.contains(&s) {
                "doublecircle"
            } else {
                "circle"
            };
            out.push_str(&format!("  s{s} [shape={shape}, label=\"s{s}\"];\n"));
        }
        out.push_str(&format!("  __init -> s{};\n", self.initial));
        for (src, label, dst) in &self.arcs {
            let text = label.as_ref().map_or("τ", |l| l.as_str());
            out.push_str(&format!("  s{src} -> s{dst} [label=\"{text}\"];\n"));
        }
        out.push_str("}\n");
        out
    }

    /// TSV export of arcs: source, label (τ for silent), target.
    pub fn to_tsv(&self) -> String {
        let mut rows: Vec<String> = self
            .arcs
            .iter()
            .map(|(src, label, dst)| {
                format!("s{src}\t{}\ts{dst}", label.as_ref().map_or("τ", |l| l.as_str()))
            })
            .collect();
        rows.sort();
        rows.join("\n") + if rows.is_empty() { "" } else { "\n" }
    }
}

/// Builds the prefix tree acceptor of a log: one state per distinct trace
/// prefix, final iff the prefix is a complete trace.
pub fn build_prefix_tree(log: &EventLog) -> TransitionSystem {
    let mut children: Vec<BTreeMap<EventLabel, StateId>> = vec![BTreeMap::new()];
    let mut finals = BTreeSet::new();
    for trace in log.support() {
        let mut state = 0;
        for event in trace {
            state = match children[state].get(event) {
                Some(&next) => next,
                None => {
                    let next = children.len();
                    children.push(BTreeMap::new());
                    children[state].insert(event.clone(), next);
                    next
                }
            };
        }
        finals.insert(state);
    }
    let mut arcs = Vec::new();
    for (src, succ) in children.iter().enumerate() {
        for (event, dst) in succ {
            arcs.push((src, Some(event.clone()), *dst));
        }
    }
    let ts = TransitionSystem::new(
        children.len(),
        arcs,
        0,
        finals,
        log.alphabet().iter().cloned(),
    )
    .expect("prefix tree is always well-formed");
    // renumber in BFS order for reproducible ids
    let all: BTreeSet<StateId> = (0..ts.num_states).collect();
    ts.restrict_renumber(&all)
}

/// The minimal deterministic τ-free TS encoding the log: prefix tree with
/// subsequent minimization.
pub fn minimal_ts(log: &EventLog) -> TransitionSystem {
    build_prefix_tree(log)
        .minimize()
        .expect("prefix tree is deterministic and tau-free")
}
