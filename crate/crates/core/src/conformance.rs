//! Fitness and precision measurement.
//!
//! Precision uses the short-circuit entropy of deterministic automata: the
//! natural log of the spectral radius of the adjacency matrix after adding
//! one arc from every final state back to the initial state. The measure is
//! monotone: the fewer model traces outside the log, the higher the value.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::event_log::{EventLabel, EventLog};
use crate::petri_net::NetSystem;
use crate::transition_system::{minimal_ts, StateId, TransitionSystem};

/// Relative tolerance for the power iteration.
pub const POWER_TOL: f64 = 1e-9;
/// Iteration cap for the power iteration.
pub const POWER_MAX_ITERS: usize = 10_000;

/// Conformance summary mirroring the usual report columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformanceSummary {
    /// Share of distinct log traces accepted by the model (1.0 for an empty
    /// log by convention).
    pub replay_fitness: f64,
    /// Frequency-weighted variant of replay fitness; informational only.
    pub weighted_fitness: f64,
    /// Short-circuit entropy of the log language (0 when degenerate).
    pub entropy_log: f64,
    pub entropy_model: f64,
    pub entropy_intersection: f64,
    /// entropy_intersection / entropy_model; `None` when the model language
    /// is empty (undefined, never 0/0).
    pub precision: Option<f64>,
    /// entropy_intersection / entropy_log, same conventions.
    pub fitness_entropy: Option<f64>,
}

/// Share of distinct log traces the system accepts. 1.0 for an empty log.
pub fn replay_fitness(sys: &NetSystem, log: &EventLog, max_states: usize) -> Result<f64> {
    if log.distinct_count() == 0 {
        return Ok(1.0);
    }
    let rg = sys.reachability_graph(max_states)?;
    let accepted = log.support().filter(|t| rg.ts.accepts(t)).count();
    Ok(accepted as f64 / log.distinct_count() as f64)
}

/// Short-circuit entropy of a deterministic τ-free automaton.
///
/// The TS is trimmed to live states first (language-preserving). Errors on
/// an empty language, where the measure is undefined.
pub fn entropy(ts: &TransitionSystem) -> Result<f64> {
    if !ts.is_tau_free() || !ts.is_deterministic() {
        return Err(Error::Precondition(
            "entropy requires a deterministic tau-free automaton".into(),
        ));
    }
    entropy_trimmed(&ts.trim())?.ok_or_else(|| {
        Error::Precondition("entropy of the empty language is undefined".into())
    })
}

/// `None` when the language is empty.
fn entropy_trimmed(ts: &TransitionSystem) -> Result<Option<f64>> {
    if ts.finals().is_empty() {
        return Ok(None);
    }
    let n = ts.num_states();
    let mut adjacency = vec![vec![0.0f64; n]; n];
    for (src, _, dst) in ts.arcs() {
        adjacency[*src][*dst] += 1.0;
    }
    for &f in ts.finals() {
        adjacency[f][ts.initial()] += 1.0;
    }
    let rho = spectral_radius_power(&adjacency)?;
    // the trimmed short-circuited graph always has a cycle, so rho >= 1
    Ok(Some(rho.max(1.0).ln()))
}

/// Spectral radius of a non-negative matrix by power iteration on A + I
/// (the shift breaks periodicity; the radius shifts by exactly one).
pub fn spectral_radius_power(matrix: &[Vec<f64>]) -> Result<f64> {
    let n = matrix.len();
    if n == 0 {
        return Ok(0.0);
    }
    let mut v = vec![1.0f64; n];
    for _ in 0..POWER_MAX_ITERS {
        let mut w = v.clone(); // the +I term
        for (i, row) in matrix.iter().enumerate() {
            for (j, &a) in row.iter().enumerate() {
                w[j] += a * v[i];
            }
        }
        let lambda = w.iter().cloned().fold(0.0f64, f64::max);
        if lambda == 0.0 {
            return Ok(0.0);
        }
        for x in &mut w {
            *x /= lambda;
        }
        // converged when the iterate is (relatively) a fixed point; the
        // raw norm estimate can plateau transiently, so compare vectors
        let residual = w
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        v = w;
        if residual <= POWER_TOL {
            return Ok(lambda - 1.0);
        }
    }
    Err(Error::NonConvergence(POWER_MAX_ITERS))
}

/// Product automaton accepting the intersection of two deterministic τ-free
/// languages, trimmed and minimized.
pub fn intersect(a: &TransitionSystem, b: &TransitionSystem) -> Result<TransitionSystem> {
    for ts in [a, b] {
        if !ts.is_tau_free() || !ts.is_deterministic() {
            return Err(Error::Precondition(
                "intersection requires deterministic tau-free automata".into(),
            ));
        }
    }
    let mut ids: HashMap<(StateId, StateId), StateId> = HashMap::new();
    let mut pairs: Vec<(StateId, StateId)> = Vec::new();
    let mut arcs = Vec::new();
    ids.insert((a.initial(), b.initial()), 0);
    pairs.push((a.initial(), b.initial()));
    let mut queue = VecDeque::from([0usize]);
    while let Some(id) = queue.pop_front() {
        let (sa, sb) = pairs[id];
        let mut succ_a: BTreeMap<&EventLabel, StateId> = BTreeMap::new();
        for (label, dst) in a.outgoing(sa) {
            succ_a.insert(label.as_ref().expect("tau-free"), *dst);
        }
        for (label, dst_b) in b.outgoing(sb) {
            let event = label.as_ref().expect("tau-free");
            if let Some(&dst_a) = succ_a.get(event) {
                let pair = (dst_a, *dst_b);
                let next_id = *ids.entry(pair).or_insert_with(|| {
                    pairs.push(pair);
                    queue.push_back(pairs.len() - 1);
                    pairs.len() - 1
                });
                arcs.push((id, Some(event.clone()), next_id));
            }
        }
    }
    let finals: BTreeSet<StateId> = pairs
        .iter()
        .enumerate()
        .filter(|(_, (sa, sb))| a.is_final(*sa) && b.is_final(*sb))
        .map(|(i, _)| i)
        .collect();
    let alphabet: Vec<EventLabel> = a
        .alphabet()
        .intersection(b.alphabet())
        .cloned()
        .collect();
    TransitionSystem::new(pairs.len(), arcs, 0, finals, alphabet)?.minimize()
}

/// Language equality of two deterministic τ-free automata, by simultaneous
/// walk over the trimmed automata (missing transitions are inequivalent to
/// present ones because trimmed states are all live).
pub fn language_equal(a: &TransitionSystem, b: &TransitionSystem) -> Result<bool> {
    for ts in [a, b] {
        if !ts.is_tau_free() || !ts.is_deterministic() {
            return Err(Error::Precondition(
                "language comparison requires deterministic tau-free automata".into(),
            ));
        }
    }
    let a = a.trim();
    let b = b.trim();
    let mut seen: BTreeSet<(StateId, StateId)> = BTreeSet::new();
    let mut queue = VecDeque::from([(a.initial(), b.initial())]);
    seen.insert((a.initial(), b.initial()));
    while let Some((sa, sb)) = queue.pop_front() {
        if a.is_final(sa) != b.is_final(sb) {
            return Ok(false);
        }
        let mut succ_a: BTreeMap<&EventLabel, StateId> = BTreeMap::new();
        for (label, dst) in a.outgoing(sa) {
            succ_a.insert(label.as_ref().expect("tau-free"), *dst);
        }
        let mut succ_b: BTreeMap<&EventLabel, StateId> = BTreeMap::new();
        for (label, dst) in b.outgoing(sb) {
            succ_b.insert(label.as_ref().expect("tau-free"), *dst);
        }
        let keys: BTreeSet<&&EventLabel> = succ_a.keys().chain(succ_b.keys()).collect();
        for event in keys {
            match (succ_a.get(*event), succ_b.get(*event)) {
                (Some(&da), Some(&db)) => {
                    if seen.insert((da, db)) {
                        queue.push_back((da, db));
                    }
                }
                // one side has a live continuation the other lacks
                _ => return Ok(false),
            }
        }
    }
    Ok(true)
}

/// Entropy-based precision of a net system against a log.
///
/// Builds the minimal log automaton, the τ-closure of the reachability
/// graph, and their intersection, then compares entropies. Degenerate
/// languages follow the documented conventions: an empty model language
/// leaves precision undefined; a zero-entropy denominator yields 1 exactly
/// when the compared languages coincide.
pub fn precision(sys: &NetSystem, log: &EventLog, max_states: usize) -> Result<ConformanceSummary> {
    let log_dfa = minimal_ts(log);
    let rg = sys.reachability_graph(max_states)?;
    let model_dfa = rg.ts.tau_closure(max_states)?;
    let inter = intersect(&log_dfa, &model_dfa)?;

    let h_log = entropy_trimmed(&log_dfa)?;
    let h_model = entropy_trimmed(&model_dfa)?;
    let h_inter = entropy_trimmed(&inter)?.unwrap_or(0.0);

    let ratio = |denominator: Option<f64>,
                 reference: &TransitionSystem|
     -> Result<Option<f64>> {
        match denominator {
            None => Ok(None),
            Some(h) if h > POWER_TOL => Ok(Some((h_inter / h).clamp(0.0, 1.0))),
            Some(_) => Ok(Some(if language_equal(&inter, reference)? {
                1.0
            } else {
                0.0
            })),
        }
    };
    let precision = ratio(h_model, &model_dfa)?;
    let fitness_entropy = ratio(h_log, &log_dfa)?;

    let distinct = log.distinct_count();
    let (replay, weighted) = if distinct == 0 {
        (1.0, 1.0)
    } else {
        let mut accepted = 0usize;
        let mut weight_total = 0u64;
        let mut weight_accepted = 0u64;
        for (trace, count) in log.traces() {
            weight_total += count;
            if model_dfa.accepts(trace) {
                accepted += 1;
                weight_accepted += count;
            }
        }
        (
            accepted as f64 / distinct as f64,
            weight_accepted as f64 / weight_total as f64,
        )
    };

    Ok(ConformanceSummary {
        replay_fitness: replay,
        weighted_fitness: weighted,
        entropy_log: h_log.unwrap_or(0.0),
        entropy_model: h_model.unwrap_or(0.0),
        entropy_intersection: h_inter,
        precision,
        fitness_entropy,
    })
}

impl ConformanceSummary {
    /// Fixed-order machine-parsable key=value block.
    pub fn to_kv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "undefined".into(), |x| format!("{x:.6}"));
        format!(
            "replay_fitness={:.6}\nweighted_fitness={:.6}\nentropy_log={:.6}\nentropy_model={:.6}\nentropy_intersection={:.6}\nprecision={}\nfitness_entropy={}\n",
            self.replay_fitness,
            self.weighted_fitness,
            self.entropy_log,
            self.entropy_model,
            self.entropy_intersection,
            opt(self.precision),
            opt(self.fitness_entropy),
        )
    }
}
