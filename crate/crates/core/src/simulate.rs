//! Random trace generation by seeded token-game playout.

use rand::prelude::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::event_log::{EventLog, Trace};
use crate::petri_net::NetSystem;

/// Default per-trace step cap.
pub const DEFAULT_MAX_STEPS: usize = 10_000;

/// Attempts per trace before giving up on ever hitting a final marking.
const MAX_ATTEMPTS: usize = 100;

/// Plays the token game `n_traces` times with a seeded RNG, choosing
/// uniformly among enabled transitions, stopping a trace at the first
/// final marking reached. Silent transitions fire but emit no event.
///
/// A playout exceeding `max_steps` is discarded and retried; after
/// [`MAX_ATTEMPTS`] failed attempts the whole run errors.
pub fn simulate(
    sys: &NetSystem,
    n_traces: usize,
    seed: u64,
    max_steps: usize,
) -> Result<EventLog> {
    if max_steps == 0 {
        return Err(Error::Precondition("max_steps must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log = EventLog::empty();
    for _ in 0..n_traces {
        let mut done = false;
        for _ in 0..MAX_ATTEMPTS {
            if let Some(trace) = playout(sys, &mut rng, max_steps) {
                log.add_trace(trace, 1);
                done = true;
                break;
            }
        }
        if !done {
            return Err(Error::FinalUnreachable(max_steps));
        }
    }
    Ok(log)
}

/// One playout; `None` when no final marking was reached within the cap
/// (including deadlocks in non-final markings).
fn playout(sys: &NetSystem, rng: &mut ChaCha8Rng, max_steps: usize) -> Option<Trace> {
    let mut marking = sys.initial.clone();
    let mut trace = Trace::new();
    for _ in 0..max_steps {
        if sys.finals.contains(&marking) {
            return Some(trace);
        }
        let enabled: Vec<usize> = (0..sys.net.num_transitions())
            .filter(|&t| sys.net.is_enabled(&marking, t))
            .collect();
        let &t = enabled.choose(rng)?;
        marking = sys.net.fire(&marking, t).expect("enabled");
        if let Some(label) = sys.net.label(t) {
            trace.push(label.clone());
        }
    }
    sys.finals.contains(&marking).then_some(trace)
}
