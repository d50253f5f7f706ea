//! Monte-Carlo tree search over compact k-opt actions, guided by a heat map.
//!
//! One solve is a sequence of random restarts. Each restart builds a fresh
//! tour by softmax-guided construction, polishes it with promising-edge
//! 2-opt, then repeatedly samples k-opt actions from a UCB-style policy:
//! the first improving action in a pool is applied immediately and boosts
//! the weights of its added edges; exhausting the pool without improvement
//! triggers the next restart. The learned statistics survive restarts.

mod path;
mod sim;
mod state;
mod tour;
mod two_opt;

pub use path::{action_delta, Action};
pub use sim::{mcts_round, sample_action, RoundOutcome, SampledAction};
pub use state::{init_state, SearchState, IMPROVE_EPS};
pub use two_opt::{enumerate_2opt, polish_2opt_from};

use std::time::Instant;

use rand::Rng;

use crate::heatmap::HeatMap;
use crate::instance::Instance;

/// Search hyper-parameters. The defaults work across sizes; only the budget
/// needs tuning per use case.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Params {
    /// Exploration strength in the selection potential.
    pub alpha: f64,
    /// Weight-boost strength on improving actions.
    pub beta: f64,
    /// Pool bound per restart is `h_factor * n` sampled actions.
    pub h_factor: f64,
    /// Hard cap on sub-decisions per action.
    pub k_max: usize,
    /// Minimum edge weight to qualify as an extension candidate.
    pub w_candidate_min: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 10.0,
            h_factor: 10.0,
            k_max: 10,
            w_candidate_min: 1.0,
        }
    }
}

/// Default wall-clock budget in milliseconds for an n-vertex instance.
pub fn default_time_ms(n: usize) -> u64 {
    10 * n as u64
}

/// Stopping rule for one solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Budget {
    /// Wall-clock milliseconds. Checked between restarts and periodically
    /// inside the sampling and 2-opt loops.
    TimeMs(u64),
    /// Exact number of restarts; fully deterministic for a fixed seed.
    Restarts(u64),
}

/// Counters describing one finished solve.
#[derive(Clone, Copy, Debug, Default)]
pub struct Stats {
    pub restarts: u64,
    /// Total sampled (examined) actions across all restarts.
    pub examined: u64,
    /// Applied improving actions, 2-opt moves included.
    pub improvements: u64,
    /// Milliseconds until the best tour was first reached; 0 when running
    /// under a restart budget.
    pub time_to_best_ms: u64,
}

/// Best tour found within the budget, with its length and counters.
#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub tour: crate::instance::Tour,
    pub length: f64,
    pub stats: Stats,
}

/// Runs the full search on `inst` under `hm` until the budget expires.
pub fn solve(
    inst: &Instance,
    hm: &HeatMap,
    params: &Params,
    budget: Budget,
    rng: &mut impl Rng,
) -> SolveOutcome {
    let mut stats = Stats::default();
    let mut state: Option<SearchState<'_>> = None;

    // Instant is only touched under a time budget, which keeps the restart
    // mode usable on targets without a monotonic clock.
    let clock = match budget {
        Budget::TimeMs(_) => Some(Instant::now()),
        Budget::Restarts(_) => None,
    };
    let expired = |clock: &Option<Instant>| match (budget, clock) {
        (Budget::TimeMs(ms), Some(start)) => start.elapsed().as_millis() as u64 >= ms,
        _ => false,
    };

    loop {
        match budget {
            Budget::Restarts(r) => {
                if stats.restarts >= r {
                    break;
                }
            }
            Budget::TimeMs(_) => {
                if stats.restarts > 0 && expired(&clock) {
                    break;
                }
            }
        }
        stats.restarts += 1;

        let tour = init_state(inst, hm, rng);
        let st = match state.as_mut() {
            Some(st) => {
                st.reset_tour(tour);
                st
            }
            None => state.insert(SearchState::new(inst, hm, tour)),
        };

        let best_before = st.best_length();
        let mut deadline = || expired(&clock);
        st.improvements += enumerate_2opt(st, Some(&mut deadline));
        loop {
            if expired(&clock) {
                break;
            }
            st.touched.clear();
            let mut deadline = || expired(&clock);
            match mcts_round(st, params, rng, Some(&mut deadline)) {
                RoundOutcome::Improved => {
                    // Only the endpoints of the applied action can have
                    // gained 2-opt moves; re-polish from them alone.
                    let seeds = std::mem::take(&mut st.touched);
                    let mut deadline = || expired(&clock);
                    st.improvements +=
                        two_opt::polish_2opt_from(st, &seeds, Some(&mut deadline));
                    st.touched = seeds;
                }
                RoundOutcome::PoolExhausted => break,
            }
        }
        if st.best_length() < best_before {
            if let Some(start) = &clock {
                stats.time_to_best_ms = start.elapsed().as_millis() as u64;
            }
        }
        if expired(&clock) {
            break;
        }
    }

    let st = state.expect("at least one restart always runs");
    stats.examined = st.simulations();
    stats.improvements = st.improvements;
    SolveOutcome {
        tour: st.best_tour(),
        length: st.best_length(),
        stats,
    }
}
