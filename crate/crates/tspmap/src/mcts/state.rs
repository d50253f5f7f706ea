//! Search state shared across random restarts: the current tour, the best
//! tour ever seen, and the W/Q/M statistics that steer simulation.

use std::collections::HashMap;

use rand::Rng;

use crate::heatmap::HeatMap;
use crate::instance::{cycle_length, is_permutation, Instance, Tour};

use super::path::KOptPath;
use super::tour::TourOrder;

/// Applied-action improvements below this are treated as noise, both in the
/// 2-opt enumeration and in MCTS selection.
pub const IMPROVE_EPS: f64 = 1e-9;

/// Length is recomputed from scratch this often to stop floating-point
/// drift in the incremental updates.
const RESYNC_INTERVAL: u64 = 10_000;

/// The promising-edge graph with one weight cell per undirected edge, so
/// W stays exactly symmetric by construction.
pub(crate) struct CandidateGraph {
    /// Per-vertex (neighbor, edge id), sorted by neighbor index.
    pub adj: Vec<Vec<(u32, u32)>>,
    pub w: Vec<f64>,
    /// Per-vertex sum of incident W, kept in sync by weight updates so
    /// mean_w is O(1) in the sampling hot path.
    w_sum: Vec<f64>,
}

impl CandidateGraph {
    /// W is initialized to 100 * P over exactly the promising edges.
    fn from_heatmap(hm: &HeatMap) -> Self {
        let edges = hm.edges();
        let mut adj = vec![Vec::new(); hm.n()];
        let mut w = Vec::with_capacity(edges.len());
        for (id, &(i, j, p)) in edges.iter().enumerate() {
            w.push(100.0 * p);
            adj[i as usize].push((j, id as u32));
            adj[j as usize].push((i, id as u32));
        }
        for list in &mut adj {
            list.sort_unstable_by_key(|&(v, _)| v);
        }
        let w_sum = adj
            .iter()
            .map(|list| list.iter().map(|&(_, id)| w[id as usize]).sum())
            .collect();
        Self { adj, w, w_sum }
    }

    /// Adds `inc` to edge `id` and keeps both endpoint sums in sync.
    pub fn bump_w(&mut self, id: u32, u: u32, v: u32, inc: f64) {
        self.w[id as usize] += inc;
        self.w_sum[u as usize] += inc;
        self.w_sum[v as usize] += inc;
    }

    pub fn edge_id(&self, i: u32, j: u32) -> Option<u32> {
        self.adj[i as usize]
            .binary_search_by_key(&j, |&(v, _)| v)
            .ok()
            .map(|pos| self.adj[i as usize][pos].1)
    }

    /// Mean W over the stored promising edges at `b`.
    pub fn mean_w(&self, b: u32) -> f64 {
        let deg = self.adj[b as usize].len();
        if deg == 0 {
            return 0.0;
        }
        self.w_sum[b as usize] / deg as f64
    }
}

pub(crate) fn canon(i: u32, j: u32) -> (u32, u32) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

/// Everything one solve owns: tour, statistics matrices, counters.
pub struct SearchState<'a> {
    pub(crate) inst: &'a Instance,
    pub(crate) tour: TourOrder,
    pub(crate) length: f64,
    best_order: Vec<u32>,
    best_length: f64,
    pub(crate) cand: CandidateGraph,
    /// Q per promising edge, indexed by edge id; the fallback map holds the
    /// rare unpromising closing edges of examined forced closures.
    q_edge: Vec<u32>,
    /// sqrt(1 / (Q + 1)) per promising edge, maintained on Q updates so the
    /// per-candidate potential needs no square root.
    pub(crate) sqrt_inv_q1: Vec<f64>,
    q_extra: HashMap<(u32, u32), u32>,
    m_count: u64,
    applied: u64,
    pub(crate) improvements: u64,
    /// Endpoints of the edges changed by applied actions since the last
    /// clear; incremental 2-opt re-polish seeds its queue from them.
    pub touched: Vec<u32>,
    examined_log: Option<Vec<u32>>,
}

impl<'a> SearchState<'a> {
    pub fn new(inst: &'a Instance, hm: &HeatMap, initial: Tour) -> Self {
        let order = initial.order().to_vec();
        let length = cycle_length(inst, &order);
        let cand = CandidateGraph::from_heatmap(hm);
        let q_edge = vec![0; cand.w.len()];
        let sqrt_inv_q1 = vec![1.0; cand.w.len()];
        Self {
            inst,
            tour: TourOrder::new(order.clone()),
            length,
            best_order: order,
            best_length: length,
            cand,
            q_edge,
            sqrt_inv_q1,
            q_extra: HashMap::new(),
            m_count: 0,
            applied: 0,
            improvements: 0,
            touched: Vec::new(),
            examined_log: None,
        }
    }

    /// Jump to a fresh state; W, Q and M deliberately survive the jump.
    pub fn reset_tour(&mut self, tour: Tour) {
        let order = tour.order().to_vec();
        self.length = cycle_length(self.inst, &order);
        self.tour.set_order(order);
        self.note_best();
    }

    pub fn n(&self) -> usize {
        self.inst.n()
    }

    pub fn current_length(&self) -> f64 {
        self.length
    }

    pub fn current_order(&self) -> &[u32] {
        self.tour.order()
    }

    pub fn best_length(&self) -> f64 {
        self.best_length
    }

    pub fn best_tour(&self) -> Tour {
        Tour::new(self.best_order.clone(), self.inst.n()).expect("best tour stays valid")
    }

    /// Total number of simulated (examined) actions.
    pub fn simulations(&self) -> u64 {
        self.m_count
    }

    pub fn w_value(&self, i: usize, j: usize) -> f64 {
        self.cand
            .edge_id(i as u32, j as u32)
            .map(|id| self.cand.w[id as usize])
            .unwrap_or(0.0)
    }

    pub fn q_value(&self, i: usize, j: usize) -> u32 {
        match self.cand.edge_id(i as u32, j as u32) {
            Some(id) => self.q_edge[id as usize],
            None => *self.q_extra.get(&canon(i as u32, j as u32)).unwrap_or(&0),
        }
    }

    /// Records the k of every examined action; test instrumentation for the
    /// bookkeeping invariants.
    pub fn enable_examined_log(&mut self) {
        self.examined_log = Some(Vec::new());
    }

    pub fn examined_log(&self) -> Option<&[u32]> {
        self.examined_log.as_deref()
    }

    /// UCB-style potential of promising edge (b, j): normalized weight plus
    /// an exploration bonus that favors rarely examined edges. None when the
    /// edge is not promising.
    pub fn edge_potential(&self, b: u32, j: u32, alpha: f64) -> Option<f64> {
        let id = self.cand.edge_id(b, j)?;
        Some(self.potential(id, self.cand.w[id as usize], self.cand.mean_w(b), alpha))
    }

    #[inline]
    pub(crate) fn potential(&self, edge_id: u32, w: f64, mean_w: f64, alpha: f64) -> f64 {
        self.potential_ln(edge_id, w, mean_w, alpha, self.ln_m())
    }

    /// ln(M + 1), hoisted out of the per-candidate loop by the sampler.
    #[inline]
    pub(crate) fn ln_m(&self) -> f64 {
        ((self.m_count + 1) as f64).ln()
    }

    #[inline]
    pub(crate) fn potential_ln(
        &self,
        edge_id: u32,
        w: f64,
        mean_w: f64,
        alpha: f64,
        ln_m: f64,
    ) -> f64 {
        let q = self.q_edge[edge_id as usize];
        let explore = (ln_m / (q + 1) as f64).sqrt();
        w / mean_w + alpha * explore
    }

    /// Back-propagation shared by every examined action: bump M and the Q of
    /// each added edge.
    pub(crate) fn record_examined(&mut self, added: impl Iterator<Item = (u32, u32)>, k: u32) {
        self.m_count += 1;
        for (u, v) in added {
            match self.cand.edge_id(u, v) {
                Some(id) => {
                    let q = &mut self.q_edge[id as usize];
                    *q += 1;
                    self.sqrt_inv_q1[id as usize] = (1.0 / (*q + 1) as f64).sqrt();
                }
                None => *self.q_extra.entry(canon(u, v)).or_insert(0) += 1,
            }
        }
        if let Some(log) = self.examined_log.as_mut() {
            log.push(k);
        }
    }

    /// Replaces the current tour with the path traversal (the applied
    /// action), maintaining the length incrementally.
    pub(crate) fn apply_path(&mut self, path: &KOptPath, delta: f64) {
        let order = path.order(&self.tour);
        debug_assert!(is_permutation(&order, self.inst.n()));
        self.tour.set_order(order);
        self.length += delta;
        self.applied += 1;
        if self.applied % RESYNC_INTERVAL == 0 {
            self.length = cycle_length(self.inst, self.tour.order());
        }
        self.note_best();
    }

    pub(crate) fn note_best(&mut self) {
        if self.length < self.best_length {
            self.best_length = self.length;
            self.best_order.clear();
            self.best_order.extend_from_slice(self.tour.order());
        }
    }

    /// Weight boost on the added edges of an improving action.
    pub(crate) fn backprop_weights(
        &mut self,
        added: impl Iterator<Item = (u32, u32)>,
        l_old: f64,
        l_new: f64,
        beta: f64,
    ) {
        assert!(
            l_new < l_old,
            "weight back-propagation requires an improvement ({l_new} >= {l_old})"
        );
        let inc = beta * (((l_old - l_new) / l_old).exp() - 1.0);
        for (u, v) in added {
            if let Some(id) = self.cand.edge_id(u, v) {
                self.cand.bump_w(id, u, v, inc);
            }
        }
    }
}

/// Constructive start tour: from a random first vertex, each next vertex is
/// drawn among the unvisited with probability proportional to exp(P), where
/// absent heat-map entries count as P = 0.
pub fn init_state(inst: &Instance, hm: &HeatMap, rng: &mut impl Rng) -> Tour {
    let n = inst.n();
    let first = rng.random_range(0..n) as u32;
    let mut order = Vec::with_capacity(n);
    order.push(first);
    let mut unvisited: Vec<u32> = (0..n as u32).filter(|&v| v != first).collect();
    let mut slot = vec![usize::MAX; n];
    for (i, &v) in unvisited.iter().enumerate() {
        slot[v as usize] = i;
    }
    let mut cur = first;
    while !unvisited.is_empty() {
        // Split the softmax into the promising neighbors of cur (weight
        // exp(P)) and everything else (weight exp(0) = 1).
        let prom: Vec<(u32, f64)> = hm
            .neighbors(cur as usize)
            .iter()
            .filter(|&&(j, _)| slot[j as usize] != usize::MAX)
            .map(|&(j, p)| (j, p.exp()))
            .collect();
        let prom_mass: f64 = prom.iter().map(|&(_, w)| w).sum();
        let rest = unvisited.len() - prom.len();
        let total = prom_mass + rest as f64;
        let x = rng.random::<f64>() * total;
        let next = if x < prom_mass {
            let mut acc = 0.0;
            let mut chosen = prom[prom.len() - 1].0;
            for &(j, w) in &prom {
                acc += w;
                if x < acc {
                    chosen = j;
                    break;
                }
            }
            chosen
        } else {
            // Uniform over the non-promising unvisited, by rejection.
            loop {
                let v = unvisited[rng.random_range(0..unvisited.len())];
                if !prom.iter().any(|&(j, _)| j == v) {
                    break v;
                }
            }
        };
        let i = slot[next as usize];
        let last = *unvisited.last().unwrap();
        unvisited.swap_remove(i);
        slot[last as usize] = i;
        slot[next as usize] = usize::MAX;
        order.push(next);
        cur = next;
    }
    Tour::new(order, n).expect("construction visits every vertex once")
}
