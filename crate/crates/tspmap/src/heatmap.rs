//! Sparse symmetric edge-probability maps, the provider abstraction that
//! stands in for a learned model, and pruning of unpromising edges.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::grid::SpatialGrid;
use crate::instance::Instance;
use crate::{malformed, Error, Result};

/// Sparse symmetric matrix of edge probabilities. An absent entry means the
/// edge is unpromising (P = 0). Stored as per-vertex adjacency sorted by
/// neighbor, mirrored in both directions, so symmetry holds by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct HeatMap {
    n: usize,
    adj: Vec<Vec<(u32, f64)>>,
}

impl HeatMap {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            adj: vec![Vec::new(); n],
        }
    }

    /// Complete map with every edge at probability `p`; handy as the "no
    /// pruning" reference in tests and demos.
    pub fn complete(n: usize, p: f64) -> Self {
        let mut adj = vec![Vec::with_capacity(n - 1); n];
        for i in 0..n as u32 {
            for j in 0..n as u32 {
                if i != j {
                    adj[i as usize].push((j, p));
                }
            }
        }
        Self { n, adj }
    }

    /// Builds from directed entries. When both orientations of an edge are
    /// present the larger probability wins; exact duplicates of the same
    /// orientation must agree to within 1e-12.
    pub fn from_entries(
        n: usize,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut directed: HashMap<(u32, u32), f64> = HashMap::new();
        for (i, j, p) in entries {
            if i >= n || j >= n {
                return Err(Error::IndexOutOfRange { index: i.max(j), n });
            }
            if i == j {
                return Err(malformed("heat-map", format!("self-loop on vertex {i}")));
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::ProbabilityOutOfRange(p));
            }
            match directed.entry((i as u32, j as u32)) {
                std::collections::hash_map::Entry::Occupied(mut e) => {
                    let old = *e.get();
                    if (old - p).abs() > 1e-12 {
                        return Err(Error::ConflictingDuplicate { i, j, a: old, b: p });
                    }
                    e.insert(old.max(p));
                }
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(p);
                }
            }
        }
        let mut canonical: HashMap<(u32, u32), f64> = HashMap::new();
        for ((i, j), p) in directed {
            let key = if i < j { (i, j) } else { (j, i) };
            let slot = canonical.entry(key).or_insert(0.0);
            *slot = slot.max(p);
        }
        let mut adj = vec![Vec::new(); n];
        for (&(i, j), &p) in &canonical {
            adj[i as usize].push((j, p));
            adj[j as usize].push((i, p));
        }
        for list in &mut adj {
            list.sort_unstable_by_key(|&(v, _)| v);
        }
        Ok(Self { n, adj })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// P for edge (i, j); 0 when absent. Symmetric in its arguments.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self.adj[i].binary_search_by_key(&(j as u32), |&(v, _)| v) {
            Ok(pos) => self.adj[i][pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.adj[i]
            .binary_search_by_key(&(j as u32), |&(v, _)| v)
            .is_ok()
    }

    /// Stored neighbors of `i` with their probabilities, sorted by index.
    pub fn neighbors(&self, i: usize) -> &[(u32, f64)] {
        &self.adj[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    pub fn entry_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Canonical edge list, i < j, sorted lexicographically.
    pub fn edges(&self) -> Vec<(u32, u32, f64)> {
        let mut out = Vec::with_capacity(self.entry_count());
        for i in 0..self.n {
            for &(j, p) in &self.adj[i] {
                if (i as u32) < j {
                    out.push((i as u32, j, p));
                }
            }
        }
        out
    }
}

/// Anything that can turn an instance in the unit square into a heat map.
/// Implementations must be deterministic for a fixed configuration.
pub trait HeatMapProvider: Sync {
    fn heatmap(&self, inst: &Instance) -> Result<HeatMap>;
    fn name(&self) -> &'static str;
}

/// Default number of nearest neighbors considered per vertex.
pub const DEFAULT_KAPPA: usize = 10;

/// Deterministic stand-in for a learned model: the r-th nearest neighbor of
/// each vertex contributes 2^-r, symmetrized by max, which concentrates
/// probability mass on short edges.
pub struct SurrogateProvider {
    pub kappa: usize,
}

impl Default for SurrogateProvider {
    fn default() -> Self {
        Self {
            kappa: DEFAULT_KAPPA,
        }
    }
}

impl HeatMapProvider for SurrogateProvider {
    fn heatmap(&self, inst: &Instance) -> Result<HeatMap> {
        surrogate_heatmap(inst, self.kappa)
    }

    fn name(&self) -> &'static str {
        "surrogate"
    }
}

/// Ablation provider: same sparsity pattern as the surrogate but every
/// stored edge gets probability 0.5, removing all rank information.
pub struct UniformProvider {
    pub kappa: usize,
}

impl Default for UniformProvider {
    fn default() -> Self {
        Self {
            kappa: DEFAULT_KAPPA,
        }
    }
}

impl HeatMapProvider for UniformProvider {
    fn heatmap(&self, inst: &Instance) -> Result<HeatMap> {
        let entries = kappa_nn_entries(inst, self.kappa)?
            .into_iter()
            .map(|(i, j, _)| (i, j, 0.5));
        HeatMap::from_entries(inst.n(), entries)
    }

    fn name(&self) -> &'static str {
        "uniform"
    }
}

pub fn surrogate_heatmap(inst: &Instance, kappa: usize) -> Result<HeatMap> {
    HeatMap::from_entries(inst.n(), kappa_nn_entries(inst, kappa)?)
}

/// Directed (i, j_r, 2^-r) entries for the kappa nearest neighbors of every
/// vertex, ties broken by the lowest index.
fn kappa_nn_entries(inst: &Instance, kappa: usize) -> Result<Vec<(usize, usize, f64)>> {
    if inst.n() < 2 {
        return Err(Error::TooFewVertices {
            min: 2,
            got: inst.n(),
        });
    }
    if kappa < 1 {
        return Err(malformed("heat-map", "kappa must be at least 1"));
    }
    let grid = SpatialGrid::build(inst.coords(), kappa.max(4));
    let mut entries = Vec::with_capacity(inst.n() * kappa);
    for i in 0..inst.n() {
        for (r, &j) in grid.knn(i, kappa).iter().enumerate() {
            entries.push((i, j as usize, 0.5f64.powi(r as i32 + 1)));
        }
    }
    Ok(entries)
}

/// Removes entries below `epsilon` (strict), then re-inserts nearest-neighbor
/// edges at P = epsilon for any vertex left with fewer than two incident
/// edges, so tour initialization always has somewhere to go.
pub fn prune_unpromising(inst: &Instance, hm: &HeatMap, epsilon: f64) -> HeatMap {
    let n = hm.n();
    let mut canonical: HashMap<(u32, u32), f64> = HashMap::new();
    for (i, j, p) in hm.edges() {
        if p >= epsilon {
            canonical.insert((i, j), p);
        }
    }
    let mut degree = vec![0usize; n];
    for &(i, j) in canonical.keys() {
        degree[i as usize] += 1;
        degree[j as usize] += 1;
    }
    for v in 0..n {
        if degree[v] >= 2 {
            continue;
        }
        let mut near: Vec<(f64, u32)> = (0..n)
            .filter(|&u| u != v)
            .map(|u| (inst.dist(v, u), u as u32))
            .collect();
        near.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        for (_, u) in near {
            if degree[v] >= 2 {
                break;
            }
            let key = canon(v as u32, u);
            if canonical.contains_key(&key) {
                continue;
            }
            canonical.insert(key, epsilon);
            degree[v] += 1;
            degree[u as usize] += 1;
        }
    }
    let entries = canonical
        .into_iter()
        .map(|((i, j), p)| (i as usize, j as usize, p));
    HeatMap::from_entries(n, entries).expect("pruned entries are valid")
}

fn canon(i: u32, j: u32) -> (u32, u32) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

/// Heat-map file: `n <count>`, then `<i> <j> <p>` per edge. The writer emits
/// canonical i < j entries in lexicographic order.
pub fn write_heatmap(hm: &HeatMap, path: &Path) -> Result<()> {
    let mut out = format!("n {}\n", hm.n());
    for (i, j, p) in hm.edges() {
        out.push_str(&format!("{i} {j} {p:.16e}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn load_heatmap(path: &Path, n: usize) -> Result<HeatMap> {
    let text = fs::read_to_string(path)?;
    parse_heatmap(&text, n)
}

pub fn parse_heatmap(text: &str, n: usize) -> Result<HeatMap> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| malformed("heat-map", "empty file"))?;
    let declared: usize = header
        .trim()
        .strip_prefix("n ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| malformed("heat-map", format!("bad header {header:?}")))?;
    if declared != n {
        return Err(Error::CountMismatch {
            expected: n,
            found: declared,
        });
    }
    let mut entries = Vec::new();
    for line in lines {
        let mut it = line.split_whitespace();
        let i: usize = parse_tok(it.next(), line)?;
        let j: usize = parse_tok(it.next(), line)?;
        let p: f64 = parse_tok(it.next(), line)?;
        if !p.is_finite() {
            return Err(Error::NonFinite(line.to_string()));
        }
        entries.push((i, j, p));
    }
    HeatMap::from_entries(n, entries)
}

fn parse_tok<T: std::str::FromStr>(tok: Option<&str>, line: &str) -> Result<T> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| malformed("heat-map", format!("bad edge line {line:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate_instance, seeded_rng};

    #[test]
    fn surrogate_two_vertices() {
        let inst = Instance::from_coords(vec![(0.1, 0.1), (0.9, 0.9)]).unwrap();
        let hm = surrogate_heatmap(&inst, 3).unwrap();
        assert_eq!(hm.entry_count(), 1);
        assert_eq!(hm.get(0, 1), 0.5);
    }

    #[test]
    fn surrogate_square_corners() {
        // Unit square, two exactly tied neighbors per corner; ties resolve
        // to the lowest index, ranks decided by hand:
        //   from 0: 1 then 2; from 1: 0 then 3; from 2: 0 then 3;
        //   from 3: 1 then 2.
        // Max-symmetrization then gives the side (2,3) only rank-2 mass.
        let inst = Instance::from_coords(vec![
            (0.0, 0.0),
            (1.0, 0.0),
            (0.0, 1.0),
            (1.0, 1.0),
        ])
        .unwrap();
        let hm = surrogate_heatmap(&inst, 2).unwrap();
        assert_eq!(hm.get(0, 1), 0.5);
        assert_eq!(hm.get(0, 2), 0.5);
        assert_eq!(hm.get(1, 3), 0.5);
        assert_eq!(hm.get(2, 3), 0.25);
        assert_eq!(hm.get(0, 3), 0.0);
        assert_eq!(hm.get(1, 2), 0.0);
    }

    #[test]
    fn surrogate_collinear_ranks() {
        let coords = (0..4).map(|i| (i as f64 / 3.0, 0.5)).collect();
        let inst = Instance::from_coords(coords).unwrap();
        let hm = surrogate_heatmap(&inst, 2).unwrap();
        assert_eq!(hm.get(0, 1), 0.5);
        assert_eq!(hm.get(1, 2), 0.5);
        assert_eq!(hm.get(2, 3), 0.5);
        assert_eq!(hm.get(0, 2), 0.25);
        assert_eq!(hm.get(1, 3), 0.25);
        assert_eq!(hm.get(0, 3), 0.0);
        assert!(!hm.contains(0, 3));
    }

    #[test]
    fn surrogate_values_capped_at_half() {
        let inst = generate_instance(40, &mut seeded_rng(5)).unwrap();
        let hm = surrogate_heatmap(&inst, 6).unwrap();
        for (_, _, p) in hm.edges() {
            assert!(p > 0.0 && p <= 0.5);
        }
    }

    #[test]
    fn from_entries_max_symmetrizes_orientations() {
        let hm = HeatMap::from_entries(2, vec![(0, 1, 0.3), (1, 0, 0.5)]).unwrap();
        assert_eq!(hm.get(0, 1), 0.5);
        assert_eq!(hm.get(1, 0), 0.5);
    }

    #[test]
    fn from_entries_rejects_conflicting_duplicates() {
        let err = HeatMap::from_entries(2, vec![(0, 1, 0.3), (0, 1, 0.5)]).unwrap_err();
        assert!(matches!(err, Error::ConflictingDuplicate { .. }));
    }

    #[test]
    fn from_entries_rejects_bad_probability_and_index() {
        assert!(matches!(
            HeatMap::from_entries(3, vec![(0, 1, 1.5)]),
            Err(Error::ProbabilityOutOfRange(_))
        ));
        assert!(matches!(
            HeatMap::from_entries(3, vec![(0, 5, 0.5)]),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn empty_edge_list_loads() {
        let hm = parse_heatmap("n 4\n", 4).unwrap();
        assert_eq!(hm.entry_count(), 0);
    }

    #[test]
    fn heatmap_round_trip() {
        let inst = generate_instance(30, &mut seeded_rng(8)).unwrap();
        let hm = surrogate_heatmap(&inst, 5).unwrap();
        let dir = std::env::temp_dir().join("tspmap-hm-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("map.txt");
        write_heatmap(&hm, &path).unwrap();
        let back = load_heatmap(&path, 30).unwrap();
        assert_eq!(hm, back);
    }

    #[test]
    fn prune_drops_small_and_keeps_threshold() {
        let inst = generate_instance(6, &mut seeded_rng(2)).unwrap();
        // Give every vertex enough surviving degree that the floor is a
        // no-op, plus one tiny entry that must vanish.
        let mut entries = Vec::new();
        for i in 0..6usize {
            for j in (i + 1)..6 {
                entries.push((i, j, 1e-4));
            }
        }
        entries[0].2 = 1e-5;
        let hm = HeatMap::from_entries(6, entries).unwrap();
        let pruned = prune_unpromising(&inst, &hm, 1e-4);
        assert_eq!(pruned.get(0, 2), 1e-4); // exactly at threshold: retained
        for v in 0..6 {
            assert!(pruned.degree(v) >= 2);
        }
    }

    #[test]
    fn prune_identity_when_nothing_below_threshold() {
        let inst = generate_instance(12, &mut seeded_rng(3)).unwrap();
        let hm = surrogate_heatmap(&inst, 4).unwrap();
        // Surrogate values are >= 2^-4, far above the threshold, and kappa=4
        // guarantees degree >= 2 everywhere.
        let pruned = prune_unpromising(&inst, &hm, 1e-4);
        assert_eq!(pruned, hm);
    }

    #[test]
    fn prune_floor_reinserts_nearest_edges() {
        let inst = Instance::from_coords(vec![
            (0.0, 0.0),
            (0.1, 0.0),
            (0.5, 0.5),
            (0.9, 1.0),
        ])
        .unwrap();
        let hm = HeatMap::from_entries(4, vec![(0, 1, 1e-6), (2, 3, 0.9)]).unwrap();
        let pruned = prune_unpromising(&inst, &hm, 1e-4);
        for v in 0..4 {
            assert!(pruned.degree(v) >= 2, "vertex {v}");
        }
        // Re-inserted edges carry exactly the threshold probability.
        assert_eq!(pruned.get(0, 1), 1e-4);
    }

    #[test]
    fn symmetry_of_queries() {
        let inst = generate_instance(25, &mut seeded_rng(14)).unwrap();
        let hm = surrogate_heatmap(&inst, 5).unwrap();
        for i in 0..25 {
            for j in 0..25 {
                assert_eq!(hm.get(i, j), hm.get(j, i));
            }
        }
    }
}
