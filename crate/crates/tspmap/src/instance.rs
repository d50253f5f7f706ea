//! Euclidean TSP instances, tours, and the reference solvers used as
//! baselines and test oracles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Deterministic generator: the same seed yields the same stream on every
/// platform, which everything downstream relies on for reproducibility.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Record of the affine map applied when loading coordinates that fall
/// outside the unit square. Lengths computed on the normalized instance can
/// be reported in original units via [`Instance::denormalize_length`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normalization {
    pub scale: f64,
    pub x_min: f64,
    pub y_min: f64,
}

/// A 2-D Euclidean TSP instance with coordinates in the unit square.
///
/// Distances are computed on demand from the coordinates; no distance matrix
/// is ever materialized, so instances with tens of thousands of vertices stay
/// cheap to hold.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    coords: Vec<(f64, f64)>,
    norm: Option<Normalization>,
}

impl Instance {
    /// Wraps a coordinate list. At least two vertices are required (sampled
    /// sub-instances can be that small); coordinates must be finite.
    pub fn from_coords(coords: Vec<(f64, f64)>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::TooFewVertices {
                min: 2,
                got: coords.len(),
            });
        }
        for &(x, y) in &coords {
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::NonFinite(format!("({x}, {y})")));
            }
        }
        Ok(Self { coords, norm: None })
    }

    /// Min-max normalizes out-of-square coordinates into the unit square with
    /// a uniform scale (so the geometry is preserved), keeping the record
    /// needed to report lengths in original units. Coordinates already inside
    /// the square are left untouched.
    pub fn normalized(coords: Vec<(f64, f64)>) -> Result<Self> {
        let inst = Self::from_coords(coords)?;
        let inside = inst
            .coords
            .iter()
            .all(|&(x, y)| (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y));
        if inside {
            return Ok(inst);
        }
        let xs = inst.coords.iter().map(|c| c.0);
        let ys = inst.coords.iter().map(|c| c.1);
        let x_min = xs.clone().fold(f64::INFINITY, f64::min);
        let x_max = xs.fold(f64::NEG_INFINITY, f64::max);
        let y_min = ys.clone().fold(f64::INFINITY, f64::min);
        let y_max = ys.fold(f64::NEG_INFINITY, f64::max);
        let extent = (x_max - x_min).max(y_max - y_min);
        if extent <= 0.0 {
            return Err(Error::DegenerateSample);
        }
        let scale = 1.0 / extent;
        let coords = inst
            .coords
            .iter()
            .map(|&(x, y)| (scale * (x - x_min), scale * (y - y_min)))
            .collect();
        Ok(Self {
            coords,
            norm: Some(Normalization {
                scale,
                x_min,
                y_min,
            }),
        })
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[(f64, f64)] {
        &self.coords
    }

    pub fn coord(&self, v: usize) -> (f64, f64) {
        self.coords[v]
    }

    pub fn normalization(&self) -> Option<Normalization> {
        self.norm
    }

    /// Maps a tour length on the normalized coordinates back to the units of
    /// the file the instance was loaded from.
    pub fn denormalize_length(&self, length: f64) -> f64 {
        match self.norm {
            Some(n) => length / n.scale,
            None => length,
        }
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        let (xi, yi) = self.coords[i];
        let (xj, yj) = self.coords[j];
        ((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt()
    }
}

/// A Hamiltonian cycle, stored as a visiting order that is always a
/// permutation of `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tour {
    order: Vec<u32>,
}

impl Tour {
    pub fn new(order: Vec<u32>, n: usize) -> Result<Self> {
        if !is_permutation(&order, n) {
            return Err(Error::InvalidTour { n });
        }
        Ok(Self { order })
    }

    pub fn order(&self) -> &[u32] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

pub(crate) fn is_permutation(order: &[u32], n: usize) -> bool {
    if order.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &v in order {
        let v = v as usize;
        if v >= n || seen[v] {
            return false;
        }
        seen[v] = true;
    }
    true
}

/// Generates `n` points drawn independently and uniformly from the unit
/// square.
pub fn generate_instance(n: usize, rng: &mut impl Rng) -> Result<Instance> {
    if n < 3 {
        return Err(Error::TooFewVertices { min: 3, got: n });
    }
    let coords = (0..n)
        .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
        .collect();
    Instance::from_coords(coords)
}

/// Length of the closed cycle visiting `order`, validated as a permutation.
pub fn tour_length(inst: &Instance, order: &[u32]) -> Result<f64> {
    if !is_permutation(order, inst.n()) {
        return Err(Error::InvalidTour { n: inst.n() });
    }
    Ok(cycle_length(inst, order))
}

/// Unchecked cycle length, for callers that maintain the permutation
/// invariant themselves.
pub(crate) fn cycle_length(inst: &Instance, order: &[u32]) -> f64 {
    let n = order.len();
    let mut total = 0.0;
    for i in 0..n {
        total += inst.dist(order[i] as usize, order[(i + 1) % n] as usize);
    }
    total
}

/// Exact optimum by enumeration with vertex 0 fixed first and the two
/// traversal directions collapsed. Ties go to the lexicographically smallest
/// order, so the result is deterministic.
pub fn brute_force_optimum(inst: &Instance) -> Result<(Tour, f64)> {
    let n = inst.n();
    if n < 3 {
        return Err(Error::TooFewVertices { min: 3, got: n });
    }
    if n > 12 {
        return Err(Error::BruteForceTooLarge(n));
    }
    let mut rest: Vec<u32> = (1..n as u32).collect();
    let mut best_order: Option<Vec<u32>> = None;
    let mut best_len = f64::INFINITY;
    let mut order = Vec::with_capacity(n);
    loop {
        // Each undirected cycle appears once with rest[0] < rest[n-2].
        if rest[0] < rest[n - 2] {
            order.clear();
            order.push(0);
            order.extend_from_slice(&rest);
            let len = cycle_length(inst, &order);
            if len < best_len {
                best_len = len;
                best_order = Some(order.clone());
            }
        }
        if !next_permutation(&mut rest) {
            break;
        }
    }
    let order = best_order.expect("n >= 3 guarantees at least one tour");
    Ok((Tour { order }, best_len))
}

/// Lexicographic next permutation; returns false once the sequence wraps.
fn next_permutation(seq: &mut [u32]) -> bool {
    let n = seq.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && seq[i - 1] >= seq[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while seq[j] <= seq[i - 1] {
        j -= 1;
    }
    seq.swap(i - 1, j);
    seq[i..].reverse();
    true
}

/// Nearest-neighbor construction from `start`; distance ties are broken by
/// the lowest vertex index.
pub fn greedy_nearest_neighbor(inst: &Instance, start: usize) -> Result<Tour> {
    let n = inst.n();
    if start >= n {
        return Err(Error::IndexOutOfRange { index: start, n });
    }
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut cur = start;
    visited[cur] = true;
    order.push(cur as u32);
    for _ in 1..n {
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for v in 0..n {
            if visited[v] {
                continue;
            }
            let d = inst.dist(cur, v);
            if d < best_d {
                best_d = d;
                best = v;
            }
        }
        visited[best] = true;
        order.push(best as u32);
        cur = best;
    }
    Ok(Tour { order })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn square_corners() -> Instance {
        Instance::from_coords(vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]).unwrap()
    }

    #[test]
    fn generate_rejects_tiny_n() {
        let mut rng = seeded_rng(7);
        assert!(matches!(
            generate_instance(2, &mut rng),
            Err(Error::TooFewVertices { .. })
        ));
    }

    #[test]
    fn generate_in_unit_square() {
        let mut rng = seeded_rng(7);
        let inst = generate_instance(3, &mut rng).unwrap();
        assert_eq!(inst.n(), 3);
        for &(x, y) in inst.coords() {
            assert!((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y));
        }
    }

    #[test]
    fn generate_is_deterministic() {
        let a = generate_instance(100, &mut seeded_rng(1)).unwrap();
        let b = generate_instance(100, &mut seeded_rng(1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn generate_sample_mean_near_half() {
        // Binomial-style oracle: mean of 10_000 uniforms has std-dev
        // sqrt(1/12/10_000) ~ 0.0029, so 0.02 is almost seven sigmas.
        let inst = generate_instance(10_000, &mut seeded_rng(42)).unwrap();
        let mean_x: f64 =
            inst.coords().iter().map(|c| c.0).sum::<f64>() / inst.n() as f64;
        assert!((mean_x - 0.5).abs() < 0.02, "mean_x = {mean_x}");
    }

    #[test]
    fn tour_length_square_perimeter() {
        let inst = square_corners();
        let len = tour_length(&inst, &[0, 1, 2, 3]).unwrap();
        assert!((len - 4.0).abs() < 1e-12);
    }

    #[test]
    fn tour_length_coincident_points_is_zero() {
        let inst =
            Instance::from_coords(vec![(0.3, 0.3); 5]).unwrap();
        assert_eq!(tour_length(&inst, &[0, 1, 2, 3, 4]).unwrap(), 0.0);
    }

    #[test]
    fn tour_length_crossing_square() {
        let inst = square_corners();
        // (0,0) -> (1,1) -> (1,0) -> (0,1): two diagonals and two sides.
        let len = tour_length(&inst, &[0, 2, 1, 3]).unwrap();
        assert!((len - (2.0 + 2.0 * 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn tour_length_rejects_non_permutation() {
        let inst = square_corners();
        assert!(tour_length(&inst, &[0, 1, 2, 2]).is_err());
        assert!(tour_length(&inst, &[0, 1, 2]).is_err());
    }

    #[test]
    fn brute_force_square() {
        let inst = square_corners();
        let (tour, len) = brute_force_optimum(&inst).unwrap();
        assert!((len - 4.0).abs() < 1e-12);
        assert_eq!(tour.order(), &[0, 1, 2, 3]);
    }

    #[test]
    fn brute_force_collinear() {
        let coords = (0..5).map(|i| (i as f64 / 4.0, 0.0)).collect();
        let inst = Instance::from_coords(coords).unwrap();
        let (_, len) = brute_force_optimum(&inst).unwrap();
        assert!((len - 2.0).abs() < 1e-12);
    }

    #[test]
    fn brute_force_matches_naive_enumerator() {
        // Independent oracle: enumerate every permutation without the
        // fixed-vertex or direction shortcuts.
        let inst = generate_instance(9, &mut seeded_rng(3)).unwrap();
        let n = inst.n();
        let mut perm: Vec<u32> = (0..n as u32).collect();
        let mut naive_best = f64::INFINITY;
        loop {
            let len = cycle_length(&inst, &perm);
            if len < naive_best {
                naive_best = len;
            }
            if !next_permutation(&mut perm) {
                break;
            }
        }
        let (tour, len) = brute_force_optimum(&inst).unwrap();
        assert!((len - naive_best).abs() < 1e-12);
        assert!((tour_length(&inst, tour.order()).unwrap() - len).abs() < 1e-12);
    }

    #[test]
    fn brute_force_rejects_large_n() {
        let inst = generate_instance(13, &mut seeded_rng(0)).unwrap();
        assert!(matches!(
            brute_force_optimum(&inst),
            Err(Error::BruteForceTooLarge(13))
        ));
    }

    #[test]
    fn greedy_square_is_optimal() {
        let inst = square_corners();
        let tour = greedy_nearest_neighbor(&inst, 0).unwrap();
        let len = tour_length(&inst, tour.order()).unwrap();
        assert!((len - 4.0).abs() < 1e-12);
    }

    #[test]
    fn greedy_triangle_any_start() {
        let inst = Instance::from_coords(vec![
            (0.0, 0.0),
            (1.0, 0.0),
            (0.5, 3f64.sqrt() / 2.0),
        ])
        .unwrap();
        let expect = tour_length(&inst, &[0, 1, 2]).unwrap();
        for start in 0..3 {
            let tour = greedy_nearest_neighbor(&inst, start).unwrap();
            let len = tour_length(&inst, tour.order()).unwrap();
            assert!((len - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn greedy_respects_trivial_lower_bound() {
        let inst = generate_instance(50, &mut seeded_rng(9)).unwrap();
        let tour = greedy_nearest_neighbor(&inst, 0).unwrap();
        let len = tour_length(&inst, tour.order()).unwrap();
        let max_edge = (0..50)
            .flat_map(|i| (0..50).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| inst.dist(i, j))
            .fold(0.0f64, f64::max);
        assert!(len >= 2.0 * max_edge);
    }

    #[test]
    fn greedy_start_out_of_range() {
        let inst = square_corners();
        assert!(greedy_nearest_neighbor(&inst, 4).is_err());
    }
}
