//! Uniform-grid spatial index for k-nearest-neighbor queries over points in
//! the unit square. Expected O(k) per query when the bucket size is tuned to
//! the query size, which is what the sampling pipeline needs at n = 10,000.

/// Buckets point indices by cell; cells are square with side `1 / side`.
pub struct SpatialGrid<'a> {
    pts: &'a [(f64, f64)],
    side: usize,
    cells: Vec<Vec<u32>>,
}

impl<'a> SpatialGrid<'a> {
    /// `target_per_cell` sets the expected bucket population; queries for
    /// roughly that many neighbors then touch O(1) cells.
    pub fn build(pts: &'a [(f64, f64)], target_per_cell: usize) -> Self {
        let n = pts.len();
        let target = target_per_cell.max(1);
        let side = ((n as f64 / target as f64).sqrt().floor() as usize).max(1);
        let mut cells = vec![Vec::new(); side * side];
        for (i, &(x, y)) in pts.iter().enumerate() {
            cells[cell_index(x, y, side)].push(i as u32);
        }
        Self { pts, side, cells }
    }

    /// The `k` nearest points to vertex `query` (itself excluded), ordered by
    /// distance with ties broken by the lowest index.
    pub fn knn(&self, query: usize, k: usize) -> Vec<u32> {
        let k = k.min(self.pts.len().saturating_sub(1));
        if k == 0 {
            return Vec::new();
        }
        let (qx, qy) = self.pts[query];
        let side = self.side;
        let cell_w = 1.0 / side as f64;
        let cx = ((qx * side as f64) as usize).min(side - 1) as isize;
        let cy = ((qy * side as f64) as usize).min(side - 1) as isize;

        let mut cand: Vec<(f64, u32)> = Vec::new();
        let mut ring = 0isize;
        loop {
            self.collect_ring(cx, cy, ring, |i| {
                if i as usize != query {
                    let (x, y) = self.pts[i as usize];
                    let d = ((x - qx).powi(2) + (y - qy).powi(2)).sqrt();
                    cand.push((d, i));
                }
            });
            // Every point closer than ring * cell_w lies within the cells
            // visited so far, so once the k-th best beats that bound the
            // answer is final.
            if cand.len() >= k {
                cand.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
                let kth = cand[k - 1].0;
                // Strict: a point in an unvisited cell can sit exactly at
                // ring * cell_w, and ties must resolve by index.
                if kth < ring as f64 * cell_w {
                    break;
                }
            }
            ring += 1;
            if ring > side as isize {
                break;
            }
        }
        cand.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        cand.truncate(k);
        cand.into_iter().map(|(_, i)| i).collect()
    }

    fn collect_ring(&self, cx: isize, cy: isize, ring: isize, mut f: impl FnMut(u32)) {
        let side = self.side as isize;
        let visit = |x: isize, y: isize, f: &mut dyn FnMut(u32)| {
            if (0..side).contains(&x) && (0..side).contains(&y) {
                for &i in &self.cells[(y * side + x) as usize] {
                    f(i);
                }
            }
        };
        if ring == 0 {
            visit(cx, cy, &mut f);
            return;
        }
        for x in (cx - ring)..=(cx + ring) {
            visit(x, cy - ring, &mut f);
            visit(x, cy + ring, &mut f);
        }
        for y in (cy - ring + 1)..=(cy + ring - 1) {
            visit(cx - ring, y, &mut f);
            visit(cx + ring, y, &mut f);
        }
    }
}

fn cell_index(x: f64, y: f64, side: usize) -> usize {
    let cx = ((x * side as f64) as usize).min(side - 1);
    let cy = ((y * side as f64) as usize).min(side - 1);
    cy * side + cx
}

/// Brute-force k-NN with the same ordering contract; used directly for small
/// point sets and as the oracle for the grid in tests.
pub fn knn_brute(pts: &[(f64, f64)], query: usize, k: usize) -> Vec<u32> {
    let (qx, qy) = pts[query];
    let mut cand: Vec<(f64, u32)> = pts
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != query)
        .map(|(i, &(x, y))| (((x - qx).powi(2) + (y - qy).powi(2)).sqrt(), i as u32))
        .collect();
    cand.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    cand.truncate(k);
    cand.into_iter().map(|(_, i)| i).collect()
}
