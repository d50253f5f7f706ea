//! Compact k-opt actions and the working Hamiltonian-path structure used
//! while building them.
//!
//! An action is the pair sequence (a_1,b_1,...,a_k,b_k) with the implicit
//! closing vertex a_{k+1} = a_1: it deletes edges (a_i,b_i) and adds edges
//! (b_i,a_{i+1}). Only the a_i are free choices; each b_i is forced. While an
//! action is being grown the tour-minus-deleted-edges is a single Hamiltonian
//! path from a_1 to the latest b_i; the path is tracked as a short list of
//! directed position ranges over the unmodified tour, so each step costs
//! O(k) instead of O(n).

use crate::instance::Instance;

use super::tour::TourOrder;

/// A compact k-opt move. `pairs[i] = (a_i, b_i)`; the closing vertex is
/// `pairs[0].0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Action {
    pairs: Vec<(u32, u32)>,
}

impl Action {
    pub(crate) fn new(pairs: Vec<(u32, u32)>) -> Self {
        Self { pairs }
    }

    /// Number of deleted (and added) edges.
    pub fn k(&self) -> usize {
        self.pairs.len()
    }

    /// The (a_i, b_i) sub-decisions in order.
    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    /// Deleted tour edges (a_i, b_i).
    pub fn removed_edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.pairs.iter().copied()
    }

    /// Added edges (b_i, a_{i+1}), the last one closing back to a_1.
    pub fn added_edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let a1 = self.pairs[0].0;
        self.pairs.iter().enumerate().map(move |(i, &(_, b))| {
            let next_a = if i + 1 < self.pairs.len() {
                self.pairs[i + 1].0
            } else {
                a1
            };
            (b, next_a)
        })
    }
}

/// Length change of applying the action: added minus removed edge lengths.
/// Negative means improving.
pub fn action_delta(inst: &Instance, action: &Action) -> f64 {
    let added: f64 = action
        .added_edges()
        .map(|(u, v)| inst.dist(u as usize, v as usize))
        .sum();
    let removed: f64 = action
        .removed_edges()
        .map(|(u, v)| inst.dist(u as usize, v as usize))
        .sum();
    added - removed
}

/// A directed run of consecutive tour positions, inclusive on both ends.
/// Traversal steps +1 (forward) or -1 (reversed) modulo n.
#[derive(Clone, Copy, Debug)]
struct Seg {
    from: u32,
    to: u32,
    rev: bool,
}

/// The working Hamiltonian path from a_1 to the latest b_i, as at most k+1
/// segments of the untouched tour.
#[derive(Clone, Debug)]
pub(crate) struct KOptPath {
    segs: Vec<Seg>,
    /// Reused by `extend` to build the reversed suffix without allocating.
    scratch: Vec<Seg>,
    n: u32,
}

impl KOptPath {
    /// Deletes (a_1, b_1) where b_1 is the successor (forward) or the
    /// predecessor of a_1 in the stored orientation. The resulting path runs
    /// from a_1 all the way around to b_1.
    pub fn start(tour: &TourOrder, a1: u32, forward: bool) -> (Self, u32) {
        let n = tour.n() as u32;
        let b1 = if forward { tour.next(a1) } else { tour.prev(a1) };
        let seg = Seg {
            from: tour.pos(a1),
            to: tour.pos(b1),
            rev: forward,
        };
        (
            Self {
                segs: vec![seg],
                scratch: Vec::new(),
                n,
            },
            b1,
        )
    }

    fn seg_len(&self, s: &Seg) -> u32 {
        let span = if s.rev {
            (s.from + self.n - s.to) % self.n
        } else {
            (s.to + self.n - s.from) % self.n
        };
        span + 1
    }

    fn seg_at(&self, s: &Seg, off: u32) -> u32 {
        if s.rev {
            (s.from + self.n - off % self.n) % self.n
        } else {
            (s.from + off) % self.n
        }
    }

    /// Segment index and offset of vertex position `p`.
    fn locate(&self, p: u32) -> (usize, u32) {
        for (idx, s) in self.segs.iter().enumerate() {
            let off = if s.rev {
                (s.from + self.n - p) % self.n
            } else {
                (p + self.n - s.from) % self.n
            };
            if off < self.seg_len(s) {
                return (idx, off);
            }
        }
        unreachable!("every tour position lies in exactly one path segment");
    }

    /// Current dangling endpoint, the latest b_i.
    pub fn end(&self, tour: &TourOrder) -> u32 {
        tour.at(self.segs[self.segs.len() - 1].to)
    }

    /// The single path vertex adjacent to the dangling endpoint.
    pub fn end_neighbor(&self, tour: &TourOrder) -> u32 {
        let last = &self.segs[self.segs.len() - 1];
        let len = self.seg_len(last);
        if len >= 2 {
            tour.at(self.seg_at(last, len - 2))
        } else {
            tour.at(self.segs[self.segs.len() - 2].to)
        }
    }

    /// The b that removing (a, b) forces: the path neighbor of `a` on the
    /// side of the current endpoint. `a` must be a path vertex other than
    /// the endpoint itself.
    pub fn forced_b(&self, tour: &TourOrder, a: u32) -> u32 {
        let (idx, off) = self.locate(tour.pos(a));
        let seg = &self.segs[idx];
        if off + 1 < self.seg_len(seg) {
            tour.at(self.seg_at(seg, off + 1))
        } else {
            tour.at(self.segs[idx + 1].from)
        }
    }

    /// Adds edge (end, a), removes the forced (a, b), and returns b, the new
    /// dangling endpoint. The prefix up to `a` is kept; the stretch from b to
    /// the old endpoint is traversed in reverse.
    pub fn extend(&mut self, tour: &TourOrder, a: u32) -> u32 {
        let (idx, off) = self.locate(tour.pos(a));
        let seg = self.segs[idx];
        let len = self.seg_len(&seg);
        let b = self.forced_b(tour, a);

        // Keep the prefix up to `a` in place; rebuild the stretch from b to
        // the old endpoint in reverse through the reusable scratch buffer.
        self.scratch.clear();
        for s in self.segs[idx + 1..].iter().rev() {
            self.scratch.push(Seg {
                from: s.to,
                to: s.from,
                rev: !s.rev,
            });
        }
        let split = Seg {
            from: seg.from,
            to: self.seg_at(&seg, off),
            rev: seg.rev,
        };
        let tail = (off + 1 < len).then(|| Seg {
            from: self.seg_at(&seg, off + 1),
            to: seg.to,
            rev: seg.rev,
        });
        self.segs.truncate(idx);
        self.segs.push(split);
        self.segs.extend_from_slice(&self.scratch);
        if let Some(t) = tail {
            self.segs.push(Seg {
                from: t.to,
                to: t.from,
                rev: !t.rev,
            });
        }
        debug_assert_eq!(self.end(tour), b);
        debug_assert_eq!(
            self.segs.iter().map(|s| self.seg_len(s)).sum::<u32>(),
            self.n
        );
        b
    }

    /// Full traversal from a_1 to the endpoint; closing the loop makes this
    /// the visiting order of the new tour.
    pub fn order(&self, tour: &TourOrder) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.n as usize);
        for s in &self.segs {
            let len = self.seg_len(s);
            for off in 0..len {
                out.push(tour.at(self.seg_at(s, off)));
            }
        }
        out
    }
}
