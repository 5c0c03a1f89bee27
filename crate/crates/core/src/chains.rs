//! Boundary points of the first-level partitions.
//!
//! With `p[-1] = q[-1] = 0`:
//!
//! * `p[n]` is the left end of the n-th left cell, `p[n] = g_-^{-1}(p[n-1])`;
//! * `q[n]` is the right end of the n-th right cell, `q[n] = g_+^{-1}(q[n-1])`;
//! * `e_minus[m] = g_-^{-1}(q[m-1])` cut the left base cell into the pieces
//!   that enter the right side for exactly `n` steps:
//!   the n-th piece is `(e_minus[n-1], e_minus[n])`;
//! * `e_plus[m] = g_+^{-1}(p[m-1])` do the same on the right base cell:
//!   the n-th piece is `(e_plus[n], e_plus[n-1])`.

use crate::branch::{BranchMap, Point};

#[derive(Clone, Debug)]
pub struct Chains {
    pub p: Vec<Point>,
    pub q: Vec<Point>,
    pub e_minus: Vec<Point>,
    pub e_plus: Vec<Point>,
}

impl Chains {
    /// All boundary points with index `0..=depth`.
    pub fn new(map: &BranchMap, depth: usize) -> Self {
        let mut it = ChainIter::new(map);
        let mut c = Chains {
            p: Vec::with_capacity(depth + 1),
            q: Vec::with_capacity(depth + 1),
            e_minus: Vec::with_capacity(depth + 1),
            e_plus: Vec::with_capacity(depth + 1),
        };
        for _ in 0..=depth {
            let s = it.next_level();
            c.p.push(s.p);
            c.q.push(s.q);
            c.e_minus.push(s.e_minus);
            c.e_plus.push(s.e_plus);
        }
        c
    }

    pub fn depth(&self) -> usize {
        self.p.len() - 1
    }

    /// `(left, right)` ends of the n-th left piece, `n >= 1`.
    pub fn delta_minus(&self, n: usize) -> (Point, Point) {
        (self.e_minus[n - 1], self.e_minus[n])
    }

    /// `(left, right)` ends of the n-th right piece, `n >= 1`.
    pub fn delta_plus(&self, n: usize) -> (Point, Point) {
        (self.e_plus[n], self.e_plus[n - 1])
    }
}

/// One level of boundary points, all with the same index.
#[derive(Clone, Copy, Debug)]
pub struct Level {
    pub index: usize,
    pub p: Point,
    pub q: Point,
    pub e_minus: Point,
    pub e_plus: Point,
}

/// Streams the boundary points level by level without storing them.
pub struct ChainIter<'a> {
    map: &'a BranchMap,
    next: usize,
    p_prev: Point,
    q_prev: Point,
}

impl<'a> ChainIter<'a> {
    pub fn new(map: &'a BranchMap) -> Self {
        ChainIter { map, next: 0, p_prev: Point::Mid(0.0), q_prev: Point::Mid(0.0) }
    }

    pub fn next_level(&mut self) -> Level {
        let m = self.map;
        let e_minus = m.inv_left(self.q_prev);
        let e_plus = m.inv_right(self.p_prev);
        let p = m.inv_left(self.p_prev);
        let q = m.inv_right(self.q_prev);
        let level = Level { index: self.next, p, q, e_minus, e_plus };
        self.p_prev = p;
        self.q_prev = q;
        self.next += 1;
        level
    }
}
