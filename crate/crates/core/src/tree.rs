//! Complete b-ary trees with implicit breadth-first indexing.
//!
//! Vertex 0 is the root. The children of `v` are `b*v + 1 ..= b*v + b`, so
//! the leaves occupy the contiguous suffix `[n - b^H, n)`.

use crate::error::{Error, Result};
use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TreeShape {
    b: usize,
    height: usize,
    n: usize,
    leaf_start: usize,
}

impl TreeShape {
    pub fn new(b: usize, height: usize) -> Result<Self> {
        if b == 0 {
            return Err(Error::ZeroBranching);
        }
        let too_large = || Error::TreeTooLarge { b, height };
        // n = 1 + b + ... + b^H, and the leaf count b^H.
        let mut level = 1usize;
        let mut n = 1usize;
        for _ in 0..height {
            level = level.checked_mul(b).ok_or_else(too_large)?;
            n = n.checked_add(level).ok_or_else(too_large)?;
        }
        Ok(Self {
            b,
            height,
            n,
            leaf_start: n - level,
        })
    }

    /// The star with `b` leaves.
    pub fn star(b: usize) -> Result<Self> {
        Self::new(b, 1)
    }

    pub fn b(&self) -> usize {
        self.b
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_star(&self) -> bool {
        self.height == 1
    }

    pub fn leaf_count(&self) -> usize {
        self.n - self.leaf_start
    }

    pub fn leaves(&self) -> Range<usize> {
        self.leaf_start..self.n
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        v >= self.leaf_start && v < self.n
    }

    fn check(&self, v: usize) -> Result<()> {
        if v < self.n {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange { v, n: self.n })
        }
    }

    pub fn children(&self, v: usize) -> Result<Range<usize>> {
        self.check(v)?;
        Ok(self.children_unchecked(v))
    }

    /// Children of an in-range vertex; empty for leaves.
    #[inline]
    pub fn children_unchecked(&self, v: usize) -> Range<usize> {
        if v >= self.leaf_start {
            0..0
        } else {
            let first = self.b * v + 1;
            first..first + self.b
        }
    }

    pub fn parent(&self, v: usize) -> Result<Option<usize>> {
        self.check(v)?;
        Ok(self.parent_unchecked(v))
    }

    #[inline]
    pub fn parent_unchecked(&self, v: usize) -> Option<usize> {
        if v == 0 {
            None
        } else {
            Some((v - 1) / self.b)
        }
    }

    pub fn depth_of(&self, v: usize) -> Result<usize> {
        self.check(v)?;
        let mut depth = 0;
        let mut u = v;
        while u > 0 {
            u = (u - 1) / self.b;
            depth += 1;
        }
        Ok(depth)
    }

    /// Distance from `v` down to the leaf level.
    pub fn height_of(&self, v: usize) -> Result<usize> {
        Ok(self.height - self.depth_of(v)?)
    }

    /// Index range of the vertices at the given depth.
    pub fn level(&self, depth: usize) -> Range<usize> {
        if depth > self.height {
            return self.n..self.n;
        }
        let mut start = 0usize;
        let mut width = 1usize;
        for _ in 0..depth {
            start += width;
            width *= self.b;
        }
        start..start + width
    }

    /// Vertices on the path from the root down to `v`, root first.
    pub fn path_from_root(&self, v: usize) -> Result<Vec<usize>> {
        self.check(v)?;
        let mut path = vec![v];
        let mut u = v;
        while let Some(p) = self.parent_unchecked(u) {
            path.push(p);
            u = p;
        }
        path.reverse();
        Ok(path)
    }
}
