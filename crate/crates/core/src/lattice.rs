//! Integer boxes with lexicographic linear indexing.
//!
//! Axis 0 is the most significant digit, so comparing linear indices is the
//! same as comparing coordinates lexicographically.

use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Lattice point.
pub type Coord = SmallVec<[i64; 4]>;

/// Axis-aligned box `[lo_0, hi_0] x ... x [lo_{d-1}, hi_{d-1}]` of integer points.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntBox {
    lo: Coord,
    hi: Coord,
    strides: SmallVec<[usize; 4]>,
    len: usize,
}

impl IntBox {
    /// Box with the given inclusive corners.
    pub fn new(lo: &[i64], hi: &[i64]) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Geometry("box corners must share a positive dimension".into()));
        }
        if lo.iter().zip(hi).any(|(a, b)| a > b) {
            return Err(Error::Geometry(format!("empty box {lo:?}..{hi:?}")));
        }
        let d = lo.len();
        let mut strides: SmallVec<[usize; 4]> = SmallVec::from_elem(1, d);
        let mut len = 1usize;
        for i in (0..d).rev() {
            strides[i] = len;
            let side = (hi[i] - lo[i] + 1) as usize;
            len = len
                .checked_mul(side)
                .ok_or_else(|| Error::TooLarge("box volume overflows usize".into()))?;
        }
        Ok(Self {
            lo: lo.into(),
            hi: hi.into(),
            strides,
            len,
        })
    }

    /// The centred cube `[-n, n]^d`.
    pub fn centered(d: usize, n: i64) -> Result<Self> {
        Self::new(&vec![-n; d], &vec![n; d])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn lo(&self) -> &[i64] {
        &self.lo
    }

    pub fn hi(&self) -> &[i64] {
        &self.hi
    }

    /// Number of points along `axis`.
    pub fn side(&self, axis: usize) -> usize {
        (self.hi[axis] - self.lo[axis] + 1) as usize
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| a <= v && v <= b)
    }

    /// Linear index of `x`, or `None` outside the box.
    pub fn index(&self, x: &[i64]) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        Some(
            x.iter()
                .enumerate()
                .map(|(i, v)| (v - self.lo[i]) as usize * self.strides[i])
                .sum(),
        )
    }

    /// Coordinates of linear index `idx`.
    pub fn coord(&self, idx: usize) -> Coord {
        debug_assert!(idx < self.len);
        let mut r = idx;
        let mut c = Coord::with_capacity(self.dim());
        for i in 0..self.dim() {
            c.push(self.lo[i] + (r / self.strides[i]) as i64);
            r %= self.strides[i];
        }
        c
    }

    /// Coordinate of `idx` along a single axis.
    pub fn coord_axis(&self, idx: usize, axis: usize) -> i64 {
        self.lo[axis] + ((idx / self.strides[axis]) % self.side(axis)) as i64
    }

    /// Index of the neighbour `idx + sign * e_axis`, if it lies in the box.
    #[inline]
    pub fn step(&self, idx: usize, axis: usize, sign: i64) -> Option<usize> {
        let x = self.coord_axis(idx, axis) + sign;
        if x < self.lo[axis] || x > self.hi[axis] {
            None
        } else if sign >= 0 {
            Some(idx + sign as usize * self.strides[axis])
        } else {
            Some(idx - (-sign) as usize * self.strides[axis])
        }
    }

    /// All points in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = Coord> + '_ {
        (0..self.len).map(move |i| self.coord(i))
    }
}

/// Lexicographic comparison of two coordinates.
pub fn lex_less(a: &[i64], b: &[i64]) -> bool {
    a < b
}

/// Sup-norm distance.
pub fn linf(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).max().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn centered_volume() {
        let b = IntBox::centered(2, 3).unwrap();
        assert_eq!(b.len(), 49);
        assert_eq!(b.coord(0).as_slice(), &[-3, -3]);
        assert_eq!(b.coord(48).as_slice(), &[3, 3]);
    }

    #[test]
    fn steps_stop_at_faces() {
        let b = IntBox::centered(2, 1).unwrap();
        let corner = b.index(&[1, 1]).unwrap();
        assert_eq!(b.step(corner, 0, 1), None);
        assert_eq!(b.step(corner, 1, -1), b.index(&[1, 0]));
    }

    #[test]
    fn empty_box_rejected() {
        assert!(IntBox::new(&[0, 2], &[1, 1]).is_err());
    }

    proptest! {
        #[test]
        fn index_roundtrip(d in 1usize..4, n in 0i64..4, seed in 0usize..1000) {
            let b = IntBox::centered(d, n).unwrap();
            let idx = seed % b.len();
            let c = b.coord(idx);
            prop_assert_eq!(b.index(&c), Some(idx));
            for axis in 0..d {
                prop_assert_eq!(b.coord_axis(idx, axis), c[axis]);
            }
        }

        #[test]
        fn index_order_is_lexicographic(n in 0i64..3, i in 0usize..125, j in 0usize..125) {
            let b = IntBox::centered(3, n).unwrap();
            let (i, j) = (i % b.len(), j % b.len());
            prop_assert_eq!(i < j, lex_less(&b.coord(i), &b.coord(j)));
        }
    }
}
