//! Lattice geometry shared by every module: direction labels, Euclidean
//! balls and dense box indexing.

use crate::error::{Error, Result};

/// Number of lattice directions in dimension `d`.
pub fn direction_count(d: usize) -> usize {
    2 * d
}

/// Signed label of direction slot `slot`. Slots follow the fixed order
/// `-d, ..., -1, 1, ..., d`.
pub fn direction_label(d: usize, slot: usize) -> i32 {
    debug_assert!(slot < 2 * d);
    if slot < d {
        -((d - slot) as i32)
    } else {
        (slot - d + 1) as i32
    }
}

/// Inverse of [`direction_label`].
pub fn direction_slot(d: usize, label: i32) -> Option<usize> {
    let a = label.unsigned_abs() as usize;
    if label == 0 || a > d {
        return None;
    }
    Some(if label < 0 { d - a } else { d + a - 1 })
}

/// Axis (0-based) and sign of direction slot `slot`.
#[inline]
pub fn direction_axis(d: usize, slot: usize) -> (usize, i64) {
    if slot < d {
        (d - 1 - slot, -1)
    } else {
        (slot - d, 1)
    }
}

pub fn squared_norm(z: &[i64]) -> i64 {
    z.iter().map(|c| c * c).sum()
}

/// Crown index `n` with `n - 1 < |z| <= n`, computed on integers.
pub fn crown_index(z: &[i64]) -> u32 {
    let s = squared_norm(z);
    let mut n = (s as f64).sqrt().floor() as i64;
    while n * n > s {
        n -= 1;
    }
    while n * n < s {
        n += 1;
    }
    n as u32
}

/// Offsets `y` with `|y| <= radius` in the Euclidean norm, in lexicographic
/// order, stored flat with stride `d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BallOffsets {
    d: usize,
    radius: u32,
    coords: Vec<i64>,
}

impl BallOffsets {
    pub fn new(d: usize, radius: u32) -> Self {
        let r = radius as i64;
        let r2 = r * r;
        let mut coords = Vec::new();
        let mut z = vec![-r; d];
        loop {
            if squared_norm(&z) <= r2 {
                coords.extend_from_slice(&z);
            }
            let mut axis = d;
            loop {
                if axis == 0 {
                    return Self { d, radius, coords };
                }
                axis -= 1;
                if z[axis] < r {
                    z[axis] += 1;
                    break;
                }
                z[axis] = -r;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, i64> {
        self.coords.chunks_exact(self.d)
    }
}

/// `|B_L|`, the number of lattice points in the closed Euclidean ball.
pub fn ball_size(d: usize, radius: u32) -> usize {
    BallOffsets::new(d, radius).len()
}

/// Dense indexing of the cube `origin + [-half_width, half_width]^d`,
/// row-major (the first coordinate varies slowest).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoxGeometry {
    d: usize,
    half_width: u32,
    origin: Vec<i64>,
    side: usize,
}

impl BoxGeometry {
    pub fn new(d: usize, half_width: u32, origin: Vec<i64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        if origin.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: origin.len(),
            });
        }
        let side = 2 * half_width as usize + 1;
        side.checked_pow(d as u32)
            .ok_or_else(|| Error::ResourceCap(format!("box of side {side} in d = {d}")))?;
        Ok(Self {
            d,
            half_width,
            origin,
            side,
        })
    }

    pub fn centered(d: usize, half_width: u32) -> Result<Self> {
        Self::new(d, half_width, vec![0; d])
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn half_width(&self) -> u32 {
        self.half_width
    }

    pub fn origin(&self) -> &[i64] {
        &self.origin
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.side.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        let h = self.half_width as i64;
        x.iter()
            .zip(&self.origin)
            .all(|(xi, oi)| (xi - oi).abs() <= h)
    }

    /// L-infinity distance from the box origin.
    pub fn sup_distance(&self, x: &[i64]) -> i64 {
        x.iter()
            .zip(&self.origin)
            .map(|(xi, oi)| (xi - oi).abs())
            .max()
            .unwrap_or(0)
    }

    pub fn index_of(&self, x: &[i64]) -> Option<usize> {
        if x.len() != self.d || !self.contains(x) {
            return None;
        }
        let h = self.half_width as i64;
        let mut idx = 0usize;
        for (xi, oi) in x.iter().zip(&self.origin) {
            idx = idx * self.side + (xi - oi + h) as usize;
        }
        Some(idx)
    }

    pub fn point_of(&self, mut index: usize) -> Vec<i64> {
        let h = self.half_width as i64;
        let mut x = vec![0i64; self.d];
        for axis in (0..self.d).rev() {
            x[axis] = (index % self.side) as i64 - h + self.origin[axis];
            index /= self.side;
        }
        x
    }

    /// Index stride of a unit step along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.side.pow((self.d - 1 - axis) as u32)
    }

    /// Neighbour of site `index` in direction slot `slot`, if inside the box.
    pub fn neighbor(&self, index: usize, slot: usize) -> Option<usize> {
        let (axis, sign) = direction_axis(self.d, slot);
        let stride = self.stride(axis);
        let coord = (index / stride) % self.side;
        if sign > 0 {
            (coord + 1 < self.side).then(|| index + stride)
        } else {
            (coord > 0).then(|| index - stride)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direction_order_is_fixed() {
        let labels: Vec<i32> = (0..4).map(|s| direction_label(2, s)).collect();
        assert_eq!(labels, vec![-2, -1, 1, 2]);
        for s in 0..6 {
            assert_eq!(direction_slot(3, direction_label(3, s)), Some(s));
        }
        assert_eq!(direction_axis(2, 0), (1, -1));
        assert_eq!(direction_axis(2, 3), (1, 1));
    }

    #[test]
    fn ball_sizes() {
        assert_eq!(ball_size(1, 2), 5);
        assert_eq!(ball_size(2, 0), 1);
        assert_eq!(ball_size(2, 1), 5);
        assert_eq!(ball_size(2, 2), 13);
        assert_eq!(ball_size(3, 1), 7);
    }

    #[test]
    fn crown_index_on_integers() {
        assert_eq!(crown_index(&[0, 0]), 0);
        assert_eq!(crown_index(&[1, 0]), 1);
        assert_eq!(crown_index(&[1, 1]), 2);
        assert_eq!(crown_index(&[3, 4]), 5);
        assert_eq!(crown_index(&[3, 3]), 5);
        assert_eq!(crown_index(&[-7]), 7);
    }

    #[test]
    fn box_index_roundtrip_and_neighbors() {
        let g = BoxGeometry::new(2, 2, vec![10, -3]).unwrap();
        assert_eq!(g.len(), 25);
        for i in 0..g.len() {
            assert_eq!(g.index_of(&g.point_of(i)), Some(i));
        }
        let c = g.index_of(&[10, -3]).unwrap();
        let right = g.neighbor(c, direction_slot(2, 1).unwrap()).unwrap();
        assert_eq!(g.point_of(right), vec![11, -3]);
        let down = g.neighbor(c, direction_slot(2, -2).unwrap()).unwrap();
        assert_eq!(g.point_of(down), vec![10, -4]);
        let corner = g.index_of(&[12, -1]).unwrap();
        assert_eq!(g.neighbor(corner, direction_slot(2, 1).unwrap()), None);
        assert_eq!(g.neighbor(corner, direction_slot(2, 2).unwrap()), None);
        assert!(g.index_of(&[13, -3]).is_none());
    }
}
