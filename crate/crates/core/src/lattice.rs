//! Geometry of the periodic lattice `(Z/LZ)^d`.
//!
//! Sites are indexed row-major: the coordinate vector `(c_0, .., c_{d-1})`
//! with `0 <= c_i < L` maps to `c_0 L^{d-1} + .. + c_{d-1}`, so the last
//! axis varies fastest and the origin is index 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Torus {
    dim: usize,
    side: usize,
    sites: usize,
}

impl Torus {
    /// Side lengths below 3 would make `x + e_i` and `x - e_i` coincide and
    /// double the effective exchange rate along that axis, so they are rejected.
    pub fn new(dim: usize, side: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        if side < 3 {
            return Err(Error::InvalidParameter(format!(
                "side length must be at least 3, got {side}"
            )));
        }
        let sites = (0..dim)
            .try_fold(1usize, |acc, _| acc.checked_mul(side))
            .filter(|&n| n <= u32::MAX as usize)
            .ok_or_else(|| Error::InvalidParameter(format!("torus {side}^{dim} is too large")))?;
        Ok(Self { dim, side, sites })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn site_count(&self) -> usize {
        self.sites
    }

    pub fn edge_count(&self) -> usize {
        self.dim * self.sites
    }

    /// Stride of axis `axis` in the flat index.
    fn stride(&self, axis: usize) -> usize {
        self.side.pow((self.dim - 1 - axis) as u32)
    }

    fn check(&self, site: usize) -> Result<()> {
        if site >= self.sites {
            return Err(Error::Usage(format!(
                "site index {site} out of range for a torus with {} sites",
                self.sites
            )));
        }
        Ok(())
    }

    pub fn coords(&self, site: usize) -> Result<Vec<usize>> {
        self.check(site)?;
        let mut rest = site;
        let mut out = vec![0; self.dim];
        for axis in (0..self.dim).rev() {
            out[axis] = rest % self.side;
            rest /= self.side;
        }
        Ok(out)
    }

    pub fn index(&self, coords: &[usize]) -> Result<usize> {
        if coords.len() != self.dim || coords.iter().any(|&c| c >= self.side) {
            return Err(Error::Usage(format!(
                "coordinates {coords:?} invalid for a {}-dimensional torus of side {}",
                self.dim, self.side
            )));
        }
        Ok(coords.iter().fold(0, |acc, &c| acc * self.side + c))
    }

    /// Site reached from `site` by one step along `axis` in direction `+1`
    /// (`forward = true`) or `-1`.
    pub fn shift(&self, site: usize, axis: usize, forward: bool) -> usize {
        let stride = self.stride(axis);
        let c = (site / stride) % self.side;
        let c2 = if forward {
            (c + 1) % self.side
        } else {
            (c + self.side - 1) % self.side
        };
        site - c * stride + c2 * stride
    }

    /// The `2d` neighbours of `site`, ordered `+e_0, -e_0, +e_1, -e_1, ..`.
    pub fn neighbors(&self, site: usize) -> Result<Vec<usize>> {
        self.check(site)?;
        Ok((0..self.dim)
            .flat_map(|axis| [self.shift(site, axis, true), self.shift(site, axis, false)])
            .collect())
    }

    /// Every unordered adjacent pair exactly once, as `(s, s + e_axis)` for
    /// each site `s` and axis in order. Edge `e` is `(e / d, shift(e / d, e % d))`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.sites)
            .flat_map(|s| (0..self.dim).map(move |axis| (s, axis)))
            .map(|(s, axis)| (s, self.shift(s, axis, true)))
            .collect()
    }

    /// Forward-neighbour table indexed by edge number, the compact edge list
    /// used by the simulator.
    pub fn forward_table(&self) -> Vec<u32> {
        self.edges().into_iter().map(|(_, y)| y as u32).collect()
    }

    /// Coordinates of `site` relative to the origin, mapped into `(-L/2, L/2]`.
    pub fn displacement(&self, site: usize) -> Result<Vec<i64>> {
        let half = (self.side / 2) as i64;
        Ok(self
            .coords(site)?
            .into_iter()
            .map(|c| {
                let c = c as i64;
                if c > half {
                    c - self.side as i64
                } else {
                    c
                }
            })
            .collect())
    }

    /// Site at `a - b` (coordinate-wise, periodic).
    pub fn difference(&self, a: usize, b: usize) -> Result<usize> {
        let ca = self.coords(a)?;
        let cb = self.coords(b)?;
        let diff: Vec<usize> = ca
            .iter()
            .zip(&cb)
            .map(|(&x, &y)| (x + self.side - y) % self.side)
            .collect();
        self.index(&diff)
    }
}
