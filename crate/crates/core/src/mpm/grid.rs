use super::{Boundaries, Boundary};
use crate::Vec3;

/// Dense `(N+1)³` node grid over the unit cube.
///
/// Nodes receiving mass during a transfer are recorded in a touched list so
/// reset and update cost scale with the particle footprint rather than N³.
#[derive(Clone, Debug)]
pub struct Grid {
    n: usize,
    dim: usize,
    dx: f64,
    pub(crate) mass: Vec<f64>,
    /// Momentum after P2G, velocity after [`Grid::normalize`].
    pub(crate) vel: Vec<Vec3>,
    touched: Vec<u32>,
    is_touched: Vec<bool>,
}

impl Grid {
    pub fn new(n: usize) -> Self {
        assert!(n >= 4, "grid needs at least 4 cells per axis");
        let dim = n + 1;
        let nodes = dim * dim * dim;
        Self {
            n,
            dim,
            dx: 1.0 / n as f64,
            mass: vec![0.0; nodes],
            vel: vec![Vec3::zeros(); nodes],
            touched: Vec::new(),
            is_touched: vec![false; nodes],
        }
    }

    /// Cells per axis.
    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dim + j) * self.dim + k
    }

    pub fn coords(&self, idx: usize) -> [usize; 3] {
        [idx / (self.dim * self.dim), (idx / self.dim) % self.dim, idx % self.dim]
    }

    pub fn node_mass(&self, i: usize, j: usize, k: usize) -> f64 {
        self.mass[self.index(i, j, k)]
    }

    pub fn node_velocity(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.vel[self.index(i, j, k)]
    }

    /// Indices of nodes that received mass since the last reset, in first
    /// touch order.
    pub fn active_nodes(&self) -> &[u32] {
        &self.touched
    }

    pub fn total_mass(&self) -> f64 {
        self.touched.iter().map(|&i| self.mass[i as usize]).sum()
    }

    /// Sum of node momenta; valid before [`Grid::normalize`].
    pub fn total_momentum(&self) -> Vec3 {
        self.touched.iter().map(|&i| self.vel[i as usize]).sum()
    }

    pub fn reset(&mut self) {
        for &i in &self.touched {
            let i = i as usize;
            self.mass[i] = 0.0;
            self.vel[i] = Vec3::zeros();
            self.is_touched[i] = false;
        }
        self.touched.clear();
    }

    #[inline]
    pub(crate) fn scatter(&mut self, idx: usize, mass: f64, momentum: Vec3) {
        if !self.is_touched[idx] {
            self.is_touched[idx] = true;
            self.touched.push(idx as u32);
        }
        self.mass[idx] += mass;
        self.vel[idx] += momentum;
    }

    /// Converts accumulated momentum to velocity on every active node.
    pub fn normalize(&mut self) {
        for &i in &self.touched {
            let i = i as usize;
            if self.mass[i] > 0.0 {
                self.vel[i] /= self.mass[i];
            } else {
                self.vel[i] = Vec3::zeros();
            }
        }
    }

    /// Adds `dt · accel` to every active node and applies the boundary band
    /// of `margin` cells on each face.
    pub fn update(&mut self, dt: f64, accel: Vec3, boundaries: &Boundaries, margin: usize) {
        let dv = accel * dt;
        let hi = self.n.saturating_sub(margin);
        for t in 0..self.touched.len() {
            let idx = self.touched[t] as usize;
            if self.mass[idx] <= 0.0 {
                continue;
            }
            let mut v = self.vel[idx] + dv;
            let c = self.coords(idx);
            for axis in 0..3 {
                let face = if c[axis] < margin {
                    Some(boundaries.lower(axis))
                } else if c[axis] > hi {
                    Some(boundaries.upper(axis))
                } else {
                    None
                };
                match face {
                    Some(Boundary::Sticky) => {
                        v = Vec3::zeros();
                        break;
                    }
                    Some(Boundary::Slip) => v[axis] = 0.0,
                    None => {}
                }
            }
            self.vel[idx] = v;
        }
    }

    /// Bytes held by the node arrays.
    pub fn byte_size(&self) -> usize {
        self.mass.len() * (std::mem::size_of::<f64>() + std::mem::size_of::<Vec3>() + 1) + self.touched.capacity() * 4
    }
}
