use crate::Vec3;

/// Quadratic B-spline weights over the 3x3x3 node neighborhood of a particle.
#[derive(Clone, Copy, Debug)]
pub struct Stencil {
    /// Lowest node index of the neighborhood on each axis.
    pub base: [usize; 3],
    /// Per-axis weights `w[axis][offset]`.
    pub w: [[f64; 3]; 3],
    /// Particle position relative to `base`, in cells.
    pub fx: Vec3,
}

impl Stencil {
    /// Tensor-product weight of node `base + (i, j, k)`.
    #[inline]
    pub fn weight(&self, i: usize, j: usize, k: usize) -> f64 {
        self.w[0][i] * self.w[1][j] * self.w[2][k]
    }

    /// `x_i − x_p` for node `base + (i, j, k)`, in world units.
    #[inline]
    pub fn offset(&self, i: usize, j: usize, k: usize, dx: f64) -> Vec3 {
        (Vec3::new(i as f64, j as f64, k as f64) - self.fx) * dx
    }
}

/// Computes the stencil of `x` on a grid with `n` cells per axis, or `None`
/// when `x` lies outside the valid band `[dx, 1 − dx]³`.
#[inline]
pub fn stencil(x: &Vec3, n: usize) -> Option<Stencil> {
    let inv_dx = n as f64;
    let dx = 1.0 / inv_dx;
    let mut base = [0usize; 3];
    let mut w = [[0.0; 3]; 3];
    let mut fx = Vec3::zeros();
    for a in 0..3 {
        let xa = x[a];
        if !(xa >= dx && xa <= 1.0 - dx) {
            return None;
        }
        let s = xa * inv_dx;
        let b = (s - 0.5).floor();
        let f = s - b;
        base[a] = b as usize;
        fx[a] = f;
        w[a] = [0.5 * (1.5 - f).powi(2), 0.75 - (f - 1.0).powi(2), 0.5 * (f - 0.5).powi(2)];
    }
    Some(Stencil { base, w, fx })
}
