//! 3x3 singular value decomposition by one-sided Jacobi rotations.
//!
//! The general-purpose decomposition in nalgebra is accurate but several times
//! slower than needed for a per-particle, per-substep call, so the hot path
//! uses this fixed-size variant. Accuracy is checked against nalgebra in the
//! tests.

use crate::{Mat3, Vec3};

/// `F = U diag(sigma) Vᵀ` with `det U = det V = +1`.
///
/// `sigma` is sorted by decreasing magnitude; only `sigma[2]` can be negative,
/// and only when `det F < 0`.
#[derive(Clone, Copy, Debug)]
pub struct Svd3 {
    pub u: Mat3,
    pub sigma: Vec3,
    pub v: Mat3,
}

impl Svd3 {
    pub fn recompose(&self) -> Mat3 {
        self.u * Mat3::from_diagonal(&self.sigma) * self.v.transpose()
    }
}

const MAX_SWEEPS: usize = 30;

pub fn svd3(a: &Mat3) -> Svd3 {
    // Columns as plain arrays; the rotation loop is the hot part.
    let mut uc = [[0.0f64; 3]; 3];
    for (j, col) in uc.iter_mut().enumerate() {
        for i in 0..3 {
            col[i] = a[(i, j)];
        }
    }
    let mut vc = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let dot = |x: &[f64; 3], y: &[f64; 3]| x[0] * y[0] + x[1] * y[1] + x[2] * y[2];

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let alpha = dot(&uc[p], &uc[p]);
            let beta = dot(&uc[q], &uc[q]);
            let gamma = dot(&uc[p], &uc[q]);
            if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                continue;
            }
            rotated = true;
            let zeta = (beta - alpha) / (2.0 * gamma);
            let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
            let c = 1.0 / (1.0 + t * t).sqrt();
            let s = c * t;
            for m in [&mut uc, &mut vc] {
                for i in 0..3 {
                    let (xp, xq) = (m[p][i], m[q][i]);
                    m[p][i] = c * xp - s * xq;
                    m[q][i] = s * xp + c * xq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut u = Mat3::from_fn(|i, j| uc[j][i]);
    let mut v = Mat3::from_fn(|i, j| vc[j][i]);

    let mut sigma = Vec3::new(u.column(0).norm(), u.column(1).norm(), u.column(2).norm());

    // Sort descending; every swap is mirrored in U and V so A = U Σ Vᵀ holds.
    for (i, j) in [(0, 1), (1, 2), (0, 1)] {
        if sigma[i] < sigma[j] {
            sigma.swap_rows(i, j);
            u.swap_columns(i, j);
            v.swap_columns(i, j);
        }
    }

    let scale = sigma[0];
    let tiny = scale * 1e-14;
    let mut uo = Mat3::zeros();
    if sigma[0] <= f64::MIN_POSITIVE {
        uo = Mat3::identity();
    } else {
        uo.set_column(0, &(u.column(0) / sigma[0]));
        if sigma[1] > tiny {
            uo.set_column(1, &(u.column(1) / sigma[1]));
        } else {
            let c0 = uo.column(0).into_owned();
            uo.set_column(1, &any_orthogonal(&c0));
        }
        if sigma[2] > tiny {
            uo.set_column(2, &(u.column(2) / sigma[2]));
        } else {
            let c2 = uo.column(0).cross(&uo.column(1));
            uo.set_column(2, &c2);
        }
    }

    if v.determinant() < 0.0 {
        v.set_column(2, &-v.column(2));
        uo.set_column(2, &-uo.column(2));
    }
    if uo.determinant() < 0.0 {
        uo.set_column(2, &-uo.column(2));
        sigma[2] = -sigma[2];
    }
    Svd3 { u: uo, sigma, v }
}

fn any_orthogonal(a: &Vec3) -> Vec3 {
    let axis = if a.x.abs() <= a.y.abs() && a.x.abs() <= a.z.abs() {
        Vec3::x()
    } else if a.y.abs() <= a.z.abs() {
        Vec3::y()
    } else {
        Vec3::z()
    };
    a.cross(&axis).normalize()
}

/// Rotation part of the polar decomposition, `R = U Vᵀ`.
pub fn polar_rotation(svd: &Svd3) -> Mat3 {
    svd.u * svd.v.transpose()
}
