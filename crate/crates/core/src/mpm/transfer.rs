use super::kernel::{stencil, Stencil};
use super::{ExecMode, Grid, MaterialSet, MpmError, ParticleAttrs, ParticleState};
use crate::constitutive::{elastic_stress, plastic_return, ConstitutiveError, LameParams, MaterialParams};
use crate::{Mat3, Vec3};
use rayon::prelude::*;

/// Borrowed particle arrays.
#[derive(Clone, Copy)]
pub struct ParticleView<'a> {
    pub x: &'a [Vec3],
    pub v: &'a [Vec3],
    pub c: &'a [Mat3],
    pub f: &'a [Mat3],
    pub attrs: &'a ParticleAttrs,
}

impl ParticleView<'_> {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct ResolvedMaterial {
    pub params: MaterialParams,
    pub lame: LameParams,
}

/// Per-particle material lookup resolved once per run.
#[derive(Clone, Debug)]
pub struct MaterialTable {
    entries: Vec<ResolvedMaterial>,
    slot: Vec<u16>,
}

impl MaterialTable {
    pub fn new(materials: &MaterialSet, labels: &[i32]) -> Result<Self, MpmError> {
        let entries: Vec<ResolvedMaterial> = materials
            .iter()
            .map(|m| Ok(ResolvedMaterial { params: m.clone(), lame: m.lame()? }))
            .collect::<Result<_, ConstitutiveError>>()?;
        let mut slot = Vec::with_capacity(labels.len());
        for &l in labels {
            let s = entries.iter().position(|e| e.params.label == l).ok_or(MpmError::MissingMaterial(l))?;
            slot.push(s as u16);
        }
        Ok(Self { entries, slot })
    }

    #[inline]
    pub fn of(&self, particle: usize) -> &ResolvedMaterial {
        &self.entries[self.slot[particle] as usize]
    }
}

fn out_of_domain(particle: usize, x: &Vec3) -> MpmError {
    MpmError::OutOfDomain { particle, position: [x.x, x.y, x.z] }
}

fn located(particle: usize, e: ConstitutiveError) -> MpmError {
    match e {
        ConstitutiveError::Inverted { det } => MpmError::Inverted { particle, det },
        other => MpmError::Material(other),
    }
}

#[inline]
fn particle_stress(view: &ParticleView, table: &MaterialTable, p: usize) -> Result<Mat3, MpmError> {
    let m = table.of(p);
    elastic_stress(m.params.elasticity, &view.f[p], m.lame).map_err(|e| located(p, e))
}

#[inline]
fn scatter_particle(grid: &mut Grid, view: &ParticleView, p: usize, st: &Stencil, stress: &Mat3, dt: f64) {
    let dx = grid.dx();
    let inv_dx2 = 1.0 / (dx * dx);
    let m = view.attrs.mass[p];
    let affine = stress * (-dt * view.attrs.vol0[p] * 4.0 * inv_dx2) + view.c[p] * m;
    let mv = view.v[p] * m;
    for i in 0..3 {
        for j in 0..3 {
            let wij = st.w[0][i] * st.w[1][j];
            let row = grid.index(st.base[0] + i, st.base[1] + j, st.base[2]);
            for k in 0..3 {
                let w = wij * st.w[2][k];
                let dpos = st.offset(i, j, k, dx);
                grid.scatter(row + k, w * m, (mv + affine * dpos) * w);
            }
        }
    }
}

/// Particle-to-grid transfer with the stress force fused into the affine
/// term. Resets `grid` first and leaves node velocities (not momenta).
pub fn p2g(view: &ParticleView, table: &MaterialTable, grid: &mut Grid, dt: f64) -> Result<(), MpmError> {
    p2g_impl(view, table, grid, dt, ExecMode::Deterministic, &mut Vec::new(), None)
}

/// `skipped`, when given, turns inverted particles into stress-free ones and
/// flags them instead of failing.
pub(crate) fn p2g_impl(
    view: &ParticleView,
    table: &MaterialTable,
    grid: &mut Grid,
    dt: f64,
    mode: ExecMode,
    scratch: &mut Vec<Mat3>,
    mut skipped: Option<&mut [bool]>,
) -> Result<(), MpmError> {
    grid.reset();
    let n = view.len();
    if mode == ExecMode::Parallel {
        scratch.resize(n, Mat3::zeros());
        let failures: Vec<(usize, MpmError)> = scratch
            .par_iter_mut()
            .enumerate()
            .filter_map(|(p, out)| match particle_stress(view, table, p) {
                Ok(s) => {
                    *out = s;
                    None
                }
                Err(e) => {
                    *out = Mat3::zeros();
                    Some((p, e))
                }
            })
            .collect();
        match skipped.as_deref_mut() {
            Some(sk) => failures.iter().for_each(|(p, _)| sk[*p] = true),
            None => {
                if let Some((_, e)) = failures.into_iter().next() {
                    return Err(e);
                }
            }
        }
    }
    for p in 0..n {
        let st = stencil(&view.x[p], grid.resolution()).ok_or_else(|| out_of_domain(p, &view.x[p]))?;
        let stress = match mode {
            ExecMode::Parallel => scratch[p],
            ExecMode::Deterministic => match particle_stress(view, table, p) {
                Ok(s) => s,
                Err(e) => match skipped.as_deref_mut() {
                    Some(sk) => {
                        sk[p] = true;
                        Mat3::zeros()
                    }
                    None => return Err(e),
                },
            },
        };
        scatter_particle(grid, view, p, &st, &stress, dt);
    }
    grid.normalize();
    Ok(())
}

#[inline]
fn gather(grid: &Grid, x: &Vec3) -> Option<(Vec3, Mat3)> {
    let st = stencil(x, grid.resolution())?;
    let dx = grid.dx();
    let mut v = Vec3::zeros();
    let mut b = Mat3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let wij = st.w[0][i] * st.w[1][j];
            let row = grid.index(st.base[0] + i, st.base[1] + j, st.base[2]);
            for k in 0..3 {
                let w = wij * st.w[2][k];
                let vi = grid.vel[row + k];
                v += vi * w;
                b += (vi * w) * st.offset(i, j, k, dx).transpose();
            }
        }
    }
    Some((v, b * (4.0 / (dx * dx))))
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn g2p_particle(
    grid: &Grid,
    table: &MaterialTable,
    p: usize,
    dt: f64,
    lo: f64,
    hi: f64,
    x: &mut Vec3,
    v: &mut Vec3,
    c: &mut Mat3,
    f: &mut Mat3,
) -> Result<bool, MpmError> {
    let (vp, cp) = gather(grid, x).ok_or_else(|| out_of_domain(p, x))?;
    *v = vp;
    *c = cp;
    *x += vp * dt;
    let fnew = (Mat3::identity() + cp * dt) * *f;
    let m = table.of(p);
    *f = plastic_return(m.params.plasticity, &fnew, m.lame, &m.params).map_err(|e| located(p, e))?;
    let mut clamped = false;
    for a in 0..3 {
        if x[a] < lo {
            x[a] = lo;
            v[a] = v[a].max(0.0);
            clamped = true;
        } else if x[a] > hi {
            x[a] = hi;
            v[a] = v[a].min(0.0);
            clamped = true;
        }
    }
    Ok(clamped)
}

/// Grid-to-particle transfer: velocity, affine matrix, advection,
/// `F ← (I + Δt C) F` and the plastic projection. Particles are then clamped
/// to `[margin·dx, 1 − margin·dx]³` with their outward velocity removed.
/// Returns how many particles were clamped.
pub fn g2p(
    state: &mut ParticleState,
    grid: &Grid,
    dt: f64,
    table: &MaterialTable,
    margin: usize,
) -> Result<usize, MpmError> {
    g2p_impl(state, grid, dt, table, margin, ExecMode::Deterministic)
}

pub(crate) fn g2p_impl(
    state: &mut ParticleState,
    grid: &Grid,
    dt: f64,
    table: &MaterialTable,
    margin: usize,
    mode: ExecMode,
) -> Result<usize, MpmError> {
    let lo = margin as f64 * grid.dx();
    let hi = 1.0 - lo;
    match mode {
        ExecMode::Deterministic => {
            let mut clamped = 0;
            for p in 0..state.len() {
                let (x, v, c, f) = (&mut state.x[p], &mut state.v[p], &mut state.c[p], &mut state.f[p]);
                clamped += g2p_particle(grid, table, p, dt, lo, hi, x, v, c, f)? as usize;
            }
            Ok(clamped)
        }
        ExecMode::Parallel => {
            let results: Vec<Result<bool, MpmError>> = (&mut state.x, &mut state.v, &mut state.c, &mut state.f)
                .into_par_iter()
                .enumerate()
                .map(|(p, (x, v, c, f))| g2p_particle(grid, table, p, dt, lo, hi, x, v, c, f))
                .collect();
            let mut clamped = 0;
            for r in results {
                clamped += r? as usize;
            }
            Ok(clamped)
        }
    }
}

/// One-substep deformation update from a frozen state: returns only
/// `F' = ψ((I + Δt C') F)` per particle. Particles whose plastic projection
/// fails are flagged in `skipped`.
pub(crate) fn deformation_after_step(
    view: &ParticleView,
    grid: &Grid,
    dt: f64,
    table: &MaterialTable,
    out: &mut Vec<Mat3>,
    skipped: &mut [bool],
) -> Result<(), MpmError> {
    out.clear();
    for p in 0..view.len() {
        let (_, cp) = gather(grid, &view.x[p]).ok_or_else(|| out_of_domain(p, &view.x[p]))?;
        let fnew = (Mat3::identity() + cp * dt) * view.f[p];
        let m = table.of(p);
        match plastic_return(m.params.plasticity, &fnew, m.lame, &m.params) {
            Ok(f) => out.push(f),
            Err(_) => {
                skipped[p] = true;
                out.push(fnew);
            }
        }
    }
    Ok(())
}
