//! Residual evaluators for the hydrodynamic identities of the Pauli–Rashba
//! flow: spin-current decomposition, conventional versus Madelung current,
//! continuity with anomalous velocity, loop circulation and spin purity.
//!
//! Every evaluator works on gauge-invariant combinations of `Ψ` only and
//! restricts comparisons to the support `D > 1e-8 · max D`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::grid::{Grid2, Spectral, SpinorField};
use crate::pauli::{
    sigma_apply, spin_current_direct, spin_current_madelung, spin_gradient, DerivativeScheme,
    MadelungFields, Tensor,
};
use crate::{Error, PhysicalParams, Result, Vec3, SUPPORT_THRESHOLD};

/// Outcome of comparing two sides of an identity on the support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub name: String,
    /// `(∫ |r|² dx)^{1/2}` over the support.
    pub residual_l2: f64,
    /// `max |r|` over the support.
    pub residual_max: f64,
    /// Max-norm of the larger of the two compared quantities.
    pub scale: f64,
    /// `residual_max / scale`, or `residual_max` itself when `scale` vanishes.
    pub relative: f64,
}

impl IdentityReport {
    fn build(name: &str, residual_l2: f64, residual_max: f64, scale: f64) -> Self {
        let relative = if scale > 0.0 {
            residual_max / scale
        } else {
            residual_max
        };
        Self {
            name: name.to_string(),
            residual_l2,
            residual_max,
            scale,
            relative,
        }
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.relative.is_finite() && self.relative < tol
    }
}

/// Collects pointwise residuals `lhs − rhs` of multi-component fields.
struct Comparison {
    sum_sq: f64,
    max_res: f64,
    max_lhs: f64,
    max_rhs: f64,
}

impl Comparison {
    fn new() -> Self {
        Self {
            sum_sq: 0.0,
            max_res: 0.0,
            max_lhs: 0.0,
            max_rhs: 0.0,
        }
    }

    fn add(&mut self, lhs: f64, rhs: f64) {
        let r = lhs - rhs;
        self.sum_sq += r * r;
        self.max_res = self.max_res.max(r.abs());
        self.max_lhs = self.max_lhs.max(lhs.abs());
        self.max_rhs = self.max_rhs.max(rhs.abs());
    }

    fn finish(self, name: &str, cell_area: f64) -> IdentityReport {
        IdentityReport::build(
            name,
            (self.sum_sq * cell_area).sqrt(),
            self.max_res,
            self.max_lhs.max(self.max_rhs),
        )
    }
}

fn support_of(density: &[f64]) -> Vec<bool> {
    let cut = SUPPORT_THRESHOLD * density.iter().copied().fold(0.0, f64::max);
    density.iter().map(|&d| d > cut).collect()
}

fn compare_tensors(name: &str, grid: &Grid2, support: &[bool], lhs: &[Tensor], rhs: &[Tensor]) -> IdentityReport {
    let mut c = Comparison::new();
    for idx in 0..grid.len() {
        if !support[idx] {
            continue;
        }
        for k in 0..2 {
            for a in 0..3 {
                c.add(lhs[idx][k][a], rhs[idx][k][a]);
            }
        }
    }
    c.finish(name, grid.cell_area())
}

/// Direct spin current against its Madelung reconstruction
/// `D v⊗s + D (∂s × s)/m`.
pub fn decomposition_residual(
    field: &SpinorField,
    p: &PhysicalParams,
    fields: &MadelungFields,
    scheme: DerivativeScheme,
) -> IdentityReport {
    let direct = spin_current_direct(field, p);
    let madelung = spin_current_madelung(fields, scheme);
    let name = match scheme {
        DerivativeScheme::Spectral => "decomposition_spectral",
        DerivativeScheme::Central => "decomposition_central",
    };
    compare_tensors(name, &field.grid, &fields.support(), &direct, &madelung)
}

/// `(ħ/4) Re Ψ†{v̂_j, σ_k}Ψ`, with the Rashba velocity operator
/// `v̂ = p̂/m + (α_R/ħ) σ × ẑ` applied literally to `Ψ` and `σ_kΨ`.
pub fn conventional_current(field: &SpinorField, p: &PhysicalParams) -> Vec<Tensor> {
    let grid = field.grid;
    let sp = Spectral::new(grid);
    let n = grid.len();
    let vel_op = |j: usize, up: &[Complex64], down: &[Complex64]| -> [Vec<Complex64>; 2] {
        let du = sp.derivative(up, j);
        let dd = sp.derivative(down, j);
        let c = Complex64::new(0.0, -p.hbar / p.mass);
        let x = p.alpha_r / p.hbar;
        // σ × ẑ = (σ_y, −σ_x)
        let (sig, sign) = if j == 0 { (1, 1.0) } else { (0, -1.0) };
        let mut ou = Vec::with_capacity(n);
        let mut od = Vec::with_capacity(n);
        for idx in 0..n {
            let s = sigma_apply(sig, [up[idx], down[idx]]);
            ou.push(c * du[idx] + s[0] * (sign * x));
            od.push(c * dd[idx] + s[1] * (sign * x));
        }
        [ou, od]
    };
    let mut out = vec![[[0.0; 3]; 2]; n];
    for k in 0..3 {
        let (su, sd): (Vec<Complex64>, Vec<Complex64>) = (0..n)
            .map(|idx| {
                let s = sigma_apply(k, [field.up[idx], field.down[idx]]);
                (s[0], s[1])
            })
            .unzip();
        for j in 0..2 {
            let [a_u, a_d] = vel_op(j, &su, &sd);
            let [b_u, b_d] = vel_op(j, &field.up, &field.down);
            for idx in 0..n {
                let sb = sigma_apply(k, [b_u[idx], b_d[idx]]);
                let psi = [field.up[idx], field.down[idx]];
                let val = psi[0].conj() * (a_u[idx] + sb[0]) + psi[1].conj() * (a_d[idx] + sb[1]);
                out[idx][j][k] = 0.25 * p.hbar * val.re;
            }
        }
    }
    out
}

/// Conventional current against `J_jk + (ħ²/4) ε_jkl D 𝓕_l` with `𝓕 = αẑ`.
pub fn conventional_current_identity(field: &SpinorField, p: &PhysicalParams) -> IdentityReport {
    let lhs = conventional_current(field, p);
    let mut rhs = spin_current_direct(field, p);
    let d = field.density();
    let shift = 0.25 * p.hbar * p.hbar * p.alpha();
    for (t, dens) in rhs.iter_mut().zip(&d) {
        t[0][1] += shift * dens;
        t[1][0] -= shift * dens;
    }
    compare_tensors("conventional_current", &field.grid, &support_of(&d), &lhs, &rhs)
}

/// Hall term `α D⁻¹ (s̃ × ẑ)_k s̃_a` of the transport spin current.
pub fn hall_term(density: &[f64], spin_density: &[Vec3], alpha: f64) -> Vec<Tensor> {
    density
        .iter()
        .zip(spin_density)
        .map(|(&d, st)| {
            let mut t = [[0.0; 3]; 2];
            if d > 0.0 {
                let sxz = [st.y, -st.x];
                for k in 0..2 {
                    for a in 0..3 {
                        t[k][a] = alpha * sxz[k] * st[a] / d;
                    }
                }
            }
            t
        })
        .collect()
}

/// Transport spin current `J + α D (s × ẑ) ⊗ s`, with `J` reconstructed from
/// the Madelung fields by spectral differentiation. Returns `(J^tr, Hall term)`.
pub fn transport_spin_current(fields: &MadelungFields) -> (Vec<Tensor>, Vec<Tensor>) {
    let mut j = spin_current_madelung(fields, DerivativeScheme::Spectral);
    let hall = hall_term(&fields.density, &fields.spin_density(), fields.alpha);
    for (t, h) in j.iter_mut().zip(&hall) {
        for k in 0..2 {
            for a in 0..3 {
                t[k][a] += h[k][a];
            }
        }
    }
    (j, hall)
}

/// Which flux enters the continuity check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContinuityFlux {
    /// `M/m + α s̃ × ẑ`.
    Full,
    /// `M/m` alone, dropping the anomalous part.
    CanonicalOnly,
}

/// `∂_t D + div(M/m + α s̃ × ẑ)` on equally spaced snapshots, with a central
/// time difference at every interior snapshot.
pub fn continuity_residual(snapshots: &[MadelungFields], dt: f64) -> Result<IdentityReport> {
    continuity_residual_with(snapshots, dt, ContinuityFlux::Full)
}

pub fn continuity_residual_with(
    snapshots: &[MadelungFields],
    dt: f64,
    flux: ContinuityFlux,
) -> Result<IdentityReport> {
    if snapshots.len() < 3 {
        return Err(Error::InsufficientSnapshots {
            needed: 3,
            got: snapshots.len(),
        });
    }
    let grid = snapshots[0].grid;
    if snapshots.iter().any(|s| s.grid != grid) {
        return Err(Error::GridMismatch);
    }
    let sp = Spectral::new(grid);
    let mut c = Comparison::new();
    for w in snapshots.windows(3) {
        let f = &w[1];
        let anomal = if flux == ContinuityFlux::Full { f.alpha } else { 0.0 };
        let (fx, fy): (Vec<f64>, Vec<f64>) = (0..grid.len())
            .map(|idx| {
                let m = f.momentum[idx];
                let st = f.spin[idx] * f.density[idx];
                (m[0] / f.mass + anomal * st.y, m[1] / f.mass - anomal * st.x)
            })
            .unzip();
        let divx = sp.derivative_real(&fx, 0);
        let divy = sp.derivative_real(&fy, 1);
        let support = f.support();
        for idx in 0..grid.len() {
            if !support[idx] {
                continue;
            }
            let dtd = (w[2].density[idx] - w[0].density[idx]) / (2.0 * dt);
            c.add(dtd, -(divx[idx] + divy[idx]));
        }
    }
    let name = match flux {
        ContinuityFlux::Full => "continuity",
        ContinuityFlux::CanonicalOnly => "continuity_canonical_only",
    };
    Ok(c.finish(name, grid.cell_area()))
}

/// Max over the support of `||s| − ħ/2|`, relative to `ħ/2`.
pub fn purity_check(fields: &MadelungFields) -> IdentityReport {
    let half = 0.5 * fields.hbar;
    let support = fields.support();
    let (mut sum_sq, mut max_res) = (0.0, 0.0f64);
    for (s, on) in fields.spin.iter().zip(support) {
        if on {
            let r = s.norm() - half;
            sum_sq += r * r;
            max_res = max_res.max(r.abs());
        }
    }
    IdentityReport::build(
        "purity",
        (sum_sq * fields.grid.cell_area()).sqrt(),
        max_res,
        half,
    )
}

/// Periodic bilinear interpolation of a nodal field.
pub fn interpolate(grid: &Grid2, f: &[f64], x: f64, y: f64) -> f64 {
    let fx = (x + 0.5 * grid.lx) / grid.dx();
    let fy = (y + 0.5 * grid.ly) / grid.dy();
    let (i0, j0) = (fx.floor(), fy.floor());
    let (tx, ty) = (fx - i0, fy - j0);
    let wrap = |v: f64, n: usize| (v as i64).rem_euclid(n as i64) as usize;
    let (i0, j0) = (wrap(i0, grid.nx), wrap(j0, grid.ny));
    let (i1, j1) = ((i0 + 1) % grid.nx, (j0 + 1) % grid.ny);
    let v = |i, j| f[grid.index(i, j)];
    (1.0 - tx) * ((1.0 - ty) * v(i0, j0) + ty * v(i0, j1)) + tx * ((1.0 - ty) * v(i1, j0) + ty * v(i1, j1))
}

fn check_loop(fields: &MadelungFields, loop_pts: &[[f64; 2]]) -> Result<()> {
    if loop_pts.len() < 3 {
        return Err(Error::InvalidParameter {
            field: "loop",
            reason: format!("a closed loop needs at least 3 vertices, got {}", loop_pts.len()),
        });
    }
    let cut = SUPPORT_THRESHOLD * fields.max_density();
    for (index, pt) in loop_pts.iter().enumerate() {
        let density = interpolate(&fields.grid, &fields.density, pt[0], pt[1]);
        if !(density > cut) {
            return Err(Error::NodeOnLoop {
                index,
                x: pt[0],
                y: pt[1],
                density,
            });
        }
    }
    Ok(())
}

/// Trapezoidal `∮ w · dl` along the closed polyline.
fn line_integral(grid: &Grid2, wx: &[f64], wy: &[f64], loop_pts: &[[f64; 2]]) -> f64 {
    let n = loop_pts.len();
    let vals: Vec<[f64; 2]> = loop_pts
        .iter()
        .map(|p| [interpolate(grid, wx, p[0], p[1]), interpolate(grid, wy, p[0], p[1])])
        .collect();
    (0..n)
        .map(|i| {
            let j = (i + 1) % n;
            let dl = [loop_pts[j][0] - loop_pts[i][0], loop_pts[j][1] - loop_pts[i][1]];
            0.5 * ((vals[i][0] + vals[j][0]) * dl[0] + (vals[i][1] + vals[j][1]) * dl[1])
        })
        .sum()
}

/// `m ∮ v · dl` along a closed polyline (last vertex joins the first).
pub fn loop_circulation(fields: &MadelungFields, loop_pts: &[[f64; 2]]) -> Result<f64> {
    check_loop(fields, loop_pts)?;
    let vx: Vec<f64> = fields.velocity.iter().map(|v| v[0]).collect();
    let vy: Vec<f64> = fields.velocity.iter().map(|v| v[1]).collect();
    Ok(fields.mass * line_integral(&fields.grid, &vx, &vy, loop_pts))
}

/// Rate of change of `m ∮ v · dl` for a loop carried by `u`, evaluated from a
/// single snapshot:
///
/// ```text
/// −m ∮ ( α ∇v·(s × ẑ) + (mD)⁻¹ ∂_l Π_·l ) · dx,
/// Π_jl = D ∂_j s·∂_l s / m + α D (s_l ∂_j s_z − s_z ∂_j s_l).
/// ```
pub fn circulation_rate(fields: &MadelungFields, loop_pts: &[[f64; 2]]) -> Result<f64> {
    check_loop(fields, loop_pts)?;
    let grid = fields.grid;
    let n = grid.len();
    let sp = Spectral::new(grid);
    let support = fields.support();
    let (m, alpha) = (fields.mass, fields.alpha);
    let ds = spin_gradient(fields, DerivativeScheme::Spectral);
    let dd = sp.gradient_real(&fields.density);
    let dm: Vec<[Vec<f64>; 2]> = (0..2)
        .map(|i| {
            let mi: Vec<f64> = fields.momentum.iter().map(|v| v[i]).collect();
            sp.gradient_real(&mi)
        })
        .collect();
    // pi[j][l] per node
    let mut pi = vec![vec![0.0; n]; 4];
    for idx in 0..n {
        if !support[idx] {
            continue;
        }
        let d = fields.density[idx];
        let s = fields.spin[idx];
        for j in 0..2 {
            for l in 0..2 {
                pi[2 * j + l][idx] = d * ds[idx][j].dot(&ds[idx][l]) / m
                    + alpha * d * (s[l] * ds[idx][j].z - s.z * ds[idx][j][l]);
            }
        }
    }
    let mut w = [vec![0.0; n], vec![0.0; n]];
    for j in 0..2 {
        let div = {
            let a = sp.derivative_real(&pi[2 * j], 0);
            let b = sp.derivative_real(&pi[2 * j + 1], 1);
            a.into_iter().zip(b).map(|(x, y)| x + y).collect::<Vec<_>>()
        };
        for idx in 0..n {
            if !support[idx] {
                continue;
            }
            let d = fields.density[idx];
            let s = fields.spin[idx];
            let sxz = [s.y, -s.x];
            let mut grad_v = 0.0;
            for i in 0..2 {
                let dvij = (dm[i][j][idx] - m * fields.velocity[idx][i] * dd[j][idx]) / (m * d);
                grad_v += dvij * sxz[i];
            }
            w[j][idx] = alpha * grad_v + div[idx] / (m * d);
        }
    }
    Ok(-m * line_integral(&grid, &w[0], &w[1], loop_pts))
}

/// Moves loop vertices by `dt` along the transport velocity with Heun's
/// method, using `u` at the start and at the end of the interval.
pub fn advect_loop(
    loop_pts: &[[f64; 2]],
    start: &MadelungFields,
    end: &MadelungFields,
    dt: f64,
) -> Vec<[f64; 2]> {
    let comp = |f: &MadelungFields, c: usize| -> Vec<f64> {
        f.transport_velocity.iter().map(|u| u[c]).collect()
    };
    let (u0, v0) = (comp(start, 0), comp(start, 1));
    let (u1, v1) = (comp(end, 0), comp(end, 1));
    let (g0, g1) = (&start.grid, &end.grid);
    loop_pts
        .iter()
        .map(|p| {
            let a = [interpolate(g0, &u0, p[0], p[1]), interpolate(g0, &v0, p[0], p[1])];
            let q = [p[0] + dt * a[0], p[1] + dt * a[1]];
            let b = [interpolate(g1, &u1, q[0], q[1]), interpolate(g1, &v1, q[0], q[1])];
            [p[0] + 0.5 * dt * (a[0] + b[0]), p[1] + 0.5 * dt * (a[1] + b[1])]
        })
        .collect()
}

/// Circle of `n` vertices.
pub fn circle_loop(center: [f64; 2], radius: f64, n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
        })
        .collect()
}
