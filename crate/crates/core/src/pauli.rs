//! Spectral reference solver for the planar Pauli equation with Rashba
//! coupling,
//!
//! ```text
//! iħ ∂t Ψ = [ p̂²/2m + (α_R/ħ)(σ̂ × ẑ)·p̂ + V ] Ψ,
//! ```
//!
//! and extraction of the gauge-invariant Madelung fields `(D, s, v, u, M)`.
//!
//! With `V = 0` every Fourier mode evolves independently under the 2×2 symbol
//! `H(k) = ħ²|k|²/2m + α_R (σ_y k_x − σ_x k_y)`, whose exponential is known in
//! closed form, so propagation is exact up to rounding.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::grid::{central_derivative, Grid2, Spectral, SpinorField};
use crate::{Error, PhysicalParams, Result, Vec3, SUPPORT_THRESHOLD};

/// 2×2 complex matrix, row-major.
pub type Mat2c = [[Complex64; 2]; 2];

/// Rank-2 tensor per node, indexed `[k][a]` with `k ∈ {x, y}` the flux
/// direction and `a ∈ {x, y, z}` the spin component.
pub type Tensor = [[f64; 3]; 2];

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Applies the Pauli matrix `σ_a` to a spinor.
pub fn sigma_apply(a: usize, v: [Complex64; 2]) -> [Complex64; 2] {
    match a {
        0 => [v[1], v[0]],
        1 => [-I * v[1], I * v[0]],
        _ => [v[0], -v[1]],
    }
}

/// Spinor with Bloch angles `(θ, φ)`: `(cos θ/2, e^{iφ} sin θ/2)`.
pub fn bloch_spinor(theta: f64, phi: f64) -> [Complex64; 2] {
    [
        Complex64::new((0.5 * theta).cos(), 0.0),
        Complex64::from_polar((0.5 * theta).sin(), phi),
    ]
}

/// Expectation `Ψ†σΨ` of a single spinor.
pub fn spin_expectation(v: [Complex64; 2]) -> Vec3 {
    let c = v[0].conj() * v[1];
    Vec3::new(2.0 * c.re, 2.0 * c.im, v[0].norm_sqr() - v[1].norm_sqr())
}

/// Kinetic energy `ε(k) = ħ²|k|²/2m` and Rashba field `b(k) = α_R(−k_y, k_x, 0)`
/// of the symbol `H(k) = ε 𝟙 + b·σ`.
pub fn rashba_symbol(kx: f64, ky: f64, p: &PhysicalParams) -> (f64, Vec3) {
    let eps = p.hbar * p.hbar * (kx * kx + ky * ky) / (2.0 * p.mass);
    (eps, Vec3::new(-ky, kx, 0.0) * p.alpha_r)
}

/// The symbol `H(k)` as an explicit matrix.
pub fn rashba_matrix(kx: f64, ky: f64, p: &PhysicalParams) -> Mat2c {
    let (eps, b) = rashba_symbol(kx, ky, p);
    [
        [Complex64::new(eps + b.z, 0.0), Complex64::new(b.x, -b.y)],
        [Complex64::new(b.x, b.y), Complex64::new(eps - b.z, 0.0)],
    ]
}

/// Band energies `E±(k) = ħ²|k|²/2m ± α_R|k|`.
pub fn band_energies(kx: f64, ky: f64, p: &PhysicalParams) -> [f64; 2] {
    let (eps, b) = rashba_symbol(kx, ky, p);
    [eps + b.norm(), eps - b.norm()]
}

/// Eigenspinor of `b̂(k)·σ` with eigenvalue `+1` (`band = +1`) or `−1`.
/// At `k = 0` the `+1` spinor of `σ_y` is returned.
pub fn band_spinor(kx: f64, ky: f64, band: i32) -> [Complex64; 2] {
    let beta = if kx == 0.0 && ky == 0.0 {
        0.5 * std::f64::consts::PI
    } else {
        ky.atan2(kx) + 0.5 * std::f64::consts::PI
    };
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let sign = if band >= 0 { 1.0 } else { -1.0 };
    [Complex64::new(s, 0.0), Complex64::from_polar(sign * s, beta)]
}

fn matvec(m: &Mat2c, v: [Complex64; 2]) -> [Complex64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

/// `exp(−i dt H(k)/ħ)` in closed form.
pub fn mode_propagator(kx: f64, ky: f64, p: &PhysicalParams, dt: f64) -> Mat2c {
    let (eps, b) = rashba_symbol(kx, ky, p);
    let phase = Complex64::from_polar(1.0, -eps * dt / p.hbar);
    let bn = b.norm();
    if bn == 0.0 {
        return [[phase, ZERO], [ZERO, phase]];
    }
    let (s, c) = (bn * dt / p.hbar).sin_cos();
    let n = b / bn;
    let cs = Complex64::new(c, 0.0);
    let m = [
        [cs - I * s * n.z, -I * s * Complex64::new(n.x, -n.y)],
        [-I * s * Complex64::new(n.x, n.y), cs + I * s * n.z],
    ];
    [
        [phase * m[0][0], phase * m[0][1]],
        [phase * m[1][0], phase * m[1][1]],
    ]
}

/// Per-mode unitary propagators for a fixed time step.
#[derive(Clone, Debug)]
pub struct SpectralPropagator {
    spectral: Spectral,
    dt: f64,
    modes: Vec<Mat2c>,
}

fn require_rashba_only(p: &PhysicalParams) -> Result<()> {
    if p.potential.soc_coupling != 0.0 && !p.potential.is_zero() {
        return Err(Error::UnsupportedPotential(
            "position-dependent spin-orbit fields are not separable in Fourier space".into(),
        ));
    }
    Ok(())
}

/// Exact propagator for `V = 0`.
pub fn build_propagator(grid: Grid2, p: &PhysicalParams, dt: f64) -> Result<SpectralPropagator> {
    if !p.potential.is_zero() {
        return Err(Error::UnsupportedPotential(
            "exact spectral propagation requires V = 0".into(),
        ));
    }
    SpectralPropagator::kinetic(grid, p, dt)
}

impl SpectralPropagator {
    /// Propagator of the kinetic + Rashba part alone, whatever `V` is.
    pub fn kinetic(grid: Grid2, p: &PhysicalParams, dt: f64) -> Result<Self> {
        grid.validate()?;
        p.validate()?;
        require_rashba_only(p)?;
        let modes = (0..grid.len())
            .map(|idx| {
                let (kx, ky) = grid.k(idx);
                mode_propagator(kx, ky, p, dt)
            })
            .collect();
        Ok(Self {
            spectral: Spectral::new(grid),
            dt,
            modes,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &Grid2 {
        self.spectral.grid()
    }

    pub fn mode(&self, idx: usize) -> &Mat2c {
        &self.modes[idx]
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    pub fn apply(&self, field: &mut SpinorField) {
        self.spectral.forward(&mut field.up);
        self.spectral.forward(&mut field.down);
        field
            .up
            .par_iter_mut()
            .zip(field.down.par_iter_mut())
            .zip(self.modes.par_iter())
            .for_each(|((u, d), m)| {
                let [a, b] = matvec(m, [*u, *d]);
                *u = a;
                *d = b;
            });
        self.spectral.inverse(&mut field.up);
        self.spectral.inverse(&mut field.down);
    }

    pub fn step(&self, field: &SpinorField) -> SpinorField {
        let mut out = field.clone();
        self.apply(&mut out);
        out
    }
}

/// Strang splitting: half kinetic + Rashba step in Fourier space, full
/// potential phase in real space, half kinetic + Rashba step.
#[derive(Clone, Debug)]
pub struct StrangStepper {
    half: SpectralPropagator,
    phase: Vec<Complex64>,
}

impl StrangStepper {
    pub fn new(grid: Grid2, p: &PhysicalParams, dt: f64) -> Result<Self> {
        let half = SpectralPropagator::kinetic(grid, p, 0.5 * dt)?;
        let phase = (0..grid.len())
            .map(|idx| {
                let (x, y) = grid.position(idx);
                let v = p.potential.value(&Vec3::new(x, y, 0.0));
                Complex64::from_polar(1.0, -v * dt / p.hbar)
            })
            .collect();
        Ok(Self { half, phase })
    }

    pub fn apply(&self, field: &mut SpinorField) {
        self.half.apply(field);
        for ((u, d), ph) in field.up.iter_mut().zip(field.down.iter_mut()).zip(&self.phase) {
            *u *= ph;
            *d *= ph;
        }
        self.half.apply(field);
    }
}

/// One Strang step; builds the stepper on the fly.
pub fn step_strang(field: &SpinorField, p: &PhysicalParams, dt: f64) -> Result<SpinorField> {
    let stepper = StrangStepper::new(field.grid, p, dt)?;
    let mut out = field.clone();
    stepper.apply(&mut out);
    Ok(out)
}

/// `⟨H⟩` with kinetic and Rashba parts evaluated in Fourier space.
pub fn energy(field: &SpinorField, p: &PhysicalParams) -> f64 {
    let grid = field.grid;
    let sp = Spectral::new(grid);
    let mut u = field.up.clone();
    let mut d = field.down.clone();
    sp.forward(&mut u);
    sp.forward(&mut d);
    let mut kinetic = 0.0;
    for idx in 0..grid.len() {
        let (kx, ky) = grid.k(idx);
        let h = rashba_matrix(kx, ky, p);
        let hv = matvec(&h, [u[idx], d[idx]]);
        kinetic += (u[idx].conj() * hv[0] + d[idx].conj() * hv[1]).re;
    }
    kinetic *= grid.cell_area() / grid.len() as f64;
    let dens = field.density();
    let pot: f64 = (0..grid.len())
        .map(|idx| {
            let (x, y) = grid.position(idx);
            p.potential.value(&Vec3::new(x, y, 0.0)) * dens[idx]
        })
        .sum::<f64>()
        * grid.cell_area();
    kinetic + pot
}

/// Gaussian wavepacket `exp(−|x−c|²/4σ² + i k·x) χ`, normalized on the grid.
/// `sigma` is the standard deviation of the density.
pub fn gaussian_packet(
    grid: Grid2,
    center: [f64; 2],
    sigma: f64,
    k: [f64; 2],
    spinor: [Complex64; 2],
) -> SpinorField {
    SpinorField::from_fn(grid, |x, y| {
        let (dx, dy) = (x - center[0], y - center[1]);
        let env = Complex64::from_polar(
            (-(dx * dx + dy * dy) / (4.0 * sigma * sigma)).exp(),
            k[0] * x + k[1] * y,
        );
        [env * spinor[0], env * spinor[1]]
    })
    .normalized()
}

/// Gauge-invariant hydrodynamic fields of a spinor snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct MadelungFields {
    pub grid: Grid2,
    pub hbar: f64,
    pub mass: f64,
    /// Reduced Rashba strength `α = 2α_R/ħ²`.
    pub alpha: f64,
    /// `D = ‖Ψ‖²`.
    pub density: Vec<f64>,
    /// Spin per particle `s = ħ Ψ†σΨ / 2D`.
    pub spin: Vec<Vec3>,
    /// Canonical momentum density `M = ħ Im(Ψ†∇Ψ)`.
    pub momentum: Vec<[f64; 2]>,
    /// `v = M / mD`.
    pub velocity: Vec<[f64; 2]>,
    /// `u = v + α s × ẑ`.
    pub transport_velocity: Vec<[f64; 2]>,
}

impl MadelungFields {
    pub fn max_density(&self) -> f64 {
        self.density.iter().copied().fold(0.0, f64::max)
    }

    /// Nodes where `D > 1e-8 · max D`.
    pub fn support(&self) -> Vec<bool> {
        let cut = SUPPORT_THRESHOLD * self.max_density();
        self.density.iter().map(|&d| d > cut).collect()
    }

    /// Spin density `s̃ = D s`.
    pub fn spin_density(&self) -> Vec<Vec3> {
        self.density
            .iter()
            .zip(&self.spin)
            .map(|(d, s)| s * *d)
            .collect()
    }

    pub fn total_momentum(&self) -> [f64; 2] {
        let a = self.grid.cell_area();
        let (mut px, mut py) = (0.0, 0.0);
        for m in &self.momentum {
            px += m[0];
            py += m[1];
        }
        [px * a, py * a]
    }

    /// `∫ s̃ dx`.
    pub fn total_spin(&self) -> Vec3 {
        self.spin_density().into_iter().sum::<Vec3>() * self.grid.cell_area()
    }

    /// Vertical angular momentum `ẑ·∫(x × M + s̃) dx`, with `x` measured from
    /// the grid center.
    pub fn jz(&self) -> f64 {
        let mut total = 0.0;
        for idx in 0..self.grid.len() {
            let (x, y) = self.grid.position(idx);
            let m = self.momentum[idx];
            total += x * m[1] - y * m[0] + self.density[idx] * self.spin[idx].z;
        }
        total * self.grid.cell_area()
    }

    /// Density centroid.
    pub fn centroid(&self) -> [f64; 2] {
        let (mut cx, mut cy, mut n) = (0.0, 0.0, 0.0);
        for (idx, d) in self.density.iter().enumerate() {
            let (x, y) = self.grid.position(idx);
            cx += x * d;
            cy += y * d;
            n += d;
        }
        [cx / n, cy / n]
    }

    /// Pointwise minimum and maximum of `|s|` on the support.
    pub fn spin_norm_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (s, on) in self.spin.iter().zip(self.support()) {
            if on {
                lo = lo.min(s.norm());
                hi = hi.max(s.norm());
            }
        }
        (lo, hi)
    }
}

/// Extracts `D, s, M, v, u` from `Ψ` with spectral gradients.
pub fn observables(field: &SpinorField, p: &PhysicalParams) -> MadelungFields {
    let grid = field.grid;
    let sp = Spectral::new(grid);
    let du = [sp.derivative(&field.up, 0), sp.derivative(&field.up, 1)];
    let dd = [sp.derivative(&field.down, 0), sp.derivative(&field.down, 1)];
    let alpha = p.alpha();
    let n = grid.len();
    let mut out = MadelungFields {
        grid,
        hbar: p.hbar,
        mass: p.mass,
        alpha,
        density: Vec::with_capacity(n),
        spin: Vec::with_capacity(n),
        momentum: Vec::with_capacity(n),
        velocity: Vec::with_capacity(n),
        transport_velocity: Vec::with_capacity(n),
    };
    for idx in 0..n {
        let v = [field.up[idx], field.down[idx]];
        let d = v[0].norm_sqr() + v[1].norm_sqr();
        let s = if d > 0.0 {
            spin_expectation(v) * (0.5 * p.hbar / d)
        } else {
            Vec3::zeros()
        };
        let mut m = [0.0; 2];
        for k in 0..2 {
            m[k] = p.hbar * (v[0].conj() * du[k][idx] + v[1].conj() * dd[k][idx]).im;
        }
        let vel = if d > 0.0 {
            [m[0] / (p.mass * d), m[1] / (p.mass * d)]
        } else {
            [0.0, 0.0]
        };
        // s × ẑ = (s_y, −s_x, 0)
        let u = [vel[0] + alpha * s.y, vel[1] - alpha * s.x];
        out.density.push(d);
        out.spin.push(s);
        out.momentum.push(m);
        out.velocity.push(vel);
        out.transport_velocity.push(u);
    }
    out
}

/// `J_ka = (ħ/2m) Re(Ψ† p̂_k σ_a Ψ)`, computed from `Ψ` alone.
pub fn spin_current_direct(field: &SpinorField, p: &PhysicalParams) -> Vec<Tensor> {
    let grid = field.grid;
    let sp = Spectral::new(grid);
    let du = [sp.derivative(&field.up, 0), sp.derivative(&field.up, 1)];
    let dd = [sp.derivative(&field.down, 0), sp.derivative(&field.down, 1)];
    let c = p.hbar * p.hbar / (2.0 * p.mass);
    (0..grid.len())
        .map(|idx| {
            let psi = [field.up[idx], field.down[idx]];
            let mut t = [[0.0; 3]; 2];
            for k in 0..2 {
                let dpsi = [du[k][idx], dd[k][idx]];
                for (a, slot) in t[k].iter_mut().enumerate() {
                    let sd = sigma_apply(a, dpsi);
                    // Re(Ψ†(−iħ∂)σΨ) = ħ Im(Ψ†σ∂Ψ)
                    *slot = c * (psi[0].conj() * sd[0] + psi[1].conj() * sd[1]).im;
                }
            }
            t
        })
        .collect()
}

/// How derivatives of the spin field are taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivativeScheme {
    /// Spectral gradients of the smooth densities `D` and `s̃`, combined by
    /// the quotient rule `D ∂s = ∂s̃ − s ∂D`.
    Spectral,
    /// Second-order central differences of `s` itself.
    Central,
}

/// Gradient of the spin field, `[∂x s, ∂y s]` per node.
pub fn spin_gradient(fields: &MadelungFields, scheme: DerivativeScheme) -> Vec<[Vec3; 2]> {
    let grid = fields.grid;
    let n = grid.len();
    let mut out = vec![[Vec3::zeros(); 2]; n];
    match scheme {
        DerivativeScheme::Spectral => {
            let sp = Spectral::new(grid);
            let st = fields.spin_density();
            let dd = sp.gradient_real(&fields.density);
            for a in 0..3 {
                let comp: Vec<f64> = st.iter().map(|v| v[a]).collect();
                let g = sp.gradient_real(&comp);
                for idx in 0..n {
                    let d = fields.density[idx];
                    if d == 0.0 {
                        continue;
                    }
                    for k in 0..2 {
                        out[idx][k][a] = (g[k][idx] - fields.spin[idx][a] * dd[k][idx]) / d;
                    }
                }
            }
        }
        DerivativeScheme::Central => {
            for a in 0..3 {
                let comp: Vec<f64> = fields.spin.iter().map(|v| v[a]).collect();
                for k in 0..2 {
                    let g = central_derivative(&grid, &comp, k);
                    for idx in 0..n {
                        out[idx][k][a] = g[idx];
                    }
                }
            }
        }
    }
    out
}

/// Mead (wryness) part of the spin current, `D (∂_k s × s)_a / m`.
pub fn mead_current(fields: &MadelungFields, scheme: DerivativeScheme) -> Vec<Tensor> {
    let grad = spin_gradient(fields, scheme);
    (0..fields.grid.len())
        .map(|idx| {
            let mut t = [[0.0; 3]; 2];
            for k in 0..2 {
                let w = grad[idx][k].cross(&fields.spin[idx]) * (fields.density[idx] / fields.mass);
                t[k] = [w.x, w.y, w.z];
            }
            t
        })
        .collect()
}

/// Convective part of the spin current, `D v_k s_a = M_k s_a / m`.
pub fn convective_current(fields: &MadelungFields) -> Vec<Tensor> {
    (0..fields.grid.len())
        .map(|idx| {
            let m = fields.momentum[idx];
            let s = fields.spin[idx];
            let mut t = [[0.0; 3]; 2];
            for k in 0..2 {
                for a in 0..3 {
                    t[k][a] = m[k] * s[a] / fields.mass;
                }
            }
            t
        })
        .collect()
}

/// Madelung reconstruction `D (v ⊗ s + ∂s × s / m)` of the spin current.
pub fn spin_current_madelung(fields: &MadelungFields, scheme: DerivativeScheme) -> Vec<Tensor> {
    let conv = convective_current(fields);
    let mead = mead_current(fields, scheme);
    conv.iter()
        .zip(&mead)
        .map(|(c, m)| {
            let mut t = [[0.0; 3]; 2];
            for k in 0..2 {
                for a in 0..3 {
                    t[k][a] = c[k][a] + m[k][a];
                }
            }
            t
        })
        .collect()
}
