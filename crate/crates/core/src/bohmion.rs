//! The regularized particle system: energy, equations of motion, time
//! integrators and conserved quantities.
//!
//! State variables per bohmion are `(q_a, p_a, μ_a)` with weight `w_a`. The
//! Hamiltonian is
//!
//! ```text
//! h = Σ_a w_a [ |p_a|²/2m + p_a·(μ_a × 𝓕(q_a)) + V(q_a) ]
//!   + ½ Σ_ab w_a w_b [ (μ_a × μ_b)·G_ab + μ_a·μ_b C_ab / m ]
//! ```
//!
//! and the flow is `q̇_a = (1/w_a) ∂h/∂p_a`, `ṗ_a = −(1/w_a) ∂h/∂q_a`,
//! `μ̇_a = (1/w_a) ∂h/∂μ_a × μ_a`.

use serde::{Deserialize, Serialize};

use crate::kernel::{compute_pair_interaction, PairIntegrals, QuadratureSpec};
use crate::{BohmionEnsemble, PhysicalParams, Result, Vec3};

/// Time derivatives of every state variable.
#[derive(Clone, Debug, PartialEq)]
pub struct BohmionDerivatives {
    pub dq: Vec<Vec3>,
    pub dp: Vec<Vec3>,
    pub dmu: Vec<Vec3>,
}

/// Quantities conserved by the Rashba flow.
#[derive(Clone, Debug, PartialEq)]
pub struct ConservedSet {
    pub energy: f64,
    /// Total momentum `Σ_a w_a p_a`.
    pub momentum: Vec3,
    /// `ẑ·Σ_a w_a (q_a × p_a + μ_a)`.
    pub jz: f64,
    pub mu_norms: Vec<f64>,
    pub mu_total_sq: f64,
}

impl ConservedSet {
    pub fn mu_norm_min(&self) -> f64 {
        self.mu_norms.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mu_norm_max(&self) -> f64 {
        self.mu_norms.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    Rk4,
    SplitSpin,
}

/// Total energy for precomputed pair integrals.
pub fn hamiltonian(e: &BohmionEnsemble, pi: &PairIntegrals, p: &PhysicalParams) -> f64 {
    let single: f64 = e
        .iter()
        .map(|b| {
            let f = p.soc_field(&b.q);
            b.weight
                * (b.p.norm_squared() / (2.0 * p.mass)
                    + b.p.dot(&b.mu.cross(&f))
                    + p.potential.value(&b.q))
        })
        .sum();
    single + pi.pair_energy(e, p.mass)
}

/// Energy including the pair-integral evaluation.
pub fn energy(e: &BohmionEnsemble, p: &PhysicalParams, quad: &QuadratureSpec) -> Result<f64> {
    let pi = crate::kernel::compute_pair_integrals(e, p, quad)?;
    Ok(hamiltonian(e, &pi, p))
}

fn in_plane(v: Vec3, dim: usize) -> Vec3 {
    if dim == 2 {
        Vec3::new(v.x, v.y, 0.0)
    } else {
        v
    }
}

/// Pair part of the precession vector of particle `a`,
/// `Σ_{b≠a} w_b (μ_b × G_ab + μ_b C_ab / m)`.
///
/// The `b = a` term is parallel to `μ_a` and never contributes to the torque;
/// leaving it out keeps the precession axis exact for frozen-axis rotations.
fn pair_precession(e: &BohmionEnsemble, pi: &PairIntegrals, mass: f64, a: usize) -> Vec3 {
    e.iter()
        .enumerate()
        .filter(|&(b, _)| b != a)
        .map(|(b, pb)| (pb.mu.cross(&pi.g(a, b)) + pb.mu * (pi.c(a, b) / mass)) * pb.weight)
        .sum()
}

/// Precession vectors `Ω_a` with `μ̇_a = Ω_a × μ_a`.
pub fn precession_vectors(
    e: &BohmionEnsemble,
    pi: &PairIntegrals,
    p: &PhysicalParams,
) -> Vec<Vec3> {
    e.iter()
        .enumerate()
        .map(|(a, b)| p.soc_field(&b.q).cross(&b.p) + pair_precession(e, pi, p.mass, a))
        .collect()
}

/// Right-hand side of the bohmion equations of motion.
pub fn rhs(
    e: &BohmionEnsemble,
    p: &PhysicalParams,
    quad: &QuadratureSpec,
) -> Result<BohmionDerivatives> {
    let inter = compute_pair_interaction(e, p, quad)?;
    let omega = precession_vectors(e, &inter.integrals, p);
    let dim = e.dim();
    let mut out = BohmionDerivatives {
        dq: Vec::with_capacity(e.len()),
        dp: Vec::with_capacity(e.len()),
        dmu: Vec::with_capacity(e.len()),
    };
    for (a, b) in e.iter().enumerate() {
        let f = p.soc_field(&b.q);
        out.dq.push(in_plane(b.p / p.mass + b.mu.cross(&f), dim));
        // ∇_q [p·(μ × 𝓕(q))] = Jᵀ (p × μ)
        let soc_force = p.soc_jacobian(&b.q).transpose() * b.p.cross(&b.mu);
        let dp = -p.potential.gradient(&b.q) - soc_force + inter.forces[a];
        out.dp.push(in_plane(dp, dim));
        out.dmu.push(omega[a].cross(&b.mu));
    }
    Ok(out)
}

fn displaced(e: &BohmionEnsemble, d: &BohmionDerivatives, h: f64, spins: bool) -> BohmionEnsemble {
    let mut out = e.clone();
    for (a, b) in out.particles_mut().iter_mut().enumerate() {
        b.q += d.dq[a] * h;
        b.p += d.dp[a] * h;
        if spins {
            b.mu += d.dmu[a] * h;
        }
    }
    out
}

fn rk4_combine(
    e: &BohmionEnsemble,
    k: [&BohmionDerivatives; 4],
    dt: f64,
    spins: bool,
) -> BohmionEnsemble {
    let mut out = e.clone();
    let w = dt / 6.0;
    for (a, b) in out.particles_mut().iter_mut().enumerate() {
        b.q += (k[0].dq[a] + k[1].dq[a] * 2.0 + k[2].dq[a] * 2.0 + k[3].dq[a]) * w;
        b.p += (k[0].dp[a] + k[1].dp[a] * 2.0 + k[2].dp[a] * 2.0 + k[3].dp[a]) * w;
        if spins {
            b.mu += (k[0].dmu[a] + k[1].dmu[a] * 2.0 + k[2].dmu[a] * 2.0 + k[3].dmu[a]) * w;
        }
    }
    out
}

fn rk4(
    e: &BohmionEnsemble,
    p: &PhysicalParams,
    quad: &QuadratureSpec,
    dt: f64,
    spins: bool,
) -> Result<BohmionEnsemble> {
    let k1 = rhs(e, p, quad)?;
    let k2 = rhs(&displaced(e, &k1, 0.5 * dt, spins), p, quad)?;
    let k3 = rhs(&displaced(e, &k2, 0.5 * dt, spins), p, quad)?;
    let k4 = rhs(&displaced(e, &k3, dt, spins), p, quad)?;
    Ok(rk4_combine(e, [&k1, &k2, &k3, &k4], dt, spins))
}

/// Classical fourth-order Runge–Kutta step of the joint `(q, p, μ)` flow.
/// Pair integrals are recomputed at every stage; no projection is applied.
pub fn step_rk4(
    e: &BohmionEnsemble,
    p: &PhysicalParams,
    quad: &QuadratureSpec,
    dt: f64,
) -> Result<BohmionEnsemble> {
    if dt == 0.0 {
        return Ok(e.clone());
    }
    rk4(e, p, quad, dt, true)
}

/// Rotation of `v` by the angle `|ω| t` about `ω`, the exact solution of
/// `v̇ = ω × v` for frozen `ω`.
pub fn rotate(v: &Vec3, omega: &Vec3, t: f64) -> Vec3 {
    let rate = omega.norm();
    if rate == 0.0 {
        return *v;
    }
    let axis = omega / rate;
    let (s, c) = (rate * t).sin_cos();
    v * c + axis.cross(v) * s + axis * (axis.dot(v) * (1.0 - c))
}

/// Strang splitting with an exact spin rotation:
/// half-step of `(q, p)` with frozen spins, a full spin step as a rotation
/// about the midpoint precession vector, and a closing half-step of `(q, p)`.
/// Every `|μ_a|` is preserved to rounding error.
pub fn step_split_spin(
    e: &BohmionEnsemble,
    p: &PhysicalParams,
    quad: &QuadratureSpec,
    dt: f64,
) -> Result<BohmionEnsemble> {
    if dt == 0.0 {
        return Ok(e.clone());
    }
    let half = rk4(e, p, quad, 0.5 * dt, false)?;
    let rotated = rotate_spins(&half, p, quad, dt)?;
    rk4(&rotated, p, quad, 0.5 * dt, false)
}

/// Rotates all spins over `dt` with positions and momenta frozen. The axis is
/// evaluated at the spin midpoint, giving second-order accuracy when the
/// precession vectors depend on the other spins.
fn rotate_spins(
    e: &BohmionEnsemble,
    p: &PhysicalParams,
    quad: &QuadratureSpec,
    dt: f64,
) -> Result<BohmionEnsemble> {
    // C and G depend only on positions, which are frozen during the rotation.
    let pi = crate::kernel::compute_pair_integrals(e, p, quad)?;
    let omega0 = precession_vectors(e, &pi, p);
    let mut mid = e.clone();
    for (b, w) in mid.particles_mut().iter_mut().zip(&omega0) {
        b.mu = rotate(&b.mu, w, 0.5 * dt);
    }
    let omega_mid = precession_vectors(&mid, &pi, p);
    let mut out = e.clone();
    for (b, w) in out.particles_mut().iter_mut().zip(&omega_mid) {
        b.mu = rotate(&b.mu, w, dt);
    }
    Ok(out)
}

pub fn step(
    integrator: Integrator,
    e: &BohmionEnsemble,
    p: &PhysicalParams,
    quad: &QuadratureSpec,
    dt: f64,
) -> Result<BohmionEnsemble> {
    match integrator {
        Integrator::Rk4 => step_rk4(e, p, quad, dt),
        Integrator::SplitSpin => step_split_spin(e, p, quad, dt),
    }
}

/// Energy, total momentum, vertical angular momentum and spin norms.
pub fn conserved(
    e: &BohmionEnsemble,
    p: &PhysicalParams,
    quad: &QuadratureSpec,
) -> Result<ConservedSet> {
    let energy = energy(e, p, quad)?;
    let momentum = e.iter().map(|b| b.p * b.weight).sum();
    let jz = e
        .iter()
        .map(|b| b.weight * (b.q.cross(&b.p).z + b.mu.z))
        .sum();
    let mu_norms: Vec<f64> = e.iter().map(|b| b.mu.norm()).collect();
    let mu_total_sq = e.spin_norm_sq_total();
    Ok(ConservedSet {
        energy,
        momentum,
        jz,
        mu_norms,
        mu_total_sq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::compute_pair_integrals;
    use crate::{Bohmion, PotentialSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one(p: Vec3, mu: Vec3) -> BohmionEnsemble {
        BohmionEnsemble::new(2, vec![Bohmion::new(1.0, Vec3::zeros(), p, mu)]).unwrap()
    }

    fn random_ensemble(n: usize, seed: u64) -> BohmionEnsemble {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let parts = (0..n)
            .map(|_| {
                Bohmion::new(
                    rng.gen_range(0.5..1.5),
                    Vec3::new(rng.gen_range(-0.7..0.7), rng.gen_range(-0.7..0.7), 0.0),
                    Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0),
                    Vec3::new(
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    ),
                )
            })
            .collect();
        let mut e = BohmionEnsemble::new(2, parts).unwrap();
        e.normalize_weights();
        e.normalize_spins(1.0);
        e
    }

    #[test]
    fn single_particle_energy() {
        let p = PhysicalParams::rashba(0.5);
        let quad = QuadratureSpec::default();
        let e = one(Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 0.5));
        let pi = compute_pair_integrals(&e, &p, &quad).unwrap();
        let expected = 0.5 + 0.5 * 0.25 * pi.c(0, 0);
        assert!((hamiltonian(&e, &pi, &p) - expected).abs() < 1e-14);
    }

    #[test]
    fn soc_single_particle_term() {
        // α = 1: p·(μ × α ẑ) with μ = (ħ/2, 0, 0)
        let p = PhysicalParams::rashba(0.5);
        let quad = QuadratureSpec::default();
        let mu = Vec3::new(0.5, 0.0, 0.0);
        for (mom, soc) in [(Vec3::new(1.0, 0.0, 0.0), 0.0), (Vec3::new(0.0, 1.0, 0.0), -0.5)] {
            let e = one(mom, mu);
            let pi = compute_pair_integrals(&e, &p, &quad).unwrap();
            let h = hamiltonian(&e, &pi, &p);
            let rest = 0.5 + 0.5 * 0.25 * pi.c(0, 0);
            assert!((h - rest - soc).abs() < 1e-14, "{h} {rest} {soc}");
        }
    }

    #[test]
    fn parallel_spins_have_no_cross_term() {
        let mu = Vec3::new(0.2, -0.1, 0.3).normalize() * (0.5 / 2f64.sqrt());
        let e = BohmionEnsemble::new(
            2,
            vec![
                Bohmion::new(0.5, Vec3::new(-0.3, 0.0, 0.0), Vec3::zeros(), mu),
                Bohmion::new(0.5, Vec3::new(0.4, 0.2, 0.0), Vec3::zeros(), mu),
            ],
        )
        .unwrap();
        let p = PhysicalParams::rashba(0.5);
        let pi = compute_pair_integrals(&e, &p, &QuadratureSpec::default()).unwrap();
        let g_part: f64 = (0..2)
            .flat_map(|a| (0..2).map(move |b| (a, b)))
            .map(|(a, b)| e.particles()[a].mu.cross(&e.particles()[b].mu).dot(&pi.g(a, b)))
            .sum();
        assert_eq!(g_part, 0.0);
    }

    #[test]
    fn single_rashba_particle_dynamics() {
        let p = PhysicalParams::rashba(0.5);
        let quad = QuadratureSpec::default();
        let mom = Vec3::new(0.7, -0.3, 0.0);
        let mu = Vec3::new(0.3, 0.1, 0.2).normalize() * 0.5;
        let e = one(mom, mu);
        let d = rhs(&e, &p, &quad).unwrap();
        assert!(d.dp[0].norm() < 1e-8, "{}", d.dp[0]);
        let omega = Vec3::new(0.0, 0.0, p.alpha()).cross(&mom);
        assert!((d.dmu[0] - (-mu.cross(&Vec3::new(0.0, 0.0, p.alpha()).cross(&mom)))).norm() < 1e-14);
        assert!((d.dmu[0] - omega.cross(&mu)).norm() < 1e-14);
        let vel = mom + mu.cross(&Vec3::new(0.0, 0.0, p.alpha()));
        assert!((d.dq[0] - Vec3::new(vel.x, vel.y, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn torque_is_orthogonal_to_spin() {
        let e = random_ensemble(4, 1);
        let p = PhysicalParams::rashba(0.6);
        let d = rhs(&e, &p, &QuadratureSpec::default()).unwrap();
        for (b, dmu) in e.iter().zip(&d.dmu) {
            assert!(dmu.dot(&b.mu).abs() < 1e-14 * dmu.norm() * b.mu.norm());
        }
    }

    fn fd_energy_gradient(
        e: &BohmionEnsemble,
        p: &PhysicalParams,
        quad: &QuadratureSpec,
        a: usize,
        which: usize,
        k: usize,
        h: f64,
    ) -> f64 {
        let mut ep = e.clone();
        let mut em = e.clone();
        let (bp, bm) = (&mut ep.particles_mut()[a], &mut em.particles_mut()[a]);
        match which {
            0 => {
                bp.q[k] += h;
                bm.q[k] -= h;
            }
            1 => {
                bp.p[k] += h;
                bm.p[k] -= h;
            }
            _ => {
                bp.mu[k] += h;
                bm.mu[k] -= h;
            }
        }
        (energy(&ep, p, quad).unwrap() - energy(&em, p, quad).unwrap()) / (2.0 * h)
    }

    #[test]
    fn flow_matches_energy_gradients() {
        let quad = QuadratureSpec::default();
        let cases = [
            PhysicalParams::rashba(0.5),
            PhysicalParams::rashba(0.3)
                .with_potential(PotentialSpec::harmonic(0.7).with_soc_coupling(0.15)),
        ];
        for p in &cases {
            let e = random_ensemble(3, 7);
            let d = rhs(&e, p, &quad).unwrap();
            let h = 1e-4 * p.delta;
            let fscale = d.dp.iter().map(|v| v.amax()).fold(0.0, f64::max);
            for (a, b) in e.iter().enumerate() {
                let mut grad_mu = Vec3::zeros();
                for k in 0..3 {
                    grad_mu[k] = fd_energy_gradient(&e, p, &quad, a, 2, k, 1e-5);
                }
                let torque = grad_mu.cross(&b.mu) / b.weight;
                let tscale = d.dmu.iter().map(|v| v.amax()).fold(0.0, f64::max);
                assert!((torque - d.dmu[a]).amax() < 1e-6 * tscale, "{torque} vs {}", d.dmu[a]);
                for k in 0..2 {
                    let force = -fd_energy_gradient(&e, p, &quad, a, 0, k, h) / b.weight;
                    assert!((force - d.dp[a][k]).abs() < 1e-5 * fscale, "{force} vs {}", d.dp[a][k]);
                    let vel = fd_energy_gradient(&e, p, &quad, a, 1, k, 1e-5) / b.weight;
                    assert!((vel - d.dq[a][k]).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn zero_step_is_identity() {
        let e = random_ensemble(2, 3);
        let p = PhysicalParams::rashba(0.5);
        let quad = QuadratureSpec::default();
        assert_eq!(step_rk4(&e, &p, &quad, 0.0).unwrap(), e);
        assert_eq!(step_split_spin(&e, &p, &quad, 0.0).unwrap(), e);
    }

    #[test]
    fn rotation_matches_cross_product_flow() {
        let omega = Vec3::new(0.3, -1.2, 0.8);
        let v = Vec3::new(0.1, 0.4, -0.2);
        let h = 1e-6;
        let dv = (rotate(&v, &omega, h) - rotate(&v, &omega, -h)) / (2.0 * h);
        assert!((dv - omega.cross(&v)).norm() < 1e-9);
        assert!((rotate(&v, &omega, 2.7).norm() - v.norm()).abs() < 1e-15);
    }

    #[test]
    fn split_spin_preserves_norms_exactly() {
        let mut e = random_ensemble(3, 5);
        let p = PhysicalParams::rashba(0.5);
        let quad = QuadratureSpec {
            nodes_per_delta: 4,
            ..Default::default()
        };
        let n0: Vec<f64> = e.iter().map(|b| b.mu.norm()).collect();
        for _ in 0..50 {
            e = step_split_spin(&e, &p, &quad, 0.02).unwrap();
        }
        for (b, n) in e.iter().zip(n0) {
            assert!((b.mu.norm() - n).abs() < 1e-14 * n);
        }
    }

    #[test]
    fn split_spin_agrees_with_rk4_as_dt_shrinks() {
        let e0 = random_ensemble(2, 9);
        let p = PhysicalParams::rashba(0.5);
        let quad = QuadratureSpec::default();
        let horizon = 0.2;
        let run = |dt: f64, integ: Integrator| {
            let mut e = e0.clone();
            let n = (horizon / dt).round() as usize;
            for _ in 0..n {
                e = step(integ, &e, &p, &quad, dt).unwrap();
            }
            e
        };
        let reference = run(0.005, Integrator::Rk4);
        let dist = |a: &BohmionEnsemble| {
            a.iter()
                .zip(reference.iter())
                .map(|(x, y)| (x.q - y.q).norm() + (x.p - y.p).norm() + (x.mu - y.mu).norm())
                .fold(0.0, f64::max)
        };
        let e1 = dist(&run(0.04, Integrator::SplitSpin));
        let e2 = dist(&run(0.02, Integrator::SplitSpin));
        assert!(e2 < e1);
        assert!(e1 / e2 > 3.0, "split-spin order too low: {e1} {e2}");
    }

    #[test]
    fn conserved_single_particle() {
        let p = PhysicalParams::rashba(0.5);
        let e = one(Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 0.5));
        let c = conserved(&e, &p, &QuadratureSpec::default()).unwrap();
        assert_eq!(c.momentum, Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(c.jz, 0.5);
        assert_eq!(c.mu_total_sq, 0.25);
    }

    #[test]
    fn energy_symmetries() {
        let e = random_ensemble(3, 11);
        let p = PhysicalParams::rashba(0.5);
        let quad = QuadratureSpec::default();
        let h0 = energy(&e, &p, &quad).unwrap();
        let ht = energy(&e.translated(Vec3::new(1.37, -2.2, 0.0)), &p, &quad).unwrap();
        assert!((h0 - ht).abs() < 1e-8 * h0.abs());

        let rot3 = nalgebra::Rotation3::from_axis_angle(&Vec3::z_axis(), 0.83);
        let mut er = e.clone();
        for b in er.particles_mut() {
            b.q = rot3 * b.q;
            b.p = rot3 * b.p;
            b.mu = rot3 * b.mu;
        }
        let hr = energy(&er, &p, &quad).unwrap();
        assert!((h0 - hr).abs() < 1e-8 * h0.abs(), "{h0} vs {hr}");
    }
}
