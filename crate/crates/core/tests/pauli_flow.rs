use num_complex::Complex64;
use spinfluid::diagnostics::{
    advect_loop, circle_loop, circulation_rate, continuity_residual, loop_circulation, purity_check,
};
use spinfluid::grid::{Grid2, SpinorField};
use spinfluid::pauli::{
    band_energies, band_spinor, bloch_spinor, build_propagator, gaussian_packet, observables,
};
use spinfluid::PhysicalParams;

fn textured_packet(grid: Grid2, k: [f64; 2]) -> SpinorField {
    SpinorField::from_fn(grid, |x, y| {
        let env = (-(x * x + y * y) / 12.0).exp();
        let chi = bloch_spinor(1.2 + 0.35 * x - 0.2 * y, 0.5 * y + 0.15 * x * y);
        let e = Complex64::from_polar(env, k[0] * x + k[1] * y);
        [e * chi[0], e * chi[1]]
    })
    .normalized()
}

#[test]
fn exact_flow_conserves_norm_momentum_jz_and_purity() {
    let g = Grid2::square(128, 80.0).unwrap();
    let p = PhysicalParams::rashba(0.3);
    let mut f = gaussian_packet(g, [0.0, 0.0], 2.0, [0.4, -0.2], bloch_spinor(0.5 * std::f64::consts::PI, 0.0));
    let m0 = observables(&f, &p);
    let prop = build_propagator(g, &p, 0.01).unwrap();
    for _ in 0..1000 {
        prop.apply(&mut f);
    }
    let m1 = observables(&f, &p);
    assert!((f.norm_sq() - 1.0).abs() < 1e-10);
    let (p0, p1) = (m0.total_momentum(), m1.total_momentum());
    assert!((p0[0] - p1[0]).abs() < 1e-9 && (p0[1] - p1[1]).abs() < 1e-9);
    assert!((m0.jz() - m1.jz()).abs() < 1e-9, "{} {}", m0.jz(), m1.jz());
    assert!(purity_check(&m1).residual_max < 1e-8);
    assert!(m1.total_spin().z.abs() > 1e-3, "{}", m1.total_spin().z);
}

#[test]
fn band_plane_waves_acquire_dispersion_phase() {
    let g = Grid2::square(16, 10.0).unwrap();
    let p = PhysicalParams::rashba(0.7);
    let t = 1.3;
    let prop = build_propagator(g, &p, t).unwrap();
    let dk = 2.0 * std::f64::consts::PI / 10.0;
    for (n1, n2) in [(1, 0), (0, 2), (3, -1), (-2, -2), (4, 5)] {
        let k = [n1 as f64 * dk, n2 as f64 * dk];
        for band in [1, -1] {
            let chi = band_spinor(k[0], k[1], band);
            let f = SpinorField::from_fn(g, |x, y| {
                let e = Complex64::from_polar(1.0, k[0] * x + k[1] * y);
                [e * chi[0], e * chi[1]]
            })
            .normalized();
            let h = prop.step(&f);
            let e = band_energies(k[0], k[1], &p)[if band > 0 { 0 } else { 1 }];
            let ph = Complex64::from_polar(1.0, -e * t / p.hbar);
            let err = f
                .up
                .iter()
                .zip(&h.up)
                .chain(f.down.iter().zip(&h.down))
                .map(|(a, b)| (a * ph - b).norm())
                .fold(0.0, f64::max);
            let amp = f.up.iter().chain(&f.down).map(|z| z.norm()).fold(0.0, f64::max);
            assert!(err < 1e-11 * amp, "{err}");
        }
    }
}

#[test]
fn narrow_band_packet_moves_with_group_velocity() {
    let g = Grid2::square(128, 80.0).unwrap();
    let p = PhysicalParams::rashba(0.25);
    let k = [0.8, 0.0];
    // both spinor components of the lower band at k
    let chi = band_spinor(k[0], k[1], -1);
    let f0 = gaussian_packet(g, [-10.0, 0.0], 5.0, k, chi);
    let t = 8.0;
    let f1 = build_propagator(g, &p, t).unwrap().step(&f0);
    let c0 = observables(&f0, &p).centroid();
    let c1 = observables(&f1, &p).centroid();
    let vg = p.hbar * k[0] / p.mass - p.alpha_r / p.hbar;
    let measured = (c1[0] - c0[0]) / t;
    assert!((measured - vg).abs() < 1e-2 * vg.abs(), "{measured} vs {vg}");
    assert!((c1[1] - c0[1]).abs() < 1e-8);
}

#[test]
fn stationary_band_state_satisfies_continuity() {
    let g = Grid2::square(32, 10.0).unwrap();
    let p = PhysicalParams::rashba(0.4);
    let k = [2.0 * std::f64::consts::PI / 10.0, 0.0];
    let chi = band_spinor(k[0], k[1], 1);
    let mut f = SpinorField::from_fn(g, |x, y| {
        let e = Complex64::from_polar(1.0, k[0] * x + k[1] * y);
        [e * chi[0], e * chi[1]]
    })
    .normalized();
    let prop = build_propagator(g, &p, 0.1).unwrap();
    let mut snaps = vec![observables(&f, &p)];
    for _ in 0..3 {
        prop.apply(&mut f);
        snaps.push(observables(&f, &p));
    }
    let r = continuity_residual(&snaps, 0.1).unwrap();
    assert!(r.residual_max < 1e-10, "{r:?}");
}

#[test]
fn circulation_balance_on_textured_packet() {
    let g = Grid2::square(128, 40.0).unwrap();
    let p = PhysicalParams::rashba(0.5);
    let f0 = textured_packet(g, [0.3, -0.1]);
    let h = 0.005;
    let prop = build_propagator(g, &p, h).unwrap();
    let mut f = f0.clone();
    for _ in 0..20 {
        prop.apply(&mut f);
    }
    let prev = observables(&f, &p);
    prop.apply(&mut f);
    let now = observables(&f, &p);
    prop.apply(&mut f);
    let next = observables(&f, &p);

    let c = circle_loop(now.centroid(), 1.6, 400);
    let ahead = advect_loop(&c, &now, &next, h);
    let behind = advect_loop(&c, &now, &prev, -h);
    let fd = (loop_circulation(&next, &ahead).unwrap() - loop_circulation(&prev, &behind).unwrap()) / (2.0 * h);
    let rhs = circulation_rate(&now, &c).unwrap();
    assert!(rhs.abs() > 1e-4, "{rhs}");
    assert!((fd - rhs).abs() < 0.05 * rhs.abs(), "fd {fd} rhs {rhs}");
}
