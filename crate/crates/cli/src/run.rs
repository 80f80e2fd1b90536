//! Scenario execution: time stepping, diagnostics rows, snapshots and the
//! run summary.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use num_complex::Complex64;
use serde::Serialize;
use spinfluid::bohmion::{self, conserved, ConservedSet};
use spinfluid::diagnostics::{
    continuity_residual, conventional_current_identity, decomposition_residual, purity_check,
};
use spinfluid::grid::{Grid2, SpinorField};
use spinfluid::pauli::{
    band_energies, band_spinor, bloch_spinor, build_propagator, energy, gaussian_packet,
    observables, DerivativeScheme, MadelungFields, SpectralPropagator, StrangStepper,
};
use spinfluid::{BohmionEnsemble, PhysicalParams};

use crate::config::{Initial, IntegratorKind, Mode, ScenarioConfig, WavepacketSpec};
use crate::io::{write_ensemble, write_field, SeriesWriter};

/// Version of the diagnostics CSV layout, recorded in `summary.json`.
pub const DIAGNOSTICS_SCHEMA: u32 = 1;

pub const BASE_COLUMNS: [&str; 7] = ["t", "H", "Px", "Py", "Jz", "mu_norm_min", "mu_norm_max"];
pub const SUITE_COLUMNS: [&str; 4] = ["decomposition", "conventional", "continuity", "purity"];

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Evaluate the identity suite in pauli mode and treat failed checks as
    /// a failed run.
    pub check: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            pass: value.is_finite() && value < threshold,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub diagnostics_schema: u32,
    pub name: String,
    pub mode: Mode,
    pub integrator: IntegratorKind,
    pub dt: f64,
    pub steps: usize,
    pub seed: u64,
    pub status: Status,
    pub checks: Vec<Check>,
    pub initial: Totals,
    #[serde(rename = "final")]
    pub last: Totals,
    pub drift: Drift,
}

/// One diagnostics row.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Totals {
    pub t: f64,
    pub energy: f64,
    pub px: f64,
    pub py: f64,
    pub jz: f64,
    pub mu_norm_min: f64,
    pub mu_norm_max: f64,
    /// Out-of-plane total spin: `Σ w μ_z` or `∫ s̃_z dx`.
    pub spin_z: f64,
}

impl Totals {
    fn row(&self) -> [f64; 7] {
        [self.t, self.energy, self.px, self.py, self.jz, self.mu_norm_min, self.mu_norm_max]
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Drift {
    /// `|ΔH| / |H(0)|`.
    pub energy_rel: f64,
    pub momentum: f64,
    pub jz: f64,
}

impl Drift {
    fn between(a: &Totals, b: &Totals) -> Self {
        Self {
            energy_rel: (b.energy - a.energy).abs() / a.energy.abs(),
            momentum: (b.px - a.px).hypot(b.py - a.py),
            jz: (b.jz - a.jz).abs(),
        }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub summary: Summary,
    pub out_dir: PathBuf,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.summary.status == Status::Pass
    }
}

pub fn snapshot_path(out: &Path, kind: &str, step: usize) -> PathBuf {
    out.join("snapshots").join(format!("{kind}_{step:06}.csv"))
}

fn output_steps(cfg: &ScenarioConfig) -> impl Iterator<Item = usize> + '_ {
    (0..=cfg.steps).filter(move |&n| n % cfg.output_every == 0 || n == cfg.steps)
}

pub fn run(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let out = cfg.out_dir.clone();
    fs::create_dir_all(out.join("snapshots")).with_context(|| format!("creating {}", out.display()))?;
    let resolved = toml::to_string(&cfg.raw).context("serializing resolved config")?;
    fs::write(out.join("config.toml"), resolved)?;
    let summary = match &cfg.initial {
        Initial::Bohmions(e) => run_bohmion(cfg, e, &out),
        Initial::Packet { grid, packet } => {
            let suite = cfg.mode == Mode::IdentitySuite || opts.check;
            run_pauli(cfg, *grid, packet, suite, &out)
        }
    }
    .with_context(|| format!("scenario `{}`", cfg.name))?;
    let json = serde_json::to_string_pretty(&summary)?;
    fs::write(out.join("summary.json"), json + "\n")?;
    Ok(RunOutcome { summary, out_dir: out })
}

fn bohmion_totals(t: f64, c: &ConservedSet, e: &BohmionEnsemble) -> Totals {
    Totals {
        t,
        energy: c.energy,
        px: c.momentum.x,
        py: c.momentum.y,
        jz: c.jz,
        mu_norm_min: c.mu_norm_min(),
        mu_norm_max: c.mu_norm_max(),
        spin_z: e.net_spin().z,
    }
}

fn run_bohmion(cfg: &ScenarioConfig, e0: &BohmionEnsemble, out: &Path) -> Result<Summary> {
    let p = &cfg.physical;
    let integrator = cfg.integrator.bohmion().expect("validated bohmion integrator");
    let mut series = SeriesWriter::create(&out.join("diagnostics.csv"), &BASE_COLUMNS)?;
    let c0 = conserved(e0, p, &cfg.quadrature)?;
    let first = bohmion_totals(0.0, &c0, e0);
    let mut last = first;
    let mut e = e0.clone();
    let mut outputs = output_steps(cfg).peekable();
    for n in 0..=cfg.steps {
        if n > 0 {
            e = bohmion::step(integrator, &e, p, &cfg.quadrature, cfg.dt)
                .with_context(|| format!("step {n}"))?;
        }
        if outputs.peek() == Some(&n) {
            outputs.next();
            let c = if n == 0 { c0.clone() } else { conserved(&e, p, &cfg.quadrature)? };
            last = bohmion_totals(n as f64 * cfg.dt, &c, &e);
            series.row(&last.row())?;
            write_ensemble(&snapshot_path(out, "bohmions", n), &e)?;
        }
    }
    series.finish()?;

    let mut checks = Vec::new();
    let t_end = cfg.steps as f64 * cfg.dt;
    if e0.len() == 1 && p.potential.is_zero() {
        let b0 = e0.particles()[0];
        let b = e.particles()[0];
        let omega = p.soc_field(&b0.q).cross(&b0.p);
        let exact = bohmion::rotate(&b0.mu, &omega, t_end);
        let err = ((b.mu - exact).norm() / b0.mu.norm()).max((b.p - b0.p).norm());
        checks.push(Check::new("precession", err, cfg.thresholds.precession));
    }
    if cfg.integrator == IntegratorKind::SplitSpin {
        let worst = e0
            .iter()
            .zip(e.iter())
            .map(|(a, b)| (b.mu.norm() - a.mu.norm()).abs() / a.mu.norm())
            .fold(0.0, f64::max);
        checks.push(Check::new("spin_norm", worst, cfg.thresholds.spin_norm));
    }
    Ok(summary(cfg, checks, first, last))
}

fn summary(cfg: &ScenarioConfig, checks: Vec<Check>, first: Totals, last: Totals) -> Summary {
    let status = if checks.iter().all(|c| c.pass) {
        Status::Pass
    } else {
        Status::Fail
    };
    Summary {
        diagnostics_schema: DIAGNOSTICS_SCHEMA,
        name: cfg.name.clone(),
        mode: cfg.mode,
        integrator: cfg.integrator,
        dt: cfg.dt,
        steps: cfg.steps,
        seed: cfg.seed,
        status,
        checks,
        initial: first,
        last,
        drift: Drift::between(&first, &last),
    }
}

/// Initial spinor field for a wavepacket spec.
pub fn initial_field(grid: Grid2, w: &WavepacketSpec) -> SpinorField {
    let chi = match w.band {
        Some(b) => band_spinor(w.k[0], w.k[1], b),
        None => bloch_spinor(w.theta, w.phi),
    };
    gaussian_packet(grid, w.center, w.sigma, w.k, chi)
}

enum Stepper {
    Exact(SpectralPropagator),
    Strang(StrangStepper),
}

impl Stepper {
    fn new(kind: IntegratorKind, grid: Grid2, p: &PhysicalParams, dt: f64) -> Result<Self> {
        Ok(match kind {
            IntegratorKind::ExactSpectral => Stepper::Exact(build_propagator(grid, p, dt)?),
            _ => Stepper::Strang(StrangStepper::new(grid, p, dt)?),
        })
    }

    fn apply(&self, f: &mut SpinorField) {
        match self {
            Stepper::Exact(s) => s.apply(f),
            Stepper::Strang(s) => s.apply(f),
        }
    }
}

pub fn pauli_totals(t: f64, f: &SpinorField, m: &MadelungFields, p: &PhysicalParams) -> Totals {
    let (lo, hi) = m.spin_norm_range();
    let mom = m.total_momentum();
    Totals {
        t,
        energy: energy(f, p),
        px: mom[0],
        py: mom[1],
        jz: m.jz(),
        mu_norm_min: lo,
        mu_norm_max: hi,
        spin_z: m.total_spin().z,
    }
}

/// Largest deviation over all lattice modes between the propagator acting on
/// a band spinor and the phase `e^{−iE±dt/ħ}`.
pub fn dispersion_error(grid: Grid2, p: &PhysicalParams, dt: f64) -> Result<f64> {
    let prop = SpectralPropagator::kinetic(grid, p, dt)?;
    let mut worst = 0.0f64;
    for idx in 0..grid.len() {
        let (kx, ky) = grid.k(idx);
        let e = band_energies(kx, ky, p);
        let u = prop.mode(idx);
        for (band, en) in [(1, e[0]), (-1, e[1])] {
            if kx == 0.0 && ky == 0.0 && band < 0 {
                continue;
            }
            let chi = band_spinor(kx, ky, band);
            let ph = Complex64::from_polar(1.0, -en * dt / p.hbar);
            for r in 0..2 {
                let v = u[r][0] * chi[0] + u[r][1] * chi[1];
                worst = worst.max((v - ph * chi[r]).norm());
            }
        }
    }
    Ok(worst)
}

fn run_pauli(cfg: &ScenarioConfig, grid: Grid2, w: &WavepacketSpec, suite: bool, out: &Path) -> Result<Summary> {
    let p = &cfg.physical;
    let forward = Stepper::new(cfg.integrator, grid, p, cfg.dt)?;
    let backward = if suite {
        Some(Stepper::new(cfg.integrator, grid, p, -cfg.dt)?)
    } else {
        None
    };
    let mut header: Vec<&str> = BASE_COLUMNS.to_vec();
    if suite {
        header.extend(SUITE_COLUMNS);
    }
    let mut series = SeriesWriter::create(&out.join("diagnostics.csv"), &header)?;
    let mut worst = [0.0f64; 4];
    let mut f = initial_field(grid, w);
    let mut first = None;
    let mut last = None;
    let mut outputs = output_steps(cfg).peekable();
    for n in 0..=cfg.steps {
        if n > 0 {
            forward.apply(&mut f);
        }
        if outputs.peek() != Some(&n) {
            continue;
        }
        outputs.next();
        let m = observables(&f, p);
        let t = pauli_totals(n as f64 * cfg.dt, &f, &m, p);
        let mut row = t.row().to_vec();
        if let Some(back) = &backward {
            let mut prev = f.clone();
            back.apply(&mut prev);
            let mut next = f.clone();
            forward.apply(&mut next);
            let snaps = [observables(&prev, p), m.clone(), observables(&next, p)];
            let res = [
                decomposition_residual(&f, p, &m, DerivativeScheme::Spectral).relative,
                conventional_current_identity(&f, p).relative,
                continuity_residual(&snaps, cfg.dt)?.relative,
                purity_check(&m).relative,
            ];
            for (acc, r) in worst.iter_mut().zip(res) {
                *acc = if r.is_nan() { f64::NAN } else { acc.max(r) };
            }
            row.extend(res);
        }
        series.row(&row)?;
        write_field(&snapshot_path(out, "field", n), &f)?;
        first.get_or_insert(t);
        last = Some(t);
    }
    series.finish()?;

    let th = &cfg.thresholds;
    let mut checks = vec![Check::new("dispersion", dispersion_error(grid, p, cfg.dt)?, th.dispersion)];
    if suite {
        for ((name, tol), value) in SUITE_COLUMNS
            .iter()
            .zip([th.decomposition, th.conventional, th.continuity, th.purity])
            .zip(worst)
        {
            checks.push(Check::new(name, value, tol));
        }
    } else {
        let m = observables(&f, p);
        checks.push(Check::new("purity", purity_check(&m).relative, th.purity));
    }
    Ok(summary(cfg, checks, first.expect("step 0 is an output"), last.expect("final step is an output")))
}
