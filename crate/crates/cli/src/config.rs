//! Scenario configuration: TOML parsing, defaults and validation.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use spinfluid::bohmion::Integrator;
use spinfluid::grid::Grid2;
use spinfluid::kernel::QuadratureSpec;
use spinfluid::{validate_ensemble, Bohmion, BohmionEnsemble, PhysicalParams, Vec3};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Bohmion,
    Pauli,
    IdentitySuite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegratorKind {
    Rk4,
    SplitSpin,
    ExactSpectral,
    Strang,
}

impl IntegratorKind {
    pub fn bohmion(self) -> Option<Integrator> {
        match self {
            IntegratorKind::Rk4 => Some(Integrator::Rk4),
            IntegratorKind::SplitSpin => Some(Integrator::SplitSpin),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleSpec {
    pub weight: f64,
    /// Two or three components; planar ensembles take two.
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub mu: [f64; 3],
}

/// Seeded random ensemble: positions uniform in `[-position_spread, position_spread]`,
/// momenta uniform in `[-momentum_spread, momentum_spread]` per axis, spin
/// directions uniform on the sphere, weights uniform in `[0.5, 1.5]` before
/// normalization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomEnsembleSpec {
    pub n: usize,
    pub position_spread: f64,
    pub momentum_spread: f64,
}

impl Default for RandomEnsembleSpec {
    fn default() -> Self {
        Self {
            n: 4,
            position_spread: 1.0,
            momentum_spread: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSpec {
    pub dim: usize,
    pub particles: Vec<ParticleSpec>,
    pub random: Option<RandomEnsembleSpec>,
    /// Rescale weights to sum to one and spins to `Σ|μ|² = ħ²/4` before
    /// validation.
    pub normalize: bool,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self {
            dim: 2,
            particles: Vec::new(),
            random: None,
            normalize: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: Option<usize>,
    pub lx: f64,
    pub ly: Option<f64>,
}

impl GridSpec {
    pub fn grid(&self) -> spinfluid::Result<Grid2> {
        Grid2::new(
            self.nx,
            self.ny.unwrap_or(self.nx),
            self.lx,
            self.ly.unwrap_or(self.lx),
        )
    }
}

/// Gaussian wavepacket `exp(−|x−c|²/4σ² + ik·x) χ`. The spinor is either a
/// band eigenstate at `k` (`band = ±1`) or the Bloch spinor with angles
/// `theta`, `phi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WavepacketSpec {
    pub center: [f64; 2],
    pub sigma: f64,
    pub k: [f64; 2],
    pub theta: f64,
    pub phi: f64,
    pub band: Option<i32>,
}

impl Default for WavepacketSpec {
    fn default() -> Self {
        Self {
            center: [0.0, 0.0],
            sigma: 1.0,
            k: [0.0, 0.0],
            theta: 0.5 * std::f64::consts::PI,
            phi: 0.0,
            band: None,
        }
    }
}

/// Pass thresholds for the identity suite, compared with relative residuals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub decomposition: f64,
    pub conventional: f64,
    pub continuity: f64,
    pub purity: f64,
    pub dispersion: f64,
    pub precession: f64,
    pub spin_norm: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            decomposition: 1e-8,
            conventional: 1e-10,
            continuity: 1e-3,
            purity: 1e-8,
            dispersion: 1e-11,
            precession: 1e-8,
            spin_norm: 1e-13,
        }
    }
}

/// The file schema. Every key is optional at parse time so that validation
/// can report all problems at once.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub name: Option<String>,
    pub mode: Option<Mode>,
    #[serde(default)]
    pub physical: PhysicalParams,
    pub integrator: Option<IntegratorKind>,
    pub dt: Option<f64>,
    pub steps: Option<i64>,
    pub output_every: Option<i64>,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    pub ensemble: Option<EnsembleSpec>,
    pub grid: Option<GridSpec>,
    pub wavepacket: Option<WavepacketSpec>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub thresholds: Thresholds,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Initial {
    Bohmions(BohmionEnsemble),
    Packet { grid: Grid2, packet: WavepacketSpec },
}

/// A validated scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub mode: Mode,
    pub physical: PhysicalParams,
    pub integrator: IntegratorKind,
    pub dt: f64,
    pub steps: usize,
    pub output_every: usize,
    pub quadrature: QuadratureSpec,
    pub initial: Initial,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub thresholds: Thresholds,
    pub raw: RawConfig,
}

pub fn parse_config(text: &str) -> Result<RawConfig, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)?.validate()
}

fn vec3(v: &[f64], dim: usize, what: &str, index: usize, errs: &mut Vec<String>) -> Vec3 {
    match (v.len(), dim) {
        (2, 2) => Vec3::new(v[0], v[1], 0.0),
        (3, 3) => Vec3::new(v[0], v[1], v[2]),
        _ => {
            errs.push(format!(
                "ensemble.particles[{index}].{what}: expected {dim} components, got {}",
                v.len()
            ));
            Vec3::zeros()
        }
    }
}

fn random_ensemble(spec: &RandomEnsembleSpec, dim: usize, hbar: f64, seed: u64) -> Vec<Bohmion> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts: Vec<Bohmion> = (0..spec.n)
        .map(|_| {
            let mut coord = |s: f64| {
                let mut v = Vec3::zeros();
                for c in v.iter_mut().take(dim) {
                    *c = rng.gen_range(-s..=s);
                }
                v
            };
            let q = coord(spec.position_spread);
            let p = coord(spec.momentum_spread);
            let z: f64 = rng.gen_range(-1.0..=1.0);
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let r = (1.0 - z * z).sqrt();
            let mag: f64 = rng.gen_range(0.5..1.5);
            let mu = Vec3::new(r * phi.cos(), r * phi.sin(), z) * mag;
            Bohmion::new(rng.gen_range(0.5..1.5), q, p, mu)
        })
        .collect();
    let total: f64 = parts.iter().map(|b| b.weight).sum();
    let mu_sq: f64 = parts.iter().map(|b| b.mu.norm_squared()).sum();
    let s = 0.5 * hbar / mu_sq.sqrt();
    for b in &mut parts {
        b.weight /= total;
        b.mu *= s;
    }
    parts
}

impl RawConfig {
    pub fn validate(&self) -> Result<ScenarioConfig, ConfigError> {
        let mut errs = Vec::new();
        let mode = self.mode.unwrap_or_else(|| {
            errs.push("mode: missing (bohmion | pauli | identity-suite)".into());
            Mode::Bohmion
        });
        let dt = match self.dt {
            Some(dt) if dt.is_finite() && dt > 0.0 => dt,
            Some(dt) => {
                errs.push(format!("dt: must be finite and > 0, got {dt}"));
                1.0
            }
            None => {
                errs.push("dt: missing".into());
                1.0
            }
        };
        let steps = match self.steps {
            Some(n) if n >= 1 => n as usize,
            Some(n) => {
                errs.push(format!("steps: must be ≥ 1, got {n}"));
                1
            }
            None => {
                errs.push("steps: missing".into());
                1
            }
        };
        let output_every = match self.output_every.unwrap_or(1) {
            n if n >= 1 => n as usize,
            n => {
                errs.push(format!("output_every: must be ≥ 1, got {n}"));
                1
            }
        };
        let p = &self.physical;
        if let Err(e) = p.validate() {
            errs.push(format!("physical: {e}"));
        }
        if let Err(e) = self.quadrature.validate() {
            errs.push(format!("quadrature: {e}"));
        }
        let integrator = match (mode, self.integrator) {
            (Mode::Bohmion, None) => IntegratorKind::Rk4,
            (_, None) => IntegratorKind::ExactSpectral,
            (Mode::Bohmion, Some(i @ (IntegratorKind::Rk4 | IntegratorKind::SplitSpin))) => i,
            (Mode::Pauli | Mode::IdentitySuite, Some(i @ (IntegratorKind::ExactSpectral | IntegratorKind::Strang))) => i,
            (m, Some(i)) => {
                errs.push(format!("integrator: {i:?} is not available in {m:?} mode"));
                i
            }
        };
        let seed = self.seed.unwrap_or(0);
        let initial = match mode {
            Mode::Bohmion => self.bohmion_initial(seed, &mut errs),
            Mode::Pauli | Mode::IdentitySuite => {
                if integrator == IntegratorKind::ExactSpectral && !p.potential.is_zero() {
                    errs.push("integrator: exact-spectral requires a zero potential; use strang".into());
                }
                if p.potential.soc_coupling != 0.0 && !p.potential.is_zero() {
                    errs.push("physical.potential.soc_coupling: must be 0 for the grid solver".into());
                }
                self.packet_initial(&mut errs)
            }
        };
        if !errs.is_empty() {
            return Err(ConfigError::Validation(errs));
        }
        Ok(ScenarioConfig {
            name: self.name.clone().unwrap_or_else(|| "scenario".into()),
            mode,
            physical: p.clone(),
            integrator,
            dt,
            steps,
            output_every,
            quadrature: self.quadrature,
            initial: initial.expect("initial state present when validation passes"),
            seed,
            out_dir: self.out_dir.clone().unwrap_or_else(|| PathBuf::from("out")),
            thresholds: self.thresholds,
            raw: self.clone(),
        })
    }

    fn bohmion_initial(&self, seed: u64, errs: &mut Vec<String>) -> Option<Initial> {
        let Some(spec) = &self.ensemble else {
            errs.push("ensemble: required in bohmion mode".into());
            return None;
        };
        if spec.dim != 2 && spec.dim != 3 {
            errs.push(format!("ensemble.dim: must be 2 or 3, got {}", spec.dim));
            return None;
        }
        let mut parts = Vec::new();
        match (&spec.random, spec.particles.is_empty()) {
            (Some(_), false) => {
                errs.push("ensemble: give either particles or random, not both".into());
                return None;
            }
            (None, true) => {
                errs.push("ensemble: needs particles or a random section".into());
                return None;
            }
            (Some(r), true) => {
                if r.n == 0 {
                    errs.push("ensemble.random.n: must be ≥ 1".into());
                    return None;
                }
                parts = random_ensemble(r, spec.dim, self.physical.hbar, seed);
            }
            (None, false) => {
                for (i, ps) in spec.particles.iter().enumerate() {
                    let q = vec3(&ps.q, spec.dim, "q", i, errs);
                    let pp = vec3(&ps.p, spec.dim, "p", i, errs);
                    parts.push(Bohmion::new(ps.weight, q, pp, Vec3::from(ps.mu)));
                }
            }
        }
        let mut e = match BohmionEnsemble::new(spec.dim, parts) {
            Ok(e) => e,
            Err(err) => {
                errs.push(format!("ensemble: {err}"));
                return None;
            }
        };
        if spec.normalize {
            e.normalize_weights();
            e.normalize_spins(self.physical.hbar);
        }
        let violations = validate_ensemble(&e, &self.physical);
        if violations.is_empty() {
            Some(Initial::Bohmions(e))
        } else {
            errs.extend(violations.iter().map(|v| format!("ensemble: {v}")));
            None
        }
    }

    fn packet_initial(&self, errs: &mut Vec<String>) -> Option<Initial> {
        let grid = match &self.grid {
            None => {
                errs.push("grid: required in pauli and identity-suite modes".into());
                None
            }
            Some(g) => match g.grid() {
                Ok(grid) => Some(grid),
                Err(e) => {
                    errs.push(format!("grid: {e}"));
                    None
                }
            },
        };
        let packet = match &self.wavepacket {
            None => {
                errs.push("wavepacket: required in pauli and identity-suite modes".into());
                None
            }
            Some(w) => {
                if !(w.sigma.is_finite() && w.sigma > 0.0) {
                    errs.push(format!("wavepacket.sigma: must be > 0, got {}", w.sigma));
                }
                if let Some(b) = w.band {
                    if b != 1 && b != -1 {
                        errs.push(format!("wavepacket.band: must be +1 or -1, got {b}"));
                    }
                }
                Some(w.clone())
            }
        };
        Some(Initial::Packet {
            grid: grid?,
            packet: packet?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
mode = "bohmion"
dt = 0.01
steps = 10

[[ensemble.particles]]
weight = 1.0
q = [0.0, 0.0]
p = [1.0, 0.0]
mu = [0.5, 0.0, 0.0]
"#;

    fn errors(text: &str) -> Vec<String> {
        match parse_config(text).unwrap().validate() {
            Err(ConfigError::Validation(v)) => v,
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap().validate().unwrap();
        assert_eq!(c.physical.hbar, 1.0);
        assert_eq!(c.physical.mass, 1.0);
        assert_eq!(c.physical.delta, 0.5);
        assert_eq!(c.integrator, IntegratorKind::Rk4);
        assert_eq!(c.output_every, 1);
    }

    #[test]
    fn negative_dt_is_named() {
        let v = errors(&MINIMAL.replace("dt = 0.01", "dt = -0.1"));
        assert_eq!(v.len(), 1);
        assert!(v[0].starts_with("dt:"));
    }

    #[test]
    fn pauli_without_grid() {
        let v = errors("mode = \"pauli\"\ndt = 0.1\nsteps = 3\n[wavepacket]\nsigma = 1.0\n");
        assert!(v.iter().any(|e| e.starts_with("grid:")));
    }

    #[test]
    fn all_problems_reported_together() {
        let v = errors("mode = \"bohmion\"\ndt = 0.0\nsteps = 0\noutput_every = 0\nintegrator = \"strang\"\n");
        for key in ["dt:", "steps:", "output_every:", "integrator:", "ensemble:"] {
            assert!(v.iter().any(|e| e.starts_with(key)), "{key} missing in {v:?}");
        }
    }

    #[test]
    fn ensemble_constraints_surface() {
        let v = errors(&MINIMAL.replace("weight = 1.0", "weight = 0.7"));
        assert!(v.iter().any(|e| e.contains("Σw ≠ 1")));
    }

    #[test]
    fn unknown_keys_are_parse_errors() {
        assert!(matches!(parse_config("mode = \"bohmion\"\ndtt = 1.0\n"), Err(ConfigError::Parse(_))));
        assert!(matches!(parse_config("mode = 3"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn random_ensembles_are_seeded() {
        let text = "mode = \"bohmion\"\ndt = 0.1\nsteps = 1\nseed = 4\n[ensemble.random]\nn = 5\n";
        let a = parse_config(text).unwrap().validate().unwrap();
        let b = parse_config(text).unwrap().validate().unwrap();
        let c = parse_config(&text.replace("seed = 4", "seed = 5")).unwrap().validate().unwrap();
        assert_eq!(a.initial, b.initial);
        assert_ne!(a.initial, c.initial);
    }

    #[test]
    fn exact_spectral_rejects_potential() {
        let text = "mode = \"pauli\"\ndt = 0.1\nsteps = 1\n[grid]\nnx = 16\nlx = 10.0\n[wavepacket]\nsigma = 1.0\n[physical.potential]\nkind = \"harmonic\"\nk = 1.0\n";
        let v = errors(text);
        assert!(v.iter().any(|e| e.starts_with("integrator:")));
        let ok = text.replace("steps = 1\n", "steps = 1\nintegrator = \"strang\"\n");
        assert!(parse_config(&ok).unwrap().validate().is_ok());
    }
}
