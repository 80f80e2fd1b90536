//! Built-in scenarios.

use crate::config::{parse_config, RawConfig};

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub toml: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "n1-precession",
        description: "single Rashba bohmion; spin precesses about αẑ×p over one period",
        toml: r#"
name = "n1-precession"
mode = "bohmion"
integrator = "split-spin"
# |Ω| = α|p| = 1, so one period is 2π
dt = 0.006283185307179587
steps = 1000
output_every = 100

[physical]
alpha_r = 0.5

[[ensemble.particles]]
weight = 1.0
q = [0.0, 0.0]
p = [1.0, 0.0]
mu = [0.5, 0.0, 0.0]
"#,
    },
    Preset {
        name: "two-bohmion-scatter",
        description: "two counter-propagating bohmions with opposite in-plane spins",
        toml: r#"
name = "two-bohmion-scatter"
mode = "bohmion"
integrator = "rk4"
dt = 0.01
steps = 300
output_every = 10

[physical]
alpha_r = 0.3
delta = 0.5

[[ensemble.particles]]
weight = 0.5
q = [-1.0, 0.1]
p = [0.8, 0.0]
mu = [0.35355339059327373, 0.0, 0.0]

[[ensemble.particles]]
weight = 0.5
q = [1.0, -0.1]
p = [-0.8, 0.0]
mu = [-0.35355339059327373, 0.0, 0.0]
"#,
    },
    Preset {
        name: "rashba-packet-64",
        description: "in-plane spin Gaussian packet on a 64² grid; runs the identity suite",
        toml: r#"
name = "rashba-packet-64"
mode = "identity-suite"
integrator = "exact-spectral"
dt = 0.01
steps = 200
output_every = 20

[physical]
alpha_r = 0.3

[grid]
nx = 64
lx = 40.0

[wavepacket]
center = [0.0, 0.0]
sigma = 2.0
k = [0.5, 0.0]
theta = 1.5707963267948966
phi = 0.0
"#,
    },
    Preset {
        name: "dispersion-scan",
        description: "lower-band packet; checks every lattice mode against E±(k)",
        toml: r#"
name = "dispersion-scan"
mode = "pauli"
integrator = "exact-spectral"
dt = 0.05
steps = 100
output_every = 10

[physical]
alpha_r = 0.4

[grid]
nx = 64
lx = 32.0

[wavepacket]
sigma = 1.5
k = [0.6, 0.0]
band = -1
"#,
    },
    Preset {
        name: "conservation-longrun",
        description: "four random Rashba bohmions for 10³ RK4 steps",
        toml: r#"
name = "conservation-longrun"
mode = "bohmion"
integrator = "rk4"
dt = 0.005
steps = 1000
output_every = 50
seed = 7

[physical]
alpha_r = 0.5

[ensemble.random]
n = 4
position_spread = 1.0
momentum_spread = 0.5
"#,
    },
];

pub fn list_presets() -> impl Iterator<Item = (&'static str, &'static str)> {
    PRESETS.iter().map(|p| (p.name, p.description))
}

pub fn preset(name: &str) -> Option<RawConfig> {
    PRESETS
        .iter()
        .find(|p| p.name == name)
        .map(|p| parse_config(p.toml).expect("built-in presets parse"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_contents() {
        let names: Vec<_> = list_presets().map(|(n, _)| n).collect();
        for n in [
            "n1-precession",
            "two-bohmion-scatter",
            "rashba-packet-64",
            "dispersion-scan",
            "conservation-longrun",
        ] {
            assert!(names.contains(&n));
        }
    }

    #[test]
    fn every_preset_validates() {
        for p in PRESETS {
            let raw = preset(p.name).unwrap();
            raw.validate().unwrap_or_else(|e| panic!("{}: {e}", p.name));
        }
        assert!(preset("nope").is_none());
    }
}
