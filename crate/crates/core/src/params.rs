//! Physical parameters and the external potential.

use serde::{Deserialize, Serialize};

use crate::{Error, Mat3, Result, Vec3};

/// One monomial `coeff · x^px · y^py · z^pz` of a polynomial potential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub coeff: f64,
    pub powers: [u32; 3],
}

impl PolyTerm {
    pub fn new(coeff: f64, powers: [u32; 3]) -> Self {
        Self { coeff, powers }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PotentialKind {
    Zero,
    /// `V = k |x|² / 2`.
    Harmonic { k: f64 },
    Polynomial { terms: Vec<PolyTerm> },
}

/// External potential `V` together with the coupling that turns its force
/// `-∇V` into a spin-orbit field.
///
/// The spin-orbit field seen by particles is
/// `𝓕(x) = α ẑ − soc_coupling · ∇V(x)`, where `α` comes from the Rashba
/// strength in [`PhysicalParams`] and `soc_coupling` plays the role of
/// `1/(2m²c²)` in nondimensional units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    #[serde(flatten)]
    pub kind: PotentialKind,
    #[serde(default)]
    pub soc_coupling: f64,
}

impl Default for PotentialSpec {
    fn default() -> Self {
        Self::zero()
    }
}

fn ipow(x: f64, n: u32) -> f64 {
    x.powi(n as i32)
}

/// d^order/dx^order of x^n.
fn dpow(x: f64, n: u32, order: u32) -> f64 {
    if order > n {
        return 0.0;
    }
    let mut c = 1.0;
    for j in 0..order {
        c *= (n - j) as f64;
    }
    c * ipow(x, n - order)
}

impl PotentialSpec {
    pub fn zero() -> Self {
        Self {
            kind: PotentialKind::Zero,
            soc_coupling: 0.0,
        }
    }

    pub fn harmonic(k: f64) -> Self {
        Self {
            kind: PotentialKind::Harmonic { k },
            soc_coupling: 0.0,
        }
    }

    pub fn polynomial(terms: Vec<PolyTerm>) -> Self {
        Self {
            kind: PotentialKind::Polynomial { terms },
            soc_coupling: 0.0,
        }
    }

    pub fn with_soc_coupling(mut self, coupling: f64) -> Self {
        self.soc_coupling = coupling;
        self
    }

    pub fn is_zero(&self) -> bool {
        match &self.kind {
            PotentialKind::Zero => true,
            PotentialKind::Harmonic { k } => *k == 0.0,
            PotentialKind::Polynomial { terms } => terms.iter().all(|t| t.coeff == 0.0),
        }
    }

    pub fn value(&self, x: &Vec3) -> f64 {
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::Harmonic { k } => 0.5 * k * x.norm_squared(),
            PotentialKind::Polynomial { terms } => terms
                .iter()
                .map(|t| {
                    t.coeff
                        * ipow(x[0], t.powers[0])
                        * ipow(x[1], t.powers[1])
                        * ipow(x[2], t.powers[2])
                })
                .sum(),
        }
    }

    pub fn gradient(&self, x: &Vec3) -> Vec3 {
        match &self.kind {
            PotentialKind::Zero => Vec3::zeros(),
            PotentialKind::Harmonic { k } => *k * x,
            PotentialKind::Polynomial { terms } => {
                let mut g = Vec3::zeros();
                for t in terms {
                    for axis in 0..3 {
                        let mut term = t.coeff;
                        for j in 0..3 {
                            let order = u32::from(j == axis);
                            term *= dpow(x[j], t.powers[j], order);
                        }
                        g[axis] += term;
                    }
                }
                g
            }
        }
    }

    pub fn hessian(&self, x: &Vec3) -> Mat3 {
        match &self.kind {
            PotentialKind::Zero => Mat3::zeros(),
            PotentialKind::Harmonic { k } => Mat3::identity() * *k,
            PotentialKind::Polynomial { terms } => {
                let mut h = Mat3::zeros();
                for t in terms {
                    for r in 0..3 {
                        for c in 0..3 {
                            let mut term = t.coeff;
                            for j in 0..3 {
                                let order = u32::from(j == r) + u32::from(j == c);
                                term *= dpow(x[j], t.powers[j], order);
                            }
                            h[(r, c)] += term;
                        }
                    }
                }
                h
            }
        }
    }
}

/// Physical constants, Rashba strength, external potential and the mollifier
/// width used by the particle scheme.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalParams {
    pub hbar: f64,
    pub mass: f64,
    /// Rashba parameter `α_R` (energy × length).
    pub alpha_r: f64,
    pub potential: PotentialSpec,
    /// Mollifier length scale `Δ`.
    pub delta: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
            alpha_r: 0.0,
            potential: PotentialSpec::zero(),
            delta: 0.5,
        }
    }
}

impl PhysicalParams {
    pub fn rashba(alpha_r: f64) -> Self {
        Self {
            alpha_r,
            ..Self::default()
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_potential(mut self, potential: PotentialSpec) -> Self {
        self.potential = potential;
        self
    }

    /// Reduced Rashba strength `α = 2 α_R / ħ²`, the magnitude of the uniform
    /// spin-orbit field `𝓕 = α ẑ`.
    pub fn alpha(&self) -> f64 {
        2.0 * self.alpha_r / (self.hbar * self.hbar)
    }

    pub fn set_alpha(&mut self, alpha: f64) {
        self.alpha_r = 0.5 * alpha * self.hbar * self.hbar;
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |field: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    field,
                    reason: format!("must be finite and positive, got {v}"),
                })
            }
        };
        positive("hbar", self.hbar)?;
        positive("mass", self.mass)?;
        positive("delta", self.delta)?;
        if !self.alpha_r.is_finite() {
            return Err(Error::InvalidParameter {
                field: "alpha_r",
                reason: "must be finite".into(),
            });
        }
        Ok(())
    }

    /// Spin-orbit field `𝓕(x)`.
    pub fn soc_field(&self, x: &Vec3) -> Vec3 {
        let mut f = Vec3::new(0.0, 0.0, self.alpha());
        if self.potential.soc_coupling != 0.0 {
            f -= self.potential.gradient(x) * self.potential.soc_coupling;
        }
        f
    }

    /// Jacobian `∂𝓕_l/∂x_k` stored as `(l, k)`.
    pub fn soc_jacobian(&self, x: &Vec3) -> Mat3 {
        if self.potential.soc_coupling == 0.0 {
            Mat3::zeros()
        } else {
            -self.potential.hessian(x) * self.potential.soc_coupling
        }
    }

    pub fn soc_is_uniform(&self) -> bool {
        self.potential.soc_coupling == 0.0 || self.potential.is_zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probes() -> Vec<Vec3> {
        vec![
            Vec3::new(0.3, -0.7, 0.0),
            Vec3::new(1.2, 0.4, -0.5),
            Vec3::new(-2.0, 1.5, 0.9),
        ]
    }

    fn fd_gradient(v: &PotentialSpec, x: &Vec3) -> Vec3 {
        let h = 1e-5;
        let mut g = Vec3::zeros();
        for k in 0..3 {
            let mut xp = *x;
            let mut xm = *x;
            xp[k] += h;
            xm[k] -= h;
            g[k] = (v.value(&xp) - v.value(&xm)) / (2.0 * h);
        }
        g
    }

    #[test]
    fn alpha_round_trip() {
        let mut p = PhysicalParams::rashba(0.37);
        p.hbar = 1.3;
        let a = p.alpha();
        assert!((a - 2.0 * 0.37 / 1.69).abs() < 1e-15);
        p.set_alpha(a);
        assert!((p.alpha_r - 0.37).abs() < 1e-15);
    }

    #[test]
    fn rejects_nonpositive_constants() {
        let mut p = PhysicalParams::default();
        p.mass = 0.0;
        assert!(matches!(
            p.validate(),
            Err(Error::InvalidParameter { field: "mass", .. })
        ));
        let mut p = PhysicalParams::default();
        p.delta = -1.0;
        assert!(p.validate().is_err());
        assert!(PhysicalParams::default().validate().is_ok());
    }

    #[test]
    fn rashba_field_is_uniform() {
        let p = PhysicalParams::rashba(0.5);
        assert!(p.soc_is_uniform());
        for x in probes() {
            assert_eq!(p.soc_field(&x), Vec3::new(0.0, 0.0, 1.0));
            assert_eq!(p.soc_jacobian(&x), Mat3::zeros());
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let specs = [
            PotentialSpec::harmonic(1.7),
            PotentialSpec::polynomial(vec![
                PolyTerm::new(0.5, [2, 0, 0]),
                PolyTerm::new(-0.3, [1, 2, 0]),
                PolyTerm::new(0.1, [0, 1, 3]),
                PolyTerm::new(2.0, [0, 0, 0]),
            ]),
        ];
        for v in &specs {
            for x in probes() {
                let g = v.gradient(&x);
                let fd = fd_gradient(v, &x);
                let scale = g.norm().max(1e-12);
                assert!((g - fd).norm() / scale < 1e-6, "{g} vs {fd}");

                let h = 1e-5;
                for k in 0..3 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[k] += h;
                    xm[k] -= h;
                    let col = (v.gradient(&xp) - v.gradient(&xm)) / (2.0 * h);
                    let hess = v.hessian(&x).column(k).into_owned();
                    assert!((col - hess).norm() < 1e-6 * (1.0 + hess.norm()));
                }
            }
        }
    }

    #[test]
    fn soc_field_follows_potential_force() {
        let p = PhysicalParams::rashba(0.25)
            .with_potential(PotentialSpec::harmonic(2.0).with_soc_coupling(0.1));
        let x = Vec3::new(1.0, -2.0, 0.0);
        let f = p.soc_field(&x);
        assert!((f - Vec3::new(-0.2, 0.4, 0.5)).norm() < 1e-15);
        assert!(!p.soc_is_uniform());
    }
}
