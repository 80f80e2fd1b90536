//! Weighted particle ensembles and their admissibility constraints.

use std::fmt;

use crate::{Error, PhysicalParams, Result, Vec3};

const CONSTRAINT_TOL: f64 = 1e-12;

/// One computational particle: probability weight, position, momentum and
/// spin vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bohmion {
    pub weight: f64,
    pub q: Vec3,
    pub p: Vec3,
    pub mu: Vec3,
}

impl Bohmion {
    pub fn new(weight: f64, q: Vec3, p: Vec3, mu: Vec3) -> Self {
        Self { weight, q, p, mu }
    }
}

/// A nonempty set of bohmions living in 2 (planar) or 3 dimensions.
///
/// Spins are always three-dimensional. In the planar case positions and
/// momenta carry `z = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct BohmionEnsemble {
    dim: usize,
    particles: Vec<Bohmion>,
}

impl BohmionEnsemble {
    pub fn new(dim: usize, particles: Vec<Bohmion>) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidEnsemble(format!(
                "dimension must be 2 or 3, got {dim}"
            )));
        }
        if dim == 2 && particles.iter().any(|b| b.q.z != 0.0 || b.p.z != 0.0) {
            return Err(Error::InvalidEnsemble(
                "planar ensemble with out-of-plane position or momentum".into(),
            ));
        }
        Ok(Self { dim, particles })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[Bohmion] {
        &self.particles
    }

    pub fn particles_mut(&mut self) -> &mut [Bohmion] {
        &mut self.particles
    }

    pub fn iter(&self) -> impl Iterator<Item = &Bohmion> {
        self.particles.iter()
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.particles.iter().map(|b| b.weight)
    }

    /// Weighted net spin `Σ_a w_a μ_a`.
    pub fn net_spin(&self) -> Vec3 {
        self.particles.iter().map(|b| b.mu * b.weight).sum()
    }

    pub fn spin_norm_sq_total(&self) -> f64 {
        self.particles.iter().map(|b| b.mu.norm_squared()).sum()
    }

    /// Rigid translation of every position.
    pub fn translated(&self, shift: Vec3) -> Self {
        let mut out = self.clone();
        for b in &mut out.particles {
            b.q += shift;
        }
        out
    }

    /// Rescales spins so that `Σ_a |μ_a|² = ħ²/4`, keeping their directions
    /// and relative sizes.
    pub fn normalize_spins(&mut self, hbar: f64) {
        let total = self.spin_norm_sq_total();
        if total > 0.0 {
            let s = 0.5 * hbar / total.sqrt();
            for b in &mut self.particles {
                b.mu *= s;
            }
        }
    }

    pub fn normalize_weights(&mut self) {
        let total: f64 = self.weights().sum();
        for b in &mut self.particles {
            b.weight /= total;
        }
    }
}

/// A violated ensemble constraint.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NonPositiveWeight { index: usize, weight: f64 },
    NonFinite { index: usize },
    WeightSum { sum: f64 },
    SpinNormSum { sum: f64, expected: f64 },
    NetSpinBound { norm: f64, bound: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositiveWeight { index, weight } => {
                write!(f, "w[{index}] = {weight} is not positive")
            }
            Violation::NonFinite { index } => write!(f, "bohmion {index} has non-finite state"),
            Violation::WeightSum { sum } => write!(f, "Σw ≠ 1 (Σw = {sum})"),
            Violation::SpinNormSum { sum, expected } => {
                write!(f, "Σ|μ|² ≠ ħ²/4 (Σ|μ|² = {sum}, expected {expected})")
            }
            Violation::NetSpinBound { norm, bound } => {
                write!(f, "|Σ w μ| = {norm} exceeds ħ/2 = {bound}")
            }
        }
    }
}

/// Checks the weight simplex and spin-norm constraints. Returns every
/// violation found; an empty list means the ensemble is admissible.
pub fn validate_ensemble(e: &BohmionEnsemble, p: &PhysicalParams) -> Vec<Violation> {
    let mut out = Vec::new();
    for (index, b) in e.iter().enumerate() {
        let finite = b.weight.is_finite()
            && b.q.iter().chain(b.p.iter()).chain(b.mu.iter()).all(|x| x.is_finite());
        if !finite {
            out.push(Violation::NonFinite { index });
        }
        if !(b.weight > 0.0) {
            out.push(Violation::NonPositiveWeight {
                index,
                weight: b.weight,
            });
        }
    }
    let sum: f64 = e.weights().sum();
    if (sum - 1.0).abs() > CONSTRAINT_TOL {
        out.push(Violation::WeightSum { sum });
    }
    let expected = 0.25 * p.hbar * p.hbar;
    let mu_sum = e.spin_norm_sq_total();
    if (mu_sum - expected).abs() > CONSTRAINT_TOL * expected.max(1.0) {
        out.push(Violation::SpinNormSum {
            sum: mu_sum,
            expected,
        });
    }
    let bound = 0.5 * p.hbar;
    let norm = e.net_spin().norm();
    if norm > bound * (1.0 + CONSTRAINT_TOL) {
        out.push(Violation::NetSpinBound { norm, bound });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(w: f64, mu: Vec3) -> Bohmion {
        Bohmion::new(w, Vec3::zeros(), Vec3::zeros(), mu)
    }

    #[test]
    fn single_admissible_bohmion() {
        let p = PhysicalParams::default();
        let e = BohmionEnsemble::new(2, vec![b(1.0, Vec3::new(0.0, 0.0, 0.5))]).unwrap();
        assert!(validate_ensemble(&e, &p).is_empty());
    }

    #[test]
    fn weight_sum_violation() {
        let p = PhysicalParams::default();
        let mu = Vec3::new(0.0, 0.0, 0.5 / 2f64.sqrt());
        let e = BohmionEnsemble::new(2, vec![b(0.5, mu), b(0.6, mu)]).unwrap();
        let v = validate_ensemble(&e, &p);
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::WeightSum { .. }));
        assert!(v[0].to_string().starts_with("Σw ≠ 1"));
    }

    #[test]
    fn spin_norm_violation() {
        let p = PhysicalParams::default();
        let mu = Vec3::new(0.5, 0.0, 0.0);
        let e = BohmionEnsemble::new(2, vec![b(0.5, mu), b(0.5, mu)]).unwrap();
        let v = validate_ensemble(&e, &p);
        assert_eq!(v.len(), 1);
        assert!(v[0].to_string().starts_with("Σ|μ|² ≠ ħ²/4"));
    }

    #[test]
    fn rejects_empty_and_bad_dimension() {
        assert_eq!(BohmionEnsemble::new(2, vec![]), Err(Error::EmptyEnsemble));
        assert!(BohmionEnsemble::new(4, vec![b(1.0, Vec3::zeros())]).is_err());
        let off_plane = Bohmion::new(1.0, Vec3::new(0.0, 0.0, 1.0), Vec3::zeros(), Vec3::zeros());
        assert!(BohmionEnsemble::new(2, vec![off_plane]).is_err());
        assert!(BohmionEnsemble::new(3, vec![off_plane]).is_ok());
    }

    #[test]
    fn negative_weight_reported() {
        let p = PhysicalParams::default();
        let mu = Vec3::new(0.0, 0.5 / 2f64.sqrt(), 0.0);
        let e = BohmionEnsemble::new(3, vec![b(-0.5, mu), b(1.5, mu)]).unwrap();
        let v = validate_ensemble(&e, &p);
        assert!(v
            .iter()
            .any(|x| matches!(x, Violation::NonPositiveWeight { index: 0, .. })));
    }

    proptest! {
        #[test]
        fn normalized_ensembles_obey_net_spin_bound(
            raw in prop::collection::vec((0.01f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 1..8),
            hbar in 0.5f64..2.0,
        ) {
            let parts = raw
                .iter()
                .map(|&(w, x, y, z)| b(w, Vec3::new(x, y, z + 1e-3)))
                .collect();
            let mut e = BohmionEnsemble::new(3, parts).unwrap();
            e.normalize_weights();
            e.normalize_spins(hbar);
            let p = PhysicalParams { hbar, ..PhysicalParams::default() };
            prop_assert!(validate_ensemble(&e, &p).is_empty());
            prop_assert!(e.net_spin().norm() <= 0.5 * hbar * (1.0 + 1e-12));
        }
    }
}
