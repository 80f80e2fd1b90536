//! Gaussian mollifier and the pairwise regularization integrals
//!
//! ```text
//! C_ab = ∫ ∇K_a·∇K_b / S dx
//! G_ab = ∫ 𝓕 × (K_a ∇K_b − K_b ∇K_a) / S dx,     S = Σ_c w_c K_c
//! ```
//!
//! with `K_a = K(x − q_a)`, evaluated by tensor-product midpoint quadrature.
//! Quadrature nodes sit on a lattice anchored at the origin (node `i` at
//! `(i + ½) h`), so the node set does not slide with the particles: the
//! discrete integrals are smooth functions of the positions and the analytic
//! gradients below are the exact gradients of the discrete sums.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{BohmionEnsemble, Error, Mat3, PhysicalParams, Result, Vec3};

/// Normalized Gaussian mollifier of standard deviation `delta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MollifierSpec {
    pub delta: f64,
    pub dim: usize,
}

impl MollifierSpec {
    pub fn new(delta: f64, dim: usize) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidParameter {
                field: "delta",
                reason: format!("must be positive, got {delta}"),
            });
        }
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidParameter {
                field: "dim",
                reason: format!("must be 2 or 3, got {dim}"),
            });
        }
        Ok(Self { delta, dim })
    }

    /// `(2πΔ²)^(−dim/2)`.
    pub fn normalization(&self) -> f64 {
        (2.0 * std::f64::consts::PI * self.delta * self.delta).powf(-0.5 * self.dim as f64)
    }

    fn planar(&self, v: Vec3) -> Vec3 {
        if self.dim == 2 {
            Vec3::new(v.x, v.y, 0.0)
        } else {
            v
        }
    }
}

/// `K(x − q)`.
pub fn kernel_eval(x: &Vec3, q: &Vec3, spec: &MollifierSpec) -> f64 {
    let r = spec.planar(x - q);
    spec.normalization() * (-0.5 * r.norm_squared() / (spec.delta * spec.delta)).exp()
}

/// `∇_x K(x − q) = −(x − q) K / Δ²`.
pub fn kernel_grad(x: &Vec3, q: &Vec3, spec: &MollifierSpec) -> Vec3 {
    let r = spec.planar(x - q);
    let k = kernel_eval(x, q, spec);
    -r * (k / (spec.delta * spec.delta))
}

/// `∇_x∇_x K(x − q) = (r rᵀ/Δ⁴ − I/Δ²) K`, restricted to the active axes.
pub fn kernel_hessian(x: &Vec3, q: &Vec3, spec: &MollifierSpec) -> Mat3 {
    let r = spec.planar(x - q);
    let k = kernel_eval(x, q, spec);
    hessian_from(r, k, spec)
}

fn hessian_from(r: Vec3, k: f64, spec: &MollifierSpec) -> Mat3 {
    let d2 = spec.delta * spec.delta;
    let mut id = Mat3::identity();
    if spec.dim == 2 {
        id[(2, 2)] = 0.0;
    }
    (r * r.transpose() / (d2 * d2) - id / d2) * k
}

/// Quadrature controls. Lengths are in units of the mollifier width.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSpec {
    /// Margin beyond the particle bounding box, in multiples of `Δ`.
    pub padding: f64,
    pub nodes_per_delta: usize,
    /// Denominator floor relative to the largest nodal value of `Σ w_c K_c`.
    pub denominator_floor: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            padding: 8.0,
            nodes_per_delta: 8,
            denominator_floor: 1e-30,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.padding.is_finite() && self.padding > 0.0) {
            return Err(Error::InvalidParameter {
                field: "quadrature.padding",
                reason: format!("must be positive, got {}", self.padding),
            });
        }
        if self.nodes_per_delta == 0 {
            return Err(Error::InvalidParameter {
                field: "quadrature.nodes_per_delta",
                reason: "must be at least 1".into(),
            });
        }
        if !(self.denominator_floor >= 0.0 && self.denominator_floor < 1.0) {
            return Err(Error::InvalidParameter {
                field: "quadrature.denominator_floor",
                reason: format!("must lie in [0, 1), got {}", self.denominator_floor),
            });
        }
        Ok(())
    }
}

/// Lattice-aligned box of midpoint nodes covering the ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureGrid {
    pub dim: usize,
    pub spacing: f64,
    /// Lattice index of the first node along each axis.
    pub first: [i64; 3],
    pub counts: [usize; 3],
}

impl QuadratureGrid {
    pub fn covering(e: &BohmionEnsemble, delta: f64, spec: &QuadratureSpec) -> Self {
        let dim = e.dim();
        let h = delta / spec.nodes_per_delta as f64;
        let pad = spec.padding * delta;
        let mut first = [0i64; 3];
        let mut counts = [1usize; 3];
        for axis in 0..dim {
            let lo = e.iter().map(|b| b.q[axis]).fold(f64::INFINITY, f64::min) - pad;
            let hi = e.iter().map(|b| b.q[axis]).fold(f64::NEG_INFINITY, f64::max) + pad;
            // node i sits at (i + 1/2) h
            let i0 = (lo / h - 0.5).floor() as i64;
            let i1 = (hi / h - 0.5).ceil() as i64;
            first[axis] = i0;
            counts[axis] = (i1 - i0 + 1) as usize;
        }
        Self {
            dim,
            spacing: h,
            first,
            counts,
        }
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Lower and upper coordinate of the covered box per active axis.
    pub fn bounds(&self, axis: usize) -> (f64, f64) {
        let h = self.spacing;
        let lo = self.first[axis] as f64 * h;
        (lo, lo + self.counts[axis] as f64 * h)
    }

    fn coord(&self, axis: usize, i: usize) -> f64 {
        if axis < self.dim {
            (self.first[axis] as f64 + i as f64 + 0.5) * self.spacing
        } else {
            0.0
        }
    }

    /// Node coordinates of the slab with first-axis index `i`.
    fn slab(&self, i: usize) -> impl Iterator<Item = Vec3> + '_ {
        let x = self.coord(0, i);
        (0..self.counts[1]).flat_map(move |j| {
            let y = self.coord(1, j);
            (0..self.counts[2]).map(move |l| Vec3::new(x, y, self.coord(2, l)))
        })
    }
}

/// The pair matrices `C`, `G` and, optionally, their position gradients.
///
/// Gradient layout: `dc_dq(a, b, c)[k] = ∂C_bc/∂q_{a,k}` and
/// `dg_dq(a, b, c)[(l, k)] = ∂(G_bc)_l/∂q_{a,k}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairIntegrals {
    n: usize,
    c: Vec<f64>,
    g: Vec<Vec3>,
    dc: Option<Vec<Vec3>>,
    dg: Option<Vec<Mat3>>,
}

impl PairIntegrals {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn c(&self, a: usize, b: usize) -> f64 {
        self.c[a * self.n + b]
    }

    pub fn g(&self, a: usize, b: usize) -> Vec3 {
        self.g[a * self.n + b]
    }

    pub fn has_gradients(&self) -> bool {
        self.dc.is_some()
    }

    pub fn dc_dq(&self, a: usize, b: usize, c: usize) -> Option<Vec3> {
        self.dc.as_ref().map(|d| d[(a * self.n + b) * self.n + c])
    }

    pub fn dg_dq(&self, a: usize, b: usize, c: usize) -> Option<Mat3> {
        self.dg.as_ref().map(|d| d[(a * self.n + b) * self.n + c])
    }

    /// Pair part of the energy,
    /// `½ Σ_ab w_a w_b [(μ_a×μ_b)·G_ab + μ_a·μ_b C_ab / m]`.
    pub fn pair_energy(&self, e: &BohmionEnsemble, mass: f64) -> f64 {
        let parts = e.particles();
        let mut sum = 0.0;
        for (a, pa) in parts.iter().enumerate() {
            for (b, pb) in parts.iter().enumerate() {
                let term = pa.mu.cross(&pb.mu).dot(&self.g(a, b))
                    + pa.mu.dot(&pb.mu) * self.c(a, b) / mass;
                sum += pa.weight * pb.weight * term;
            }
        }
        0.5 * sum
    }
}

/// Pair integrals together with the pair forces
/// `−(1/w_a) ∂E_pair/∂q_a`, computed in a single contracted pass.
#[derive(Clone, Debug, PartialEq)]
pub struct PairInteraction {
    pub integrals: PairIntegrals,
    pub forces: Vec<Vec3>,
}

/// Per-node kernel values shared by every accumulation pass.
struct NodeKernels {
    k: Vec<f64>,
    g: Vec<Vec3>,
    r: Vec<Vec3>,
}

struct Setup<'a> {
    e: &'a BohmionEnsemble,
    spec: MollifierSpec,
    grid: QuadratureGrid,
    floor: f64,
}

impl<'a> Setup<'a> {
    fn new(e: &'a BohmionEnsemble, p: &PhysicalParams, quad: &QuadratureSpec) -> Result<Self> {
        p.validate()?;
        quad.validate()?;
        let spec = MollifierSpec::new(p.delta, e.dim())?;
        let grid = QuadratureGrid::covering(e, p.delta, quad);
        if grid.is_empty() {
            return Err(Error::DegenerateEnsemble);
        }
        let mut setup = Self {
            e,
            spec,
            grid,
            floor: 0.0,
        };
        let max_s = setup.max_denominator();
        if !(max_s > 0.0) || !max_s.is_finite() {
            return Err(Error::DegenerateEnsemble);
        }
        setup.floor = quad.denominator_floor * max_s;
        Ok(setup)
    }

    fn max_denominator(&self) -> f64 {
        let partial: Vec<f64> = (0..self.grid.counts[0])
            .into_par_iter()
            .map(|i| {
                self.grid
                    .slab(i)
                    .map(|x| self.denominator(&x))
                    .fold(0.0, f64::max)
            })
            .collect();
        partial.into_iter().fold(0.0, f64::max)
    }

    fn denominator(&self, x: &Vec3) -> f64 {
        self.e
            .iter()
            .map(|b| b.weight * kernel_eval(x, &b.q, &self.spec))
            .sum()
    }

    fn kernels(&self, x: &Vec3, buf: &mut NodeKernels) -> f64 {
        let d2 = self.spec.delta * self.spec.delta;
        let norm = self.spec.normalization();
        let mut s = 0.0;
        for (a, b) in self.e.iter().enumerate() {
            let r = self.spec.planar(x - b.q);
            let k = norm * (-0.5 * r.norm_squared() / d2).exp();
            buf.k[a] = k;
            buf.g[a] = -r * (k / d2);
            buf.r[a] = r;
            s += b.weight * k;
        }
        s
    }

    fn buffers(&self) -> NodeKernels {
        let n = self.e.len();
        NodeKernels {
            k: vec![0.0; n],
            g: vec![Vec3::zeros(); n],
            r: vec![Vec3::zeros(); n],
        }
    }

    /// Runs `node` over every quadrature node with per-slab accumulators of
    /// type `A`, then reduces the slabs in index order. Slab boundaries do not
    /// depend on the thread count, so results are bit-identical for any pool.
    fn accumulate<A, F, M>(&self, init: impl Fn() -> A + Sync, node: F, merge: M) -> A
    where
        A: Send,
        F: Fn(&mut A, &Vec3, &NodeKernels, f64) + Sync,
        M: Fn(&mut A, A),
    {
        let partial: Vec<A> = (0..self.grid.counts[0])
            .into_par_iter()
            .map(|i| {
                let mut acc = init();
                let mut buf = self.buffers();
                for x in self.grid.slab(i) {
                    let s = self.kernels(&x, &mut buf);
                    node(&mut acc, &x, &buf, s);
                }
                acc
            })
            .collect();
        let mut total = init();
        for part in partial {
            merge(&mut total, part);
        }
        total
    }
}

fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

#[derive(Clone)]
struct MatrixAcc {
    c: Vec<f64>,
    g: Vec<Vec3>,
}

impl MatrixAcc {
    fn new(n: usize) -> Self {
        Self {
            c: vec![0.0; n * (n + 1) / 2],
            g: vec![Vec3::zeros(); n * (n + 1) / 2],
        }
    }

    fn add(&mut self, other: &MatrixAcc) {
        for (x, y) in self.c.iter_mut().zip(&other.c) {
            *x += y;
        }
        for (x, y) in self.g.iter_mut().zip(&other.g) {
            *x += y;
        }
    }

    /// Accumulates the upper-triangle integrands at one node.
    fn node(&mut self, n: usize, fx: &Vec3, buf: &NodeKernels, inv_s: f64) {
        let mut idx = 0;
        for b in 0..n {
            for c in b..n {
                self.c[idx] += buf.g[b].dot(&buf.g[c]) * inv_s;
                if c != b {
                    let num = buf.g[c] * buf.k[b] - buf.g[b] * buf.k[c];
                    self.g[idx] += fx.cross(&num) * inv_s;
                }
                idx += 1;
            }
        }
    }

    /// Expands the upper triangle into full matrices with exact
    /// (anti)symmetry.
    fn finish(self, n: usize, vol: f64) -> (Vec<f64>, Vec<Vec3>) {
        let mut c = vec![0.0; n * n];
        let mut g = vec![Vec3::zeros(); n * n];
        let mut idx = 0;
        for a in 0..n {
            for b in a..n {
                let cv = self.c[idx] * vol;
                c[a * n + b] = cv;
                c[b * n + a] = cv;
                if a != b {
                    let gv = self.g[idx] * vol;
                    g[a * n + b] = gv;
                    g[b * n + a] = -gv;
                }
                idx += 1;
            }
        }
        (c, g)
    }
}

fn floored(s: f64, floor: f64) -> (f64, bool) {
    if s < floor {
        (floor, true)
    } else {
        (s, false)
    }
}

/// The matrices `C_ab` and `G_ab` on the default node lattice.
pub fn compute_pair_integrals(
    e: &BohmionEnsemble,
    p: &PhysicalParams,
    quad: &QuadratureSpec,
) -> Result<PairIntegrals> {
    let setup = Setup::new(e, p, quad)?;
    let n = e.len();
    let acc = setup.accumulate(
        || MatrixAcc::new(n),
        |acc, x, buf, s| {
            let (s, _) = floored(s, setup.floor);
            acc.node(n, &p.soc_field(x), buf, 1.0 / s);
        },
        |total, part| total.add(&part),
    );
    let (c, g) = acc.finish(n, setup.grid.cell_volume());
    Ok(PairIntegrals {
        n,
        c,
        g,
        dc: None,
        dg: None,
    })
}

/// Pair integrals together with the full gradient tensors `∂C_bc/∂q_a` and
/// `∂G_bc/∂q_a`.
///
/// Two contributions enter every gradient: the numerator kernels when
/// `a ∈ {b, c}`, and the shared denominator `Σ_c w_c K_c`, which depends on
/// every position. Cost is `O(N³)` per node; the time integrators use the
/// contracted forces from [`compute_pair_interaction`] instead.
pub fn compute_pair_integral_gradients(
    e: &BohmionEnsemble,
    p: &PhysicalParams,
    quad: &QuadratureSpec,
) -> Result<PairIntegrals> {
    let setup = Setup::new(e, p, quad)?;
    let n = e.len();
    let weights: Vec<f64> = e.weights().collect();
    let n3 = n * n * n;

    struct GradAcc {
        m: MatrixAcc,
        dc: Vec<Vec3>,
        dg: Vec<Mat3>,
    }

    let acc = setup.accumulate(
        || GradAcc {
            m: MatrixAcc::new(n),
            dc: vec![Vec3::zeros(); n3],
            dg: vec![Mat3::zeros(); n3],
        },
        |acc, x, buf, s| {
            let (s, is_floored) = floored(s, setup.floor);
            let inv_s = 1.0 / s;
            let fx = p.soc_field(x);
            let fskew = skew(&fx);
            acc.m.node(n, &fx, buf, inv_s);
            let hess: Vec<Mat3> = (0..n)
                .map(|a| hessian_from(buf.r[a], buf.k[a], &setup.spec))
                .collect();
            // denominator factor ∂(1/S)/∂q_a = w_a ∇K_a / S²
            let dinv: Vec<Vec3> = (0..n)
                .map(|a| {
                    if is_floored {
                        Vec3::zeros()
                    } else {
                        buf.g[a] * (weights[a] * inv_s * inv_s)
                    }
                })
                .collect();
            for b in 0..n {
                for c in 0..n {
                    let gg = buf.g[b].dot(&buf.g[c]);
                    let num = buf.g[c] * buf.k[b] - buf.g[b] * buf.k[c];
                    let gnum = fx.cross(&num);
                    for (a, da) in dinv.iter().enumerate() {
                        let idx = (a * n + b) * n + c;
                        let mut dcv = da * gg;
                        let mut x_mat = Mat3::zeros();
                        if a == b {
                            dcv -= hess[b] * buf.g[c] * inv_s;
                            x_mat += -buf.g[c] * buf.g[b].transpose() + hess[b] * buf.k[c];
                        }
                        if a == c {
                            dcv -= hess[c] * buf.g[b] * inv_s;
                            x_mat += buf.g[b] * buf.g[c].transpose() - hess[c] * buf.k[b];
                        }
                        acc.dc[idx] += dcv;
                        acc.dg[idx] += fskew * x_mat * inv_s + gnum * da.transpose();
                    }
                }
            }
        },
        |total, part| {
            total.m.add(&part.m);
            for (x, y) in total.dc.iter_mut().zip(part.dc) {
                *x += y;
            }
            for (x, y) in total.dg.iter_mut().zip(part.dg) {
                *x += y;
            }
        },
    );
    let vol = setup.grid.cell_volume();
    let (c, g) = acc.m.finish(n, vol);
    let mut dc: Vec<Vec3> = acc.dc.into_iter().map(|v| v * vol).collect();
    let mut dg: Vec<Mat3> = acc.dg.into_iter().map(|m| m * vol).collect();
    // G_bb ≡ 0 and C, G (anti)symmetry carry over to the gradients
    for a in 0..n {
        for b in 0..n {
            dg[(a * n + b) * n + b] = Mat3::zeros();
            for c in (b + 1)..n {
                let upper = (a * n + b) * n + c;
                let lower = (a * n + c) * n + b;
                dc[lower] = dc[upper];
                dg[lower] = -dg[upper];
            }
        }
    }
    Ok(PairIntegrals {
        n,
        c,
        g,
        dc: Some(dc),
        dg: Some(dg),
    })
}

/// Pair integrals plus the contracted pair forces
/// `F_a = −(1/w_a) ∂/∂q_a ½ Σ_bc w_b w_c [(μ_b×μ_c)·G_bc + μ_b·μ_c C_bc/m]`
/// at `O(N²)` cost per node.
pub fn compute_pair_interaction(
    e: &BohmionEnsemble,
    p: &PhysicalParams,
    quad: &QuadratureSpec,
) -> Result<PairInteraction> {
    let setup = Setup::new(e, p, quad)?;
    let n = e.len();
    let mass = p.mass;
    let parts = e.particles();

    struct ForceAcc {
        m: MatrixAcc,
        f: Vec<Vec3>,
    }

    let acc = setup.accumulate(
        || ForceAcc {
            m: MatrixAcc::new(n),
            f: vec![Vec3::zeros(); n],
        },
        |acc, x, buf, s| {
            let (s, is_floored) = floored(s, setup.floor);
            let inv_s = 1.0 / s;
            let fx = p.soc_field(x);
            acc.m.node(n, &fx, buf, inv_s);

            // s̄ = Σ w μ K,  W = Σ w μ × (𝓕 × ∇K),  T = Σ w μ ∇Kᵀ
            let mut sbar = Vec3::zeros();
            let mut w_vec = Vec3::zeros();
            let mut t = Mat3::zeros();
            for (b, pb) in parts.iter().enumerate() {
                sbar += pb.mu * (pb.weight * buf.k[b]);
                w_vec += pb.mu.cross(&fx.cross(&buf.g[b])) * pb.weight;
                t += pb.mu * buf.g[b].transpose() * pb.weight;
            }
            let numerator = 2.0 * sbar.dot(&w_vec) + t.norm_squared() / mass;
            let tt = t.transpose();
            for (a, pa) in parts.iter().enumerate() {
                let hess = hessian_from(buf.r[a], buf.k[a], &setup.spec);
                let r_a = sbar.cross(&pa.mu).cross(&fx) + tt * pa.mu / mass;
                let mut fa = (buf.g[a] * pa.mu.dot(&w_vec) + hess * r_a) * inv_s;
                if !is_floored {
                    fa -= buf.g[a] * (0.5 * numerator * inv_s * inv_s);
                }
                acc.f[a] += fa;
            }
        },
        |total, part| {
            total.m.add(&part.m);
            for (x, y) in total.f.iter_mut().zip(part.f) {
                *x += y;
            }
        },
    );
    let vol = setup.grid.cell_volume();
    let (c, g) = acc.m.finish(n, vol);
    Ok(PairInteraction {
        integrals: PairIntegrals {
            n,
            c,
            g,
            dc: None,
            dg: None,
        },
        forces: acc.f.into_iter().map(|f| f * vol).collect(),
    })
}
