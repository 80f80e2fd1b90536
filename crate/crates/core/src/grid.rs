//! Periodic planar grids, two-component spinor fields and spectral transforms.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Periodic rectangle `[-Lx/2, Lx/2) × [-Ly/2, Ly/2)` with `nx × ny` nodes.
///
/// Node `(i, j)` sits at `(-Lx/2 + i dx, -Ly/2 + j dy)` and is stored at flat
/// index `i * ny + j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2 {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Grid2 {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        let g = Self { nx, ny, lx, ly };
        g.validate()?;
        Ok(g)
    }

    pub fn square(n: usize, l: f64) -> Result<Self> {
        Self::new(n, n, l, l)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, n) in [("nx", self.nx), ("ny", self.ny)] {
            if n < 2 || !n.is_power_of_two() {
                return Err(Error::InvalidGrid(format!(
                    "{name} = {n} must be a power of two ≥ 2"
                )));
            }
        }
        for (name, l) in [("lx", self.lx), ("ly", self.ly)] {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidGrid(format!("{name} = {l} must be positive")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    pub fn x(&self, i: usize) -> f64 {
        -0.5 * self.lx + i as f64 * self.dx()
    }

    pub fn y(&self, j: usize) -> f64 {
        -0.5 * self.ly + j as f64 * self.dy()
    }

    pub fn position(&self, idx: usize) -> (f64, f64) {
        (self.x(idx / self.ny), self.y(idx % self.ny))
    }

    fn wavenumber(n: usize, l: f64, i: usize) -> f64 {
        let m = if i < n / 2 { i as f64 } else { i as f64 - n as f64 };
        2.0 * std::f64::consts::PI * m / l
    }

    pub fn kx(&self, i: usize) -> f64 {
        Self::wavenumber(self.nx, self.lx, i)
    }

    pub fn ky(&self, j: usize) -> f64 {
        Self::wavenumber(self.ny, self.ly, j)
    }

    /// Wavevector of the mode at flat index `idx`.
    pub fn k(&self, idx: usize) -> (f64, f64) {
        (self.kx(idx / self.ny), self.ky(idx % self.ny))
    }

    /// Derivative multiplier `i k` along `axis`, with the Nyquist mode zeroed.
    fn derivative_factor(&self, axis: usize, idx: usize) -> f64 {
        let (i, j) = (idx / self.ny, idx % self.ny);
        match axis {
            0 if i == self.nx / 2 => 0.0,
            0 => self.kx(i),
            _ if j == self.ny / 2 => 0.0,
            _ => self.ky(j),
        }
    }

    /// Integral `Σ f · dA` of a nodal field.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() * self.cell_area()
    }
}

/// Cached FFT plans for one grid.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid2,
    fx: Arc<dyn Fft<f64>>,
    fy: Arc<dyn Fft<f64>>,
    ix: Arc<dyn Fft<f64>>,
    iy: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: Grid2) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            fx: planner.plan_fft_forward(grid.nx),
            fy: planner.plan_fft_forward(grid.ny),
            ix: planner.plan_fft_inverse(grid.nx),
            iy: planner.plan_fft_inverse(grid.ny),
        }
    }

    pub fn grid(&self) -> &Grid2 {
        &self.grid
    }

    fn transform(&self, data: &mut [Complex64], along_y: &Arc<dyn Fft<f64>>, along_x: &Arc<dyn Fft<f64>>) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        data.par_chunks_mut(ny).for_each(|row| along_y.process(row));
        let mut cols: Vec<Complex64> = vec![Complex64::default(); nx * ny];
        // transpose into columns, transform, transpose back
        for i in 0..nx {
            for j in 0..ny {
                cols[j * nx + i] = data[i * ny + j];
            }
        }
        cols.par_chunks_mut(nx).for_each(|col| along_x.process(col));
        for i in 0..nx {
            for j in 0..ny {
                data[i * ny + j] = cols[j * nx + i];
            }
        }
    }

    /// Unnormalized forward transform.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.fy, &self.fx);
    }

    /// Inverse transform including the `1/(nx ny)` normalization.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.iy, &self.ix);
        let s = 1.0 / self.grid.len() as f64;
        data.iter_mut().for_each(|z| *z *= s);
    }

    /// Spectral derivative of a complex field along `axis` (0 = x, 1 = y).
    pub fn derivative(&self, f: &[Complex64], axis: usize) -> Vec<Complex64> {
        let mut h = f.to_vec();
        self.forward(&mut h);
        for (idx, z) in h.iter_mut().enumerate() {
            *z *= Complex64::new(0.0, self.grid.derivative_factor(axis, idx));
        }
        self.inverse(&mut h);
        h
    }

    /// Spectral derivative of a real field.
    pub fn derivative_real(&self, f: &[f64], axis: usize) -> Vec<f64> {
        let c: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.derivative(&c, axis).into_iter().map(|z| z.re).collect()
    }

    /// Spectral gradient `(∂x f, ∂y f)` of a real field.
    pub fn gradient_real(&self, f: &[f64]) -> [Vec<f64>; 2] {
        [self.derivative_real(f, 0), self.derivative_real(f, 1)]
    }
}

/// Second-order central difference of a periodic nodal field.
pub fn central_derivative(grid: &Grid2, f: &[f64], axis: usize) -> Vec<f64> {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut out = vec![0.0; f.len()];
    for i in 0..nx {
        for j in 0..ny {
            let (p, m, h) = if axis == 0 {
                (((i + 1) % nx) * ny + j, ((i + nx - 1) % nx) * ny + j, grid.dx())
            } else {
                (i * ny + (j + 1) % ny, i * ny + (j + ny - 1) % ny, grid.dy())
            };
            out[i * ny + j] = (f[p] - f[m]) / (2.0 * h);
        }
    }
    out
}

/// Two-component complex field `Ψ = (ψ↑, ψ↓)` on a periodic grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinorField {
    pub grid: Grid2,
    pub up: Vec<Complex64>,
    pub down: Vec<Complex64>,
}

impl SpinorField {
    pub fn zeros(grid: Grid2) -> Self {
        Self {
            grid,
            up: vec![Complex64::default(); grid.len()],
            down: vec![Complex64::default(); grid.len()],
        }
    }

    /// Samples `f(x, y) -> (ψ↑, ψ↓)` at every node.
    pub fn from_fn(grid: Grid2, f: impl Fn(f64, f64) -> [Complex64; 2]) -> Self {
        let mut out = Self::zeros(grid);
        for idx in 0..grid.len() {
            let (x, y) = grid.position(idx);
            let [a, b] = f(x, y);
            out.up[idx] = a;
            out.down[idx] = b;
        }
        out
    }

    pub fn density(&self) -> Vec<f64> {
        self.up
            .iter()
            .zip(&self.down)
            .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
            .collect()
    }

    /// `∫ ‖Ψ‖² dx`.
    pub fn norm_sq(&self) -> f64 {
        self.grid.integrate(&self.density())
    }

    pub fn normalize(&mut self) {
        let s = 1.0 / self.norm_sq().sqrt();
        self.scale(Complex64::new(s, 0.0));
    }

    pub fn normalized(mut self) -> Self {
        self.normalize();
        self
    }

    pub fn scale(&mut self, z: Complex64) {
        self.up.iter_mut().chain(self.down.iter_mut()).for_each(|v| *v *= z);
    }

    /// Cyclic shift by whole grid cells.
    pub fn shifted(&self, di: usize, dj: usize) -> Self {
        let g = self.grid;
        let mut out = Self::zeros(g);
        for i in 0..g.nx {
            for j in 0..g.ny {
                let src = g.index(i, j);
                let dst = g.index((i + di) % g.nx, (j + dj) % g.ny);
                out.up[dst] = self.up[src];
                out.down[dst] = self.down[src];
            }
        }
        out
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        if c == 0 {
            &self.up
        } else {
            &self.down
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_power_of_two() {
        assert!(Grid2::new(48, 64, 1.0, 1.0).is_err());
        assert!(Grid2::new(64, 64, 0.0, 1.0).is_err());
        assert!(Grid2::new(64, 32, 2.0, 1.0).is_ok());
    }

    #[test]
    fn transform_round_trip_and_derivative() {
        let g = Grid2::new(32, 16, 6.0, 4.0).unwrap();
        let sp = Spectral::new(g);
        let kx = 2.0 * std::f64::consts::PI * 3.0 / g.lx;
        let ky = 2.0 * std::f64::consts::PI * 2.0 / g.ly;
        let f: Vec<Complex64> = (0..g.len())
            .map(|idx| {
                let (x, y) = g.position(idx);
                Complex64::from_polar(1.0, kx * x + ky * y)
            })
            .collect();
        let mut h = f.clone();
        sp.forward(&mut h);
        sp.inverse(&mut h);
        for (a, b) in f.iter().zip(&h) {
            assert!((a - b).norm() < 1e-14);
        }
        let dx = sp.derivative(&f, 0);
        let dy = sp.derivative(&f, 1);
        for idx in 0..g.len() {
            assert!((dx[idx] - f[idx] * Complex64::new(0.0, kx)).norm() < 1e-12);
            assert!((dy[idx] - f[idx] * Complex64::new(0.0, ky)).norm() < 1e-12);
        }
    }

    #[test]
    fn central_difference_is_second_order() {
        let err = |n: usize| {
            let g = Grid2::square(n, 2.0 * std::f64::consts::PI).unwrap();
            let f: Vec<f64> = (0..g.len()).map(|idx| g.position(idx).0.sin()).collect();
            let d = central_derivative(&g, &f, 0);
            (0..g.len())
                .map(|idx| (d[idx] - g.position(idx).0.cos()).abs())
                .fold(0.0, f64::max)
        };
        let r = err(32) / err(64);
        assert!(r > 3.9 && r < 4.1, "{r}");
    }

    #[test]
    fn normalization_and_shift() {
        let g = Grid2::square(16, 8.0).unwrap();
        let f = SpinorField::from_fn(g, |x, y| {
            let e = (-(x * x + y * y) / 2.0).exp();
            [Complex64::new(e, 0.0), Complex64::new(0.0, 0.5 * e)]
        })
        .normalized();
        assert!((f.norm_sq() - 1.0).abs() < 1e-14);
        let s = f.shifted(3, 5);
        assert!((s.norm_sq() - 1.0).abs() < 1e-14);
        assert_eq!(s.up[g.index(3, 5)], f.up[0]);
    }
}
