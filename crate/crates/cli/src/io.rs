//! CSV snapshots and time series with lossless number formatting.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use num_complex::Complex64;
use spinfluid::grid::{Grid2, SpinorField};
use spinfluid::{Bohmion, BohmionEnsemble, Vec3};

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(",")
}

fn parse_row(line: &str, expected: usize, path: &Path, lineno: usize) -> Result<Vec<f64>> {
    let vals = line
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .with_context(|| format!("{}:{}: bad number", path.display(), lineno + 1))?;
    if vals.len() != expected {
        bail!(
            "{}:{}: expected {expected} columns, got {}",
            path.display(),
            lineno + 1,
            vals.len()
        );
    }
    Ok(vals)
}

fn ensemble_header(dim: usize) -> &'static str {
    if dim == 2 {
        "a,w,qx,qy,px,py,mux,muy,muz"
    } else {
        "a,w,qx,qy,qz,px,py,pz,mux,muy,muz"
    }
}

pub fn write_ensemble(path: &Path, e: &BohmionEnsemble) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(w, "{}", ensemble_header(e.dim()))?;
    for (a, b) in e.iter().enumerate() {
        let mut row = vec![b.weight];
        row.extend(b.q.iter().take(e.dim()));
        row.extend(b.p.iter().take(e.dim()));
        row.extend(b.mu.iter());
        writeln!(w, "{a},{}", join(&row))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ensemble(path: &Path) -> Result<BohmionEnsemble> {
    let r = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    let mut lines = r.lines();
    let header = lines.next().context("empty ensemble file")??;
    let dim = match header.trim() {
        h if h == ensemble_header(2) => 2,
        h if h == ensemble_header(3) => 3,
        h => bail!("{}: unexpected header `{h}`", path.display()),
    };
    let ncol = 5 + 2 * dim;
    let mut parts = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v = parse_row(&line, ncol, path, i + 1)?;
        let vec = |s: &[f64]| {
            if dim == 2 {
                Vec3::new(s[0], s[1], 0.0)
            } else {
                Vec3::new(s[0], s[1], s[2])
            }
        };
        let q = vec(&v[2..2 + dim]);
        let p = vec(&v[2 + dim..2 + 2 * dim]);
        let mu = Vec3::new(v[ncol - 3], v[ncol - 2], v[ncol - 1]);
        parts.push(Bohmion::new(v[1], q, p, mu));
    }
    Ok(BohmionEnsemble::new(dim, parts)?)
}

pub fn write_field(path: &Path, f: &SpinorField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    let g = f.grid;
    writeln!(w, "nx,ny,Lx,Ly")?;
    writeln!(w, "{},{},{},{}", g.nx, g.ny, fmt_f64(g.lx), fmt_f64(g.ly))?;
    writeln!(w, "up_re,up_im,down_re,down_im")?;
    for (u, d) in f.up.iter().zip(&f.down) {
        writeln!(w, "{}", join(&[u.re, u.im, d.re, d.im]))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<SpinorField> {
    let r = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    let lines: Vec<String> = r.lines().collect::<std::io::Result<_>>()?;
    if lines.len() < 3 || lines[0].trim() != "nx,ny,Lx,Ly" {
        bail!("{}: missing grid header", path.display());
    }
    let h: Vec<&str> = lines[1].split(',').map(str::trim).collect();
    if h.len() != 4 {
        bail!("{}: grid header needs 4 values", path.display());
    }
    let grid = Grid2::new(h[0].parse()?, h[1].parse()?, h[2].parse()?, h[3].parse()?)?;
    let body: Vec<&String> = lines[3..].iter().filter(|l| !l.trim().is_empty()).collect();
    if body.len() != grid.len() {
        bail!("{}: expected {} nodes, got {}", path.display(), grid.len(), body.len());
    }
    let mut f = SpinorField::zeros(grid);
    for (idx, line) in body.iter().enumerate() {
        let v = parse_row(line, 4, path, idx + 3)?;
        f.up[idx] = Complex64::new(v[0], v[1]);
        f.down[idx] = Complex64::new(v[2], v[3]);
    }
    Ok(f)
}

/// Append-only CSV time series.
pub struct SeriesWriter {
    w: BufWriter<File>,
    columns: usize,
}

impl SeriesWriter {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
        writeln!(w, "{}", header.join(","))?;
        Ok(Self {
            w,
            columns: header.len(),
        })
    }

    pub fn row(&mut self, values: &[f64]) -> Result<()> {
        debug_assert_eq!(values.len(), self.columns);
        writeln!(self.w, "{}", join(values))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting_round_trips() {
        for x in [0.0, -0.0, 1.0, 0.1, 1.0 / 3.0, 1e-300, -2.5e-7, 6.02e23, f64::MAX, f64::MIN_POSITIVE, 12345.678] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(0.25), "0.25");
        assert_eq!(fmt_f64(1e-9), "1e-9");
    }
}
