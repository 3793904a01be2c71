//! Uniform-grid scalar fields in 1D/2D with the finite-difference stencils
//! feeding operator evaluation: upwind (Godunov) gradient magnitudes, central
//! gradients, Hessians, and bilinear interpolation.
//!
//! Boundary policy: one-sided differences are first order. A missing one-sided
//! slope is taken as zero (replicated ghost value), which keeps explicit
//! upwind updates monotone at the boundary. Hessian components whose central
//! stencil does not fit are taken as zero (zero-curvature extrapolation).

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::SymMat;

/// Uniform rectangular grid in dimension 1 or 2.
///
/// Nodes along axis k sit at `lower[k] + i * spacing(k)`, i in `0..counts[k]`.
/// Flat indexing is row-major in axis order: `flat = i0 * counts[1] + i1`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    lower: Vec<f64>,
    upper: Vec<f64>,
    counts: Vec<usize>,
}

impl GridSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        let dim = counts.len();
        if dim == 0 || dim > 2 {
            return Err(Error::Grid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if lower.len() != dim || upper.len() != dim {
            return Err(Error::Grid("lower/upper/counts lengths disagree".into()));
        }
        for k in 0..dim {
            if !(upper[k] > lower[k]) {
                return Err(Error::Grid(format!(
                    "upper must exceed lower on axis {k}: {} <= {}",
                    upper[k], lower[k]
                )));
            }
            if counts[k] < 3 {
                return Err(Error::Grid(format!("need at least 3 points per axis, got {}", counts[k])));
            }
            if !lower[k].is_finite() || !upper[k].is_finite() {
                return Err(Error::Grid("grid bounds must be finite".into()));
            }
        }
        Ok(GridSpec { lower, upper, counts })
    }

    pub fn new_1d(lower: f64, upper: f64, n: usize) -> Result<Self> {
        GridSpec::new(vec![lower], vec![upper], vec![n])
    }

    pub fn new_2d(lower: [f64; 2], upper: [f64; 2], counts: [usize; 2]) -> Result<Self> {
        GridSpec::new(lower.to_vec(), upper.to_vec(), counts.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / (self.counts[axis] - 1) as f64
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.dim()).map(|k| self.spacing(k)).fold(f64::INFINITY, f64::min)
    }

    /// Volume of one node cell (h in 1D, h_x * h_y in 2D).
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|k| self.spacing(k)).product()
    }

    pub fn num_points(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.lower[axis] + i as f64 * self.spacing(axis)
    }

    /// Coordinates of the node with the given flat index.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        match self.dim() {
            1 => vec![self.coord(0, flat)],
            _ => {
                let (i, j) = (flat / self.counts[1], flat % self.counts[1]);
                vec![self.coord(0, i), self.coord(1, j)]
            }
        }
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        match self.dim() {
            1 => idx[0],
            _ => idx[0] * self.counts[1] + idx[1],
        }
    }

    pub fn multi(&self, flat: usize) -> Vec<usize> {
        match self.dim() {
            1 => vec![flat],
            _ => vec![flat / self.counts[1], flat % self.counts[1]],
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        (0..self.dim()).all(|k| x[k] >= self.lower[k] - 1e-12 && x[k] <= self.upper[k] + 1e-12)
    }

    pub fn is_boundary(&self, idx: &[usize]) -> bool {
        (0..self.dim()).any(|k| idx[k] == 0 || idx[k] + 1 == self.counts[k])
    }
}

/// Upwind and central stencil values at one node.
#[derive(Clone, Copy, Debug)]
pub struct GradHess {
    /// Godunov magnitude for nonnegative first-order coefficient.
    pub upwind_speed_pos: f64,
    /// Godunov magnitude for negative first-order coefficient.
    pub upwind_speed_neg: f64,
    pub central_grad: [f64; 2],
    pub hessian: SymMat,
    pub dim: usize,
}

impl GradHess {
    pub fn central_norm(&self) -> f64 {
        let g = &self.central_grad;
        (g[0] * g[0] + g[1] * g[1]).sqrt()
    }

    pub fn central(&self) -> &[f64] {
        &self.central_grad[..self.dim]
    }
}

/// Sampled scalar function on a uniform grid.
#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
    /// Positivity floor carried as metadata by fields entering evolution.
    pub c0: Option<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_points() {
            return Err(Error::Field(format!(
                "value count {} does not match grid size {}",
                values.len(),
                grid.num_points()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Field(format!("non-finite value {bad}")));
        }
        Ok(ScalarField { grid, values, c0: None })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.num_points()).map(|k| f(&grid.point(k))).collect();
        ScalarField::new(grid, values)
    }

    pub fn constant(grid: GridSpec, c: f64) -> Result<Self> {
        let n = grid.num_points();
        ScalarField::new(grid, vec![c; n])
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn value(&self, idx: &[usize]) -> f64 {
        self.values[self.grid.flat(idx)]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    fn axis_value(&self, idx: &[usize], axis: usize, i: usize) -> f64 {
        let mut v = [0usize; 2];
        v[..self.grid.dim()].copy_from_slice(idx);
        v[axis] = i;
        self.values[self.grid.flat(&v[..self.grid.dim()])]
    }

    /// One-sided differences (D-, D+) along an axis. Missing sides at the
    /// boundary come back as zero (replicated ghost).
    pub fn one_sided(&self, idx: &[usize], axis: usize) -> (f64, f64) {
        let h = self.grid.spacing(axis);
        let i = idx[axis];
        let n = self.grid.counts()[axis];
        let u0 = self.value(idx);
        let dm = if i > 0 { (u0 - self.axis_value(idx, axis, i - 1)) / h } else { 0.0 };
        let dp = if i + 1 < n { (self.axis_value(idx, axis, i + 1) - u0) / h } else { 0.0 };
        (dm, dp)
    }

    /// Central difference gradient; first-order one-sided at the boundary.
    pub fn central_gradient(&self, idx: &[usize]) -> Vec<f64> {
        let dim = self.grid.dim();
        assert!(idx.len() == dim, "index rank mismatch");
        let mut g = Vec::with_capacity(dim);
        for axis in 0..dim {
            let i = idx[axis];
            let n = self.grid.counts()[axis];
            assert!(i < n, "index out of range");
            let (dm, dp) = self.one_sided(idx, axis);
            let d = if i == 0 {
                dp
            } else if i + 1 == n {
                dm
            } else {
                0.5 * (dm + dp)
            };
            g.push(d);
        }
        g
    }

    /// Central-difference Hessian; exact on quadratics at interior nodes.
    /// Components whose stencil leaves the grid are zero.
    pub fn hessian(&self, idx: &[usize]) -> SymMat {
        let dim = self.grid.dim();
        let interior = |axis: usize| idx[axis] > 0 && idx[axis] + 1 < self.grid.counts()[axis];
        let second = |axis: usize| -> f64 {
            if !interior(axis) {
                return 0.0;
            }
            let h = self.grid.spacing(axis);
            let i = idx[axis];
            (self.axis_value(idx, axis, i + 1) - 2.0 * self.value(idx)
                + self.axis_value(idx, axis, i - 1))
                / (h * h)
        };
        if dim == 1 {
            SymMat::new_1d(second(0))
        } else {
            let xy = if interior(0) && interior(1) {
                let hx = self.grid.spacing(0);
                let hy = self.grid.spacing(1);
                let (i, j) = (idx[0], idx[1]);
                let at = |a: usize, b: usize| self.values[self.grid.flat(&[a, b])];
                (at(i + 1, j + 1) - at(i + 1, j - 1) - at(i - 1, j + 1) + at(i - 1, j - 1))
                    / (4.0 * hx * hy)
            } else {
                0.0
            };
            SymMat::new_2d(second(0), xy, second(1))
        }
    }

    /// Godunov gradient magnitude.
    ///
    /// `speed_sign = +1` (level sets expand for nonnegative total first-order
    /// coefficient): sqrt over axes of max(D-, 0)^2 + min(D+, 0)^2.
    /// `speed_sign = -1` mirrors the roles of D- and D+.
    pub fn upwind_gradient(&self, idx: &[usize], speed_sign: i32) -> f64 {
        let dim = self.grid.dim();
        let mut s = 0.0;
        for axis in 0..dim {
            let (dm, dp) = self.one_sided(idx, axis);
            let (a, b) = if speed_sign >= 0 {
                (dm.max(0.0), dp.min(0.0))
            } else {
                (dp.max(0.0), dm.min(0.0))
            };
            s += a * a + b * b;
        }
        s.sqrt()
    }

    /// All stencil values at one node in a single pass.
    pub fn grad_hess(&self, idx: &[usize]) -> GradHess {
        let dim = self.grid.dim();
        let mut pos = 0.0;
        let mut neg = 0.0;
        let mut central = [0.0f64; 2];
        for axis in 0..dim {
            let (dm, dp) = self.one_sided(idx, axis);
            let (a, b) = (dm.max(0.0), dp.min(0.0));
            pos += a * a + b * b;
            let (a, b) = (dp.max(0.0), dm.min(0.0));
            neg += a * a + b * b;
            let i = idx[axis];
            let n = self.grid.counts()[axis];
            central[axis] = if i == 0 {
                dp
            } else if i + 1 == n {
                dm
            } else {
                0.5 * (dm + dp)
            };
        }
        GradHess {
            upwind_speed_pos: pos.sqrt(),
            upwind_speed_neg: neg.sqrt(),
            central_grad: central,
            hessian: self.hessian(idx),
            dim,
        }
    }

    /// Multilinear interpolation at an arbitrary point of the grid box.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let dim = self.grid.dim();
        debug_assert!(self.grid.contains(x), "interpolation point outside grid box");
        let mut cell = [0usize; 2];
        let mut frac = [0.0f64; 2];
        for k in 0..dim {
            let h = self.grid.spacing(k);
            let t = (x[k] - self.grid.lower()[k]) / h;
            let n = self.grid.counts()[k];
            let i = (t.floor() as isize).clamp(0, n as isize - 2) as usize;
            cell[k] = i;
            frac[k] = (t - i as f64).clamp(0.0, 1.0);
        }
        if dim == 1 {
            let v0 = self.values[cell[0]];
            let v1 = self.values[cell[0] + 1];
            v0 + frac[0] * (v1 - v0)
        } else {
            let (i, j) = (cell[0], cell[1]);
            let at = |a: usize, b: usize| self.values[self.grid.flat(&[a, b])];
            let (fx, fy) = (frac[0], frac[1]);
            at(i, j) * (1.0 - fx) * (1.0 - fy)
                + at(i + 1, j) * fx * (1.0 - fy)
                + at(i, j + 1) * (1.0 - fx) * fy
                + at(i + 1, j + 1) * fx * fy
        }
    }

    /// Values at `n` equally spaced points on the segment [a, b].
    pub fn line_samples(&self, a: &[f64], b: &[f64], n: usize) -> Result<Vec<f64>> {
        if n < 3 {
            return Err(Error::Field(format!("need at least 3 samples, got {n}")));
        }
        if !self.grid.contains(a) || !self.grid.contains(b) {
            return Err(Error::Field("segment endpoint outside grid box".into()));
        }
        let dim = self.grid.dim();
        let mut out = Vec::with_capacity(n);
        let mut x = vec![0.0; dim];
        for s in 0..n {
            let t = s as f64 / (n - 1) as f64;
            for k in 0..dim {
                x[k] = a[k] + t * (b[k] - a[k]);
            }
            out.push(self.interpolate(&x));
        }
        Ok(out)
    }

    /// Plain-text snapshot: dim / counts / lower / upper, then one value per
    /// line in row-major order, shortest round-trip decimal.
    pub fn write_snapshot(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = BufWriter::new(file);
        let g = &self.grid;
        writeln!(w, "{}", g.dim())?;
        writeln!(w, "{}", g.counts().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" "))?;
        writeln!(w, "{}", g.lower().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" "))?;
        writeln!(w, "{}", g.upper().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" "))?;
        for v in &self.values {
            writeln!(w, "{v}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_snapshot(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut lines = std::io::BufReader::new(file).lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::Field("snapshot truncated".into()))?
                .map_err(Error::Io)
        };
        let dim: usize = next()?
            .trim()
            .parse()
            .map_err(|e| Error::Field(format!("bad dim line: {e}")))?;
        let parse_row = |s: String| -> Result<Vec<f64>> {
            s.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| Error::Field(format!("bad number {t}: {e}"))))
                .collect()
        };
        let counts: Vec<usize> = next()?
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|e| Error::Field(format!("bad count {t}: {e}"))))
            .collect::<Result<_>>()?;
        let lower = parse_row(next()?)?;
        let upper = parse_row(next()?)?;
        if counts.len() != dim || lower.len() != dim || upper.len() != dim {
            return Err(Error::Field("snapshot header lengths disagree".into()));
        }
        let grid = GridSpec::new(lower, upper, counts)?;
        let mut values = Vec::with_capacity(grid.num_points());
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            values.push(t.parse::<f64>().map_err(|e| Error::Field(format!("bad value {t}: {e}")))?);
        }
        ScalarField::new(grid, values)
    }
}
