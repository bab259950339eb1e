//! Periodic grids, grid functions, boxes, norms, averages and the unitary DFT.
//!
//! Points of a `dim`-dimensional torus of side `L` sampled with `M` points per
//! axis are stored row-major: the flat index of `(i0, i1)` is `i0 * M + i1`.
//! Frequencies live on the lattice `(2*pi/L) * {-M/2, ..., M/2 - 1}` in FFT order.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack used when deciding whether a grid point lies in a box.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// A periodic lattice `[0, L)^dim` with `M` points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusDomain {
    dim: usize,
    side_length: f64,
    points_per_dim: usize,
}

impl TorusDomain {
    /// Builds a domain; `dim` must be 1 or 2 and `points_per_dim` even.
    pub fn new(dim: usize, side_length: f64, points_per_dim: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidParameter(format!("dim must be 1 or 2, got {dim}")));
        }
        if !(side_length.is_finite() && side_length > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "side length must be positive, got {side_length}"
            )));
        }
        if points_per_dim < 2 || points_per_dim % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "points per dimension must be even and >= 2, got {points_per_dim}"
            )));
        }
        Ok(Self {
            dim,
            side_length,
            points_per_dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side_length(&self) -> f64 {
        self.side_length
    }

    pub fn points_per_dim(&self) -> usize {
        self.points_per_dim
    }

    /// Grid spacing `h = L / M`.
    pub fn spacing(&self) -> f64 {
        self.side_length / self.points_per_dim as f64
    }

    /// Quadrature weight `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Measure `L^dim` of the torus.
    pub fn measure(&self) -> f64 {
        self.side_length.powi(self.dim as i32)
    }

    /// Spacing `2*pi/L` of the frequency lattice.
    pub fn frequency_spacing(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.side_length
    }

    /// Total number of grid points `M^dim`.
    pub fn len(&self) -> usize {
        self.points_per_dim.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Splits a flat index into per-axis indices (unused axis is 0).
    pub fn multi_index(&self, flat: usize) -> [usize; 2] {
        if self.dim == 1 {
            [flat, 0]
        } else {
            [flat / self.points_per_dim, flat % self.points_per_dim]
        }
    }

    /// Flat index of a per-axis index, wrapping each axis periodically.
    pub fn flat_index(&self, idx: [i64; 2]) -> usize {
        let m = self.points_per_dim as i64;
        let i0 = idx[0].rem_euclid(m) as usize;
        if self.dim == 1 {
            i0
        } else {
            i0 * self.points_per_dim + idx[1].rem_euclid(m) as usize
        }
    }

    /// Coordinates `(i0 h, i1 h)` of a grid point.
    pub fn point(&self, flat: usize) -> [f64; 2] {
        let h = self.spacing();
        let [a, b] = self.multi_index(flat);
        [a as f64 * h, b as f64 * h]
    }

    /// Signed lattice index in `{-M/2, ..., M/2 - 1}` for an FFT-order position.
    pub fn signed_index(&self, i: usize) -> i64 {
        let m = self.points_per_dim;
        if i < m / 2 {
            i as i64
        } else {
            i as i64 - m as i64
        }
    }

    /// Frequency vector at an FFT-order flat index.
    pub fn frequency(&self, flat: usize) -> [f64; 2] {
        let dx = self.frequency_spacing();
        let [a, b] = self.multi_index(flat);
        let f1 = if self.dim == 2 {
            self.signed_index(b) as f64 * dx
        } else {
            0.0
        };
        [self.signed_index(a) as f64 * dx, f1]
    }

    /// FFT-order flat index of the lattice frequency nearest to `xi`, plus the snap distance.
    pub fn nearest_frequency_index(&self, xi: &[f64]) -> (usize, f64) {
        let dx = self.frequency_spacing();
        let m = self.points_per_dim as i64;
        let mut idx = [0i64; 2];
        let mut dist2 = 0.0;
        for d in 0..self.dim {
            let k = (xi[d] / dx).round();
            dist2 += (xi[d] - k * dx).powi(2);
            let kk = (k as i64).clamp(-m / 2, m / 2 - 1);
            idx[d] = kk;
        }
        (self.flat_index(idx), dist2.sqrt())
    }

    /// Torus distance between two coordinates along one axis.
    pub fn axis_distance(&self, a: f64, b: f64) -> f64 {
        let l = self.side_length;
        let d = (a - b).rem_euclid(l);
        d.min(l - d)
    }

    fn check_same(&self, other: &TorusDomain) -> Result<()> {
        if self != other {
            return Err(Error::DimensionMismatch(format!(
                "domains differ: {self:?} vs {other:?}"
            )));
        }
        Ok(())
    }
}

/// Complex samples of a function on a [`TorusDomain`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    domain: TorusDomain,
    values: Vec<Complex64>,
}

impl GridFunction {
    /// Wraps a value array; its length must be `M^dim`.
    pub fn new(domain: TorusDomain, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} values, got {}",
                domain.len(),
                values.len()
            )));
        }
        Ok(Self { domain, values })
    }

    pub fn from_real(domain: TorusDomain, values: &[f64]) -> Result<Self> {
        Self::new(domain, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn zeros(domain: TorusDomain) -> Self {
        Self::constant(domain, Complex64::new(0.0, 0.0))
    }

    pub fn constant(domain: TorusDomain, c: Complex64) -> Self {
        Self {
            domain,
            values: vec![c; domain.len()],
        }
    }

    /// Samples `f` at every grid point (coordinates passed as a `dim`-slice).
    pub fn from_fn(domain: TorusDomain, f: impl Fn(&[f64]) -> Complex64 + Sync) -> Self {
        let dim = domain.dim();
        let values = (0..domain.len())
            .into_par_iter()
            .map(|i| f(&domain.point(i)[..dim]))
            .collect();
        Self { domain, values }
    }

    /// The plane wave `e^{i xi . x}`.
    pub fn plane_wave(domain: TorusDomain, xi: &[f64]) -> Self {
        Self::from_fn(domain, |x| {
            let phase: f64 = x.iter().zip(xi).map(|(a, b)| a * b).sum();
            Complex64::from_polar(1.0, phase)
        })
    }

    pub fn domain(&self) -> &TorusDomain {
        &self.domain
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Real parts of the samples.
    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    /// Pointwise modulus as a real-valued grid function.
    pub fn abs(&self) -> GridFunction {
        self.map(|v| Complex64::new(v.norm(), 0.0))
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64 + Sync) -> GridFunction {
        GridFunction {
            domain: self.domain,
            values: self.values.par_iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, a: Complex64) -> GridFunction {
        self.map(|v| v * a)
    }

    fn zip_with(
        &self,
        other: &GridFunction,
        f: impl Fn(Complex64, Complex64) -> Complex64 + Sync,
    ) -> Result<GridFunction> {
        self.domain.check_same(&other.domain)?;
        Ok(GridFunction {
            domain: self.domain,
            values: self
                .values
                .par_iter()
                .zip(other.values.par_iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a * b)
    }

    /// `g(x) = f(x - shift * h)`.
    pub fn translate(&self, shift: [i64; 2]) -> GridFunction {
        let d = self.domain;
        let values = (0..d.len())
            .map(|i| {
                let [a, b] = d.multi_index(i);
                self.values[d.flat_index([a as i64 - shift[0], b as i64 - shift[1]])]
            })
            .collect();
        GridFunction { domain: d, values }
    }

    /// Maximum pointwise modulus.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Plain Euclidean norm of the sample vector (no quadrature weight).
    pub fn l2_sum(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Unitary forward DFT.
    pub fn dft(&self) -> GridFunction {
        let mut values = self.values.clone();
        fft_in_place(&self.domain, &mut values, false);
        GridFunction {
            domain: self.domain,
            values,
        }
    }

    /// Unitary inverse DFT.
    pub fn idft(&self) -> GridFunction {
        let mut values = self.values.clone();
        fft_in_place(&self.domain, &mut values, true);
        GridFunction {
            domain: self.domain,
            values,
        }
    }

    /// Writes `dim,L,M` followed by `index,re,im` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let d = self.domain;
        writeln!(w, "{},{:e},{}", d.dim, d.side_length, d.points_per_dim)?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{i},{:e},{:e}", v.re, v.im)?;
        }
        Ok(())
    }

    /// Reads the CSV layout of [`GridFunction::write_csv`]; missing rows are zero.
    pub fn read_csv<R: Read>(r: R) -> Result<GridFunction> {
        let mut lines = BufReader::new(r).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty grid CSV".into()))??;
        let parts: Vec<&str> = header.trim().split(',').collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!("bad header line '{header}'")));
        }
        let dim = parse_num::<usize>(parts[0])?;
        let side = parse_num::<f64>(parts[1])?;
        let m = parse_num::<usize>(parts[2])?;
        let domain = TorusDomain::new(dim, side, m)?;
        let mut values = vec![Complex64::new(0.0, 0.0); domain.len()];
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(Error::Parse(format!("bad row '{line}'")));
            }
            let i = parse_num::<usize>(cols[0])?;
            if i >= values.len() {
                return Err(Error::Parse(format!("index {i} out of range")));
            }
            values[i] = Complex64::new(parse_num(cols[1])?, parse_num(cols[2])?);
        }
        GridFunction::new(domain, values)
    }

    /// Little-endian binary: magic, dim (u32), L (f64), M (u64), then (re, im) pairs.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&(self.domain.dim as u32).to_le_bytes())?;
        w.write_all(&self.domain.side_length.to_le_bytes())?;
        w.write_all(&(self.domain.points_per_dim as u64).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<GridFunction> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::Parse("not a grid-function binary file".into()));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        let dim = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b8)?;
        let side = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let m = u64::from_le_bytes(b8) as usize;
        let domain = TorusDomain::new(dim, side, m)?;
        let mut values = Vec::with_capacity(domain.len());
        for _ in 0..domain.len() {
            r.read_exact(&mut b8)?;
            let re = f64::from_le_bytes(b8);
            r.read_exact(&mut b8)?;
            values.push(Complex64::new(re, f64::from_le_bytes(b8)));
        }
        GridFunction::new(domain, values)
    }
}

const BINARY_MAGIC: &[u8; 8] = b"MFCZGF01";

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.trim()
        .parse::<T>()
        .map_err(|_| Error::Parse(format!("cannot parse '{s}'")))
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    let planner = PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()));
    let mut guard = planner.lock().unwrap_or_else(|e| e.into_inner());
    if inverse {
        guard.plan_fft_inverse(n)
    } else {
        guard.plan_fft_forward(n)
    }
}

fn fft_in_place(domain: &TorusDomain, data: &mut [Complex64], inverse: bool) {
    let m = domain.points_per_dim();
    let fft = plan(m, inverse);
    if domain.dim() == 1 {
        fft.process(data);
    } else {
        data.par_chunks_mut(m).for_each(|row| fft.process(row));
        let mut t = transpose(data, m);
        t.par_chunks_mut(m).for_each(|row| fft.process(row));
        let back = transpose(&t, m);
        data.copy_from_slice(&back);
    }
    let scale = 1.0 / (domain.len() as f64).sqrt();
    data.par_iter_mut().for_each(|v| *v *= scale);
}

fn transpose(data: &[Complex64], m: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); m * m];
    out.par_chunks_mut(m).enumerate().for_each(|(j, row)| {
        for (i, v) in row.iter_mut().enumerate() {
            *v = data[i * m + j];
        }
    });
    out
}

fn check_p(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidParameter(format!("exponent p must be >= 1, got {p}")));
    }
    Ok(())
}

/// Quadrature `L^p` norm `(sum |f|^p h^n)^{1/p}`; `p = inf` gives the max.
pub fn lp_norm(f: &GridFunction, p: f64) -> Result<f64> {
    check_p(p)?;
    if p.is_infinite() {
        return Ok(f.sup_norm());
    }
    let s: f64 = f.values.iter().map(|v| v.norm().powf(p)).sum();
    Ok((s * f.domain.cell_volume()).powf(1.0 / p))
}

/// Weighted norm `(sum |f|^p w h^n)^{1/p}` with `w` the real part of `weight`.
pub fn lp_norm_weighted(f: &GridFunction, p: f64, weight: &GridFunction) -> Result<f64> {
    check_p(p)?;
    f.domain.check_same(&weight.domain)?;
    if let Some(v) = weight.values.iter().find(|v| v.re < 0.0 || !v.re.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "weight must be finite and nonnegative, found {v}"
        )));
    }
    if p.is_infinite() {
        return Ok(f
            .values
            .iter()
            .zip(&weight.values)
            .filter(|(_, w)| w.re > 0.0)
            .fold(0.0, |m, (v, _)| m.max(v.norm())));
    }
    let s: f64 = f
        .values
        .iter()
        .zip(&weight.values)
        .map(|(v, w)| v.norm().powf(p) * w.re)
        .sum();
    Ok((s * f.domain.cell_volume()).powf(1.0 / p))
}

/// An axis-aligned cube (ball of the sup metric).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Cube {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() || center.len() > 2 {
            return Err(Error::InvalidParameter("cube center must have 1 or 2 entries".into()));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Same center, radius multiplied by `lambda`.
    pub fn dilate(&self, lambda: f64) -> Cube {
        Cube {
            center: self.center.clone(),
            radius: self.radius * lambda,
        }
    }

    /// Lebesgue measure `(2r)^dim`.
    pub fn measure(&self) -> f64 {
        (2.0 * self.radius).powi(self.dim() as i32)
    }

    /// Grid points within sup-distance `radius` of the center (torus metric).
    pub fn resolve(&self, domain: &TorusDomain) -> Result<IndexBox> {
        if self.dim() != domain.dim() {
            return Err(Error::DimensionMismatch(format!(
                "cube has dim {}, domain has dim {}",
                self.dim(),
                domain.dim()
            )));
        }
        let h = domain.spacing();
        let m = domain.points_per_dim();
        let mut start = [0i64; 2];
        let mut len = [1usize; 2];
        for d in 0..self.dim() {
            let lo = ((self.center[d] - self.radius) / h - MEMBERSHIP_TOL).ceil() as i64;
            let hi = ((self.center[d] + self.radius) / h + MEMBERSHIP_TOL).floor() as i64;
            if hi < lo {
                return Err(Error::EmptyBox(format!("{self:?}")));
            }
            let count = (hi - lo + 1) as usize;
            if count >= m {
                start[d] = 0;
                len[d] = m;
            } else {
                start[d] = lo;
                len[d] = count;
            }
        }
        Ok(IndexBox {
            dim: self.dim(),
            start,
            len,
        })
    }
}

/// A box of grid points: `len[d]` consecutive indices from `start[d]`, wrapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndexBox {
    pub dim: usize,
    pub start: [i64; 2],
    pub len: [usize; 2],
}

impl IndexBox {
    /// A cube-shaped box with side `side` pixels.
    pub fn square(dim: usize, start: [i64; 2], side: usize) -> IndexBox {
        IndexBox {
            dim,
            start,
            len: if dim == 1 { [side, 1] } else { [side, side] },
        }
    }

    /// Number of grid points.
    pub fn size(&self) -> usize {
        self.len[..self.dim].iter().product()
    }

    /// Shape key used for caching local computations.
    pub fn shape(&self) -> [usize; 2] {
        self.len
    }

    /// Flat indices of the points, local lexicographic order (axis 0 outer).
    pub fn flat_indices(&self, domain: &TorusDomain) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.size());
        if self.dim == 1 {
            for a in 0..self.len[0] as i64 {
                out.push(domain.flat_index([self.start[0] + a, 0]));
            }
        } else {
            for a in 0..self.len[0] as i64 {
                for b in 0..self.len[1] as i64 {
                    out.push(domain.flat_index([self.start[0] + a, self.start[1] + b]));
                }
            }
        }
        out
    }

    /// Unwrapped coordinates of the first point.
    pub fn origin(&self, domain: &TorusDomain) -> [f64; 2] {
        let h = domain.spacing();
        [self.start[0] as f64 * h, self.start[1] as f64 * h]
    }

    /// The cube with center at the middle of the pixel block and radius `len*h/2`.
    pub fn to_cube(&self, domain: &TorusDomain) -> Cube {
        let h = domain.spacing();
        let center = (0..self.dim)
            .map(|d| (self.start[d] as f64 + (self.len[d] as f64 - 1.0) / 2.0) * h)
            .collect();
        let side = self.len[..self.dim].iter().copied().max().unwrap_or(1);
        Cube {
            center,
            radius: side as f64 * h / 2.0,
        }
    }

    /// Concentric box with `3 * len` pixels per axis, clamped to the whole axis.
    /// A clamped axis is positioned so that `self` stays contiguous inside it.
    pub fn triple(&self, domain: &TorusDomain) -> IndexBox {
        let m = domain.points_per_dim();
        let mut out = *self;
        for d in 0..self.dim {
            let l = self.len[d];
            if 3 * l >= m {
                out.len[d] = m;
                out.start[d] = self.start[d] + (l as i64) / 2 - (m as i64) / 2;
            } else {
                out.len[d] = 3 * l;
                out.start[d] = self.start[d] - l as i64;
            }
        }
        out
    }

    /// Local (axis-wise) offsets of `inner` inside `self`, assuming containment.
    pub fn offset_of(&self, inner: &IndexBox, domain: &TorusDomain) -> Result<[usize; 2]> {
        let m = domain.points_per_dim() as i64;
        let mut off = [0usize; 2];
        for d in 0..self.dim {
            let o = (inner.start[d] - self.start[d]).rem_euclid(m) as usize;
            if o + inner.len[d] > self.len[d] {
                return Err(Error::InvalidParameter(format!(
                    "{inner:?} is not contained in {self:?}"
                )));
            }
            off[d] = o;
        }
        Ok(off)
    }

    /// Mask over the local points of `self` marking the points of `inner`.
    pub fn inner_mask(&self, inner: &IndexBox, domain: &TorusDomain) -> Result<Vec<bool>> {
        let off = self.offset_of(inner, domain)?;
        let mut mask = vec![false; self.size()];
        if self.dim == 1 {
            for a in 0..inner.len[0] {
                mask[off[0] + a] = true;
            }
        } else {
            for a in 0..inner.len[0] {
                for b in 0..inner.len[1] {
                    mask[(off[0] + a) * self.len[1] + off[1] + b] = true;
                }
            }
        }
        Ok(mask)
    }
}

/// Finite family of boxes standing in for the sup over all balls.
#[derive(Debug, Clone)]
pub struct BoxFamily {
    boxes: Vec<IndexBox>,
    description: String,
}

impl BoxFamily {
    pub fn new(boxes: Vec<IndexBox>, description: impl Into<String>) -> Result<Self> {
        if boxes.is_empty() {
            return Err(Error::InvalidParameter("box family is empty".into()));
        }
        Ok(Self {
            boxes,
            description: description.into(),
        })
    }

    /// Dyadic boxes of every side `2^k` in `[min_side, max_side]` pixels,
    /// optionally with copies shifted by half a side along every axis.
    pub fn dyadic(
        domain: &TorusDomain,
        min_side: usize,
        max_side: usize,
        shifted: bool,
    ) -> Result<Self> {
        let m = domain.points_per_dim();
        let mut sides = Vec::new();
        let mut s = 1usize;
        while s <= max_side.min(m) {
            if s >= min_side.max(1) {
                sides.push(s);
            }
            s *= 2;
        }
        let boxes = Self::boxes_for_sides(domain, &sides, shifted);
        Self::new(
            boxes,
            format!("dyadic sides {min_side}..={max_side} px, shifted={shifted}"),
        )
    }

    /// Dyadic boxes with sides `M/2^d`, `d = 1..=depth` (at least one pixel).
    pub fn dyadic_depth(domain: &TorusDomain, depth: usize, shifted: bool) -> Result<Self> {
        let m = domain.points_per_dim();
        let mut sides = Vec::new();
        for d in 1..=depth {
            let s = (m >> d).max(1);
            if !sides.contains(&s) {
                sides.push(s);
            }
        }
        let boxes = Self::boxes_for_sides(domain, &sides, shifted);
        Self::new(boxes, format!("dyadic depth {depth}, shifted={shifted}"))
    }

    /// Shifted dyadic family with sides from one pixel to `M/2`.
    pub fn default_for(domain: &TorusDomain) -> Self {
        Self::dyadic(domain, 1, domain.points_per_dim() / 2, true)
            .expect("default family is nonempty")
    }

    fn boxes_for_sides(domain: &TorusDomain, sides: &[usize], shifted: bool) -> Vec<IndexBox> {
        let m = domain.points_per_dim();
        let dim = domain.dim();
        let mut out = Vec::new();
        for &s in sides {
            let mut offsets = vec![0usize];
            if shifted && s >= 2 {
                offsets.push(s / 2);
            }
            for &o in &offsets {
                let starts: Vec<i64> = (0..m.div_ceil(s)).map(|k| (k * s + o) as i64).collect();
                if dim == 1 {
                    out.extend(starts.iter().map(|&a| IndexBox::square(1, [a, 0], s)));
                } else {
                    for &a in &starts {
                        for &b in &starts {
                            out.push(IndexBox::square(2, [a, b], s));
                        }
                    }
                }
            }
        }
        out
    }

    pub fn boxes(&self) -> &[IndexBox] {
        &self.boxes
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Boxes grouped by shape, preserving first-appearance order of the shapes.
    pub fn by_shape(&self) -> Vec<([usize; 2], Vec<IndexBox>)> {
        let mut order: Vec<[usize; 2]> = Vec::new();
        let mut groups: HashMap<[usize; 2], Vec<IndexBox>> = HashMap::new();
        for b in &self.boxes {
            groups
                .entry(b.shape())
                .or_insert_with(|| {
                    order.push(b.shape());
                    Vec::new()
                })
                .push(*b);
        }
        order
            .into_iter()
            .map(|s| {
                let v = groups.remove(&s).unwrap_or_default();
                (s, v)
            })
            .collect()
    }
}

/// `(mean over points of |f|^p)^{1/p}` over a resolved box.
pub fn index_box_average(f: &GridFunction, b: &IndexBox, p: f64) -> Result<f64> {
    check_p(p)?;
    let idx = b.flat_indices(f.domain());
    if idx.is_empty() {
        return Err(Error::EmptyBox(format!("{b:?}")));
    }
    Ok(mean_power(f.values(), &idx, p))
}

pub(crate) fn mean_power(values: &[Complex64], idx: &[usize], p: f64) -> f64 {
    if p.is_infinite() {
        return idx.iter().fold(0.0, |m, &i| m.max(values[i].norm()));
    }
    let s: f64 = if p == 1.0 {
        idx.iter().map(|&i| values[i].norm()).sum()
    } else if p == 2.0 {
        idx.iter().map(|&i| values[i].norm_sqr()).sum()
    } else {
        idx.iter().map(|&i| values[i].norm().powf(p)).sum()
    };
    (s / idx.len() as f64).powf(1.0 / p)
}

/// `(avg_Q |f|^p)^{1/p}` over grid points of the cube `q`.
pub fn box_average(f: &GridFunction, q: &Cube, p: f64) -> Result<f64> {
    let b = q.resolve(f.domain())?;
    index_box_average(f, &b, p)
}

/// Maximal function `sup_{Q in family, Q contains x} (avg_Q |f|^p)^{1/p}`.
pub fn maximal_function(f: &GridFunction, family: &BoxFamily, p: f64) -> Result<GridFunction> {
    check_p(p)?;
    let domain = *f.domain();
    let averages: Vec<(Vec<usize>, f64)> = family
        .boxes()
        .par_iter()
        .map(|b| {
            let idx = b.flat_indices(&domain);
            let a = mean_power(f.values(), &idx, p);
            (idx, a)
        })
        .collect();
    let mut out = vec![0.0f64; domain.len()];
    for (idx, a) in averages {
        for i in idx {
            if a > out[i] {
                out[i] = a;
            }
        }
    }
    GridFunction::from_real(domain, &out)
}
