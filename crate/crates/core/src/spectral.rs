//! Periodic tensor grids and the Fourier substrate shared by every scheme.
//!
//! Fields are real samples on a uniform periodic grid, stored row-major with
//! the last axis contiguous. The forward transform is real-to-complex along
//! the last axis (keeping `n/2 + 1` modes) followed by complex transforms
//! along the remaining axes, so a spectrum has shape
//! `[n0, .., n_{d-2}, n_{d-1}/2 + 1]`.
//!
//! Wavenumbers follow `k = 2π·m / L` with integer mode index `m`. Along the
//! complex axes, index `i` maps to `m = i` for `i <= n/2` and `m = i - n`
//! otherwise; along the halved last axis `m = j`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::SpectralError;

/// Relative threshold below which a multiplier symbol counts as zero.
pub const INVERTIBILITY_THRESHOLD: f64 = 1e-14;

pub struct GridSpec {
    dims: Vec<usize>,
    extents: Vec<f64>,
    spacing: Vec<f64>,
    spectral_dims: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl fmt::Debug for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridSpec")
            .field("dims", &self.dims)
            .field("extents", &self.extents)
            .field("spacing", &self.spacing)
            .finish()
    }
}

impl PartialEq for GridSpec {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims && self.extents == other.extents
    }
}

/// Builds a periodic grid with `dims[i]` nodes spanning `extents[i]`.
pub fn make_grid(dims: &[usize], extents: &[f64]) -> Result<Arc<GridSpec>, SpectralError> {
    GridSpec::new(dims, extents)
}

impl GridSpec {
    pub fn new(dims: &[usize], extents: &[f64]) -> Result<Arc<Self>, SpectralError> {
        if dims.is_empty() || dims.len() > 3 {
            return Err(SpectralError::AxisCount(dims.len()));
        }
        if dims.len() != extents.len() {
            return Err(SpectralError::ExtentCount {
                dims: dims.len(),
                extents: extents.len(),
            });
        }
        for (axis, (&n, &l)) in dims.iter().zip(extents).enumerate() {
            if n < 4 || n % 2 != 0 {
                return Err(SpectralError::BadDim { axis, dim: n });
            }
            if !(l > 0.0) || !l.is_finite() {
                return Err(SpectralError::BadExtent { axis, extent: l });
            }
        }
        let spacing = dims
            .iter()
            .zip(extents)
            .map(|(&n, &l)| l / n as f64)
            .collect();
        let mut spectral_dims = dims.to_vec();
        let last = spectral_dims.len() - 1;
        spectral_dims[last] = dims[last] / 2 + 1;

        let mut planner = FftPlanner::new();
        let forward = dims.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = dims.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        Ok(Arc::new(Self {
            dims: dims.to_vec(),
            extents: extents.to_vec(),
            spacing,
            spectral_dims,
            forward,
            inverse,
        }))
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn axes(&self) -> usize {
        self.dims.len()
    }

    /// Number of grid nodes.
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Shape of the stored half spectrum.
    pub fn spectral_dims(&self) -> &[usize] {
        &self.spectral_dims
    }

    pub fn spectral_len(&self) -> usize {
        self.spectral_dims.iter().product()
    }

    /// Quadrature weight of a single node, `∏ spacing`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Measure of the periodic box.
    pub fn volume(&self) -> f64 {
        self.extents.iter().product()
    }

    /// Integer mode index along `axis` for spectral index `idx`.
    pub fn mode_index(&self, axis: usize, idx: usize) -> i64 {
        let n = self.dims[axis];
        if axis == self.dims.len() - 1 || idx <= n / 2 {
            idx as i64
        } else {
            idx as i64 - n as i64
        }
    }

    /// Wavenumber `2π·m/L` along `axis` for spectral index `idx`.
    pub fn wavenumber(&self, axis: usize, idx: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.mode_index(axis, idx) as f64 / self.extents[axis]
    }

    /// Per-axis spectral indices of a flat spectrum position.
    pub fn spectral_coords(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.spectral_dims.len()];
        for axis in (0..self.spectral_dims.len()).rev() {
            out[axis] = flat % self.spectral_dims[axis];
            flat /= self.spectral_dims[axis];
        }
        out
    }

    /// Physical coordinates of node `flat`, measured from `origin`.
    pub fn node_coords(&self, mut flat: usize, origin: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dims.len()];
        for axis in (0..self.dims.len()).rev() {
            let i = flat % self.dims[axis];
            flat /= self.dims[axis];
            out[axis] = origin.get(axis).copied().unwrap_or(0.0) + i as f64 * self.spacing[axis];
        }
        out
    }

    fn same(self: &Arc<Self>, other: &Arc<Self>) -> bool {
        Arc::ptr_eq(self, other) || **self == **other
    }
}

/// Real samples on a grid.
#[derive(Clone, Debug)]
pub struct Field {
    grid: Arc<GridSpec>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Arc<GridSpec>, values: Vec<f64>) -> Result<Self, SpectralError> {
        if values.len() != grid.len() {
            return Err(SpectralError::LengthMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &Arc<GridSpec>) -> Self {
        Self {
            values: vec![0.0; grid.len()],
            grid: grid.clone(),
        }
    }

    pub fn constant(grid: &Arc<GridSpec>, value: f64) -> Self {
        Self {
            values: vec![value; grid.len()],
            grid: grid.clone(),
        }
    }

    /// Samples `f` at every node, coordinates measured from the origin 0.
    pub fn from_fn(grid: &Arc<GridSpec>, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let origin = vec![0.0; grid.axes()];
        let values = (0..grid.len())
            .map(|i| f(&grid.node_coords(i, &origin)))
            .collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn check_finite(&self) -> Result<(), SpectralError> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(SpectralError::NonFinite { index }),
            None => Ok(()),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise `f(self, other)`; grids must match.
    pub fn zip_with(
        &self,
        other: &Field,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Field, SpectralError> {
        check_grids(&self.grid, &other.grid)?;
        Ok(Field {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &Field) -> Result<Field, SpectralError> {
        self.zip_with(other, |a, b| a + alpha * b)
    }

    pub fn scale(&self, alpha: f64) -> Field {
        self.map(|v| alpha * v)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Max-norm of `self - other`.
    pub fn max_diff(&self, other: &Field) -> Result<f64, SpectralError> {
        check_grids(&self.grid, &other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }
}

/// Half-spectrum coefficients of a real field.
#[derive(Clone, Debug)]
pub struct Spectrum {
    grid: Arc<GridSpec>,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Multiplies every coefficient by the matching symbol entry.
    pub fn scale_by(&mut self, m: &FourierMultiplier) -> Result<(), SpectralError> {
        check_grids(&self.grid, &m.grid)?;
        for (c, &s) in self.coeffs.iter_mut().zip(&m.symbol) {
            *c *= s;
        }
        Ok(())
    }
}

fn check_grids(a: &Arc<GridSpec>, b: &Arc<GridSpec>) -> Result<(), SpectralError> {
    if a.same(b) {
        Ok(())
    } else {
        Err(SpectralError::GridMismatch)
    }
}

/// Gathers all 1D lines along `axis` of an array with `shape`, transforms
/// them with `fft`, and scatters back.
fn transform_axis(data: &mut [Complex64], shape: &[usize], axis: usize, fft: &Arc<dyn Fft<f64>>) {
    let n = shape[axis];
    let stride: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut buf = vec![Complex64::new(0.0, 0.0); data.len()];
    for o in 0..outer {
        for inner in 0..stride {
            let line = (o * stride + inner) * n;
            let base = o * n * stride + inner;
            for j in 0..n {
                buf[line + j] = data[base + j * stride];
            }
        }
    }
    fft.process(&mut buf);
    for o in 0..outer {
        for inner in 0..stride {
            let line = (o * stride + inner) * n;
            let base = o * n * stride + inner;
            for j in 0..n {
                data[base + j * stride] = buf[line + j];
            }
        }
    }
}

/// Forward real-to-half-complex transform (unnormalized).
pub fn forward(f: &Field) -> Spectrum {
    let grid = &f.grid;
    let d = grid.axes();
    let n = grid.dims[d - 1];
    let h = n / 2 + 1;
    let rows = grid.len() / n;
    let pairs = rows.div_ceil(2);

    // Two real rows share one complex transform: z = x + i·y.
    let mut packed = vec![Complex64::new(0.0, 0.0); pairs * n];
    for p in 0..pairs {
        let r0 = 2 * p;
        let r1 = 2 * p + 1;
        for j in 0..n {
            let x = f.values[r0 * n + j];
            let y = if r1 < rows { f.values[r1 * n + j] } else { 0.0 };
            packed[p * n + j] = Complex64::new(x, y);
        }
    }
    grid.forward[d - 1].process(&mut packed);

    let mut coeffs = vec![Complex64::new(0.0, 0.0); rows * h];
    let half_i = Complex64::new(0.0, -0.5);
    for p in 0..pairs {
        let z = &packed[p * n..(p + 1) * n];
        let r0 = 2 * p;
        let r1 = 2 * p + 1;
        for k in 0..h {
            let zk = z[k];
            let zc = z[(n - k) % n].conj();
            coeffs[r0 * h + k] = (zk + zc) * 0.5;
            if r1 < rows {
                coeffs[r1 * h + k] = (zk - zc) * half_i;
            }
        }
    }
    for axis in (0..d - 1).rev() {
        transform_axis(&mut coeffs, &grid.spectral_dims, axis, &grid.forward[axis]);
    }
    Spectrum {
        grid: grid.clone(),
        coeffs,
    }
}

/// Inverse of [`forward`], including the `1/N` normalization.
pub fn inverse(s: &Spectrum) -> Field {
    let grid = &s.grid;
    let d = grid.axes();
    let n = grid.dims[d - 1];
    let h = n / 2 + 1;
    let rows = grid.len() / n;
    let pairs = rows.div_ceil(2);

    let mut coeffs = s.coeffs.clone();
    for axis in 0..d - 1 {
        transform_axis(&mut coeffs, &grid.spectral_dims, axis, &grid.inverse[axis]);
    }
    // Projection onto real output: DC and Nyquist bins of each row are real.
    for r in 0..rows {
        coeffs[r * h].im = 0.0;
        coeffs[r * h + h - 1].im = 0.0;
    }

    let i = Complex64::new(0.0, 1.0);
    let mut packed = vec![Complex64::new(0.0, 0.0); pairs * n];
    for p in 0..pairs {
        let r0 = 2 * p;
        let r1 = 2 * p + 1;
        for k in 0..n {
            let (x, y) = if k < h {
                let x = coeffs[r0 * h + k];
                let y = if r1 < rows {
                    coeffs[r1 * h + k]
                } else {
                    Complex64::new(0.0, 0.0)
                };
                (x, y)
            } else {
                let x = coeffs[r0 * h + (n - k)].conj();
                let y = if r1 < rows {
                    coeffs[r1 * h + (n - k)].conj()
                } else {
                    Complex64::new(0.0, 0.0)
                };
                (x, y)
            };
            packed[p * n + k] = x + i * y;
        }
    }
    grid.inverse[d - 1].process(&mut packed);

    let norm = 1.0 / grid.len() as f64;
    let mut values = vec![0.0; grid.len()];
    for p in 0..pairs {
        let r0 = 2 * p;
        let r1 = 2 * p + 1;
        for j in 0..n {
            let z = packed[p * n + j];
            values[r0 * n + j] = z.re * norm;
            if r1 < rows {
                values[r1 * n + j] = z.im * norm;
            }
        }
    }
    Field {
        grid: grid.clone(),
        values,
    }
}

/// Forward then inverse transform; the identity up to round-off.
pub fn transform_pair(f: &Field) -> Result<Field, SpectralError> {
    f.check_finite()?;
    Ok(inverse(&forward(f)))
}

/// A real diagonal operator in the Fourier basis.
#[derive(Clone, Debug)]
pub struct FourierMultiplier {
    grid: Arc<GridSpec>,
    symbol: Vec<f64>,
}

impl FourierMultiplier {
    pub fn new(grid: Arc<GridSpec>, symbol: Vec<f64>) -> Result<Self, SpectralError> {
        if symbol.len() != grid.spectral_len() {
            return Err(SpectralError::LengthMismatch {
                expected: grid.spectral_len(),
                found: symbol.len(),
            });
        }
        Ok(Self { grid, symbol })
    }

    /// Evaluates `f` at the wavevector of every retained mode.
    pub fn from_wavevector(grid: &Arc<GridSpec>, f: impl Fn(&[f64]) -> f64) -> Self {
        let d = grid.axes();
        let mut k = vec![0.0; d];
        let symbol = (0..grid.spectral_len())
            .map(|flat| {
                let idx = grid.spectral_coords(flat);
                for axis in 0..d {
                    k[axis] = grid.wavenumber(axis, idx[axis]);
                }
                f(&k)
            })
            .collect();
        Self {
            grid: grid.clone(),
            symbol,
        }
    }

    /// Evaluates `f` at `|k|²`.
    pub fn radial(grid: &Arc<GridSpec>, f: impl Fn(f64) -> f64) -> Self {
        Self::from_wavevector(grid, |k| f(k.iter().map(|v| v * v).sum()))
    }

    pub fn constant(grid: &Arc<GridSpec>, value: f64) -> Self {
        Self {
            grid: grid.clone(),
            symbol: vec![value; grid.spectral_len()],
        }
    }

    /// The Laplacian, symbol `-|k|²`.
    pub fn laplacian(grid: &Arc<GridSpec>) -> Self {
        Self::radial(grid, |k2| -k2)
    }

    /// 2/3-rule truncation mask: zero for modes with `3|m| > n` on any axis.
    pub fn two_thirds_mask(grid: &Arc<GridSpec>) -> Self {
        let d = grid.axes();
        let symbol = (0..grid.spectral_len())
            .map(|flat| {
                let idx = grid.spectral_coords(flat);
                let keep = (0..d).all(|a| {
                    3 * grid.mode_index(a, idx[a]).unsigned_abs() as usize <= grid.dims()[a]
                });
                if keep {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        Self {
            grid: grid.clone(),
            symbol,
        }
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            symbol: self.symbol.iter().map(|&s| f(s)).collect(),
        }
    }

    /// Pointwise combination of two symbols on the same grid.
    pub fn combine(
        &self,
        other: &Self,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self, SpectralError> {
        check_grids(&self.grid, &other.grid)?;
        Ok(Self {
            grid: self.grid.clone(),
            symbol: self
                .symbol
                .iter()
                .zip(&other.symbol)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Checks `min |symbol| > 1e-14 · max(1, max |symbol|)`; on failure
    /// reports the offending mode and its symbol value.
    pub fn check_invertible(&self) -> Result<(), SpectralError> {
        let scale = self.symbol.iter().fold(1.0_f64, |m, s| m.max(s.abs()));
        let threshold = INVERTIBILITY_THRESHOLD * scale;
        let (pos, value) = self
            .symbol
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, &v)| (i, v))
            .expect("spectrum is never empty");
        if value.abs() > threshold {
            Ok(())
        } else {
            let idx = self.grid.spectral_coords(pos);
            let mode = idx
                .iter()
                .enumerate()
                .map(|(a, &i)| self.grid.mode_index(a, i))
                .collect();
            Err(SpectralError::NotInvertible { mode, value })
        }
    }

    pub fn is_invertible(&self) -> bool {
        self.check_invertible().is_ok()
    }
}

/// `inverse(symbol ⊙ forward(f))`.
pub fn apply_multiplier(f: &Field, m: &FourierMultiplier) -> Result<Field, SpectralError> {
    check_grids(&f.grid, &m.grid)?;
    let mut s = forward(f);
    s.scale_by(m)?;
    Ok(inverse(&s))
}

/// Solves `a · x = rhs` for a diagonal operator `a`.
pub fn solve_diagonal(rhs: &Field, a: &FourierMultiplier) -> Result<Field, SpectralError> {
    check_grids(&rhs.grid, &a.grid)?;
    a.check_invertible()?;
    let mut s = forward(rhs);
    for (c, &sym) in s.coeffs.iter_mut().zip(&a.symbol) {
        *c /= sym;
    }
    Ok(inverse(&s))
}

/// Periodic trapezoid approximation of `∫ f·g dx`: `(∏ spacing) Σ fᵢgᵢ`.
pub fn inner_product(f: &Field, g: &Field) -> Result<f64, SpectralError> {
    check_grids(&f.grid, &g.grid)?;
    Ok(f.grid.cell_volume()
        * f.values
            .iter()
            .zip(&g.values)
            .map(|(a, b)| a * b)
            .sum::<f64>())
}

/// `∫ f dx` by the same rule.
pub fn integral(f: &Field) -> f64 {
    f.grid.cell_volume() * f.values.iter().sum::<f64>()
}
