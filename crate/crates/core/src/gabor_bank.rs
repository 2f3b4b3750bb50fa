//! Complex Gabor wavelet kernels over a grid of scales and orientations.
//!
//! Every kernel samples
//!
//! ```text
//! psi(z) = (k^2 / sigma^2) * exp(-k^2 |z|^2 / (2 sigma^2)) * [exp(i k.z) - exp(-sigma^2 / 2)]
//! ```
//!
//! where the wave vector `k = k_v (cos theta, sin theta)` has magnitude
//! `k_v = k_max / f^v` and `theta = j * pi / orientations`. The subtracted
//! term removes the DC response of the untruncated wavelet.

use std::path::Path;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::imaging::{save_grayscale, Raster};
use crate::periodic_blocks::Periodicity;
use crate::scalar::Scalar;

/// Side length of the default kernel window.
///
/// Wide enough that the coarsest default scale (`k = pi/8`, envelope width
/// `sigma / k = 16` px) is sampled out to two envelope widths, which keeps the
/// DC residue of every default kernel below 1% of its L1 mass.
pub const REFERENCE_KERNEL_SIZE: usize = 64;

/// Smallest kernel side accepted.
pub const MIN_KERNEL_SIZE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaborBankConfig<T> {
    pub num_scales: usize,
    pub num_orientations: usize,
    /// Envelope width relative to the wavelength.
    pub sigma: T,
    /// Wavenumber of the finest scale.
    pub k_max: T,
    /// Spacing factor between successive scales.
    pub spacing: T,
    pub kernel_height: usize,
    pub kernel_width: usize,
}

impl<T: Scalar> Default for GaborBankConfig<T> {
    /// Five scales, eight orientations, `sigma = 2 pi`, `k_max = pi/2`,
    /// `f = sqrt 2`, on a [`REFERENCE_KERNEL_SIZE`] square window.
    fn default() -> Self {
        Self {
            num_scales: 5,
            num_orientations: 8,
            sigma: T::TAU(),
            k_max: T::FRAC_PI_2(),
            spacing: T::SQRT_2(),
            kernel_height: REFERENCE_KERNEL_SIZE,
            kernel_width: REFERENCE_KERNEL_SIZE,
        }
    }
}

impl<T: Scalar> GaborBankConfig<T> {
    /// Default wavelet parameters with the kernel window sized from `period`.
    pub fn for_periodicity(period: Periodicity) -> Result<Self> {
        let (kernel_height, kernel_width) = kernel_size_from_periodicity(period)?;
        Ok(Self { kernel_height, kernel_width, ..Self::default() })
    }

    pub fn with_kernel_size(mut self, height: usize, width: usize) -> Self {
        self.kernel_height = height;
        self.kernel_width = width;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_scales == 0 || self.num_orientations == 0 {
            return Err(Error::argument("bank needs at least one scale and one orientation"));
        }
        if !(self.sigma > T::zero()) || !(self.k_max > T::zero()) {
            return Err(Error::argument("sigma and k_max must be positive"));
        }
        if !(self.spacing > T::one()) {
            return Err(Error::argument("scale spacing factor must exceed 1"));
        }
        if self.kernel_height < MIN_KERNEL_SIZE || self.kernel_width < MIN_KERNEL_SIZE {
            return Err(Error::argument(format!(
                "kernel {}x{} is smaller than {MIN_KERNEL_SIZE}x{MIN_KERNEL_SIZE}",
                self.kernel_height, self.kernel_width
            )));
        }
        Ok(())
    }

    pub fn num_kernels(&self) -> usize {
        self.num_scales * self.num_orientations
    }

    /// `k_max / f^v`
    pub fn wavenumber(&self, scale: usize) -> T {
        self.k_max / self.spacing.powi(scale as i32)
    }

    /// `j * pi / orientations`
    pub fn orientation(&self, index: usize) -> T {
        T::of_usize(index) * T::PI() / T::of_usize(self.num_orientations)
    }
}

/// Kernel window of half the periodic unit in each axis, at least 3x3.
pub fn kernel_size_from_periodicity(period: Periodicity) -> Result<(usize, usize)> {
    if period.rows < 2 || period.cols < 2 {
        return Err(Error::argument(format!(
            "periodic unit {}x{} must be at least 2x2",
            period.rows, period.cols
        )));
    }
    Ok(((period.rows / 2).max(MIN_KERNEL_SIZE), (period.cols / 2).max(MIN_KERNEL_SIZE)))
}

/// One sampled wavelet; `values` are row-major around [`GaborKernel::center`].
#[derive(Debug, Clone, PartialEq)]
pub struct GaborKernel<T> {
    pub scale_index: usize,
    pub orientation_index: usize,
    /// Radians.
    pub orientation: T,
    pub wavenumber: T,
    height: usize,
    width: usize,
    values: Vec<Complex<T>>,
}

impl<T: Scalar> GaborKernel<T> {
    /// Wraps explicit taps, e.g. a synthetic identity kernel.
    pub fn from_values(height: usize, width: usize, values: Vec<Complex<T>>) -> Result<Self> {
        if height == 0 || width == 0 || values.len() != height * width {
            return Err(Error::argument("kernel taps do not match its dimensions"));
        }
        Ok(Self {
            scale_index: 0,
            orientation_index: 0,
            orientation: T::zero(),
            wavenumber: T::zero(),
            height,
            width,
            values,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    /// `(floor((h-1)/2), floor((w-1)/2))`
    pub fn center(&self) -> (usize, usize) {
        ((self.height - 1) / 2, (self.width - 1) / 2)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex<T> {
        self.values[row * self.width + col]
    }

    /// Tap at offset `(dx, dy)` (column, row) from the center, if inside the window.
    pub fn at_offset(&self, dx: isize, dy: isize) -> Option<Complex<T>> {
        let (cr, cc) = self.center();
        let r = cr as isize + dy;
        let c = cc as isize + dx;
        if r < 0 || c < 0 || r >= self.height as isize || c >= self.width as isize {
            return None;
        }
        Some(self.get(r as usize, c as usize))
    }

    pub fn real_part(&self) -> Raster<T> {
        Raster::from_fn(self.height, self.width, |r, c| self.get(r, c).re)
    }

    pub fn imag_part(&self) -> Raster<T> {
        Raster::from_fn(self.height, self.width, |r, c| self.get(r, c).im)
    }

    pub fn l1_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, v| acc + v.norm())
    }
}

/// Samples the wavelet at `(scale, orientation_index)` on the configured window.
pub fn make_kernel<T: Scalar>(
    cfg: &GaborBankConfig<T>,
    scale: usize,
    orientation_index: usize,
) -> Result<GaborKernel<T>> {
    cfg.validate()?;
    if scale >= cfg.num_scales || orientation_index >= cfg.num_orientations {
        return Err(Error::argument(format!(
            "kernel index ({scale}, {orientation_index}) outside {}x{} bank",
            cfg.num_scales, cfg.num_orientations
        )));
    }
    let k = cfg.wavenumber(scale);
    let theta = cfg.orientation(orientation_index);
    let (kx, ky) = (k * theta.cos(), k * theta.sin());
    let sigma2 = cfg.sigma * cfg.sigma;
    let two = T::of(2.0);
    let amplitude = k * k / sigma2;
    let dc = (-sigma2 / two).exp();
    let cr = ((cfg.kernel_height - 1) / 2) as isize;
    let cc = ((cfg.kernel_width - 1) / 2) as isize;

    let mut values = Vec::with_capacity(cfg.kernel_height * cfg.kernel_width);
    for r in 0..cfg.kernel_height as isize {
        let y = T::from_isize(r - cr).unwrap();
        for c in 0..cfg.kernel_width as isize {
            let x = T::from_isize(c - cc).unwrap();
            let envelope = amplitude * (-(k * k) * (x * x + y * y) / (two * sigma2)).exp();
            let phase = kx * x + ky * y;
            let wave = Complex::new(phase.cos() - dc, phase.sin());
            values.push(wave * envelope);
        }
    }
    Ok(GaborKernel {
        scale_index: scale,
        orientation_index,
        orientation: theta,
        wavenumber: k,
        height: cfg.kernel_height,
        width: cfg.kernel_width,
        values,
    })
}

/// All `scales x orientations` kernels, scale-major.
pub fn make_bank<T: Scalar>(cfg: &GaborBankConfig<T>) -> Result<Vec<GaborKernel<T>>> {
    cfg.validate()?;
    let mut bank = Vec::with_capacity(cfg.num_kernels());
    for v in 0..cfg.num_scales {
        for j in 0..cfg.num_orientations {
            bank.push(make_kernel(cfg, v, j)?);
        }
    }
    Ok(bank)
}

/// Writes min-max normalized real and imaginary parts of each kernel as PNGs.
pub fn dump_kernels<T: Scalar>(bank: &[GaborKernel<T>], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    for kernel in bank {
        let stem = format!("kernel_s{}_o{}", kernel.scale_index, kernel.orientation_index);
        save_grayscale(&kernel.real_part().min_max_normalized(), dir.join(format!("{stem}_re.png")))?;
        save_grayscale(&kernel.imag_part().min_max_normalized(), dir.join(format!("{stem}_im.png")))?;
    }
    Ok(())
}
