//! Same-size convolution with the Gabor bank and L2 fusion of the responses.
//!
//! Two convolution paths compute the same quantity: a direct spatial sum and
//! an FFT path over the padded image. Both produce
//! `out(p) = sum_z padded(p - z) * psi(z)` for `z` over the kernel support,
//! relative to the kernel center, with output dimensions equal to the input.

use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gabor_bank::{make_bank, GaborBankConfig, GaborKernel};
use crate::imaging::{pad, Padding, PaddingMode, Raster};
use crate::scalar::Scalar;

pub type ComplexRaster<T> = Raster<Complex<T>>;

/// Number of kernels convolved concurrently before their energies are folded
/// into the running sum. Fixed so the accumulation order never depends on the
/// thread count.
const KERNEL_BATCH: usize = 8;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvolutionMethod {
    Direct,
    #[default]
    Fft,
}

fn kernel_padding<T: Scalar>(
    img: &Raster<T>,
    kernel: &GaborKernel<T>,
    mode: PaddingMode,
) -> Result<Padding> {
    let (h, w) = (kernel.height(), kernel.width());
    if mode == PaddingMode::Reflect && (h > img.height() || w > img.width()) {
        return Err(Error::argument(format!(
            "kernel {h}x{w} larger than image {}x{} under reflect padding",
            img.height(),
            img.width()
        )));
    }
    let (cr, cc) = kernel.center();
    Ok(Padding { top: h - 1 - cr, bottom: cr, left: w - 1 - cc, right: cc })
}

/// Convolves with the FFT path.
pub fn convolve<T: Scalar>(
    img: &Raster<T>,
    kernel: &GaborKernel<T>,
    mode: PaddingMode,
) -> Result<ComplexRaster<T>> {
    SpectralConvolver::new(img, kernel.height(), kernel.width(), mode)?.apply(kernel)
}

/// Reference spatial-domain convolution.
pub fn convolve_direct<T: Scalar>(
    img: &Raster<T>,
    kernel: &GaborKernel<T>,
    mode: PaddingMode,
) -> Result<ComplexRaster<T>> {
    let padding = kernel_padding(img, kernel, mode)?;
    let padded = pad(img, padding, mode)?;
    let (m, n) = img.dims();
    let (h, w) = (kernel.height(), kernel.width());
    let taps = kernel.values();
    let mut out = Vec::with_capacity(m * n);
    for r in 0..m {
        for c in 0..n {
            let mut acc = Complex::new(T::zero(), T::zero());
            for i in 0..h {
                let src = padded.row(r + h - 1 - i);
                let krow = &taps[i * w..(i + 1) * w];
                for (j, &k) in krow.iter().enumerate() {
                    acc = acc + k * src[c + w - 1 - j];
                }
            }
            out.push(acc);
        }
    }
    Raster::new(m, n, out)
}

pub fn convolve_with<T: Scalar>(
    img: &Raster<T>,
    kernel: &GaborKernel<T>,
    mode: PaddingMode,
    method: ConvolutionMethod,
) -> Result<ComplexRaster<T>> {
    match method {
        ConvolutionMethod::Direct => convolve_direct(img, kernel, mode),
        ConvolutionMethod::Fft => convolve(img, kernel, mode),
    }
}

/// Smallest length `>= n` whose prime factors are all in {2, 3, 5, 7}.
fn fast_len(n: usize) -> usize {
    let mut len = n.max(1);
    loop {
        let mut rest = len;
        for p in [2, 3, 5, 7] {
            while rest % p == 0 {
                rest /= p;
            }
        }
        if rest == 1 {
            return len;
        }
        len += 1;
    }
}

fn transpose<P: Copy>(src: &[P], rows: usize, cols: usize, dst: &mut [P]) {
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
}

/// FFT convolution engine bound to one padded image and one kernel size.
///
/// The padded image spectrum is computed once; every [`apply`] call then
/// costs one forward and one inverse 2-D transform. Circular convolution on a
/// grid at least as large as the padded image leaves the rows and columns we
/// keep free of wrap-around.
///
/// [`apply`]: SpectralConvolver::apply
pub struct SpectralConvolver<T: Scalar> {
    out_dims: (usize, usize),
    kernel_dims: (usize, usize),
    fft_rows: usize,
    fft_cols: usize,
    row_fwd: Arc<dyn Fft<T>>,
    row_inv: Arc<dyn Fft<T>>,
    col_fwd: Arc<dyn Fft<T>>,
    col_inv: Arc<dyn Fft<T>>,
    image_spectrum: Vec<Complex<T>>,
}

impl<T: Scalar> SpectralConvolver<T> {
    pub fn new(
        img: &Raster<T>,
        kernel_height: usize,
        kernel_width: usize,
        mode: PaddingMode,
    ) -> Result<Self> {
        let probe = GaborKernel::from_values(
            kernel_height,
            kernel_width,
            vec![Complex::new(T::zero(), T::zero()); kernel_height * kernel_width],
        )?;
        let padding = kernel_padding(img, &probe, mode)?;
        let padded = pad(img, padding, mode)?;
        let fft_rows = fast_len(padded.height());
        let fft_cols = fast_len(padded.width());

        let mut planner = FftPlanner::new();
        let mut engine = Self {
            out_dims: img.dims(),
            kernel_dims: (kernel_height, kernel_width),
            fft_rows,
            fft_cols,
            row_fwd: planner.plan_fft_forward(fft_cols),
            row_inv: planner.plan_fft_inverse(fft_cols),
            col_fwd: planner.plan_fft_forward(fft_rows),
            col_inv: planner.plan_fft_inverse(fft_rows),
            image_spectrum: Vec::new(),
        };
        let mut grid = vec![Complex::new(T::zero(), T::zero()); fft_rows * fft_cols];
        for r in 0..padded.height() {
            for (c, &v) in padded.row(r).iter().enumerate() {
                grid[r * fft_cols + c] = Complex::new(v, T::zero());
            }
        }
        engine.transform(&mut grid, true);
        engine.image_spectrum = grid;
        Ok(engine)
    }

    fn transform(&self, grid: &mut [Complex<T>], forward: bool) {
        let (row_plan, col_plan) = if forward {
            (&self.row_fwd, &self.col_fwd)
        } else {
            (&self.row_inv, &self.col_inv)
        };
        row_plan.process(grid);
        let mut cols = vec![Complex::new(T::zero(), T::zero()); grid.len()];
        transpose(grid, self.fft_rows, self.fft_cols, &mut cols);
        col_plan.process(&mut cols);
        transpose(&cols, self.fft_cols, self.fft_rows, grid);
    }

    pub fn apply(&self, kernel: &GaborKernel<T>) -> Result<ComplexRaster<T>> {
        let (h, w) = self.kernel_dims;
        if (kernel.height(), kernel.width()) != (h, w) {
            return Err(Error::argument(format!(
                "convolver prepared for {h}x{w} kernels, got {}x{}",
                kernel.height(),
                kernel.width()
            )));
        }
        let mut grid = vec![Complex::new(T::zero(), T::zero()); self.fft_rows * self.fft_cols];
        for i in 0..h {
            grid[i * self.fft_cols..i * self.fft_cols + w]
                .copy_from_slice(&kernel.values()[i * w..(i + 1) * w]);
        }
        self.transform(&mut grid, true);
        for (g, s) in grid.iter_mut().zip(&self.image_spectrum) {
            *g = *g * *s;
        }
        self.transform(&mut grid, false);

        let scale = T::one() / T::of_usize(self.fft_rows * self.fft_cols);
        let (m, n) = self.out_dims;
        let mut out = Vec::with_capacity(m * n);
        for r in 0..m {
            let base = (r + h - 1) * self.fft_cols + (w - 1);
            out.extend(grid[base..base + n].iter().map(|v| v.scale(scale)));
        }
        Raster::new(m, n, out)
    }
}

/// Per-kernel complex responses, in bank order.
#[derive(Debug, Clone)]
pub struct ResponseStack<T> {
    pub responses: Vec<ComplexRaster<T>>,
    pub config: GaborBankConfig<T>,
}

/// Convolves `img` with every kernel of the bank described by `cfg`.
pub fn gabor_responses<T: Scalar>(
    img: &Raster<T>,
    cfg: &GaborBankConfig<T>,
    mode: PaddingMode,
    method: ConvolutionMethod,
) -> Result<ResponseStack<T>> {
    let bank = make_bank(cfg)?;
    let responses = convolve_bank(img, &bank, mode, method)?;
    Ok(ResponseStack { responses, config: *cfg })
}

fn convolve_bank<T: Scalar>(
    img: &Raster<T>,
    bank: &[GaborKernel<T>],
    mode: PaddingMode,
    method: ConvolutionMethod,
) -> Result<Vec<ComplexRaster<T>>> {
    match method {
        ConvolutionMethod::Direct => {
            bank.par_iter().map(|k| convolve_direct(img, k, mode)).collect()
        }
        ConvolutionMethod::Fft => {
            let Some(first) = bank.first() else {
                return Ok(Vec::new());
            };
            let engine = SpectralConvolver::new(img, first.height(), first.width(), mode)?;
            bank.par_iter().map(|k| engine.apply(k)).collect()
        }
    }
}

fn check_stack_dims<T: Scalar>(responses: &[ComplexRaster<T>]) -> Result<(usize, usize)> {
    let first = responses.first().ok_or_else(|| Error::argument("response stack is empty"))?;
    let dims = first.dims();
    if responses.iter().any(|r| r.dims() != dims) {
        return Err(Error::argument("responses in a stack must share dimensions"));
    }
    Ok(dims)
}

fn accumulate_energy<T: Scalar>(acc: &mut [T], response: &ComplexRaster<T>) {
    for (a, v) in acc.iter_mut().zip(response.values()) {
        *a = *a + v.norm_sqr();
    }
}

/// Pixelwise `sqrt(sum_k |r_k|^2)`, accumulated in stack order.
pub fn fuse_l2<T: Scalar>(stack: &ResponseStack<T>) -> Result<Raster<T>> {
    let (m, n) = check_stack_dims(&stack.responses)?;
    let mut acc = vec![T::zero(); m * n];
    for response in &stack.responses {
        accumulate_energy(&mut acc, response);
    }
    Raster::new(m, n, acc.into_iter().map(|v| v.sqrt()).collect())
}

/// The L2-fused response of the full bank (the "Gabor space" image).
pub fn gabor_space<T: Scalar>(
    img: &Raster<T>,
    cfg: &GaborBankConfig<T>,
    mode: PaddingMode,
) -> Result<Raster<T>> {
    gabor_space_with(img, cfg, mode, ConvolutionMethod::Fft)
}

/// As [`gabor_space`], choosing the convolution path.
///
/// Kernels are processed in fixed-size batches so only a few complex
/// responses are resident at once; the energy sum still runs in bank order,
/// so the result equals [`fuse_l2`] over [`gabor_responses`] bit for bit,
/// whatever the size of the rayon pool.
pub fn gabor_space_with<T: Scalar>(
    img: &Raster<T>,
    cfg: &GaborBankConfig<T>,
    mode: PaddingMode,
    method: ConvolutionMethod,
) -> Result<Raster<T>> {
    let bank = make_bank(cfg)?;
    let (m, n) = img.dims();
    let mut acc = vec![T::zero(); m * n];
    let engine = match method {
        ConvolutionMethod::Fft => {
            Some(SpectralConvolver::new(img, cfg.kernel_height, cfg.kernel_width, mode)?)
        }
        ConvolutionMethod::Direct => None,
    };
    for batch in bank.chunks(KERNEL_BATCH) {
        let responses: Vec<ComplexRaster<T>> = batch
            .par_iter()
            .map(|k| match &engine {
                Some(engine) => engine.apply(k),
                None => convolve_direct(img, k, mode),
            })
            .collect::<Result<_>>()?;
        for response in &responses {
            accumulate_energy(&mut acc, response);
        }
    }
    Raster::new(m, n, acc.into_iter().map(|v| v.sqrt()).collect())
}
