//! Raster container, grayscale file I/O, padding and overlay output.
//!
//! Pixels loaded from disk are normalized to `[0, 1]` and every later stage
//! works in floating point. Files are read and written as PNG or binary PGM
//! (P5); 8-bit output quantizes with `round(v * 255)` clamped to `[0, 255]`.

use std::path::Path;
use std::str::FromStr;

use image::{DynamicImage, ExtendedColorType, ImageFormat, ImageReader};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major 2-D grid of pixels.
///
/// `P` is usually a real [`Scalar`], but complex filter responses reuse the
/// same container.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster<P> {
    height: usize,
    width: usize,
    values: Vec<P>,
}

impl<P: Copy> Raster<P> {
    pub fn new(height: usize, width: usize, values: Vec<P>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::argument(format!(
                "raster dimensions must be positive, got {height}x{width}"
            )));
        }
        if values.len() != height * width {
            return Err(Error::argument(format!(
                "raster {height}x{width} needs {} values, got {}",
                height * width,
                values.len()
            )));
        }
        Ok(Self { height, width, values })
    }

    /// Raster filled with a single value.
    ///
    /// # Panics
    /// If either dimension is zero.
    pub fn filled(height: usize, width: usize, value: P) -> Self {
        assert!(height > 0 && width > 0, "raster dimensions must be positive");
        Self { height, width, values: vec![value; height * width] }
    }

    /// Builds a raster by evaluating `f(row, col)` at every pixel.
    ///
    /// # Panics
    /// If either dimension is zero.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> P) -> Self {
        assert!(height > 0 && width > 0, "raster dimensions must be positive");
        let mut values = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                values.push(f(r, c));
            }
        }
        Self { height, width, values }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    /// `(height, width)`
    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn values(&self) -> &[P] {
        &self.values
    }

    pub fn into_values(self) -> Vec<P> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> P {
        self.values[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: P) {
        self.values[row * self.width + col] = value;
    }

    pub fn row(&self, row: usize) -> &[P] {
        &self.values[row * self.width..(row + 1) * self.width]
    }

    pub fn map<Q: Copy>(&self, f: impl FnMut(P) -> Q) -> Raster<Q> {
        Raster {
            height: self.height,
            width: self.width,
            values: self.values.iter().copied().map(f).collect(),
        }
    }

    /// Copies the `height x width` window whose top-left corner is `(row, col)`.
    pub fn window(&self, row: usize, col: usize, height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 || row + height > self.height || col + width > self.width {
            return Err(Error::argument(format!(
                "window {height}x{width} at ({row},{col}) exceeds raster {}x{}",
                self.height, self.width
            )));
        }
        Ok(Self::from_fn(height, width, |r, c| self.get(row + r, col + c)))
    }
}

impl<T: Scalar> Raster<T> {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, T::zero())
    }

    /// Linearly rescales values onto `[0, 1]`; a constant raster maps to zeros.
    pub fn min_max_normalized(&self) -> Self {
        let (lo, hi) = self
            .values
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let span = hi - lo;
        if !(span > T::zero()) {
            return Self::zeros(self.height, self.width);
        }
        self.map(|v| (v - lo) / span)
    }

    /// Sum of absolute values.
    pub fn l1_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, &v| acc + v.abs())
    }

    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == T::zero() || v == T::one())
    }
}

/// Border extension used wherever a stage reads outside the image.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PaddingMode {
    /// Mirror without repeating the edge pixel: `[a b c]` extends as `b a | a b c | b a`.
    #[default]
    Reflect,
    /// Periodic (toroidal) extension.
    Wrap,
    /// Constant zero outside the image.
    Zero,
}

impl PaddingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PaddingMode::Reflect => "reflect",
            PaddingMode::Wrap => "wrap",
            PaddingMode::Zero => "zero",
        }
    }

    /// Maps a possibly out-of-range index onto `0..len`, or `None` for zero padding.
    #[inline]
    pub(crate) fn source_index(self, idx: isize, len: usize) -> Option<usize> {
        let n = len as isize;
        if (0..n).contains(&idx) {
            return Some(idx as usize);
        }
        match self {
            PaddingMode::Zero => None,
            PaddingMode::Wrap => Some(idx.rem_euclid(n) as usize),
            PaddingMode::Reflect => {
                if n == 1 {
                    return Some(0);
                }
                // Reflection has period 2(n-1); fold into one period first.
                let period = 2 * (n - 1);
                let m = idx.rem_euclid(period);
                Some(if m < n { m } else { period - m } as usize)
            }
        }
    }
}

impl FromStr for PaddingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "reflect" => Ok(PaddingMode::Reflect),
            "wrap" => Ok(PaddingMode::Wrap),
            "zero" => Ok(PaddingMode::Zero),
            other => Err(Error::argument(format!("unknown padding mode '{other}'"))),
        }
    }
}

/// Extra rows/columns added on each side by [`pad`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Padding {
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
}

impl Padding {
    pub fn uniform(amount: usize) -> Self {
        Self { top: amount, bottom: amount, left: amount, right: amount }
    }
}

/// Extends `img` by the given amounts, filling the border per `mode`.
///
/// Reflect padding must be strictly smaller than the matching dimension.
pub fn pad<T: Scalar>(img: &Raster<T>, padding: Padding, mode: PaddingMode) -> Result<Raster<T>> {
    let (h, w) = img.dims();
    if mode == PaddingMode::Reflect
        && (padding.top >= h || padding.bottom >= h || padding.left >= w || padding.right >= w)
    {
        return Err(Error::argument(format!(
            "reflect padding {padding:?} must be smaller than image {h}x{w}"
        )));
    }
    let out_h = h + padding.top + padding.bottom;
    let out_w = w + padding.left + padding.right;
    let cols: Vec<Option<usize>> = (0..out_w)
        .map(|c| mode.source_index(c as isize - padding.left as isize, w))
        .collect();
    let mut values = Vec::with_capacity(out_h * out_w);
    for r in 0..out_h {
        match mode.source_index(r as isize - padding.top as isize, h) {
            Some(sr) => {
                let src = img.row(sr);
                values.extend(cols.iter().map(|c| c.map_or(T::zero(), |sc| src[sc])));
            }
            None => values.extend(std::iter::repeat_n(T::zero(), out_w)),
        }
    }
    Raster::new(out_h, out_w, values)
}

fn output_format(path: &Path) -> Result<ImageFormat> {
    match ImageFormat::from_path(path) {
        Ok(ImageFormat::Png) => Ok(ImageFormat::Png),
        Ok(ImageFormat::Pnm) => Ok(ImageFormat::Pnm),
        _ => Err(Error::Format(format!(
            "{}: output must be .png or .pgm/.ppm",
            path.display()
        ))),
    }
}

/// Loads a PNG or PGM file as a grayscale raster normalized to `[0, 1]`.
///
/// 8- and 16-bit depths are accepted. RGB input is reduced with luma weights
/// `0.299 R + 0.587 G + 0.114 B`; an alpha channel is ignored.
pub fn load_grayscale<T: Scalar>(path: impl AsRef<Path>) -> Result<Raster<T>> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)?.with_guessed_format()?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Pnm) => {}
        Some(other) => {
            return Err(Error::Format(format!("{}: {other:?} is not PNG or PGM", path.display())))
        }
        None => return Err(Error::Format(format!("{}: unrecognized format", path.display()))),
    }
    let decoded = reader.decode()?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);

    fn luma(r: f64, g: f64, b: f64) -> f64 {
        0.299 * r + 0.587 * g + 0.114 * b
    }

    let values: Vec<f64> = match &decoded {
        DynamicImage::ImageLuma8(buf) => buf.as_raw().iter().map(|&v| v as f64 / 255.0).collect(),
        DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        DynamicImage::ImageLuma16(buf) => {
            buf.as_raw().iter().map(|&v| v as f64 / 65535.0).collect()
        }
        DynamicImage::ImageLumaA16(buf) => {
            buf.pixels().map(|p| p.0[0] as f64 / 65535.0).collect()
        }
        DynamicImage::ImageRgb8(buf) => buf
            .pixels()
            .map(|p| luma(p.0[0] as f64, p.0[1] as f64, p.0[2] as f64) / 255.0)
            .collect(),
        DynamicImage::ImageRgba8(buf) => buf
            .pixels()
            .map(|p| luma(p.0[0] as f64, p.0[1] as f64, p.0[2] as f64) / 255.0)
            .collect(),
        DynamicImage::ImageRgb16(buf) => buf
            .pixels()
            .map(|p| luma(p.0[0] as f64, p.0[1] as f64, p.0[2] as f64) / 65535.0)
            .collect(),
        DynamicImage::ImageRgba16(buf) => buf
            .pixels()
            .map(|p| luma(p.0[0] as f64, p.0[1] as f64, p.0[2] as f64) / 65535.0)
            .collect(),
        other => {
            return Err(Error::Format(format!(
                "{}: unsupported pixel layout {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    Raster::new(h, w, values.into_iter().map(|v| T::of(v.clamp(0.0, 1.0))).collect())
}

/// `round(v * 255)` clamped to `[0, 255]`.
#[inline]
pub fn quantize_u8<T: Scalar>(value: T) -> u8 {
    let v = (value.to_f64_lossy() * 255.0).round();
    if v.is_nan() {
        0
    } else {
        v.clamp(0.0, 255.0) as u8
    }
}

/// Writes an 8-bit grayscale PNG or PGM (chosen by extension).
pub fn save_grayscale<T: Scalar>(img: &Raster<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let format = output_format(path)?;
    let bytes: Vec<u8> = img.values().iter().map(|&v| quantize_u8(v)).collect();
    image::save_buffer_with_format(
        path,
        &bytes,
        img.width() as u32,
        img.height() as u32,
        ExtendedColorType::L8,
        format,
    )?;
    Ok(())
}

/// Highlight color used for mask-positive pixels in overlays.
pub const HIGHLIGHT: [u8; 3] = [255, 255, 255];

/// Renders `base` as 8-bit RGB with every mask-positive pixel painted [`HIGHLIGHT`].
pub fn overlay_rgb<T: Scalar>(base: &Raster<T>, mask: &Raster<T>) -> Result<Vec<u8>> {
    if base.dims() != mask.dims() {
        return Err(Error::argument(format!(
            "overlay base {:?} and mask {:?} differ in size",
            base.dims(),
            mask.dims()
        )));
    }
    if !mask.is_binary() {
        return Err(Error::argument("overlay mask must be binary"));
    }
    let mut rgb = Vec::with_capacity(base.values().len() * 3);
    for (&b, &m) in base.values().iter().zip(mask.values()) {
        if m == T::one() {
            rgb.extend_from_slice(&HIGHLIGHT);
        } else {
            let q = quantize_u8(b);
            rgb.extend_from_slice(&[q, q, q]);
        }
    }
    Ok(rgb)
}

/// Writes `base` as RGB with mask pixels highlighted (PNG, or PPM for `.ppm`).
pub fn save_overlay<T: Scalar>(
    base: &Raster<T>,
    mask: &Raster<T>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let rgb = overlay_rgb(base, mask)?;
    let format = output_format(path)?;
    image::save_buffer_with_format(
        path,
        &rgb,
        base.width() as u32,
        base.height() as u32,
        ExtendedColorType::Rgb8,
        format,
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(values: &[f64]) -> Raster<f64> {
        Raster::new(1, values.len(), values.to_vec()).unwrap()
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Raster::<f64>::new(0, 3, vec![]).is_err());
        assert!(Raster::new(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn pad_zero_amount_is_identity() {
        let img = Raster::from_fn(3, 4, |r, c| (r * 4 + c) as f64);
        for mode in [PaddingMode::Reflect, PaddingMode::Wrap, PaddingMode::Zero] {
            assert_eq!(pad(&img, Padding::default(), mode).unwrap(), img);
        }
    }

    #[test]
    fn pad_reflect_mirrors_without_edge() {
        let img = row(&[1.0, 2.0, 3.0]);
        let out = pad(&img, Padding { left: 1, ..Default::default() }, PaddingMode::Reflect).unwrap();
        assert_eq!(out.values(), &[2.0, 1.0, 2.0, 3.0]);
        let out = pad(&img, Padding { left: 2, right: 2, ..Default::default() }, PaddingMode::Reflect)
            .unwrap();
        assert_eq!(out.values(), &[3.0, 2.0, 1.0, 2.0, 3.0, 2.0, 1.0]);
    }

    #[test]
    fn pad_wrap_is_toroidal() {
        let img = row(&[1.0, 2.0, 3.0]);
        let out = pad(&img, Padding { left: 1, ..Default::default() }, PaddingMode::Wrap).unwrap();
        assert_eq!(out.values(), &[3.0, 1.0, 2.0, 3.0]);
        let out = pad(&img, Padding { right: 4, ..Default::default() }, PaddingMode::Wrap).unwrap();
        assert_eq!(out.values(), &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0, 1.0]);
    }

    #[test]
    fn pad_zero_fills_border() {
        let img = Raster::filled(1, 1, 5.0);
        let out = pad(&img, Padding::uniform(1), PaddingMode::Zero).unwrap();
        assert_eq!(out.dims(), (3, 3));
        assert_eq!(out.values().iter().sum::<f64>(), 5.0);
        assert_eq!(out.get(1, 1), 5.0);
    }

    #[test]
    fn pad_reflect_rejects_oversized_amount() {
        let img = row(&[1.0, 2.0, 3.0]);
        let err = pad(&img, Padding { left: 3, ..Default::default() }, PaddingMode::Reflect);
        assert!(matches!(err, Err(Error::Argument(_))));
        // Height is 1, so any vertical reflect padding is too large.
        assert!(pad(&img, Padding { top: 1, ..Default::default() }, PaddingMode::Reflect).is_err());
    }

    #[test]
    fn padding_mode_parses() {
        assert_eq!("Reflect".parse::<PaddingMode>().unwrap(), PaddingMode::Reflect);
        assert_eq!("wrap".parse::<PaddingMode>().unwrap(), PaddingMode::Wrap);
        assert!("mirror".parse::<PaddingMode>().is_err());
    }

    #[test]
    fn quantization_rounds_and_clamps() {
        assert_eq!(quantize_u8(0.0f64), 0);
        assert_eq!(quantize_u8(1.0f64), 255);
        assert_eq!(quantize_u8(128.0f64 / 255.0), 128);
        assert_eq!(quantize_u8(-0.5f64), 0);
        assert_eq!(quantize_u8(7.0f64), 255);
    }

    #[test]
    fn overlay_paints_only_mask_pixels() {
        let base = Raster::from_fn(2, 3, |r, c| (r * 3 + c) as f64 / 10.0);
        let empty = Raster::zeros(2, 3);
        let rgb = overlay_rgb(&base, &empty).unwrap();
        let expected: Vec<u8> =
            base.values().iter().flat_map(|&v| [quantize_u8(v); 3]).collect();
        assert_eq!(rgb, expected);

        let full = Raster::filled(2, 3, 1.0);
        assert!(overlay_rgb(&base, &full).unwrap().iter().all(|&b| b == 255));

        let mut single = Raster::zeros(2, 3);
        single.set(0, 0, 1.0);
        let rgb = overlay_rgb(&base, &single).unwrap();
        assert_eq!(&rgb[..3], &HIGHLIGHT);
        assert_eq!(&rgb[3..], &expected[3..]);
    }

    #[test]
    fn overlay_rejects_mismatch_and_non_binary() {
        let base = Raster::<f64>::zeros(2, 2);
        assert!(overlay_rgb(&base, &Raster::zeros(2, 3)).is_err());
        assert!(overlay_rgb(&base, &Raster::filled(2, 2, 0.5)).is_err());
    }

    proptest! {
        #[test]
        fn pad_interior_matches_input(
            h in 1usize..7, w in 1usize..7,
            t in 0usize..6, b in 0usize..6, l in 0usize..6, r in 0usize..6,
            mode_idx in 0usize..3,
        ) {
            let mode = [PaddingMode::Reflect, PaddingMode::Wrap, PaddingMode::Zero][mode_idx];
            let img = Raster::from_fn(h, w, |r, c| (r * 31 + c * 7) as f64);
            let padding = if mode == PaddingMode::Reflect {
                Padding { top: t.min(h - 1), bottom: b.min(h - 1), left: l.min(w - 1), right: r.min(w - 1) }
            } else {
                Padding { top: t, bottom: b, left: l, right: r }
            };
            let out = pad(&img, padding, mode).unwrap();
            prop_assert_eq!(out.dims(), (h + padding.top + padding.bottom, w + padding.left + padding.right));
            let interior = out.window(padding.top, padding.left, h, w).unwrap();
            prop_assert_eq!(interior, img);
        }
    }
}
