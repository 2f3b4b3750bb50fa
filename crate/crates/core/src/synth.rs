//! Seeded periodic textures with injected defects and exact ground truth.
//!
//! The generated image holds `periods.0 x periods.1` whole units, so all four
//! corner crops coincide with the full image and "aligned" has one meaning.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::Raster;
use crate::periodic_blocks::Periodicity;
use crate::scalar::Scalar;

/// Additive uniform noise amplitude applied to every pixel.
const NOISE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextureKind {
    /// Four quadrants per unit, alternating dark and light.
    Checker,
    /// Sinusoidal vertical stripes crossed by a thin weft line per unit.
    Stripes,
    /// One bright disk centered in every unit.
    Dots,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefectKind {
    #[default]
    None,
    /// Inverted band a quarter-unit thick and three units long.
    Bar,
    /// One unit-sized patch with the pattern missing.
    Hole,
    /// Brightened disk.
    Blob,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    /// Footprint confined to whole blocks.
    #[default]
    Aligned,
    /// Footprint shifted half a unit across one block boundary.
    Straddling,
}

macro_rules! parse_enum {
    ($ty:ty, $($name:literal => $variant:expr),+) => {
        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($name => Ok($variant),)+
                    other => Err(Error::argument(format!(
                        "unknown {} '{other}'", stringify!($ty)
                    ))),
                }
            }
        }
    };
}

parse_enum!(TextureKind, "checker" => TextureKind::Checker, "stripes" => TextureKind::Stripes, "dots" => TextureKind::Dots);
parse_enum!(DefectKind, "none" => DefectKind::None, "bar" => DefectKind::Bar, "hole" => DefectKind::Hole, "blob" => DefectKind::Blob);
parse_enum!(Placement, "aligned" => Placement::Aligned, "straddling" => Placement::Straddling);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: TextureKind,
    /// Units along (rows, cols).
    pub periods: (usize, usize),
    pub unit: Periodicity,
    pub defect: DefectKind,
    pub placement: Placement,
    pub seed: u64,
}

/// Bounding box of the injected defect, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefectSite {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

#[derive(Debug, Clone)]
pub struct SynthSample<T> {
    pub image: Raster<T>,
    /// 1 on every perturbed pixel.
    pub ground_truth: Raster<T>,
    pub site: Option<DefectSite>,
}

fn texture_value(kind: TextureKind, unit: Periodicity, r: usize, c: usize, lo: f64, hi: f64) -> f64 {
    let (ur, uc) = (r % unit.rows, c % unit.cols);
    match kind {
        TextureKind::Checker => {
            if (ur < unit.rows / 2) != (uc < unit.cols / 2) {
                hi
            } else {
                lo
            }
        }
        TextureKind::Stripes => {
            let weft = (unit.rows / 8).max(1);
            if ur < weft {
                lo
            } else {
                let phase = std::f64::consts::TAU * uc as f64 / unit.cols as f64;
                lo + (hi - lo) * 0.5 * (1.0 + phase.cos())
            }
        }
        TextureKind::Dots => {
            let dy = ur as f64 - (unit.rows as f64 - 1.0) / 2.0;
            let dx = uc as f64 - (unit.cols as f64 - 1.0) / 2.0;
            let radius = unit.rows.min(unit.cols) as f64 / 4.0;
            if dx * dx + dy * dy <= radius * radius {
                hi
            } else {
                lo
            }
        }
    }
}

/// Generates a texture and its ground truth; identical specs give identical output.
pub fn generate<T: Scalar>(spec: &SynthSpec) -> Result<SynthSample<T>> {
    let unit = Periodicity::new(spec.unit.rows, spec.unit.cols)?;
    if spec.periods.0 < 2 || spec.periods.1 < 2 {
        return Err(Error::argument(format!(
            "need at least 2x2 periods, got {}x{}",
            spec.periods.0, spec.periods.1
        )));
    }
    if spec.defect == DefectKind::Bar && spec.periods.1 < 4 {
        return Err(Error::argument("a bar defect needs at least 4 periods across"));
    }
    let (h, w) = (spec.periods.0 * unit.rows, spec.periods.1 * unit.cols);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let lo = rng.random_range(0.15..0.3);
    let hi = rng.random_range(0.7..0.85);

    let mut pixels: Vec<f64> = (0..h * w)
        .map(|idx| {
            let base = texture_value(spec.kind, unit, idx / w, idx % w, lo, hi);
            base + NOISE * (2.0 * rng.random::<f64>() - 1.0)
        })
        .collect();
    let mut truth = vec![false; h * w];

    let site = if spec.defect == DefectKind::None {
        None
    } else {
        let span_cols = if spec.defect == DefectKind::Bar { 3 } else { 1 };
        // Straddling footprints move half a unit down or right, so leave room.
        let (extra_r, extra_c) = match spec.placement {
            Placement::Aligned => (0, 0),
            Placement::Straddling => (1, 1),
        };
        let bi = rng.random_range(0..spec.periods.0 - extra_r);
        let bj = rng.random_range(0..spec.periods.1 - span_cols + 1 - extra_c);
        let (mut row, mut col) = (bi * unit.rows, bj * unit.cols);
        let shift_rows = spec.placement == Placement::Straddling && rng.random::<bool>();
        let shift_cols = spec.placement == Placement::Straddling && !shift_rows;
        if shift_cols {
            col += unit.cols / 2;
        }
        let site = match spec.defect {
            DefectKind::Bar => {
                let thickness = (unit.rows / 4).max(2);
                // A row-straddling bar sits across the boundary below block row `bi`.
                row = if shift_rows {
                    row + unit.rows - thickness / 2
                } else {
                    row + rng.random_range(0..=unit.rows - thickness)
                };
                DefectSite { row, col, height: thickness, width: span_cols * unit.cols }
            }
            _ => {
                if shift_rows {
                    row += unit.rows / 2;
                }
                DefectSite { row, col, height: unit.rows, width: unit.cols }
            }
        };
        let fill = lo * 0.25;
        let (cy, cx) = (
            site.row as f64 + (site.height as f64 - 1.0) / 2.0,
            site.col as f64 + (site.width as f64 - 1.0) / 2.0,
        );
        let radius = 0.4 * site.height.min(site.width) as f64;
        for r in site.row..site.row + site.height {
            for c in site.col..site.col + site.width {
                let idx = r * w + c;
                let hit = match spec.defect {
                    DefectKind::Bar => {
                        pixels[idx] = 1.0 - pixels[idx];
                        true
                    }
                    DefectKind::Hole => {
                        pixels[idx] = fill + NOISE * (2.0 * rng.random::<f64>() - 1.0);
                        true
                    }
                    DefectKind::Blob => {
                        let (dy, dx) = (r as f64 - cy, c as f64 - cx);
                        if dy * dy + dx * dx <= radius * radius {
                            pixels[idx] += 0.4;
                            true
                        } else {
                            false
                        }
                    }
                    DefectKind::None => false,
                };
                truth[idx] |= hit;
            }
        }
        Some(site)
    };

    let image = Raster::new(h, w, pixels.into_iter().map(|v| T::of(v.clamp(0.0, 1.0))).collect())?;
    let ground_truth =
        Raster::new(h, w, truth.into_iter().map(|t| if t { T::one() } else { T::zero() }).collect())?;
    Ok(SynthSample { image, ground_truth, site })
}
