//! Four-corner cropping of the fused image into whole periodic units and the
//! per-block L1 energy feature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::Raster;
use crate::scalar::Scalar;

/// Size of one periodic unit in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Periodicity {
    /// Rows per unit (the column periodicity).
    pub rows: usize,
    /// Columns per unit (the row periodicity).
    pub cols: usize,
}

impl Periodicity {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(Error::argument(format!(
                "periodic unit {rows}x{cols} must be at least 2x2"
            )));
        }
        Ok(Self { rows, cols })
    }

    pub fn area(&self) -> usize {
        self.rows * self.cols
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Corner {
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
}

impl Corner {
    pub const ALL: [Corner; 4] =
        [Corner::TopLeft, Corner::TopRight, Corner::BottomLeft, Corner::BottomRight];

    pub fn as_str(self) -> &'static str {
        match self {
            Corner::TopLeft => "top_left",
            Corner::TopRight => "top_right",
            Corner::BottomLeft => "bottom_left",
            Corner::BottomRight => "bottom_right",
        }
    }
}

/// A crop anchored at one image corner, sized to whole periodic units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropSpec {
    pub corner: Corner,
    pub row_offset: usize,
    pub col_offset: usize,
    pub height: usize,
    pub width: usize,
}

impl CropSpec {
    fn validate(&self, dims: (usize, usize), period: Periodicity) -> Result<()> {
        let ok = self.height > 0
            && self.width > 0
            && self.height % period.rows == 0
            && self.width % period.cols == 0
            && self.row_offset + self.height <= dims.0
            && self.col_offset + self.width <= dims.1;
        if ok {
            Ok(())
        } else {
            Err(Error::argument(format!(
                "crop {self:?} is not a whole-unit window of a {}x{} image with unit {}x{}",
                dims.0, dims.1, period.rows, period.cols
            )))
        }
    }

    /// Image-space `(row, col, height, width)` of block `(i, j)`.
    pub fn block_rect(&self, period: Periodicity, i: usize, j: usize) -> (usize, usize, usize, usize) {
        (
            self.row_offset + i * period.rows,
            self.col_offset + j * period.cols,
            period.rows,
            period.cols,
        )
    }
}

/// Largest whole-unit crop: `(floor(M / P_c) * P_c, floor(N / P_r) * P_r)`.
///
/// Requires at least two units along each axis.
pub fn crop_sizes(height: usize, width: usize, period: Periodicity) -> Result<(usize, usize)> {
    Periodicity::new(period.rows, period.cols)?;
    if height < 2 * period.rows || width < 2 * period.cols {
        return Err(Error::argument(format!(
            "image {height}x{width} holds fewer than two {}x{} units per axis",
            period.rows, period.cols
        )));
    }
    Ok(((height / period.rows) * period.rows, (width / period.cols) * period.cols))
}

/// The four corner crops, ordered top-left, top-right, bottom-left, bottom-right.
pub fn four_corner_crops(height: usize, width: usize, period: Periodicity) -> Result<[CropSpec; 4]> {
    let (ch, cw) = crop_sizes(height, width, period)?;
    let (dr, dc) = (height - ch, width - cw);
    Ok(Corner::ALL.map(|corner| {
        let (row_offset, col_offset) = match corner {
            Corner::TopLeft => (0, 0),
            Corner::TopRight => (0, dc),
            Corner::BottomLeft => (dr, 0),
            Corner::BottomRight => (dr, dc),
        };
        CropSpec { corner, row_offset, col_offset, height: ch, width: cw }
    }))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockLabel {
    #[default]
    DefectFree,
    Defective,
}

impl BlockLabel {
    pub fn is_defective(self) -> bool {
        self == BlockLabel::Defective
    }
}

/// A crop tiled into periodic blocks with one energy per block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockGrid<T> {
    pub crop: CropSpec,
    pub period: Periodicity,
    pub rows: usize,
    pub cols: usize,
    /// Row-major, `rows * cols`.
    pub energies: Vec<T>,
    pub labels: Vec<BlockLabel>,
}

impl<T: Scalar> BlockGrid<T> {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn energy(&self, i: usize, j: usize) -> T {
        self.energies[i * self.cols + j]
    }

    pub fn label(&self, i: usize, j: usize) -> BlockLabel {
        self.labels[i * self.cols + j]
    }

    /// `(block_row, block_col)` of every defective block.
    pub fn defective_blocks(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.is_defective())
            .map(move |(idx, _)| (idx / self.cols, idx % self.cols))
    }

    pub fn num_defective(&self) -> usize {
        self.labels.iter().filter(|l| l.is_defective()).count()
    }
}

/// Sums `|fused|` over every block of `crop`; labels start defect-free.
pub fn block_energies<T: Scalar>(
    fused: &Raster<T>,
    crop: CropSpec,
    period: Periodicity,
) -> Result<BlockGrid<T>> {
    crop.validate(fused.dims(), period)?;
    let rows = crop.height / period.rows;
    let cols = crop.width / period.cols;
    let mut energies = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let (r0, c0, h, w) = crop.block_rect(period, i, j);
            let mut acc = T::zero();
            for r in r0..r0 + h {
                for &v in &fused.row(r)[c0..c0 + w] {
                    acc = acc + v.abs();
                }
            }
            energies.push(acc);
        }
    }
    Ok(BlockGrid {
        crop,
        period,
        rows,
        cols,
        labels: vec![BlockLabel::DefectFree; rows * cols],
        energies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(rows: usize, cols: usize) -> Periodicity {
        Periodicity::new(rows, cols).unwrap()
    }

    #[test]
    fn crop_size_examples() {
        assert_eq!(crop_sizes(256, 256, p(25, 25)).unwrap().0, 250);
        assert_eq!(crop_sizes(250, 250, p(25, 25)).unwrap().0, 250);
        assert_eq!(crop_sizes(99, 120, p(25, 30)).unwrap(), (75, 120));
        assert!(crop_sizes(49, 100, p(25, 25)).is_err());
        assert!(crop_sizes(100, 49, p(25, 25)).is_err());
        assert!(Periodicity::new(1, 5).is_err());
    }

    #[test]
    fn corner_offsets() {
        let crops = four_corner_crops(250, 250, p(25, 25)).unwrap();
        assert!(crops.iter().all(|c| (c.row_offset, c.col_offset) == (0, 0)));

        let crops = four_corner_crops(256, 256, p(25, 25)).unwrap();
        let offsets: Vec<_> = crops.iter().map(|c| (c.row_offset, c.col_offset)).collect();
        assert_eq!(offsets, vec![(0, 0), (0, 6), (6, 0), (6, 6)]);
        assert_eq!(crops.map(|c| c.corner), Corner::ALL);
    }

    #[test]
    fn energies_examples() {
        let period = p(25, 25);
        let crop = four_corner_crops(100, 100, period).unwrap()[0];

        let zeros = Raster::<f64>::zeros(100, 100);
        let grid = block_energies(&zeros, crop, period).unwrap();
        assert!(grid.energies.iter().all(|&e| e == 0.0));

        let ones = Raster::<f64>::filled(100, 100, 1.0);
        let grid = block_energies(&ones, crop, period).unwrap();
        assert!(grid.energies.iter().all(|&e| e == 625.0));
        assert_eq!((grid.rows, grid.cols), (4, 4));

        let mut spike = Raster::<f64>::zeros(100, 100);
        spike.set(30, 40, 10.0);
        let grid = block_energies(&spike, crop, period).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if (i, j) == (1, 1) { 10.0 } else { 0.0 };
                assert_eq!(grid.energy(i, j), want);
            }
        }
        assert_eq!(grid.num_defective(), 0);
    }

    #[test]
    fn invalid_crop_rejected() {
        let period = p(10, 10);
        let img = Raster::<f64>::zeros(30, 30);
        let crop = CropSpec { corner: Corner::TopLeft, row_offset: 5, col_offset: 0, height: 30, width: 30 };
        assert!(block_energies(&img, crop, period).is_err());
        let crop = CropSpec { height: 25, row_offset: 0, ..crop };
        assert!(block_energies(&img, crop, period).is_err());
    }

    proptest! {
        #[test]
        fn energies_sum_to_crop_l1(
            h in 4usize..40, w in 4usize..40, pr in 2usize..8, pc in 2usize..8, seed in 0u64..1000,
        ) {
            prop_assume!(h >= 2 * pr && w >= 2 * pc);
            let period = p(pr, pc);
            let img = Raster::from_fn(h, w, |r, c| (((r * 131 + c * 71) as u64 ^ seed) % 97) as f64 / 97.0);
            for crop in four_corner_crops(h, w, period).unwrap() {
                let grid = block_energies(&img, crop, period).unwrap();
                let window = img.window(crop.row_offset, crop.col_offset, crop.height, crop.width).unwrap();
                let total: f64 = grid.energies.iter().sum();
                prop_assert!((total - window.l1_norm()).abs() <= 1e-9 * window.l1_norm().max(1.0));
                prop_assert!(grid.energies.iter().all(|&e| e >= 0.0));
                prop_assert!(grid.len() >= 4);
            }
        }
    }
}
