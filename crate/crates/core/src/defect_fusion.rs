//! Fusion of per-crop defective blocks into one defect mask, its Canny edges,
//! and the end-to-end [`inspect`] pipeline.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{ground_truth_labels, score, ConfusionCounts, Metrics};
use crate::filter_engine::{gabor_space_with, ConvolutionMethod};
use crate::gabor_bank::GaborBankConfig;
use crate::imaging::{overlay_rgb, PaddingMode, Raster};
use crate::periodic_blocks::{block_energies, four_corner_crops, BlockGrid, BlockLabel, Periodicity};
use crate::scalar::Scalar;
use crate::ward_clustering::{
    below_separation, cut_two, select_defective, ward_cluster, ClusterAssignment, Dendrogram,
};

/// One-pixel perimeters of every defective block of every grid, in image
/// coordinates. Overlapping perimeters simply union.
pub fn block_boundaries<T: Scalar>(
    grids: &[BlockGrid<T>],
    dims: (usize, usize),
) -> Result<Raster<T>> {
    let mut out = Raster::zeros(dims.0, dims.1);
    for grid in grids {
        for (i, j) in grid.defective_blocks() {
            let (r0, c0, h, w) = grid.crop.block_rect(grid.period, i, j);
            if r0 + h > dims.0 || c0 + w > dims.1 {
                return Err(Error::argument(format!(
                    "block ({i},{j}) of crop {:?} lies outside {}x{}",
                    grid.crop.corner, dims.0, dims.1
                )));
            }
            let (r1, c1) = (r0 + h - 1, c0 + w - 1);
            for c in c0..=c1 {
                out.set(r0, c, T::one());
                out.set(r1, c, T::one());
            }
            for r in r0..=r1 {
                out.set(r, c0, T::one());
                out.set(r, c1, T::one());
            }
        }
    }
    Ok(out)
}

/// Fills every background region not 4-connected to the image border.
pub fn fill_holes<T: Scalar>(boundaries: &Raster<T>) -> Raster<T> {
    let (h, w) = boundaries.dims();
    let foreground = |r: usize, c: usize| boundaries.get(r, c) > T::of(0.5);
    let mut outside = vec![false; h * w];
    let mut queue = VecDeque::new();
    let seed = |r: usize, c: usize, outside: &mut Vec<bool>, queue: &mut VecDeque<(usize, usize)>| {
        if !foreground(r, c) && !outside[r * w + c] {
            outside[r * w + c] = true;
            queue.push_back((r, c));
        }
    };
    for c in 0..w {
        seed(0, c, &mut outside, &mut queue);
        seed(h - 1, c, &mut outside, &mut queue);
    }
    for r in 0..h {
        seed(r, 0, &mut outside, &mut queue);
        seed(r, w - 1, &mut outside, &mut queue);
    }
    while let Some((r, c)) = queue.pop_front() {
        if r > 0 {
            seed(r - 1, c, &mut outside, &mut queue);
        }
        if r + 1 < h {
            seed(r + 1, c, &mut outside, &mut queue);
        }
        if c > 0 {
            seed(r, c - 1, &mut outside, &mut queue);
        }
        if c + 1 < w {
            seed(r, c + 1, &mut outside, &mut queue);
        }
    }
    Raster::from_fn(h, w, |r, c| if outside[r * w + c] { T::zero() } else { T::one() })
}

/// Canny settings. Thresholds are relative: `high = high_ratio * max |grad|`
/// and `low = low_ratio * high`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CannyParams {
    pub sigma: f64,
    /// Odd side of the Gaussian window.
    pub window: usize,
    pub high_ratio: f64,
    pub low_ratio: f64,
}

impl Default for CannyParams {
    fn default() -> Self {
        Self { sigma: 1.0, window: 5, high_ratio: 0.2, low_ratio: 0.4 }
    }
}

impl CannyParams {
    fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || self.window % 2 == 0 {
            return Err(Error::argument("Canny needs sigma > 0 and an odd window"));
        }
        if !(self.high_ratio > 0.0 && self.high_ratio <= 1.0)
            || !(self.low_ratio > 0.0 && self.low_ratio <= 1.0)
        {
            return Err(Error::argument("Canny ratios must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Zero outside the raster.
#[inline]
fn at<T: Scalar>(img: &[T], h: usize, w: usize, r: isize, c: isize) -> T {
    if r < 0 || c < 0 || r >= h as isize || c >= w as isize {
        T::zero()
    } else {
        img[r as usize * w + c as usize]
    }
}

fn gaussian_blur<T: Scalar>(img: &Raster<T>, params: &CannyParams) -> Vec<T> {
    let (h, w) = img.dims();
    let radius = (params.window / 2) as isize;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|d| (-(d * d) as f64 / (2.0 * params.sigma * params.sigma)).exp())
        .collect();
    let norm: f64 = taps.iter().sum();
    let taps: Vec<T> = taps.into_iter().map(|t| T::of(t / norm)).collect();

    let src = img.values();
    let mut horizontal = vec![T::zero(); h * w];
    for r in 0..h as isize {
        for c in 0..w as isize {
            let mut acc = T::zero();
            for (k, &t) in taps.iter().enumerate() {
                acc = acc + t * at(src, h, w, r, c + k as isize - radius);
            }
            horizontal[r as usize * w + c as usize] = acc;
        }
    }
    let mut out = vec![T::zero(); h * w];
    for r in 0..h as isize {
        for c in 0..w as isize {
            let mut acc = T::zero();
            for (k, &t) in taps.iter().enumerate() {
                acc = acc + t * at(&horizontal, h, w, r + k as isize - radius, c);
            }
            out[r as usize * w + c as usize] = acc;
        }
    }
    out
}

/// Canny edges of `mask`, treating everything outside the raster as 0 so
/// regions touching the border still get a closed contour.
pub fn canny_edges<T: Scalar>(mask: &Raster<T>, params: &CannyParams) -> Result<Raster<T>> {
    params.validate()?;
    let (h, w) = mask.dims();
    let blurred = gaussian_blur(mask, params);
    let two = T::of(2.0);

    let mut gx = vec![T::zero(); h * w];
    let mut gy = vec![T::zero(); h * w];
    let mut magnitude = vec![T::zero(); h * w];
    let mut peak = T::zero();
    for r in 0..h as isize {
        for c in 0..w as isize {
            let p = |dr: isize, dc: isize| at(&blurred, h, w, r + dr, c + dc);
            let x = (p(-1, 1) + two * p(0, 1) + p(1, 1)) - (p(-1, -1) + two * p(0, -1) + p(1, -1));
            let y = (p(1, -1) + two * p(1, 0) + p(1, 1)) - (p(-1, -1) + two * p(-1, 0) + p(-1, 1));
            let idx = r as usize * w + c as usize;
            gx[idx] = x;
            gy[idx] = y;
            magnitude[idx] = x.hypot(y);
            peak = peak.max(magnitude[idx]);
        }
    }
    if !(peak > T::zero()) {
        return Ok(Raster::zeros(h, w));
    }

    // Non-maximum suppression along the gradient direction quantized to 45 degrees.
    let tan_22 = T::of(std::f64::consts::FRAC_PI_8.tan());
    let tan_67 = T::of((3.0 * std::f64::consts::FRAC_PI_8).tan());
    let mut thin = vec![T::zero(); h * w];
    for r in 0..h as isize {
        for c in 0..w as isize {
            let idx = r as usize * w + c as usize;
            let m = magnitude[idx];
            if !(m > T::zero()) {
                continue;
            }
            let (x, y) = (gx[idx], gy[idx]);
            let (ax, ay) = (x.abs(), y.abs());
            let (dr, dc) = if ay <= ax * tan_22 {
                (0, 1)
            } else if ay >= ax * tan_67 {
                (1, 0)
            } else if (x > T::zero()) == (y > T::zero()) {
                (1, 1)
            } else {
                (1, -1)
            };
            let a = at(&magnitude, h, w, r + dr, c + dc);
            let b = at(&magnitude, h, w, r - dr, c - dc);
            if m >= a && m >= b {
                thin[idx] = m;
            }
        }
    }

    let high = peak * T::of(params.high_ratio);
    let low = high * T::of(params.low_ratio);
    let mut edges = vec![false; h * w];
    let mut stack = Vec::new();
    for start in 0..h * w {
        if edges[start] || thin[start] < high {
            continue;
        }
        edges[start] = true;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            let (r, c) = ((idx / w) as isize, (idx % w) as isize);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (nr, nc) = (r + dr, c + dc);
                    if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                        continue;
                    }
                    let n = nr as usize * w + nc as usize;
                    if !edges[n] && thin[n] >= low {
                        edges[n] = true;
                        stack.push(n);
                    }
                }
            }
        }
    }
    Raster::new(h, w, edges.into_iter().map(|e| if e { T::one() } else { T::zero() }).collect())
}

#[derive(Debug, Clone)]
pub struct InspectOptions<T> {
    pub padding: PaddingMode,
    pub method: ConvolutionMethod,
    /// When set, a crop whose final merge costs at most `tau` times the median
    /// merge cost is declared defect-free.
    pub min_separation: Option<f64>,
    pub canny: CannyParams,
    /// Binary mask of truly defective pixels, same size as the image.
    pub ground_truth: Option<Raster<T>>,
    /// Fraction of a block that must be defective in the ground truth.
    pub min_overlap: f64,
}

impl<T> Default for InspectOptions<T> {
    fn default() -> Self {
        Self {
            padding: PaddingMode::default(),
            method: ConvolutionMethod::default(),
            min_separation: None,
            canny: CannyParams::default(),
            ground_truth: None,
            min_overlap: 0.0,
        }
    }
}

/// Clustering outcome for one corner crop.
#[derive(Debug, Clone)]
pub struct CropAnalysis<T> {
    pub grid: BlockGrid<T>,
    pub dendrogram: Dendrogram<T>,
    pub assignment: ClusterAssignment,
    /// True when the separation gate suppressed every defect label.
    pub gated: bool,
    pub truth: Option<Vec<BlockLabel>>,
    pub counts: Option<ConfusionCounts>,
}

#[derive(Debug, Clone)]
pub struct InspectionReport<T> {
    pub period: Periodicity,
    pub bank: GaborBankConfig<T>,
    pub padding: PaddingMode,
    pub min_overlap: f64,
    pub gabor_space: Raster<T>,
    pub crops: Vec<CropAnalysis<T>>,
    pub boundaries: Raster<T>,
    pub mask: Raster<T>,
    pub edges: Raster<T>,
    /// Pooled over the four crops when ground truth was supplied.
    pub counts: Option<ConfusionCounts>,
    pub metrics: Option<Metrics>,
}

impl<T: Scalar> InspectionReport<T> {
    pub fn dims(&self) -> (usize, usize) {
        self.mask.dims()
    }

    pub fn num_defective_blocks(&self) -> usize {
        self.crops.iter().map(|c| c.grid.num_defective()).sum()
    }

    pub fn grids(&self) -> impl Iterator<Item = &BlockGrid<T>> {
        self.crops.iter().map(|c| &c.grid)
    }

    /// RGB bytes of `base` with the edge raster highlighted.
    pub fn overlay(&self, base: &Raster<T>) -> Result<Vec<u8>> {
        overlay_rgb(base, &self.edges)
    }

    pub fn summary(&self) -> ReportSummary {
        let count = |r: &Raster<T>| r.values().iter().filter(|&&v| v == T::one()).count();
        ReportSummary {
            image: ImageDims { height: self.dims().0, width: self.dims().1 },
            periodicity: self.period,
            bank: BankSummary {
                scales: self.bank.num_scales,
                orientations: self.bank.num_orientations,
                sigma: self.bank.sigma.to_f64_lossy(),
                k_max: self.bank.k_max.to_f64_lossy(),
                spacing: self.bank.spacing.to_f64_lossy(),
                kernel_height: self.bank.kernel_height,
                kernel_width: self.bank.kernel_width,
            },
            padding: self.padding,
            crops: self.crops.iter().map(CropSummary::from_analysis).collect(),
            defective_blocks: self.num_defective_blocks(),
            mask_pixels: count(&self.mask),
            edge_pixels: count(&self.edges),
            evaluation: self.counts.map(|counts| EvaluationSummary {
                unit: "per_crop_block".to_string(),
                min_overlap: self.min_overlap,
                counts,
                metrics: counts.metrics(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageDims {
    pub height: usize,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankSummary {
    pub scales: usize,
    pub orientations: usize,
    pub sigma: f64,
    pub k_max: f64,
    pub spacing: f64,
    pub kernel_height: usize,
    pub kernel_width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSummary {
    pub row: usize,
    pub col: usize,
    pub energy: f64,
    pub label: BlockLabel,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub truth: Option<BlockLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropSummary {
    pub corner: crate::periodic_blocks::Corner,
    pub row_offset: usize,
    pub col_offset: usize,
    pub height: usize,
    pub width: usize,
    pub block_rows: usize,
    pub block_cols: usize,
    pub gated: bool,
    pub final_merge_cost: f64,
    pub defective_blocks: usize,
    pub blocks: Vec<BlockSummary>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub counts: Option<ConfusionCounts>,
}

impl CropSummary {
    fn from_analysis<T: Scalar>(a: &CropAnalysis<T>) -> Self {
        let g = &a.grid;
        Self {
            corner: g.crop.corner,
            row_offset: g.crop.row_offset,
            col_offset: g.crop.col_offset,
            height: g.crop.height,
            width: g.crop.width,
            block_rows: g.rows,
            block_cols: g.cols,
            gated: a.gated,
            final_merge_cost: a.dendrogram.merges.last().map_or(0.0, |m| m.cost.to_f64_lossy()),
            defective_blocks: g.num_defective(),
            blocks: (0..g.len())
                .map(|idx| BlockSummary {
                    row: idx / g.cols,
                    col: idx % g.cols,
                    energy: g.energies[idx].to_f64_lossy(),
                    label: g.labels[idx],
                    truth: a.truth.as_ref().map(|t| t[idx]),
                })
                .collect(),
            counts: a.counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    /// Counting unit; blocks are counted once per crop.
    pub unit: String,
    pub min_overlap: f64,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
}

/// Serializable form of an [`InspectionReport`] (the `.report.json` file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub image: ImageDims,
    pub periodicity: Periodicity,
    pub bank: BankSummary,
    pub padding: PaddingMode,
    pub crops: Vec<CropSummary>,
    pub defective_blocks: usize,
    pub mask_pixels: usize,
    pub edge_pixels: usize,
    pub evaluation: Option<EvaluationSummary>,
}

/// Clusters one crop's blocks and labels the defective minority.
pub fn classify_blocks<T: Scalar>(
    grid: &mut BlockGrid<T>,
    min_separation: Option<f64>,
) -> Result<(Dendrogram<T>, ClusterAssignment, bool)> {
    let dendrogram = ward_cluster(&grid.energies)?;
    let assignment = select_defective(&cut_two(&dendrogram)?, &grid.energies)?;
    let gated = min_separation.is_some_and(|tau| below_separation(&dendrogram, tau));
    grid.labels = if gated {
        vec![BlockLabel::DefectFree; grid.len()]
    } else {
        assignment.block_labels()
    };
    Ok((dendrogram, assignment, gated))
}

/// Runs the full pipeline on one grayscale image.
pub fn inspect<T: Scalar>(
    img: &Raster<T>,
    period: Periodicity,
    cfg: &GaborBankConfig<T>,
    opts: &InspectOptions<T>,
) -> Result<InspectionReport<T>> {
    let dims = img.dims();
    let crops = four_corner_crops(dims.0, dims.1, period)?;
    if let Some(gt) = &opts.ground_truth {
        if gt.dims() != dims {
            return Err(Error::argument(format!(
                "ground truth {:?} does not match image {:?}",
                gt.dims(),
                dims
            )));
        }
    }
    log::debug!("gabor space: {}x{} image, {} kernels", dims.0, dims.1, cfg.num_kernels());
    let space = gabor_space_with(img, cfg, opts.padding, opts.method)?;

    let analyses: Vec<CropAnalysis<T>> = crops
        .par_iter()
        .map(|crop| {
            let mut grid = block_energies(&space, *crop, period)?;
            let (dendrogram, assignment, gated) = classify_blocks(&mut grid, opts.min_separation)?;
            let (truth, counts) = match &opts.ground_truth {
                Some(gt) => {
                    let truth = ground_truth_labels(gt, crop, period, opts.min_overlap, dims)?;
                    let (counts, _) = score(&grid.labels, &truth)?;
                    (Some(truth), Some(counts))
                }
                None => (None, None),
            };
            log::debug!(
                "{} crop: {} of {} blocks defective{}",
                crop.corner.as_str(),
                grid.num_defective(),
                grid.len(),
                if gated { " (gated)" } else { "" }
            );
            Ok(CropAnalysis { grid, dendrogram, assignment, gated, truth, counts })
        })
        .collect::<Result<_>>()?;

    let grids: Vec<BlockGrid<T>> = analyses.iter().map(|a| a.grid.clone()).collect();
    let boundaries = block_boundaries(&grids, dims)?;
    let mask = fill_holes(&boundaries);
    let edges = canny_edges(&mask, &opts.canny)?;
    let counts = opts
        .ground_truth
        .as_ref()
        .map(|_| analyses.iter().filter_map(|a| a.counts).sum::<ConfusionCounts>());

    Ok(InspectionReport {
        period,
        bank: *cfg,
        padding: opts.padding,
        min_overlap: opts.min_overlap,
        gabor_space: space,
        crops: analyses,
        boundaries,
        mask,
        edges,
        metrics: counts.map(|c| c.metrics()),
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::periodic_blocks::{Corner, CropSpec};

    fn grid_with(crop: CropSpec, period: Periodicity, defective: &[(usize, usize)]) -> BlockGrid<f64> {
        let rows = crop.height / period.rows;
        let cols = crop.width / period.cols;
        let mut labels = vec![BlockLabel::DefectFree; rows * cols];
        for &(i, j) in defective {
            labels[i * cols + j] = BlockLabel::Defective;
        }
        BlockGrid { crop, period, rows, cols, energies: vec![0.0; rows * cols], labels }
    }

    fn top_left(h: usize, w: usize) -> CropSpec {
        CropSpec { corner: Corner::TopLeft, row_offset: 0, col_offset: 0, height: h, width: w }
    }

    fn ones(r: &Raster<f64>) -> usize {
        r.values().iter().filter(|&&v| v == 1.0).count()
    }

    #[test]
    fn boundary_perimeters() {
        let period = Periodicity::new(25, 25).unwrap();
        let none = grid_with(top_left(100, 100), period, &[]);
        assert_eq!(ones(&block_boundaries(&[none], (100, 100)).unwrap()), 0);

        let one = grid_with(top_left(100, 100), period, &[(0, 0)]);
        assert_eq!(ones(&block_boundaries(&[one.clone()], (100, 100)).unwrap()), 96);

        let shifted = CropSpec { corner: Corner::BottomRight, row_offset: 0, col_offset: 24, height: 100, width: 75 };
        let neighbour = grid_with(shifted, period, &[(0, 0)]);
        let union = block_boundaries(&[one.clone(), neighbour.clone()], (100, 100)).unwrap();
        // the shared column 24 is counted once
        assert_eq!(ones(&union), 96 + 96 - 25);
        assert!(union.is_binary());
    }

    #[test]
    fn hollow_rectangle_fills_solid() {
        let mut img = Raster::<f64>::zeros(30, 30);
        for i in 5..15 {
            img.set(5, i, 1.0);
            img.set(14, i, 1.0);
            img.set(i, 5, 1.0);
            img.set(i, 14, 1.0);
        }
        let filled = fill_holes(&img);
        for r in 0..30 {
            for c in 0..30 {
                let inside = (5..15).contains(&r) && (5..15).contains(&c);
                assert_eq!(filled.get(r, c), if inside { 1.0 } else { 0.0 });
            }
        }
        assert_eq!(fill_holes(&filled), filled);
        assert_eq!(ones(&fill_holes(&Raster::zeros(8, 8))), 0);
    }

    #[test]
    fn nested_rectangles_fill_outer() {
        let mut img = Raster::<f64>::zeros(40, 40);
        let mut rect = |r0: usize, r1: usize| {
            for i in r0..=r1 {
                img.set(r0, i, 1.0);
                img.set(r1, i, 1.0);
                img.set(i, r0, 1.0);
                img.set(i, r1, 1.0);
            }
        };
        rect(5, 30);
        rect(10, 20);
        let filled = fill_holes(&img);
        assert_eq!(ones(&filled), 26 * 26);
    }

    #[test]
    fn diagonal_gap_does_not_leak() {
        // A closed ring of 4-connected pixels with a diagonal-only opening
        // stays closed to the 4-connected background flood.
        let mut img = Raster::<f64>::zeros(7, 7);
        for (r, c) in [(1, 2), (1, 3), (2, 1), (2, 4), (3, 1), (3, 4), (4, 2), (4, 3)] {
            img.set(r, c, 1.0);
        }
        let filled = fill_holes(&img);
        assert_eq!(filled.get(2, 2), 1.0);
        assert_eq!(filled.get(3, 3), 1.0);
    }

    #[test]
    fn canny_on_empty_mask() {
        let edges = canny_edges(&Raster::<f64>::zeros(20, 20), &CannyParams::default()).unwrap();
        assert_eq!(ones(&edges), 0);
    }

    #[test]
    fn canny_traces_square() {
        let mask = Raster::from_fn(100, 100, |r, c| {
            if (40..60).contains(&r) && (40..60).contains(&c) { 1.0 } else { 0.0 }
        });
        let edges = canny_edges(&mask, &CannyParams::default()).unwrap();
        for r in 0..100 {
            for c in 0..100 {
                if edges.get(r, c) == 1.0 {
                    let near_row = (39..=40).contains(&r) || (59..=60).contains(&r);
                    let near_col = (39..=40).contains(&c) || (59..=60).contains(&c);
                    let in_band = (39..=60).contains(&r) && (39..=60).contains(&c);
                    assert!(in_band && (near_row || near_col), "stray edge at ({r},{c})");
                }
            }
        }
        assert!(ones(&edges) >= 4 * 20);
    }

    #[test]
    fn canny_single_pixel_is_small() {
        let mut mask = Raster::<f64>::zeros(15, 15);
        mask.set(7, 7, 1.0);
        let edges = canny_edges(&mask, &CannyParams::default()).unwrap();
        assert!(ones(&edges) <= 9);
        for r in 0..15 {
            for c in 0..15 {
                if edges.get(r, c) == 1.0 {
                    assert!(r.abs_diff(7) <= 1 && c.abs_diff(7) <= 1);
                }
            }
        }
    }

    #[test]
    fn canny_rejects_bad_params() {
        let mask = Raster::<f64>::zeros(5, 5);
        let bad = CannyParams { window: 4, ..Default::default() };
        assert!(canny_edges(&mask, &bad).is_err());
        let bad = CannyParams { high_ratio: 0.0, ..Default::default() };
        assert!(canny_edges(&mask, &bad).is_err());
    }

    #[test]
    fn uniform_image_completes() {
        let img = Raster::<f64>::filled(60, 60, 0.5);
        let period = Periodicity::new(10, 10).unwrap();
        let cfg = GaborBankConfig::for_periodicity(period).unwrap();
        let report = inspect(&img, period, &cfg, &InspectOptions::default()).unwrap();
        assert_eq!(report.crops.len(), 4);
        for crop in &report.crops {
            let n = crop.grid.len();
            assert!(crop.grid.num_defective() <= n / 2);
        }
        let again = inspect(&img, period, &cfg, &InspectOptions::default()).unwrap();
        assert_eq!(again.mask, report.mask);
    }

    #[test]
    fn inspect_rejects_mismatched_truth() {
        let img = Raster::<f64>::filled(40, 40, 0.5);
        let period = Periodicity::new(10, 10).unwrap();
        let cfg = GaborBankConfig::for_periodicity(period).unwrap();
        let opts = InspectOptions { ground_truth: Some(Raster::zeros(40, 41)), ..Default::default() };
        assert!(inspect(&img, period, &cfg, &opts).is_err());
        let small = Raster::<f64>::filled(15, 40, 0.5);
        assert!(inspect(&small, period, &cfg, &InspectOptions::default()).is_err());
    }
}
