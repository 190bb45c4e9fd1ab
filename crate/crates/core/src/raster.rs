//! Grid rasters of cover cells.
//!
//! A raster marks every grid box that intersects some cell of the outer
//! cover, so the marked region is itself an outer approximation of the
//! attractor (or of a cylinder set, when rooted at a word).
//!
//! The builder never materializes the full cover: a subtree whose ball only
//! touches boxes that are already marked is skipped. Because child cells
//! nest inside their parents, the skipped subtree cannot mark anything new,
//! so the result is bit-identical to rasterizing the complete cover.

use crate::error::{Error, Result};
use crate::geometry::Ball;
use crate::ifs::{IfsSystem, Word};
use crate::cover::CellFrame;

/// Axis-aligned grid: `dims[i]` boxes of side `cell_size` along axis `i`,
/// starting at `origin`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub origin: Vec<f64>,
    pub cell_size: f64,
    pub dims: Vec<usize>,
}

impl GridSpec {
    /// Grid spanning the system's bounding ball.
    pub fn covering(s: &IfsSystem, resolution: f64) -> Result<GridSpec> {
        if resolution <= 0.0 {
            return Err(Error::InvalidArgument("resolution must be positive".into()));
        }
        let ball = &s.geom().ball;
        let origin: Vec<f64> = ball.center.iter().map(|c| c - ball.radius).collect();
        let extent = 2.0 * ball.radius;
        let count = (extent / resolution).ceil().max(1.0) as usize;
        Ok(GridSpec { origin, cell_size: resolution, dims: vec![count; s.dimension] })
    }

    pub fn dimension(&self) -> usize {
        self.dims.len()
    }

    pub fn total_boxes(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn box_volume(&self) -> f64 {
        self.cell_size.powi(self.dimension() as i32)
    }

    /// Row-major flat index.
    pub fn flat(&self, idx: &[usize]) -> usize {
        let mut f = 0;
        for (i, &v) in idx.iter().enumerate() {
            f = f * self.dims[i] + v;
        }
        f
    }

    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let d = self.dimension();
        let mut idx = vec![0; d];
        for i in (0..d).rev() {
            idx[i] = flat % self.dims[i];
            flat /= self.dims[i];
        }
        idx
    }

    pub fn box_center(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .enumerate()
            .map(|(i, &v)| self.origin[i] + (v as f64 + 0.5) * self.cell_size)
            .collect()
    }

    pub fn box_low_corner(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .enumerate()
            .map(|(i, &v)| self.origin[i] + v as f64 * self.cell_size)
            .collect()
    }

    /// Index range (inclusive) of boxes whose closure could intersect the
    /// ball, clamped to the grid.
    fn ball_range(&self, b: &Ball) -> Option<Vec<(usize, usize)>> {
        let mut range = Vec::with_capacity(self.dimension());
        for i in 0..self.dimension() {
            let lo = (b.center[i] - b.radius - self.origin[i]) / self.cell_size;
            let hi = (b.center[i] + b.radius - self.origin[i]) / self.cell_size;
            if hi < 0.0 || lo >= self.dims[i] as f64 {
                return None;
            }
            let lo = lo.floor().max(0.0) as usize;
            let hi = (hi.floor() as usize).min(self.dims[i] - 1);
            range.push((lo, hi));
        }
        Some(range)
    }

    /// Exact box/ball intersection: clamp the center into the box.
    fn ball_meets_box(&self, b: &Ball, idx: &[usize]) -> bool {
        let mut d2 = 0.0;
        for i in 0..self.dimension() {
            let lo = self.origin[i] + idx[i] as f64 * self.cell_size;
            let hi = lo + self.cell_size;
            let c = b.center[i].clamp(lo, hi);
            d2 += (b.center[i] - c) * (b.center[i] - c);
        }
        d2 <= b.radius * b.radius
    }
}

/// Marked-box states over a grid.
#[derive(Debug, Clone)]
pub struct Raster {
    pub spec: GridSpec,
    bits: Vec<bool>,
    marked: usize,
}

impl Raster {
    pub fn empty(spec: GridSpec) -> Raster {
        let n = spec.total_boxes();
        Raster { spec, bits: vec![false; n], marked: 0 }
    }

    pub fn is_marked_flat(&self, flat: usize) -> bool {
        self.bits[flat]
    }

    pub fn mark_flat(&mut self, flat: usize) {
        if !self.bits[flat] {
            self.bits[flat] = true;
            self.marked += 1;
        }
    }

    pub fn marked_count(&self) -> usize {
        self.marked
    }

    pub fn covered_volume(&self) -> f64 {
        self.marked as f64 * self.spec.box_volume()
    }

    pub fn marked_flats(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    /// Boxes marked in both rasters (must share a spec).
    pub fn intersect(&self, other: &Raster) -> Raster {
        assert_eq!(self.spec, other.spec, "rasters must share a grid");
        let bits: Vec<bool> =
            self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect();
        let marked = bits.iter().filter(|&&b| b).count();
        Raster { spec: self.spec.clone(), bits, marked }
    }

    pub fn union(&self, other: &Raster) -> Raster {
        assert_eq!(self.spec, other.spec, "rasters must share a grid");
        let bits: Vec<bool> =
            self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect();
        let marked = bits.iter().filter(|&&b| b).count();
        Raster { spec: self.spec.clone(), bits, marked }
    }

    /// Count of occupied boxes after coarsening by an integer factor.
    pub fn coarse_count(&self, factor: usize) -> usize {
        assert!(factor >= 1);
        if factor == 1 {
            return self.marked;
        }
        let d = self.spec.dimension();
        let coarse_dims: Vec<usize> =
            self.spec.dims.iter().map(|&n| n.div_ceil(factor)).collect();
        let mut seen = vec![false; coarse_dims.iter().product()];
        let mut count = 0;
        for flat in self.marked_flats() {
            let idx = self.spec.unflatten(flat);
            let mut f = 0;
            for i in 0..d {
                f = f * coarse_dims[i] + idx[i] / factor;
            }
            if !seen[f] {
                seen[f] = true;
                count += 1;
            }
        }
        count
    }
}

/// Rasterize the outer cover of the cylinder rooted at `root` (empty word =
/// the whole attractor) with cells of radius ≤ `cover_tolerance`.
pub fn rasterize(
    s: &IfsSystem,
    root: &Word,
    spec: &GridSpec,
    cover_tolerance: f64,
    cell_budget: usize,
) -> Result<Raster> {
    if cover_tolerance <= 0.0 {
        return Err(Error::InvalidArgument("cover tolerance must be positive".into()));
    }
    let mut raster = Raster::empty(spec.clone());
    let n = s.len() as u8;
    let mut stack = vec![CellFrame::along(s, root)?];
    let mut expansions = 0usize;
    // saturation check limit: ranges larger than this are expanded blindly
    const SATURATION_SCAN: usize = 4096;
    let mut idx = vec![0usize; spec.dimension()];
    while let Some(f) = stack.pop() {
        let b = f.ball(s);
        let Some(range) = spec.ball_range(&b) else { continue };
        let scan: usize = range.iter().map(|(lo, hi)| hi - lo + 1).product();
        if b.radius <= cover_tolerance {
            for_each_in_range(&range, &mut idx, &mut |idx| {
                if spec.ball_meets_box(&b, idx) {
                    raster.mark_flat(spec.flat(idx));
                }
                true
            });
            continue;
        }
        if scan <= SATURATION_SCAN {
            let mut saturated = true;
            for_each_in_range(&range, &mut idx, &mut |idx| {
                if spec.ball_meets_box(&b, idx) && !raster.is_marked_flat(spec.flat(idx)) {
                    saturated = false;
                    return false;
                }
                true
            });
            if saturated {
                continue;
            }
        }
        expansions += 1;
        if expansions > cell_budget {
            return Err(Error::CellBudgetExceeded { budget: cell_budget });
        }
        for digit in (1..=n).rev() {
            stack.push(f.child(s, digit));
        }
    }
    Ok(raster)
}

fn for_each_in_range(
    range: &[(usize, usize)],
    idx: &mut [usize],
    f: &mut impl FnMut(&[usize]) -> bool,
) {
    fn rec(
        range: &[(usize, usize)],
        idx: &mut [usize],
        axis: usize,
        f: &mut impl FnMut(&[usize]) -> bool,
    ) -> bool {
        if axis == range.len() {
            return f(idx);
        }
        for v in range[axis].0..=range[axis].1 {
            idx[axis] = v;
            if !rec(range, idx, axis + 1, f) {
                return false;
            }
        }
        true
    }
    rec(range, idx, 0, f);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::build_cover_from;
    use crate::ifs::{triangle_system, unit_anchor_system};
    use crate::scalar::Scalar;

    #[test]
    fn raster_marks_unit_interval() {
        let s = unit_anchor_system(Scalar::from_ratio(1, 2)).unwrap();
        let spec = GridSpec::covering(&s, 1e-2).unwrap();
        let r = rasterize(&s, &Word::empty(), &spec, 5e-3, 1_000_000).unwrap();
        let vol = r.covered_volume();
        assert!((vol - 1.0).abs() < 0.05, "unit interval volume ≈ 1, got {vol}");
    }

    #[test]
    fn pruned_raster_matches_full_cover_raster() {
        let s = triangle_system(Scalar::from_ratio(13, 20)).unwrap();
        let spec = GridSpec::covering(&s, 1.0 / 64.0).unwrap();
        let delta = 1.0 / 128.0;
        let pruned = rasterize(&s, &Word::empty(), &spec, delta, 10_000_000).unwrap();

        let cover = build_cover_from(&s, &Word::empty(), delta, 10_000_000).unwrap();
        let mut full = Raster::empty(spec.clone());
        let mut idx = vec![0usize; 2];
        for cell in &cover.cells {
            if let Some(range) = spec.ball_range(&cell.ball) {
                for_each_in_range(&range, &mut idx, &mut |idx| {
                    if spec.ball_meets_box(&cell.ball, idx) {
                        full.mark_flat(spec.flat(idx));
                    }
                    true
                });
            }
        }
        assert_eq!(pruned.marked_count(), full.marked_count());
        assert!(pruned.marked_flats().eq(full.marked_flats()));
    }

    #[test]
    fn coarse_counts_shrink() {
        let s = unit_anchor_system(Scalar::from_ratio(1, 3)).unwrap();
        let spec = GridSpec::covering(&s, 1e-3).unwrap();
        let r = rasterize(&s, &Word::empty(), &spec, 5e-4, 1_000_000).unwrap();
        let c1 = r.coarse_count(1);
        let c4 = r.coarse_count(4);
        let c16 = r.coarse_count(16);
        assert!(c1 > c4 && c4 > c16 && c16 > 0);
    }
}
