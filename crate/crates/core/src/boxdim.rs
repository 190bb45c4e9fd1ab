//! Box-counting dimension estimate: least-squares slope of log(count)
//! against log(1/scale), with a confidence band from the fit residuals.

use crate::error::{Error, Result};
use crate::raster::Raster;

#[derive(Debug, Clone)]
pub struct DimensionEstimate {
    pub slope: f64,
    /// 1.96 × standard error of the slope.
    pub confidence_band: f64,
    /// (scale, occupied box count) pairs used in the fit.
    pub counts: Vec<(f64, usize)>,
}

/// Count occupied boxes of the raster at the base scale and at integer
/// coarsenings, then fit. `factors` must contain at least 3 increasing
/// coarsening factors (1 = base resolution).
pub fn box_counting_dimension(raster: &Raster, factors: &[usize]) -> Result<DimensionEstimate> {
    if factors.len() < 3 {
        return Err(Error::InvalidArgument("need at least 3 scales".into()));
    }
    if factors.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("coarsening factors must increase".into()));
    }
    let base = raster.spec.cell_size;
    let counts: Vec<(f64, usize)> = factors
        .iter()
        .map(|&f| (base * f as f64, raster.coarse_count(f)))
        .collect();
    if counts.iter().all(|&(_, c)| c <= 1) {
        return Err(Error::Degenerate(
            "at most one occupied box at every scale".into(),
        ));
    }
    let xs: Vec<f64> = counts.iter().map(|(s, _)| (1.0 / s).ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&(_, c)| (c.max(1) as f64).ln()).collect();
    let (slope, stderr) = slope_with_stderr(&xs, &ys);
    Ok(DimensionEstimate { slope, confidence_band: 1.96 * stderr, counts })
}

fn slope_with_stderr(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let dof = (n - 2.0).max(1.0);
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    (slope, (sse / dof / sxx).sqrt())
}
