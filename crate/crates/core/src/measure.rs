//! Measure and overlap estimation on rasters, the inclusion–exclusion
//! residual, interior-cube evidence, the upper-density bound and the n(r)
//! radius index.
//!
//! Upper estimates are rigorous (volume of an outer cover's raster); lower
//! estimates are explicitly heuristic (centers passing membership at a tight
//! tolerance).

use rayon::join;

use crate::cover::{membership_in_cylinder, Membership};
use crate::error::{Error, Result};
use crate::ifs::{IfsSystem, Word};
use crate::raster::{rasterize, GridSpec, Raster};

/// Upper/lower estimate of a Lebesgue measure at a given resolution.
#[derive(Debug, Clone)]
pub struct MeasureEstimate {
    /// Volume of the covered grid boxes — a true upper bound at this cover
    /// tolerance.
    pub upper: f64,
    /// Volume of boxes whose centers pass membership at resolution/10;
    /// heuristic.
    pub heuristic_lower: f64,
    pub resolution: f64,
    pub cover_tolerance: f64,
    pub marked_boxes: usize,
}

fn lower_estimate(
    s: &IfsSystem,
    roots: &[&Word],
    raster: &Raster,
    resolution: f64,
) -> Result<f64> {
    let tight = resolution / 10.0;
    let mut hits = 0usize;
    for flat in raster.marked_flats() {
        let idx = raster.spec.unflatten(flat);
        let center = raster.spec.box_center(&idx);
        let mut inside_all = true;
        for root in roots {
            if !membership_in_cylinder(s, root, &center, tight)?.is_inside() {
                inside_all = false;
                break;
            }
        }
        if inside_all {
            hits += 1;
        }
    }
    Ok(hits as f64 * raster.spec.box_volume())
}

/// Raster of the attractor (or a cylinder) at `resolution`, with the cover
/// subdivided to half a box.
pub fn system_raster(
    s: &IfsSystem,
    root: &Word,
    resolution: f64,
    cell_budget: usize,
) -> Result<Raster> {
    let spec = GridSpec::covering(s, resolution)?;
    rasterize(s, root, &spec, resolution / 2.0, cell_budget)
}

/// Measure estimate for the attractor.
pub fn measure_estimate(
    s: &IfsSystem,
    resolution: f64,
    cell_budget: usize,
) -> Result<MeasureEstimate> {
    let raster = system_raster(s, &Word::empty(), resolution, cell_budget)?;
    let lower = lower_estimate(s, &[&Word::empty()], &raster, resolution)?;
    Ok(MeasureEstimate {
        upper: raster.covered_volume(),
        heuristic_lower: lower,
        resolution,
        cover_tolerance: resolution / 2.0,
        marked_boxes: raster.marked_count(),
    })
}

/// Estimate of L(f_k(Λ) ∩ f_l(Λ)) on a common grid.
pub fn overlap_measure(
    s: &IfsSystem,
    k: u8,
    l: u8,
    resolution: f64,
    cell_budget: usize,
) -> Result<MeasureEstimate> {
    s.check_digit(k)?;
    s.check_digit(l)?;
    if k == l {
        return Err(Error::InvalidArgument("overlap digits must differ".into()));
    }
    let spec = GridSpec::covering(s, resolution)?;
    let wk = Word::new(vec![k], s.len())?;
    let wl = Word::new(vec![l], s.len())?;
    let (rk, rl) = join(
        || rasterize(s, &wk, &spec, resolution / 2.0, cell_budget),
        || rasterize(s, &wl, &spec, resolution / 2.0, cell_budget),
    );
    let both = rk?.intersect(&rl?);
    let lower = lower_estimate(s, &[&wk, &wl], &both, resolution)?;
    Ok(MeasureEstimate {
        upper: both.covered_volume(),
        heuristic_lower: lower,
        resolution,
        cover_tolerance: resolution / 2.0,
        marked_boxes: both.marked_count(),
    })
}

/// Residuals of the two union identities evaluated on independently built
/// rasters; both vanish up to grid error.
#[derive(Debug, Clone, Copy)]
pub struct IdentityResiduals {
    /// |L(∪ A_j) − (Σ L(A_j) − Σ_{i≥2} L(∪_{j<i} A_j ∩ A_i))|
    pub chain_residual: f64,
    /// |L(∪ A_j) − Σ_{∅≠S} (−1)^{|S|+1} L(∩_S A_j)| (full inclusion–exclusion)
    pub full_residual: f64,
}

/// Evaluate both union identities with A_j = f_j(Λ).
pub fn inclusion_exclusion_residual(
    s: &IfsSystem,
    resolution: f64,
    cell_budget: usize,
) -> Result<IdentityResiduals> {
    let n = s.len();
    if n > 16 {
        return Err(Error::InvalidArgument(
            "inclusion–exclusion over more than 16 maps is not supported".into(),
        ));
    }
    let spec = GridSpec::covering(s, resolution)?;
    let vol = spec.box_volume();
    let lhs_raster = rasterize(s, &Word::empty(), &spec, resolution / 2.0, cell_budget)?;
    let lhs = lhs_raster.covered_volume();

    let cylinders: Vec<Raster> = (1..=n as u8)
        .map(|j| {
            let w = Word::new(vec![j], n)?;
            rasterize(s, &w, &spec, resolution / 2.0, cell_budget)
        })
        .collect::<Result<_>>()?;

    // chain identity
    let sum_singles: f64 = cylinders.iter().map(Raster::covered_volume).sum();
    let mut chain_rhs = sum_singles;
    let mut prefix_union: Option<Raster> = None;
    for i in 1..n {
        let prev = match &prefix_union {
            Some(u) => u.union(&cylinders[i - 1]),
            None => cylinders[i - 1].clone(),
        };
        let correction = prev.intersect(&cylinders[i]).marked_count() as f64 * vol;
        chain_rhs -= correction;
        prefix_union = Some(prev);
    }

    // full inclusion–exclusion
    let mut full_rhs = 0.0;
    for mask in 1u32..(1 << n) {
        let mut inter: Option<Raster> = None;
        for (j, cyl) in cylinders.iter().enumerate() {
            if mask & (1 << j) != 0 {
                inter = Some(match inter {
                    Some(r) => r.intersect(cyl),
                    None => cyl.clone(),
                });
            }
        }
        let term = inter.unwrap().marked_count() as f64 * vol;
        if mask.count_ones() % 2 == 1 {
            full_rhs += term;
        } else {
            full_rhs -= term;
        }
    }

    Ok(IdentityResiduals {
        chain_residual: (lhs - chain_rhs).abs(),
        full_residual: (lhs - full_rhs).abs(),
    })
}

/// Axis-aligned cube, origin corner plus side.
#[derive(Debug, Clone)]
pub struct Cube {
    pub origin: Vec<f64>,
    pub side: f64,
}

impl Cube {
    pub fn volume(&self, d: usize) -> f64 {
        self.side.powi(d as i32)
    }
}

/// Search for a grid-aligned cube inside the overlap f_k(Λ) ∩ f_l(Λ):
/// evidence of nonempty interior, not a proof. Starting from a 2-box cube at
/// the first qualifying position, the side doubles while all sub-box centers
/// at one finer level keep passing membership in both cylinders.
pub fn interior_cube_search(
    s: &IfsSystem,
    k: u8,
    l: u8,
    resolution: f64,
    cell_budget: usize,
) -> Result<Option<Cube>> {
    s.check_digit(k)?;
    s.check_digit(l)?;
    if k == l {
        return Err(Error::InvalidArgument("overlap digits must differ".into()));
    }
    let spec = GridSpec::covering(s, resolution)?;
    let wk = Word::new(vec![k], s.len())?;
    let wl = Word::new(vec![l], s.len())?;
    let (rk, rl) = join(
        || rasterize(s, &wk, &spec, resolution / 2.0, cell_budget),
        || rasterize(s, &wl, &spec, resolution / 2.0, cell_budget),
    );
    let both = rk?.intersect(&rl?);
    let d = s.dimension;
    let tight = resolution / 5.0;

    let cube_ok = |origin: &[f64], side: f64| -> Result<bool> {
        // centers of the 2^d sub-boxes at one finer level
        let half = side / 2.0;
        for mask in 0u32..(1 << d) {
            let center: Vec<f64> = (0..d)
                .map(|i| origin[i] + if mask & (1 << i) != 0 { 1.5 } else { 0.5 } * half)
                .collect();
            if !membership_in_cylinder(s, &wk, &center, tight)?.is_inside()
                || !membership_in_cylinder(s, &wl, &center, tight)?.is_inside()
            {
                return Ok(false);
            }
        }
        Ok(true)
    };

    for flat in both.marked_flats() {
        let idx = both.spec.unflatten(flat);
        let origin = both.spec.box_low_corner(&idx);
        let mut side = 2.0 * resolution;
        if !cube_ok(&origin, side)? {
            continue;
        }
        while side <= 64.0 * resolution {
            let next = side * 2.0;
            if cube_ok(&origin, next)? {
                side = next;
            } else {
                break;
            }
        }
        return Ok(Some(Cube { origin, side }));
    }
    Ok(None)
}

/// Volume of the d-dimensional unit ball.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(d - 2) * 2.0 * std::f64::consts::PI / d as f64,
    }
}

/// The density-argument constants.
#[derive(Debug, Clone)]
pub struct DensityBound {
    /// Upper bound on the density ratio of the unique-coding set:
    /// 1 − L(overlap)·min r_j^d / (C(d)·Diam^d), using the heuristic lower
    /// overlap estimate.
    pub upper_density_bound: f64,
    /// Overlap lower estimate that witnessed the hypothesis.
    pub overlap_lower: f64,
    /// min{2^−d, vol(C*)·min r_j^d/(2 Diam)^d}, when a cube was found.
    pub delta_constant: Option<f64>,
    pub cube: Option<Cube>,
}

/// Plug-in of the sub-cube volume fraction constant.
pub fn dimension_gap_delta(s: &IfsSystem, cube_volume: f64) -> f64 {
    let d = s.dimension as i32;
    let min_r = s.geom().min_ratio.powi(d);
    let denom = (2.0 * s.geom().diameter).powi(d);
    (0.5f64.powi(d)).min(cube_volume * min_r / denom)
}

/// Upper-density bound for the pair (k, l); errors when the overlap lower
/// estimate is not positive.
pub fn density_bound(
    s: &IfsSystem,
    k: u8,
    l: u8,
    resolution: f64,
    cell_budget: usize,
) -> Result<DensityBound> {
    let overlap = overlap_measure(s, k, l, resolution, cell_budget)?;
    if overlap.heuristic_lower <= 0.0 {
        return Err(Error::HypothesisNotWitnessed(format!(
            "overlap of cylinders {k} and {l} has no positive lower estimate"
        )));
    }
    let d = s.dimension as i32;
    let min_r = s.geom().min_ratio.powi(d);
    let c_d = unit_ball_volume(s.dimension);
    let diam_d = s.geom().diameter.powi(d);
    let bound = 1.0 - overlap.heuristic_lower * min_r / (c_d * diam_d);
    debug_assert!(bound > 0.0 && bound < 1.0);
    let cube = interior_cube_search(s, k, l, resolution, cell_budget)?;
    let delta_constant = cube.as_ref().map(|c| dimension_gap_delta(s, c.volume(s.dimension)));
    Ok(DensityBound {
        upper_density_bound: bound,
        overlap_lower: overlap.heuristic_lower,
        delta_constant,
        cube,
    })
}

/// The unique n with Diam·∏_{i≤n} r_{w_i} < r ≤ Diam·∏_{i≤n−1} r_{w_i}.
pub fn n_of_r(s: &IfsSystem, prefix: &[u8], r: f64) -> Result<usize> {
    let diam = s.geom().diameter;
    if !(r > 0.0 && r <= diam) {
        return Err(Error::InvalidArgument(format!(
            "radius must lie in (0, Diam = {diam}], got {r}"
        )));
    }
    let mut prod = diam;
    for (i, &d) in prefix.iter().enumerate() {
        s.check_digit(d)?;
        let next = prod * s.geom().ratios[(d - 1) as usize];
        if next < r && r <= prod {
            return Ok(i + 1);
        }
        prod = next;
    }
    Err(Error::PrefixExhausted { len: prefix.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::defaults;
    use crate::ifs::{two_map_line_system, unit_anchor_system};
    use crate::scalar::Scalar;

    fn unit_half() -> IfsSystem {
        unit_anchor_system(Scalar::from_ratio(1, 2)).unwrap()
    }

    fn line_07() -> IfsSystem {
        two_map_line_system(Scalar::from_ratio(7, 10)).unwrap()
    }

    #[test]
    fn unit_interval_measure_near_one() {
        let m = measure_estimate(&unit_half(), 1e-3, defaults::CELL_BUDGET).unwrap();
        assert!((m.upper - 1.0).abs() <= 0.01, "upper {}", m.upper);
        assert!(m.heuristic_lower <= m.upper);
        assert!((m.heuristic_lower - 1.0).abs() <= 0.01, "lower {}", m.heuristic_lower);
    }

    #[test]
    fn full_interval_at_ratio_07_has_length_7_3() {
        let m = measure_estimate(&line_07(), 1e-3, defaults::CELL_BUDGET).unwrap();
        assert!((m.upper - 7.0 / 3.0).abs() <= 0.02, "upper {}", m.upper);
        assert!((m.heuristic_lower - 7.0 / 3.0).abs() <= 0.02);
    }

    #[test]
    fn cantor_measure_upper_shrinks_with_resolution() {
        let s = unit_anchor_system(Scalar::from_ratio(1, 3)).unwrap();
        let coarse = measure_estimate(&s, 4e-3, defaults::CELL_BUDGET).unwrap();
        let fine = measure_estimate(&s, 2e-3, defaults::CELL_BUDGET).unwrap();
        assert!(fine.upper <= coarse.upper + 1e-12);
        // (2/3)^8 neighborhood scale: loose sanity ceiling (grid boxes dilate
        // each level-8 interval by about one box on each side)
        let depth8 = (2.0f64 / 3.0).powi(8);
        let finest = measure_estimate(&s, 3.0f64.powi(-8) * 2.0, defaults::CELL_BUDGET).unwrap();
        assert!(finest.upper <= 3.0 * depth8, "upper {}", finest.upper);
    }

    #[test]
    fn overlap_of_ratio_07_brackets_14_15() {
        let m = overlap_measure(&line_07(), 1, 2, 1e-3, defaults::CELL_BUDGET).unwrap();
        let exact = 14.0 / 15.0;
        assert!(m.upper >= exact && m.upper <= 0.97, "upper {}", m.upper);
        assert!(m.heuristic_lower >= 0.9 && m.heuristic_lower <= exact + 1e-9);
    }

    #[test]
    fn overlap_degenerates_for_touching_and_disjoint_images() {
        let touch = overlap_measure(&unit_half(), 1, 2, 1e-3, defaults::CELL_BUDGET).unwrap();
        assert!(touch.upper <= 0.01, "touching overlap {}", touch.upper);
        let s = unit_anchor_system(Scalar::from_ratio(1, 3)).unwrap();
        let disjoint = overlap_measure(&s, 1, 2, 1e-3, defaults::CELL_BUDGET).unwrap();
        assert_eq!(disjoint.heuristic_lower, 0.0);
        assert!(disjoint.upper <= 0.01);
    }

    #[test]
    fn identity_residuals_are_grid_small() {
        let r = inclusion_exclusion_residual(&line_07(), 1e-3, defaults::CELL_BUDGET).unwrap();
        assert!(r.chain_residual <= 0.01, "chain {}", r.chain_residual);
        assert!(r.full_residual <= 0.01, "full {}", r.full_residual);

        let s = unit_anchor_system(Scalar::from_ratio(1, 3)).unwrap();
        let r = inclusion_exclusion_residual(&s, 1e-3, defaults::CELL_BUDGET).unwrap();
        assert!(r.chain_residual <= 0.01 && r.full_residual <= 0.01);
    }

    #[test]
    fn interior_cube_inside_the_overlap_interval() {
        let c = interior_cube_search(&line_07(), 1, 2, 1e-3, defaults::CELL_BUDGET)
            .unwrap()
            .expect("overlap interval has interior");
        let lo = c.origin[0];
        let hi = lo + c.side;
        assert!(lo >= 0.7 - 2e-3 && hi <= 49.0 / 30.0 + 2e-3, "cube [{lo}, {hi}]");
        assert!(c.side >= 2e-3);

        let s = unit_anchor_system(Scalar::from_ratio(1, 3)).unwrap();
        assert!(interior_cube_search(&s, 1, 2, 1e-3, defaults::CELL_BUDGET).unwrap().is_none());
    }

    #[test]
    fn density_bound_value_and_delta_constant() {
        // scale-invariant plug-in: 1 − L(overlap)·r/(C(1)·Diam) = 1 − (14/15)·0.7/(2·7/3) = 0.86
        let b = density_bound(&line_07(), 1, 2, 1e-3, defaults::CELL_BUDGET).unwrap();
        assert!(b.upper_density_bound > 0.0 && b.upper_density_bound < 1.0);
        assert!(
            (b.upper_density_bound - 0.86).abs() < 0.01,
            "bound {}",
            b.upper_density_bound
        );
        // explicit cube [0.8, 1.5]: min{1/2, 0.7·0.7/(2·7/3)} = 0.105
        let delta = dimension_gap_delta(&line_07(), 0.7);
        assert!((delta - 0.105).abs() < 1e-12, "delta {delta}");

        let s = unit_anchor_system(Scalar::from_ratio(1, 3)).unwrap();
        assert!(matches!(
            density_bound(&s, 1, 2, 1e-3, defaults::CELL_BUDGET),
            Err(Error::HypothesisNotWitnessed(_))
        ));
    }

    #[test]
    fn n_of_r_two_sided_inequality() {
        let s = unit_half();
        // homogeneous 1/2, Diam 1: 1/4 < 0.3 ≤ 1/2 → n = 2
        assert_eq!(n_of_r(&s, &[1, 1, 1, 1], 0.3).unwrap(), 2);
        // boundary r = Diam → n = 1
        assert_eq!(n_of_r(&s, &[1, 1], 1.0).unwrap(), 1);

        let maps = vec![
            crate::ifs::Contraction::new(
                Scalar::from_ratio(1, 2),
                crate::geometry::Point::new(vec![Scalar::zero()]),
            )
            .unwrap(),
            crate::ifs::Contraction::new(
                Scalar::from_ratio(7, 10),
                crate::geometry::Point::new(vec![Scalar::one()]),
            )
            .unwrap(),
        ];
        let s = IfsSystem::new(1, maps).unwrap();
        // products along (2,1,2): 0.7, 0.35, 0.245 → n = 3 for r = 0.3
        assert_eq!(n_of_r(&s, &[2, 1, 2, 1], 0.3).unwrap(), 3);

        assert!(matches!(n_of_r(&s, &[2], 1e-6), Err(Error::PrefixExhausted { .. })));
        assert!(n_of_r(&s, &[1], 2.0).is_err());
    }

    #[test]
    fn unit_ball_volumes() {
        assert_eq!(unit_ball_volume(1), 2.0);
        assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-15);
    }
}
