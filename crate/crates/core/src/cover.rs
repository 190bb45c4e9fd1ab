//! Depth-adaptive outer covers of the attractor by cylinder-image balls, and
//! the point-membership oracle built on them.
//!
//! Every cell is the image of the system's bounding ball under the word's
//! composed maps, so cell radius = bounding radius × word contraction, the
//! attractor slice of the cylinder lies inside the cell, and child cells nest
//! inside their parent (the bounding ball maps into itself).

use num_rational::BigRational;
use num_traits::FromPrimitive;

use crate::defaults;
use crate::error::{Error, Result};
use crate::geometry::{dist, Ball};
use crate::ifs::{IfsSystem, Word};

/// One cover cell: a word and the ball image of the bounding ball.
#[derive(Debug, Clone)]
pub struct CoverCell {
    pub word: Word,
    pub ball: Ball,
}

/// Outer cover of the attractor with all cell radii ≤ tolerance.
#[derive(Debug, Clone)]
pub struct Cover {
    pub tolerance: f64,
    pub cells: Vec<CoverCell>,
    /// Number of expansions performed while building (budget accounting).
    pub expansions: usize,
}

/// The affine map composed along a word: x ↦ scale·x + trans. Carried per
/// cell so the child of cell `w` is the cell `w·j` (digit appended, map
/// composed on the inside); that keeps child cells nested in their parents.
#[derive(Debug, Clone)]
pub(crate) struct CellFrame {
    pub scale: f64,
    pub trans: Vec<f64>,
}

impl CellFrame {
    pub fn root(dimension: usize) -> CellFrame {
        CellFrame { scale: 1.0, trans: vec![0.0; dimension] }
    }

    /// Frame of `w·j` from the frame of `w`: f_w ∘ f_j.
    pub fn child(&self, s: &IfsSystem, digit: u8) -> CellFrame {
        let j = (digit - 1) as usize;
        let r = s.geom().ratios[j];
        let a = &s.geom().anchors[j];
        CellFrame {
            scale: self.scale * r,
            trans: self
                .trans
                .iter()
                .zip(a)
                .map(|(t, ai)| self.scale * (1.0 - r) * ai + t)
                .collect(),
        }
    }

    pub fn along(s: &IfsSystem, word: &Word) -> Result<CellFrame> {
        let mut f = CellFrame::root(s.dimension);
        for &d in word.digits() {
            s.check_digit(d)?;
            f = f.child(s, d);
        }
        Ok(f)
    }

    /// Image of the system's bounding ball under this frame.
    pub fn ball(&self, s: &IfsSystem) -> Ball {
        let b = &s.geom().ball;
        Ball {
            center: b.center.iter().zip(&self.trans).map(|(c, t)| self.scale * c + t).collect(),
            radius: self.scale * b.radius,
        }
    }
}

/// Subdivide until every cell radius is ≤ `delta`.
pub fn build_cover(s: &IfsSystem, delta: f64, cell_budget: usize) -> Result<Cover> {
    build_cover_from(s, &Word::empty(), delta, cell_budget)
}

/// Same, rooted at an initial word (covers the cylinder of that word).
pub fn build_cover_from(
    s: &IfsSystem,
    root: &Word,
    delta: f64,
    cell_budget: usize,
) -> Result<Cover> {
    if delta <= 0.0 {
        return Err(Error::InvalidArgument("cover tolerance must be positive".into()));
    }
    let n = s.len() as u8;
    let frame = CellFrame::along(s, root)?;
    let mut cells = Vec::new();
    let mut stack = vec![(root.clone(), frame)];
    let mut expansions = 0usize;
    while let Some((word, frame)) = stack.pop() {
        let ball = frame.ball(s);
        if ball.radius <= delta {
            cells.push(CoverCell { word, ball });
            continue;
        }
        expansions += 1;
        if expansions + stack.len() + cells.len() > cell_budget {
            return Err(Error::CellBudgetExceeded { budget: cell_budget });
        }
        // push descending so cells pop in digit-ascending order
        for digit in (1..=n).rev() {
            let mut w = word.clone();
            w.push(digit);
            stack.push((w, frame.child(s, digit)));
        }
        if cells.len() + stack.len() > cell_budget {
            return Err(Error::CellBudgetExceeded { budget: cell_budget });
        }
    }
    Ok(Cover { tolerance: delta, cells, expansions })
}

/// Membership verdict. `InsideWithin` certifies distance ≤ 9δ/8 (and always
/// fires when the distance is ≤ δ/2); `Outside` certifies distance > δ and
/// carries a rigorous lower bound on the distance to the attractor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Membership {
    InsideWithin,
    Outside { dist_lower_bound: f64 },
}

impl Membership {
    pub fn is_inside(&self) -> bool {
        matches!(self, Membership::InsideWithin)
    }
}

/// Point-membership oracle against the attractor.
pub fn membership(s: &IfsSystem, x: &[f64], delta: f64) -> Result<Membership> {
    membership_in_cylinder(s, &Word::empty(), x, delta)
}

/// Membership against the cylinder set of `root` (e.g. a single digit for
/// the sets f_k(Λ)).
pub fn membership_in_cylinder(
    s: &IfsSystem,
    root: &Word,
    x: &[f64],
    delta: f64,
) -> Result<Membership> {
    if delta <= 0.0 {
        return Err(Error::InvalidArgument("membership tolerance must be positive".into()));
    }
    if x.len() != s.dimension {
        return Err(Error::DimensionMismatch { expected: s.dimension, got: x.len() });
    }

    // Certified full-interval attractors admit an exact distance test.
    if s.geom().full_interval && s.dimension == 1 {
        let (lo, hi) = cylinder_interval_1d(s, root);
        let d = if x[0] < lo {
            lo - x[0]
        } else if x[0] > hi {
            x[0] - hi
        } else {
            0.0
        };
        return Ok(if d <= delta {
            Membership::InsideWithin
        } else {
            Membership::Outside { dist_lower_bound: d }
        });
    }

    let frame = CellFrame::along(s, root)?;
    let floor = delta / 16.0;
    let n = s.len() as u8;
    let mut stack = vec![frame];
    let mut lb = f64::INFINITY;
    let mut explored = 0usize;
    while let Some(f) = stack.pop() {
        let b = f.ball(s);
        let t = dist(x, &b.center);
        if t - b.radius > delta {
            lb = lb.min(t - b.radius);
            continue;
        }
        if b.radius <= delta / 2.0 && t <= b.radius + delta / 2.0 {
            return Ok(Membership::InsideWithin);
        }
        if b.radius <= floor {
            // unprunable at the resolution floor: within delta + 2·floor
            return Ok(Membership::InsideWithin);
        }
        explored += 1;
        if explored > defaults::CELL_BUDGET {
            return Err(Error::CellBudgetExceeded { budget: defaults::CELL_BUDGET });
        }
        for digit in (1..=n).rev() {
            stack.push(f.child(s, digit));
        }
    }
    debug_assert!(lb > delta);
    Ok(Membership::Outside { dist_lower_bound: lb })
}

/// Exact interval of a cylinder on a certified full-interval system, in f64.
pub(crate) fn cylinder_interval_1d(s: &IfsSystem, root: &Word) -> (f64, f64) {
    let bb = s.hull.bounding_box();
    let (mut lo, mut hi) = bb[0];
    // apply the word outermost-last over the interval endpoints
    for &d in root.digits().iter().rev() {
        let j = (d - 1) as usize;
        let r = s.geom().ratios[j];
        let a = s.geom().anchors[j][0];
        lo = r * lo + (1.0 - r) * a;
        hi = r * hi + (1.0 - r) * a;
    }
    (lo, hi)
}

/// Exact 1-d cylinder interval in rational arithmetic (exact systems only).
pub(crate) fn cylinder_interval_1d_exact(
    s: &IfsSystem,
    root: &Word,
) -> Option<(BigRational, BigRational)> {
    let bb = s.geom().exact_box.as_ref()?;
    let (mut lo, mut hi) = bb[0].clone();
    for &d in root.digits().iter().rev() {
        let m = s.map(d);
        let r = m.ratio.as_exact()?;
        let a = m.anchor.coords[0].as_exact()?;
        let one_minus = BigRational::from_i64(1)? - r;
        lo = r * lo + &one_minus * a;
        hi = r * hi + one_minus * a;
    }
    Some((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::{triangle_system, two_map_line_system, unit_anchor_system};
    use crate::scalar::Scalar;

    fn unit_half() -> IfsSystem {
        unit_anchor_system(Scalar::from_ratio(1, 2)).unwrap()
    }

    fn cantor_third() -> IfsSystem {
        unit_anchor_system(Scalar::from_ratio(1, 3)).unwrap()
    }

    #[test]
    fn unit_interval_cover_depth_two_at_delta_0_3() {
        let c = build_cover(&unit_half(), 0.3, 10_000).unwrap();
        assert_eq!(c.cells.len(), 4);
        assert!(c.cells.iter().all(|cell| cell.word.len() == 2));
        assert!(c.cells.iter().all(|cell| (cell.ball.radius - 0.25).abs() < 1e-12));
    }

    #[test]
    fn loose_delta_keeps_single_root_cell() {
        let s = unit_half();
        let c = build_cover(&s, s.geom().ball.radius, 10).unwrap();
        assert_eq!(c.cells.len(), 1);
        assert!(c.cells[0].word.is_empty());
    }

    #[test]
    fn triangle_cover_counts_are_powers_of_three() {
        let s = triangle_system(Scalar::from_ratio(1, 2)).unwrap();
        let r0 = s.geom().ball.radius;
        for k in 1..=5u32 {
            let c = build_cover(&s, r0 * 0.5f64.powi(k as i32) + 1e-12, 1_000_000).unwrap();
            assert_eq!(c.cells.len(), 3usize.pow(k));
        }
    }

    #[test]
    fn cell_budget_is_a_hard_error() {
        let s = triangle_system(Scalar::from_ratio(1, 2)).unwrap();
        match build_cover(&s, 1e-4, 1000) {
            Err(Error::CellBudgetExceeded { budget }) => assert_eq!(budget, 1000),
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn cover_radii_match_word_contraction() {
        let s = two_map_line_system(Scalar::from_ratio(7, 10)).unwrap();
        let c = build_cover(&s, 0.5, 100_000).unwrap();
        let r0 = s.geom().ball.radius;
        for cell in &c.cells {
            let (prod, _) = s.word_contraction(&cell.word).unwrap();
            assert!((cell.ball.radius - r0 * prod.to_f64()).abs() < 1e-12);
        }
    }

    #[test]
    fn membership_on_the_full_interval() {
        let s = unit_half();
        assert!(membership(&s, &[0.5], 1e-6).unwrap().is_inside());
        match membership(&s, &[2.0], 0.5).unwrap() {
            Membership::Outside { dist_lower_bound } => {
                assert!((dist_lower_bound - 1.0).abs() < 1e-12)
            }
            m => panic!("expected outside, got {m:?}"),
        }
    }

    #[test]
    fn membership_outside_the_cantor_set() {
        // dist(1/2, middle-third Cantor set) = 1/6
        let s = cantor_third();
        match membership(&s, &[0.5], 1e-4).unwrap() {
            Membership::Outside { dist_lower_bound } => {
                // rigorous but possibly coarse: pruning at level k reports
                // t − r with the level-k ball radius
                assert!(dist_lower_bound > 1e-4);
                assert!(dist_lower_bound <= 1.0 / 6.0 + 1e-12);
            }
            m => panic!("expected outside, got {m:?}"),
        }
        assert!(membership(&s, &[1.0 / 3.0], 1e-6).unwrap().is_inside());
    }

    #[test]
    fn membership_monotone_in_delta() {
        let s = cantor_third();
        let x = [0.3333333333];
        for &(small, large) in &[(1e-6, 1e-3), (1e-4, 1e-2)] {
            if membership(&s, &x, small).unwrap().is_inside() {
                assert!(membership(&s, &x, large).unwrap().is_inside());
            }
        }
    }

    #[test]
    fn cylinder_membership_uses_the_subtree() {
        let s = two_map_line_system(Scalar::from_ratio(7, 10)).unwrap();
        // f_1(Λ) = [0, 49/30], f_2(Λ) = [7/10, 7/3]
        let w1 = Word::new(vec![1], 2).unwrap();
        let w2 = Word::new(vec![2], 2).unwrap();
        assert!(membership_in_cylinder(&s, &w1, &[0.1], 1e-9).unwrap().is_inside());
        assert!(!membership_in_cylinder(&s, &w2, &[0.1], 1e-3).unwrap().is_inside());
        assert!(membership_in_cylinder(&s, &w2, &[1.0], 1e-9).unwrap().is_inside());
        assert!(!membership_in_cylinder(&s, &w1, &[2.0], 1e-3).unwrap().is_inside());
    }

    #[test]
    fn outer_cover_contains_attractor_samples() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for s in [unit_half(), cantor_third(), two_map_line_system(Scalar::from_ratio(7, 10)).unwrap()] {
            let cover = build_cover(&s, 0.05, 1_000_000).unwrap();
            let p1 = crate::geometry::Point::new(vec![Scalar::zero()]);
            for _ in 0..500 {
                let digits: Vec<u8> =
                    (0..30).map(|_| rng.gen_range(1..=s.len() as u8)).collect();
                let w = Word::new(digits, s.len()).unwrap();
                let pt = s.apply_word(&w, &p1).unwrap().floats();
                let hit = cover
                    .cells
                    .iter()
                    .any(|c| dist(&pt, &c.ball.center) <= c.ball.radius + 1e-9);
                assert!(hit, "attractor sample escaped the cover");
            }
        }
    }
}
