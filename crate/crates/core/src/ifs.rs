//! Contracting similitude systems, words over their digit alphabet, and the
//! elementary map operations everything else builds on.
//!
//! Maps are `f_j(x) = r_j x + (1 - r_j) a_j` with ratio `r_j` in (0,1) and
//! anchor `a_j` (its fixed point). A coding of `x` is a digit sequence whose
//! composed maps, applied outermost-first, converge to `x`; equivalently `x`
//! lies in the image cylinder of every prefix. Composition order is fixed so
//! that prefixes of a coding correspond to nested cylinders.

use std::cmp::Ordering;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{hull_of, Ball, Hull, Point};
use crate::scalar::{Scalar, Trichotomy};

/// One contracting similitude: ratio in (0,1), anchor = fixed point.
#[derive(Debug, Clone)]
pub struct Contraction {
    pub ratio: Scalar,
    pub anchor: Point,
}

impl Contraction {
    pub fn new(ratio: Scalar, anchor: Point) -> Result<Self> {
        let lo = ratio.trichotomy(&Scalar::zero());
        let hi = ratio.trichotomy(&Scalar::one());
        if lo != Trichotomy::Greater || hi != Trichotomy::Less {
            return Err(Error::InvalidSystem(format!(
                "contraction ratio must lie strictly in (0,1), got {}",
                ratio
            )));
        }
        Ok(Contraction { ratio, anchor })
    }

    pub fn dim(&self) -> usize {
        self.anchor.dim()
    }
}

/// Apply the map: r·x + (1−r)·a componentwise.
pub fn apply(c: &Contraction, x: &Point) -> Result<Point> {
    x.check_dim(c.dim())?;
    let r = &c.ratio;
    let one_minus = Scalar::one().sub(r);
    Ok(Point::new(
        x.coords
            .iter()
            .zip(&c.anchor.coords)
            .map(|(xi, ai)| r.mul(xi).add(&one_minus.mul(ai)))
            .collect(),
    ))
}

/// Inverse map: (x − (1−r)·a) / r.
pub fn preimage(c: &Contraction, x: &Point) -> Result<Point> {
    x.check_dim(c.dim())?;
    let r = &c.ratio;
    let one_minus = Scalar::one().sub(r);
    Ok(Point::new(
        x.coords
            .iter()
            .zip(&c.anchor.coords)
            .map(|(xi, ai)| xi.sub(&one_minus.mul(ai)).div(r))
            .collect(),
    ))
}

/// A finite word over the digit alphabet {1, …, n}. Empty words are allowed
/// and act as the identity composition.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    digits: Vec<u8>,
}

impl Word {
    pub fn empty() -> Self {
        Word { digits: Vec::new() }
    }

    pub fn new(digits: Vec<u8>, alphabet: usize) -> Result<Self> {
        if digits.iter().any(|&d| d == 0 || d as usize > alphabet) {
            return Err(Error::InvalidArgument(format!(
                "word digits must lie in 1..={alphabet}"
            )));
        }
        Ok(Word { digits })
    }

    pub fn digits(&self) -> &[u8] {
        &self.digits
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    pub fn push(&mut self, digit: u8) {
        self.digits.push(digit);
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut digits = self.digits.clone();
        digits.extend_from_slice(&other.digits);
        Word { digits }
    }

    /// True when `factor` occurs as a contiguous block.
    pub fn contains_factor(&self, factor: &Word) -> bool {
        if factor.is_empty() {
            return true;
        }
        self.digits
            .windows(factor.len())
            .any(|w| w == factor.digits())
    }
}

impl std::fmt::Display for Word {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.digits.is_empty() {
            return write!(f, "ε");
        }
        for (i, d) in self.digits.iter().enumerate() {
            if i > 0 && self.digits.iter().any(|&x| x > 9) {
                write!(f, ".")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// Flag for the similarity sum Σ r_j^d against 1.
pub type SimilarityFlag = Trichotomy;

/// The full system: maps, hull of the anchors, and derived geometry.
#[derive(Debug, Clone)]
pub struct IfsSystem {
    pub dimension: usize,
    pub maps: Vec<Contraction>,
    pub hull: Hull,
    /// Ball centered at the hull centroid with radius Diam(hull); contains
    /// the hull and is mapped into itself by every map, so cylinder cells
    /// nest along prefixes.
    pub bounding_ball_center: Point,
    pub bounding_ball_radius: Scalar,
    geom: SystemGeom,
}

/// Float snapshot used by the geometric hot paths.
#[derive(Debug, Clone)]
pub struct SystemGeom {
    pub dimension: usize,
    pub ratios: Vec<f64>,
    pub anchors: Vec<Vec<f64>>,
    pub ball: Ball,
    pub diameter: f64,
    pub min_ratio: f64,
    /// Exact interval [lo, hi] of the hull per axis when the system is
    /// rational; `None` otherwise.
    pub exact_box: Option<Vec<(BigRational, BigRational)>>,
    /// For d = 1: the hull interval is exactly invariant under the joined
    /// maps, hence equals the attractor.
    pub full_interval: bool,
}

impl IfsSystem {
    pub fn new(dimension: usize, maps: Vec<Contraction>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidSystem("dimension must be positive".into()));
        }
        if maps.len() < 2 {
            return Err(Error::InvalidSystem("need at least two maps".into()));
        }
        for m in &maps {
            m.anchor.check_dim(dimension)?;
        }
        let anchors: Vec<Point> = maps.iter().map(|m| m.anchor.clone()).collect();
        let hull = hull_of(&anchors, dimension)?;
        let bounding_ball_center = hull.centroid.clone();
        let bounding_ball_radius = hull.diameter.clone();

        let ratios: Vec<f64> = maps.iter().map(|m| m.ratio.to_f64()).collect();
        let anchors_f: Vec<Vec<f64>> = maps.iter().map(|m| m.anchor.floats()).collect();
        let ball = Ball {
            center: bounding_ball_center.floats(),
            radius: bounding_ball_radius.to_f64(),
        };
        let diameter = hull.diameter_f64();
        let min_ratio = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let exact_box = hull.exact_bounding_box().filter(|_| {
            maps.iter().all(|m| m.ratio.is_exact() && m.anchor.is_exact())
        });
        let full_interval = if dimension == 1 {
            full_interval_1d(&maps, &hull)
        } else {
            false
        };

        let geom = SystemGeom {
            dimension,
            ratios,
            anchors: anchors_f,
            ball,
            diameter,
            min_ratio,
            exact_box,
            full_interval,
        };
        Ok(IfsSystem { dimension, maps, hull, bounding_ball_center, bounding_ball_radius, geom })
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn geom(&self) -> &SystemGeom {
        &self.geom
    }

    pub fn is_exact(&self) -> bool {
        self.geom.exact_box.is_some()
    }

    pub fn map(&self, digit: u8) -> &Contraction {
        &self.maps[(digit - 1) as usize]
    }

    pub fn check_digit(&self, digit: u8) -> Result<()> {
        if digit == 0 || digit as usize > self.len() {
            return Err(Error::InvalidArgument(format!(
                "digit {digit} out of range 1..={}",
                self.len()
            )));
        }
        Ok(())
    }

    /// Left-to-right composition: the first digit is the outermost map.
    pub fn apply_word(&self, w: &Word, x: &Point) -> Result<Point> {
        let mut y = x.clone();
        for &d in w.digits().iter().rev() {
            self.check_digit(d)?;
            y = apply(self.map(d), &y)?;
        }
        Ok(y)
    }

    /// Product of ratios along the word (1 for the empty word), plus the
    /// induced diameter bound Diam(hull)·product.
    pub fn word_contraction(&self, w: &Word) -> Result<(Scalar, Scalar)> {
        let mut prod = Scalar::one();
        for &d in w.digits() {
            self.check_digit(d)?;
            prod = prod.mul(&self.map(d).ratio);
        }
        let diam_bound = self.hull.diameter.mul(&prod);
        Ok((prod, diam_bound))
    }

    /// Σ r_j^d with the trichotomy against 1 (exact when ratios are exact).
    pub fn similarity_sum(&self) -> (Scalar, SimilarityFlag) {
        let d = self.dimension as u32;
        let sum = self
            .maps
            .iter()
            .fold(Scalar::zero(), |acc, m| acc.add(&m.ratio.powi(d)));
        let flag = sum.trichotomy(&Scalar::one());
        (sum, flag)
    }

    /// Exact f64 pullback with a propagated worst-case error bound.
    /// `err_in` is the caller's bound on the input point.
    pub fn pullback_f64(&self, digit: u8, y: &[f64], err_in: f64, out: &mut Vec<f64>) -> f64 {
        let j = (digit - 1) as usize;
        let r = self.geom.ratios[j];
        let a = &self.geom.anchors[j];
        out.clear();
        let mut max_abs: f64 = 0.0;
        for (yi, ai) in y.iter().zip(a) {
            let v = (yi - (1.0 - r) * ai) / r;
            max_abs = max_abs.max(v.abs().max(yi.abs()));
            out.push(v);
        }
        // per-step rounding plus 1/r amplification of the incoming bound
        (err_in + 4.0 * f64::EPSILON * (max_abs + 1.0)) / r
    }

    /// Exact rational pullback (system must be exact).
    pub fn pullback_exact(&self, digit: u8, y: &[BigRational]) -> Option<Vec<BigRational>> {
        let m = self.map(digit);
        let r = m.ratio.as_exact()?;
        let anchor = m.anchor.exact_coords()?;
        let one_minus = BigRational::from_integer(1.into()) - r;
        Some(
            y.iter()
                .zip(&anchor)
                .map(|(yi, ai)| (yi - &one_minus * ai) / r)
                .collect(),
        )
    }
}

/// Decide, exactly when possible, whether the images of the hull interval
/// join back into the whole interval; if so the attractor IS that interval.
fn full_interval_1d(maps: &[Contraction], hull: &Hull) -> bool {
    if let Some(bb) = hull.exact_bounding_box() {
        let (lo, hi) = (&bb[0].0, &bb[0].1);
        let mut images: Vec<(BigRational, BigRational)> = Vec::new();
        for m in maps {
            let (Some(r), Some(a)) = (m.ratio.as_exact(), m.anchor.coords[0].as_exact()) else {
                return false;
            };
            let one_minus = BigRational::from_integer(1.into()) - r;
            let f = |x: &BigRational| r * x + &one_minus * a;
            images.push((f(lo), f(hi)));
        }
        images.sort();
        if &images[0].0 != lo {
            return false;
        }
        let mut reach = images[0].1.clone();
        for (l, h) in &images[1..] {
            if l > &reach {
                return false;
            }
            if h > &reach {
                reach = h.clone();
            }
        }
        &reach == hi
    } else {
        let lo = hull.bounding_box()[0].0;
        let hi = hull.bounding_box()[0].1;
        let mut images: Vec<(f64, f64)> = maps
            .iter()
            .map(|m| {
                let r = m.ratio.to_f64();
                let a = m.anchor.floats()[0];
                let f = |x: f64| r * x + (1.0 - r) * a;
                (f(lo), f(hi))
            })
            .collect();
        images.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        let tol = 1e-12 * (hi - lo).abs().max(1.0);
        if (images[0].0 - lo).abs() > tol {
            return false;
        }
        let mut reach = images[0].1;
        for (l, h) in &images[1..] {
            if *l > reach + tol {
                return false;
            }
            reach = reach.max(*h);
        }
        (reach - hi).abs() <= tol
    }
}

// ---------------------------------------------------------------------------
// JSON form
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum NumberRepr {
    Float(f64),
    Text(String),
}

impl NumberRepr {
    fn to_scalar(&self) -> Result<Scalar> {
        match self {
            NumberRepr::Float(v) => Ok(Scalar::float(*v)),
            NumberRepr::Text(t) => Scalar::parse(t),
        }
    }

    fn from_scalar(s: &Scalar) -> NumberRepr {
        match s {
            Scalar::Exact(_) => NumberRepr::Text(s.repr()),
            Scalar::Float(e) => NumberRepr::Float(e.value),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct MapRepr {
    ratio: NumberRepr,
    anchor: Vec<NumberRepr>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SystemRepr {
    dimension: usize,
    maps: Vec<MapRepr>,
}

impl IfsSystem {
    /// Parse the JSON document form. Rational strings ("p/q" or integers)
    /// produce exact scalars; floats stay in float mode.
    pub fn from_json(text: &str) -> Result<Self> {
        let repr: SystemRepr = serde_json::from_str(text)
            .map_err(|e| Error::InvalidSystem(format!("bad system JSON: {e}")))?;
        let maps = repr
            .maps
            .iter()
            .map(|m| {
                let ratio = m.ratio.to_scalar()?;
                let coords = m.anchor.iter().map(NumberRepr::to_scalar).collect::<Result<_>>()?;
                Contraction::new(ratio, Point::new(coords))
            })
            .collect::<Result<Vec<_>>>()?;
        IfsSystem::new(repr.dimension, maps)
    }

    pub fn to_json(&self) -> String {
        let repr = SystemRepr {
            dimension: self.dimension,
            maps: self
                .maps
                .iter()
                .map(|m| MapRepr {
                    ratio: NumberRepr::from_scalar(&m.ratio),
                    anchor: m.anchor.coords.iter().map(NumberRepr::from_scalar).collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&repr).expect("system serializes")
    }
}

// ---------------------------------------------------------------------------
// Stock systems used in tests, examples and the desk-check suite
// ---------------------------------------------------------------------------

/// d=1 homogeneous system with exact ratio `num/den` and anchors 0 and
/// r/(1−r)·hi_digit style endpoints: maps f_1(x) = r·x, f_2(x) = r·x + r.
/// In anchor form the anchors are 0 and r/(1−r).
pub fn two_map_line_system(ratio: Scalar) -> Result<IfsSystem> {
    let one = Scalar::one();
    let hi = ratio.div(&one.sub(&ratio));
    let maps = vec![
        Contraction::new(ratio.clone(), Point::new(vec![Scalar::zero()]))?,
        Contraction::new(ratio, Point::new(vec![hi]))?,
    ];
    IfsSystem::new(1, maps)
}

/// d=1 homogeneous system with anchors 0 and 1 (attractor ⊆ [0,1]).
pub fn unit_anchor_system(ratio: Scalar) -> Result<IfsSystem> {
    let maps = vec![
        Contraction::new(ratio.clone(), Point::new(vec![Scalar::zero()]))?,
        Contraction::new(ratio, Point::new(vec![Scalar::one()]))?,
    ];
    IfsSystem::new(1, maps)
}

/// d=2 homogeneous system on the vertices of an equilateral-ish triangle
/// with exact rational coordinates (0,0), (1,0), (1/2, 7/8). The height is
/// rational so exact mode stays available; the shape is irrelevant to the
/// overlap phenomena being probed.
pub fn triangle_system(ratio: Scalar) -> Result<IfsSystem> {
    let maps = vec![
        Contraction::new(
            ratio.clone(),
            Point::new(vec![Scalar::zero(), Scalar::zero()]),
        )?,
        Contraction::new(ratio.clone(), Point::new(vec![Scalar::one(), Scalar::zero()]))?,
        Contraction::new(
            ratio,
            Point::new(vec![Scalar::from_ratio(1, 2), Scalar::from_ratio(7, 8)]),
        )?,
    ];
    IfsSystem::new(2, maps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_half() -> IfsSystem {
        unit_anchor_system(Scalar::from_ratio(1, 2)).unwrap()
    }

    #[test]
    fn apply_midpoint_and_fixed_point() {
        let s = unit_half();
        let x = Point::new(vec![Scalar::zero()]);
        let y = apply(&s.maps[1], &x).unwrap();
        assert_eq!(y.coords[0], Scalar::from_ratio(1, 2));
        let z = apply(&s.maps[0], &x).unwrap();
        assert_eq!(z.coords[0], Scalar::zero());
    }

    #[test]
    fn apply_exact_cross_check() {
        // r=7/10, anchor 1, x = 7/3 → 29/15 ≈ 1.9333
        let c = Contraction::new(
            Scalar::from_ratio(7, 10),
            Point::new(vec![Scalar::one()]),
        )
        .unwrap();
        let y = apply(&c, &Point::new(vec![Scalar::from_ratio(7, 3)])).unwrap();
        assert_eq!(y.coords[0], Scalar::from_ratio(29, 15));
        assert!((y.coords[0].to_f64() - 1.9333333333333333).abs() < 1e-15);
    }

    #[test]
    fn preimage_inverts_apply() {
        let s = unit_half();
        let x = Point::new(vec![Scalar::from_ratio(1, 2)]);
        assert_eq!(preimage(&s.maps[0], &x).unwrap().coords[0], Scalar::one());
        assert_eq!(preimage(&s.maps[1], &x).unwrap().coords[0], Scalar::zero());
    }

    #[test]
    fn apply_word_composes_outermost_first() {
        let s = unit_half();
        let zero = Point::new(vec![Scalar::zero()]);
        let w = Word::new(vec![2, 2], 2).unwrap();
        assert_eq!(
            s.apply_word(&w, &zero).unwrap().coords[0],
            Scalar::from_ratio(3, 4)
        );
        let w = Word::new(vec![1, 2, 1], 2).unwrap();
        assert_eq!(
            s.apply_word(&w, &zero).unwrap().coords[0],
            Scalar::from_ratio(1, 4)
        );
        let x = Point::new(vec![Scalar::from_ratio(1, 3)]);
        assert_eq!(s.apply_word(&Word::empty(), &x).unwrap(), x);
    }

    #[test]
    fn word_contraction_products() {
        let s = unit_half();
        let (p, _) = s.word_contraction(&Word::new(vec![1, 1], 2).unwrap()).unwrap();
        assert_eq!(p, Scalar::from_ratio(1, 4));
        let (p, _) = s.word_contraction(&Word::empty()).unwrap();
        assert_eq!(p, Scalar::one());

        let maps = vec![
            Contraction::new(Scalar::from_ratio(1, 2), Point::new(vec![Scalar::zero()]))
                .unwrap(),
            Contraction::new(Scalar::from_ratio(7, 10), Point::new(vec![Scalar::one()]))
                .unwrap(),
        ];
        let s = IfsSystem::new(1, maps).unwrap();
        let (p, _) = s.word_contraction(&Word::new(vec![1, 2, 2], 2).unwrap()).unwrap();
        assert_eq!(p, Scalar::from_ratio(49, 200));
        assert!((p.to_f64() - 0.245).abs() < 1e-15);
    }

    #[test]
    fn similarity_sum_trichotomy() {
        let (sum, flag) = unit_half().similarity_sum();
        assert_eq!(sum, Scalar::one());
        assert_eq!(flag, Trichotomy::Equal);

        let s = triangle_system(Scalar::from_ratio(13, 20)).unwrap();
        let (sum, flag) = s.similarity_sum();
        assert_eq!(sum, Scalar::from_ratio(3 * 169, 400));
        assert!((sum.to_f64() - 1.2675).abs() < 1e-15);
        assert_eq!(flag, Trichotomy::Greater);

        let s = unit_anchor_system(Scalar::from_ratio(1, 3)).unwrap();
        let (sum, flag) = s.similarity_sum();
        assert_eq!(sum, Scalar::from_ratio(2, 3));
        assert_eq!(flag, Trichotomy::Less);
    }

    #[test]
    fn similarity_flag_stable_under_permutation() {
        let maps = vec![
            Contraction::new(Scalar::from_ratio(1, 2), Point::new(vec![Scalar::zero()]))
                .unwrap(),
            Contraction::new(Scalar::from_ratio(1, 2), Point::new(vec![Scalar::one()]))
                .unwrap(),
        ];
        let mut rev = maps.clone();
        rev.reverse();
        let a = IfsSystem::new(1, maps).unwrap().similarity_sum().1;
        let b = IfsSystem::new(1, rev).unwrap().similarity_sum().1;
        assert_eq!(a, b);
    }

    #[test]
    fn full_interval_certification() {
        assert!(unit_half().geom().full_interval);
        assert!(two_map_line_system(Scalar::from_ratio(7, 10)).unwrap().geom().full_interval);
        assert!(two_map_line_system(Scalar::from_ratio(3, 5)).unwrap().geom().full_interval);
        // middle-third Cantor: images [0,1/3] ∪ [2/3,1] leave a gap
        assert!(!unit_anchor_system(Scalar::from_ratio(1, 3)).unwrap().geom().full_interval);
    }

    #[test]
    fn json_round_trip_preserves_exactness() {
        let text = r#"{"dimension":1,"maps":[
            {"ratio":"7/10","anchor":["0"]},
            {"ratio":"7/10","anchor":["7/3"]}]}"#;
        let s = IfsSystem::from_json(text).unwrap();
        assert!(s.is_exact());
        assert_eq!(s.hull.diameter, Scalar::from_ratio(7, 3));
        let back = IfsSystem::from_json(&s.to_json()).unwrap();
        assert!(back.is_exact());
        assert_eq!(back.hull.diameter, Scalar::from_ratio(7, 3));

        let float_text = r#"{"dimension":1,"maps":[
            {"ratio":0.7,"anchor":[0.0]},
            {"ratio":0.7,"anchor":[2.3333333333333335]}]}"#;
        let f = IfsSystem::from_json(float_text).unwrap();
        assert!(!f.is_exact());
    }

    #[test]
    fn invalid_systems_are_rejected() {
        assert!(Contraction::new(Scalar::one(), Point::new(vec![Scalar::zero()])).is_err());
        assert!(Contraction::new(Scalar::zero(), Point::new(vec![Scalar::zero()])).is_err());
        let one_map = vec![Contraction::new(
            Scalar::from_ratio(1, 2),
            Point::new(vec![Scalar::zero()]),
        )
        .unwrap()];
        assert!(IfsSystem::new(1, one_map).is_err());
    }

    #[test]
    fn bounding_ball_contains_hull_and_nests_children() {
        let s = two_map_line_system(Scalar::from_ratio(7, 10)).unwrap();
        let g = s.geom();
        assert_eq!(g.ball.radius, g.diameter);
        // f_j(ball) ⊆ ball: |f_j(c) − c| + r·R ≤ R
        for (r, a) in g.ratios.iter().zip(&g.anchors) {
            let fc: Vec<f64> =
                g.ball.center.iter().zip(a).map(|(c, ai)| r * c + (1.0 - r) * ai).collect();
            let shift = crate::geometry::dist(&fc, &g.ball.center);
            assert!(shift + r * g.ball.radius <= g.ball.radius + 1e-12);
        }
    }
}
