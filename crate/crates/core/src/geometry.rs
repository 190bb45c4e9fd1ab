//! Points, hulls and balls in R^d.

use num_rational::BigRational;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A point with `Scalar` coordinates; length is the ambient dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub coords: Vec<Scalar>,
}

impl Point {
    pub fn new(coords: Vec<Scalar>) -> Self {
        Point { coords }
    }

    pub fn from_f64(coords: &[f64]) -> Self {
        Point { coords: coords.iter().map(|&c| Scalar::float(c)).collect() }
    }

    /// Point whose coordinates are the exact rational values of the floats.
    pub fn exact_from_f64(coords: &[f64]) -> Option<Self> {
        let cs: Option<Vec<_>> = coords.iter().map(|&c| Scalar::exact_from_f64(c)).collect();
        cs.map(|coords| Point { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn is_exact(&self) -> bool {
        self.coords.iter().all(Scalar::is_exact)
    }

    pub fn floats(&self) -> Vec<f64> {
        self.coords.iter().map(Scalar::to_f64).collect()
    }

    pub fn exact_coords(&self) -> Option<Vec<BigRational>> {
        self.coords.iter().map(|c| c.as_exact().cloned()).collect()
    }

    pub fn check_dim(&self, d: usize) -> Result<()> {
        if self.dim() == d {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: d, got: self.dim() })
        }
    }
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
}

/// Euclidean ball, the cover primitive (images of balls under similitudes are
/// balls in any dimension).
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn contains(&self, p: &[f64]) -> bool {
        dist(&self.center, p) <= self.radius
    }

    /// Distance from `p` to the ball (0 inside).
    pub fn dist_to(&self, p: &[f64]) -> f64 {
        (dist(&self.center, p) - self.radius).max(0.0)
    }
}

/// Convex hull data for the anchor set.
///
/// For d ≤ 2 the vertex list is reduced to extreme points (exactly, in
/// rational mode); for higher dimensions the deduplicated anchor set is kept,
/// which leaves diameter and centroid unchanged.
#[derive(Debug, Clone)]
pub struct Hull {
    pub dimension: usize,
    pub vertices: Vec<Point>,
    /// Max pairwise distance of hull vertices.
    pub diameter: Scalar,
    /// Arithmetic mean of the vertex list.
    pub centroid: Point,
    /// True when the anchors span less than the ambient dimension.
    pub degenerate: bool,
}

impl Hull {
    pub fn diameter_f64(&self) -> f64 {
        self.diameter.to_f64()
    }

    /// Interval [min, max] per coordinate, as floats.
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        let d = self.dimension;
        let mut bb = vec![(f64::INFINITY, f64::NEG_INFINITY); d];
        for v in &self.vertices {
            for (i, c) in v.floats().iter().enumerate() {
                bb[i].0 = bb[i].0.min(*c);
                bb[i].1 = bb[i].1.max(*c);
            }
        }
        bb
    }

    /// Exact bounding box when every vertex is exact.
    pub fn exact_bounding_box(&self) -> Option<Vec<(BigRational, BigRational)>> {
        let mut bb: Option<Vec<(BigRational, BigRational)>> = None;
        for v in &self.vertices {
            let cs = v.exact_coords()?;
            match &mut bb {
                None => bb = Some(cs.into_iter().map(|c| (c.clone(), c)).collect()),
                Some(bb) => {
                    for (i, c) in cs.into_iter().enumerate() {
                        if c < bb[i].0 {
                            bb[i].0 = c.clone();
                        }
                        if c > bb[i].1 {
                            bb[i].1 = c;
                        }
                    }
                }
            }
        }
        bb
    }

    /// Exact membership in the hull for d ≤ 2 (interval / convex polygon);
    /// falls back to the exact bounding box for d ≥ 3.
    pub fn contains_exact(&self, p: &[BigRational]) -> Option<bool> {
        match self.dimension {
            1 => {
                let bb = self.exact_bounding_box()?;
                Some(p[0] >= bb[0].0 && p[0] <= bb[0].1)
            }
            2 => {
                let verts: Option<Vec<Vec<BigRational>>> =
                    self.vertices.iter().map(|v| v.exact_coords()).collect();
                let verts = verts?;
                if verts.len() == 1 {
                    return Some(p == verts[0].as_slice());
                }
                if verts.len() == 2 {
                    return Some(on_segment(&verts[0], &verts[1], p));
                }
                // vertices are in counter-clockwise order (monotone chain)
                let m = verts.len();
                for i in 0..m {
                    let a = &verts[i];
                    let b = &verts[(i + 1) % m];
                    if cross_sign(a, b, p) < 0 {
                        return Some(false);
                    }
                }
                Some(true)
            }
            _ => {
                let bb = self.exact_bounding_box()?;
                Some(p.iter().zip(&bb).all(|(c, (lo, hi))| c >= lo && c <= hi))
            }
        }
    }
}

fn cross_sign(a: &[BigRational], b: &[BigRational], c: &[BigRational]) -> i8 {
    let v = (&b[0] - &a[0]) * (&c[1] - &a[1]) - (&b[1] - &a[1]) * (&c[0] - &a[0]);
    if v.is_zero() {
        0
    } else if v < BigRational::zero() {
        -1
    } else {
        1
    }
}

fn on_segment(a: &[BigRational], b: &[BigRational], p: &[BigRational]) -> bool {
    if cross_sign(a, b, p) != 0 {
        return false;
    }
    let within = |lo: &BigRational, hi: &BigRational, v: &BigRational| {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        v >= lo && v <= hi
    };
    within(&a[0], &b[0], &p[0]) && within(&a[1], &b[1], &p[1])
}

/// Build hull data from anchor points.
pub fn hull_of(points: &[Point], dimension: usize) -> Result<Hull> {
    if points.is_empty() {
        return Err(Error::InvalidSystem("no anchor points".into()));
    }
    for p in points {
        p.check_dim(dimension)?;
    }
    let mut vertices = dedup_points(points);
    if dimension == 1 {
        vertices = hull_1d(&vertices);
    } else if dimension == 2 {
        vertices = hull_2d(&vertices);
    }
    let degenerate = affine_dim(&vertices) < dimension;

    let mut diameter = Scalar::zero();
    for i in 0..vertices.len() {
        for j in (i + 1)..vertices.len() {
            let d2 = dist_sq_scalar(&vertices[i], &vertices[j]);
            if d2.cmp_scalar(&diameter) == std::cmp::Ordering::Greater {
                diameter = d2;
            }
        }
    }
    let diameter = diameter.sqrt();

    let n = Scalar::from_integer(vertices.len() as i64);
    let centroid = Point::new(
        (0..dimension)
            .map(|i| {
                vertices
                    .iter()
                    .fold(Scalar::zero(), |acc, v| acc.add(&v.coords[i]))
                    .div(&n)
            })
            .collect(),
    );

    Ok(Hull { dimension, vertices, diameter, centroid, degenerate })
}

fn dist_sq_scalar(a: &Point, b: &Point) -> Scalar {
    a.coords
        .iter()
        .zip(&b.coords)
        .fold(Scalar::zero(), |acc, (x, y)| {
            let d = x.sub(y);
            acc.add(&d.mul(&d))
        })
}

fn dedup_points(points: &[Point]) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::new();
    for p in points {
        if !out.iter().any(|q| {
            q.coords
                .iter()
                .zip(&p.coords)
                .all(|(a, b)| a.cmp_scalar(b) == std::cmp::Ordering::Equal)
        }) {
            out.push(p.clone());
        }
    }
    out
}

fn hull_1d(points: &[Point]) -> Vec<Point> {
    let mut lo = 0;
    let mut hi = 0;
    for (i, p) in points.iter().enumerate() {
        if p.coords[0].cmp_scalar(&points[lo].coords[0]) == std::cmp::Ordering::Less {
            lo = i;
        }
        if p.coords[0].cmp_scalar(&points[hi].coords[0]) == std::cmp::Ordering::Greater {
            hi = i;
        }
    }
    if lo == hi {
        vec![points[lo].clone()]
    } else {
        vec![points[lo].clone(), points[hi].clone()]
    }
}

/// Andrew monotone chain; exact orientation when all points are rational,
/// float orientation otherwise. Returns counter-clockwise vertices.
fn hull_2d(points: &[Point]) -> Vec<Point> {
    if points.len() <= 2 {
        return points.to_vec();
    }
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&i, &j| {
        let a = &points[i].coords;
        let b = &points[j].coords;
        a[0].cmp_scalar(&b[0]).then(a[1].cmp_scalar(&b[1]))
    });

    let orient = |o: usize, a: usize, b: usize| -> i8 {
        let (po, pa, pb) = (&points[o], &points[a], &points[b]);
        if let (Some(o), Some(a), Some(b)) =
            (po.exact_coords(), pa.exact_coords(), pb.exact_coords())
        {
            cross_sign(&o, &a, &b)
        } else {
            let (o, a, b) = (po.floats(), pa.floats(), pb.floats());
            let v = (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
            if v == 0.0 {
                0
            } else if v < 0.0 {
                -1
            } else {
                1
            }
        }
    };

    let build = |iter: &mut dyn Iterator<Item = usize>| -> Vec<usize> {
        let mut chain: Vec<usize> = Vec::new();
        for i in iter {
            while chain.len() >= 2
                && orient(chain[chain.len() - 2], chain[chain.len() - 1], i) <= 0
            {
                chain.pop();
            }
            chain.push(i);
        }
        chain
    };

    let mut lower = build(&mut idx.iter().copied());
    let mut upper = build(&mut idx.iter().rev().copied());
    lower.pop();
    upper.pop();
    lower.append(&mut upper);
    if lower.is_empty() {
        // all collinear: keep the two extremes
        lower = vec![idx[0], idx[idx.len() - 1]];
    }
    lower.into_iter().map(|i| points[i].clone()).collect()
}

fn affine_dim(vertices: &[Point]) -> usize {
    if vertices.len() <= 1 {
        return 0;
    }
    let d = vertices[0].dim();
    if d == 1 {
        return 1;
    }
    if d == 2 {
        // any non-collinear triple spans the plane
        let fs: Vec<Vec<f64>> = vertices.iter().map(Point::floats).collect();
        for i in 1..fs.len() {
            for j in (i + 1)..fs.len() {
                let v = (fs[i][0] - fs[0][0]) * (fs[j][1] - fs[0][1])
                    - (fs[i][1] - fs[0][1]) * (fs[j][0] - fs[0][0]);
                if v.abs() > 0.0 {
                    return 2;
                }
            }
        }
        return 1;
    }
    // rank of the difference matrix via float Gaussian elimination
    let base = vertices[0].floats();
    let mut rows: Vec<Vec<f64>> = vertices[1..]
        .iter()
        .map(|v| v.floats().iter().zip(&base).map(|(a, b)| a - b).collect())
        .collect();
    let mut rank = 0;
    for col in 0..d {
        let Some(pivot) = (rank..rows.len()).max_by(|&a, &b| {
            rows[a][col].abs().partial_cmp(&rows[b][col].abs()).unwrap()
        }) else {
            break;
        };
        if rows[pivot][col].abs() < 1e-12 {
            continue;
        }
        rows.swap(rank, pivot);
        for r in (rank + 1)..rows.len() {
            let f = rows[r][col] / rows[rank][col];
            for c in col..d {
                rows[r][c] -= f * rows[rank][c];
            }
        }
        rank += 1;
    }
    rank
}
