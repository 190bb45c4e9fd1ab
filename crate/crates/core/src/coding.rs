//! Admissible-prefix trees: the depth-N over-approximation of the set of
//! codings of a point, its cardinality classification, and the branch
//! witness check.
//!
//! A prefix w is kept when the pullback of x along w passes membership
//! against the attractor at the depth-adjusted tolerance δ_k = δ /
//! contraction(w) (preimages expand errors by 1/r per level, so this keeps
//! the over-approximation slack uniform in the original space). On exact
//! systems an exact-arithmetic hull gate runs first: the pullback is
//! computed in rational arithmetic whenever the float test is within its
//! propagated error bound of the hull boundary, so verdicts near cylinder
//! boundaries do not depend on float noise. Certified full-interval systems
//! make the hull gate sharp (hull = attractor) and the membership gate
//! redundant.
//!
//! Trees over-approximate the true coding set, never under-approximate:
//! a reported unique path is trustworthy evidence at that depth, and
//! branching verdicts carry a two-coding witness.

use std::rc::Rc;

use num_rational::BigRational;

use crate::cover::{membership, membership_in_cylinder, cylinder_interval_1d_exact};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::ifs::{IfsSystem, Word};

/// Coding trees keep pullbacks inline; higher ambient dimensions are not
/// supported by this engine.
pub const MAX_TREE_DIM: usize = 4;

#[derive(Debug, Clone, Copy)]
struct ArenaNode {
    parent: u32,
    digit: u8,
}

fn arena_word(nodes: &[ArenaNode], mut id: u32) -> Vec<u8> {
    let mut digits = Vec::new();
    while id != 0 {
        let n = nodes[id as usize];
        digits.push(n.digit);
        id = n.parent;
    }
    digits.reverse();
    digits
}

/// First node that admitted two digits, with its divergence pair.
#[derive(Debug, Clone)]
pub struct BranchWitness {
    /// Common prefix before the divergence.
    pub prefix: Word,
    pub digit_low: u8,
    pub digit_high: u8,
    /// Pullback along the prefix passed membership in both digit cylinders
    /// at the depth tolerance.
    pub confirmed: bool,
}

/// Prefix-closed tree of admissible words for one root point.
#[derive(Debug, Clone)]
pub struct CodingTree {
    pub root: Vec<f64>,
    pub depth: usize,
    pub tolerance: f64,
    /// b(k) = number of admissible words of length k; index 0 is the root.
    pub branch_counts: Vec<usize>,
    pub saturated: bool,
    pub witness: Option<BranchWitness>,
    nodes: Vec<ArenaNode>,
    frontier_ids: Vec<u32>,
}

impl CodingTree {
    /// Number of admissible words at the deepest completed level.
    pub fn leaf_count(&self) -> usize {
        *self.branch_counts.last().unwrap_or(&0)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn word_of(&self, id: u32) -> Word {
        Word::new(arena_word(&self.nodes, id), 255).expect("arena digits are valid")
    }

    /// Words at the deepest completed level, in deterministic BFS order.
    pub fn leaf_words(&self) -> Vec<Word> {
        self.frontier_ids.iter().map(|&id| self.word_of(id)).collect()
    }
}

/// Cardinality verdict at finite depth.
#[derive(Debug, Clone, PartialEq)]
pub enum CodingVerdict {
    /// Exactly one admissible path survives to the requested depth.
    UniquePathToDepth(usize),
    /// `paths` admissible words at the requested depth (0 = no surviving
    /// path: the point is not on the attractor within tolerance).
    Branching { paths: usize },
    /// Node cap hit before the requested depth.
    Saturated { nodes: usize },
}

#[derive(Debug, Clone)]
pub struct CodingClass {
    pub verdict: CodingVerdict,
    /// log b(N) / N, reported when b(N) ≥ 2.
    pub growth_exponent: Option<f64>,
}

pub fn classify(tree: &CodingTree) -> CodingClass {
    if tree.saturated {
        return CodingClass {
            verdict: CodingVerdict::Saturated { nodes: tree.node_count() },
            growth_exponent: None,
        };
    }
    let b = tree.leaf_count();
    if b == 1 {
        CodingClass { verdict: CodingVerdict::UniquePathToDepth(tree.depth), growth_exponent: None }
    } else {
        let growth = if b >= 2 { Some((b as f64).ln() / tree.depth as f64) } else { None };
        CodingClass { verdict: CodingVerdict::Branching { paths: b }, growth_exponent: growth }
    }
}

// ---------------------------------------------------------------------------
// The digit filter shared by every tree walker
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub(crate) struct PullbackState {
    pub y: [f64; MAX_TREE_DIM],
    pub err: f64,
    pub contraction: f64,
    pub exact: Option<Rc<Vec<BigRational>>>,
}

enum BoxTest {
    In,
    Out,
    Uncertain,
}

/// Cached float hull geometry for the fast in/out/uncertain pre-test.
enum HullShape {
    Interval { lo: f64, hi: f64 },
    Polygon { verts: Vec<[f64; 2]>, edge_lens: Vec<f64> },
    Bounds { bb: Vec<(f64, f64)> },
}

pub(crate) struct DigitFilter<'a> {
    s: &'a IfsSystem,
    delta: f64,
    exact_sys: bool,
    certified: bool,
    root_exact: Option<Rc<Vec<BigRational>>>,
    shape: HullShape,
}

impl<'a> DigitFilter<'a> {
    pub fn new(s: &'a IfsSystem, x: &Point, delta: f64) -> Result<DigitFilter<'a>> {
        if s.dimension > MAX_TREE_DIM {
            return Err(Error::InvalidArgument(format!(
                "coding trees support dimension ≤ {MAX_TREE_DIM}"
            )));
        }
        if delta <= 0.0 {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        x.check_dim(s.dimension)?;
        let exact_sys = s.is_exact();
        let root_exact = if exact_sys {
            let coords: Option<Vec<BigRational>> = x
                .coords
                .iter()
                .map(|c| {
                    c.as_exact().cloned().or_else(|| {
                        num_traits::FromPrimitive::from_f64(c.to_f64())
                    })
                })
                .collect();
            coords.map(Rc::new)
        } else {
            None
        };
        let shape = match s.dimension {
            1 => {
                let (lo, hi) = s.hull.bounding_box()[0];
                HullShape::Interval { lo, hi }
            }
            2 if s.hull.vertices.len() >= 3 => {
                let verts: Vec<[f64; 2]> = s
                    .hull
                    .vertices
                    .iter()
                    .map(|v| {
                        let f = v.floats();
                        [f[0], f[1]]
                    })
                    .collect();
                let m = verts.len();
                let edge_lens = (0..m)
                    .map(|i| {
                        let a = verts[i];
                        let b = verts[(i + 1) % m];
                        ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
                    })
                    .collect();
                HullShape::Polygon { verts, edge_lens }
            }
            _ => HullShape::Bounds { bb: s.hull.bounding_box() },
        };
        Ok(DigitFilter {
            s,
            delta,
            exact_sys: exact_sys && root_exact.is_some(),
            certified: s.geom().full_interval,
            root_exact,
            shape,
        })
    }

    pub fn root_state(&self, x: &Point) -> PullbackState {
        let mut y = [0.0; MAX_TREE_DIM];
        let mut err = 0.0f64;
        for (i, c) in x.coords.iter().enumerate() {
            y[i] = c.to_f64();
            err = err.max(c.err_bound() + f64::EPSILON * y[i].abs());
        }
        PullbackState { y, err, contraction: 1.0, exact: self.root_exact.clone() }
    }

    fn float_hull_test(&self, y: &[f64], band: f64) -> BoxTest {
        match &self.shape {
            HullShape::Interval { lo, hi } => {
                if y[0] < lo - band || y[0] > hi + band {
                    BoxTest::Out
                } else if y[0] > lo + band && y[0] < hi - band {
                    BoxTest::In
                } else {
                    BoxTest::Uncertain
                }
            }
            HullShape::Polygon { verts, edge_lens } => {
                let mut all_in = true;
                let m = verts.len();
                for i in 0..m {
                    let a = verts[i];
                    let b = verts[(i + 1) % m];
                    let elen = edge_lens[i];
                    let cross =
                        (b[0] - a[0]) * (y[1] - a[1]) - (b[1] - a[1]) * (y[0] - a[0]);
                    let margin = 2.0 * band * elen + f64::EPSILON * (elen + 1.0);
                    if cross < -margin {
                        return BoxTest::Out;
                    }
                    if cross <= margin {
                        all_in = false;
                    }
                }
                if all_in {
                    BoxTest::In
                } else {
                    BoxTest::Uncertain
                }
            }
            HullShape::Bounds { bb } => {
                let mut all_in = true;
                for (yi, (lo, hi)) in y.iter().zip(bb) {
                    if *yi < lo - band || *yi > hi + band {
                        return BoxTest::Out;
                    }
                    if *yi <= lo + band || *yi >= hi - band {
                        all_in = false;
                    }
                }
                if all_in {
                    BoxTest::In
                } else {
                    BoxTest::Uncertain
                }
            }
        }
    }

    /// Make the exact pullback of `state` available, recomputing it along
    /// the parent word from the root when it was never materialized.
    fn materialize(
        &self,
        state: &mut PullbackState,
        word: &dyn Fn() -> Vec<u8>,
    ) -> Option<Rc<Vec<BigRational>>> {
        if let Some(e) = &state.exact {
            return Some(e.clone());
        }
        let mut cur: Vec<BigRational> = self.root_exact.as_ref()?.as_ref().clone();
        for d in word() {
            cur = self.s.pullback_exact(d, &cur)?;
        }
        let rc = Rc::new(cur);
        state.exact = Some(rc.clone());
        Some(rc)
    }

    /// Test one digit from a parent pullback state. `parent_word` is only
    /// consulted when the exact lane has to be materialized.
    pub fn try_digit(
        &self,
        parent: &mut PullbackState,
        parent_word: &dyn Fn() -> Vec<u8>,
        digit: u8,
    ) -> Result<Option<PullbackState>> {
        let d = self.s.dimension;
        let j = (digit - 1) as usize;
        let r = self.s.geom().ratios[j];
        let anchor = &self.s.geom().anchors[j];
        let mut y2 = [0.0; MAX_TREE_DIM];
        let mut max_abs = 0.0f64;
        for i in 0..d {
            let v = (parent.y[i] - (1.0 - r) * anchor[i]) / r;
            max_abs = max_abs.max(v.abs().max(parent.y[i].abs()));
            y2[i] = v;
        }
        // per-step rounding plus 1/r amplification of the incoming bound
        let err2 = (parent.err + 4.0 * f64::EPSILON * (max_abs + 1.0)) / r;
        let c2 = parent.contraction * r;
        let mut exact2: Option<Rc<Vec<BigRational>>> = None;

        if self.exact_sys {
            match self.float_hull_test(&y2[..d], err2) {
                BoxTest::Out => return Ok(None),
                BoxTest::In => {
                    // carry the exact lane forward when the parent has it
                    if let Some(pe) = &parent.exact {
                        exact2 = self.s.pullback_exact(digit, pe).map(Rc::new);
                    }
                }
                BoxTest::Uncertain => {
                    let pe = self.materialize(parent, parent_word).ok_or_else(|| {
                        Error::InvalidArgument("exact lane unavailable".into())
                    })?;
                    let ey = self
                        .s
                        .pullback_exact(digit, &pe)
                        .ok_or_else(|| Error::InvalidArgument("exact lane unavailable".into()))?;
                    match self.s.hull.contains_exact(&ey) {
                        Some(true) => exact2 = Some(Rc::new(ey)),
                        Some(false) => return Ok(None),
                        None => return Err(Error::InvalidArgument("exact lane unavailable".into())),
                    }
                }
            }
        }

        // membership gate at the depth-adjusted tolerance; redundant on
        // certified systems where the hull gate is already sharp
        if !(self.exact_sys && self.certified) {
            let delta_k = self.delta / c2;
            if !membership(self.s, &y2[..d], delta_k)?.is_inside() {
                return Ok(None);
            }
        }

        Ok(Some(PullbackState { y: y2, err: err2, contraction: c2, exact: exact2 }))
    }

    /// Check a divergence witness: pullback within the depth tolerance of
    /// both digit cylinders.
    pub fn confirm_witness(&self, state: &PullbackState, k: u8, l: u8) -> Result<bool> {
        let d = self.s.dimension;
        let delta_k = self.delta / state.contraction;
        // exact route on certified systems: the pullback lies in both
        // cylinder intervals
        if self.exact_sys && self.certified && d == 1 {
            if let Some(e) = &state.exact {
                let wk = Word::new(vec![k], self.s.len())?;
                let wl = Word::new(vec![l], self.s.len())?;
                if let (Some((klo, khi)), Some((llo, lhi))) = (
                    cylinder_interval_1d_exact(self.s, &wk),
                    cylinder_interval_1d_exact(self.s, &wl),
                ) {
                    let v = &e[0];
                    return Ok(v >= &klo && v <= &khi && v >= &llo && v <= &lhi);
                }
            }
        }
        let wk = Word::new(vec![k], self.s.len())?;
        let wl = Word::new(vec![l], self.s.len())?;
        Ok(membership_in_cylinder(self.s, &wk, &state.y[..d], delta_k)?.is_inside()
            && membership_in_cylinder(self.s, &wl, &state.y[..d], delta_k)?.is_inside())
    }
}

// ---------------------------------------------------------------------------
// Public operations
// ---------------------------------------------------------------------------

/// Digits j whose preimage of x passes membership at the adjusted
/// tolerance; over-approximates the true first-digit set.
pub fn admissible_digits(s: &IfsSystem, x: &Point, delta: f64) -> Result<Vec<u8>> {
    let filter = DigitFilter::new(s, x, delta)?;
    let mut root = filter.root_state(x);
    let mut out = Vec::new();
    for digit in 1..=s.len() as u8 {
        if filter.try_digit(&mut root, &Vec::new, digit)?.is_some() {
            out.push(digit);
        }
    }
    Ok(out)
}

/// Breadth-first expansion of the admissible-prefix tree to `depth`, with a
/// node cap. Deterministic: digits are tested in ascending order.
pub fn enumerate_prefixes(
    s: &IfsSystem,
    x: &Point,
    depth: usize,
    delta: f64,
    node_cap: usize,
) -> Result<CodingTree> {
    if depth == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    let filter = DigitFilter::new(s, x, delta)?;
    let mut nodes = vec![ArenaNode { parent: 0, digit: 0 }];
    let mut branch_counts = vec![1usize];
    let mut witness: Option<BranchWitness> = None;
    let mut saturated = false;

    struct Entry {
        id: u32,
        state: PullbackState,
    }
    let mut frontier = vec![Entry { id: 0, state: filter.root_state(x) }];

    for _level in 0..depth {
        let mut next: Vec<Entry> = Vec::new();
        for entry in frontier.iter_mut() {
            let id = entry.id;
            let mut admitted: Vec<(u8, PullbackState)> = Vec::new();
            for digit in 1..=s.len() as u8 {
                let nodes_ref = &nodes;
                let word_fn = move || arena_word(nodes_ref, id);
                if let Some(st) = filter.try_digit(&mut entry.state, &word_fn, digit)? {
                    admitted.push((digit, st));
                }
            }
            if witness.is_none() && admitted.len() >= 2 {
                let confirmed =
                    filter.confirm_witness(&entry.state, admitted[0].0, admitted[1].0)?;
                witness = Some(BranchWitness {
                    prefix: Word::new(arena_word(&nodes, id), s.len())?,
                    digit_low: admitted[0].0,
                    digit_high: admitted[1].0,
                    confirmed,
                });
            }
            for (digit, st) in admitted {
                if nodes.len() >= node_cap {
                    saturated = true;
                    break;
                }
                let child = nodes.len() as u32;
                nodes.push(ArenaNode { parent: id, digit });
                next.push(Entry { id: child, state: st });
            }
            if saturated {
                break;
            }
        }
        if saturated {
            // retain the partial tree: frontier of the last complete level
            break;
        }
        branch_counts.push(next.len());
        frontier = next;
        if frontier.is_empty() {
            // dead tree: no admissible continuation
            while branch_counts.len() <= depth {
                branch_counts.push(0);
            }
            break;
        }
    }

    Ok(CodingTree {
        root: x.floats(),
        depth,
        tolerance: delta,
        branch_counts,
        saturated,
        witness,
        frontier_ids: frontier.iter().map(|e| e.id).collect(),
        nodes,
    })
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

    fn pt(v: f64) -> Point {
        Point::from_f64(&[v])
    }

    fn pt_exact(num: i64, den: i64) -> Point {
        Point::new(vec![Scalar::from_ratio(num, den)])
    }

    #[test]
    fn admissible_digits_on_the_unit_interval() {
        let s = unit_half();
        assert_eq!(admissible_digits(&s, &pt_exact(1, 2), 1e-9).unwrap(), vec![1, 2]);
        assert_eq!(admissible_digits(&s, &pt_exact(1, 8), 1e-9).unwrap(), vec![1]);
        assert_eq!(admissible_digits(&line_07(), &pt_exact(1, 1), 1e-9).unwrap(), vec![1, 2]);
    }

    #[test]
    fn one_third_has_a_single_alternating_path() {
        let s = unit_half();
        let t = enumerate_prefixes(&s, &pt_exact(1, 3), 20, 1e-12, defaults::NODE_CAP).unwrap();
        assert_eq!(t.leaf_count(), 1);
        assert!(t.branch_counts.iter().skip(1).all(|&b| b == 1));
        let w = &t.leaf_words()[0];
        let expected: Vec<u8> = (0..20).map(|i| if i % 2 == 0 { 1 } else { 2 }).collect();
        assert_eq!(w.digits(), &expected[..]);
        assert!(matches!(classify(&t).verdict, CodingVerdict::UniquePathToDepth(20)));
    }

    #[test]
    fn dyadic_point_has_exactly_two_leaves() {
        let s = unit_half();
        let t = enumerate_prefixes(&s, &pt_exact(1, 2), 10, 1e-9, defaults::NODE_CAP).unwrap();
        assert_eq!(t.leaf_count(), 2);
        let words = t.leaf_words();
        let a: Vec<u8> = std::iter::once(1).chain(std::iter::repeat(2)).take(10).collect();
        let b: Vec<u8> = std::iter::once(2).chain(std::iter::repeat(1)).take(10).collect();
        assert_eq!(words[0].digits(), &a[..]);
        assert_eq!(words[1].digits(), &b[..]);
        let class = classify(&t);
        assert!(matches!(class.verdict, CodingVerdict::Branching { paths: 2 }));
    }

    #[test]
    fn deep_uniqueness_at_tight_tolerance() {
        // sub-cylinder tolerances at depth 40 stay phantom-free
        let s = unit_half();
        let t =
            enumerate_prefixes(&s, &pt_exact(1, 3), 40, 1e-12, defaults::NODE_CAP).unwrap();
        assert_eq!(t.leaf_count(), 1);
        let t2 =
            enumerate_prefixes(&s, &pt(0.123456789), 40, 1e-12, defaults::NODE_CAP).unwrap();
        assert_eq!(t2.leaf_count(), 1, "generic float point must stay unique");
    }

    #[test]
    fn overlap_regime_branches_exponentially() {
        let s = line_07();
        let t = enumerate_prefixes(&s, &pt_exact(1, 1), 25, 1e-9, defaults::NODE_CAP).unwrap();
        assert!(t.leaf_count() >= 32, "b(25) = {}", t.leaf_count());
        let class = classify(&t);
        match class.verdict {
            CodingVerdict::Branching { paths } => assert!(paths >= 32),
            v => panic!("expected branching, got {v:?}"),
        }
        assert!(class.growth_exponent.unwrap() > 0.1);
        let w = t.witness.as_ref().expect("branch witness");
        assert!(w.confirmed);
        assert!(w.digit_low < w.digit_high);
    }

    #[test]
    fn branch_counts_monotone_in_tolerance() {
        let s = unit_anchor_system(Scalar::from_ratio(1, 3)).unwrap();
        for x in [0.11, 0.3337, 0.7012, 0.999] {
            let tight =
                enumerate_prefixes(&s, &pt(x), 12, 1e-10, defaults::NODE_CAP).unwrap();
            let loose = enumerate_prefixes(&s, &pt(x), 12, 1e-4, defaults::NODE_CAP).unwrap();
            for (a, b) in tight.branch_counts.iter().zip(&loose.branch_counts) {
                assert!(a <= b, "tolerance shrink added nodes at {x}");
            }
        }
    }

    #[test]
    fn leaf_prefix_consistency() {
        // every leaf word w satisfies |apply_word(w, 0) − x| ≤ Diam·contraction + δ
        let s = line_07();
        let delta = 1e-9;
        for x in [0.31, 1.0, 1.77, 2.2] {
            let t = enumerate_prefixes(&s, &pt(x), 14, delta, defaults::NODE_CAP).unwrap();
            let zero = Point::new(vec![Scalar::zero()]);
            for w in t.leaf_words() {
                let img = s.apply_word(&w, &zero).unwrap().floats()[0];
                let (c, _) = s.word_contraction(&w).unwrap();
                let bound = s.geom().diameter * c.to_f64() + delta;
                assert!(
                    (img - x).abs() <= bound + 1e-12,
                    "leaf {w} strays: |{img} - {x}| > {bound}"
                );
            }
        }
    }

    #[test]
    fn saturation_is_reported() {
        let s = line_07();
        let t = enumerate_prefixes(&s, &pt_exact(1, 1), 25, 1e-9, 50).unwrap();
        assert!(t.saturated);
        assert!(matches!(classify(&t).verdict, CodingVerdict::Saturated { .. }));
    }

    #[test]
    fn dead_tree_off_the_attractor() {
        let s = unit_half();
        let t = enumerate_prefixes(&s, &pt(-0.25), 10, 1e-6, defaults::NODE_CAP).unwrap();
        assert_eq!(t.leaf_count(), 0);
        assert!(matches!(classify(&t).verdict, CodingVerdict::Branching { paths: 0 }));
    }

    #[test]
    fn alternating_fixed_point_is_unique_at_ratio_06() {
        // 9/16 is the fixed point of f_1∘f_2 at ratio 3/5; its pullback
        // orbit {9/16, 15/16} never meets the overlap [3/5, 9/10]
        let s = two_map_line_system(Scalar::from_ratio(3, 5)).unwrap();
        let t = enumerate_prefixes(&s, &pt_exact(9, 16), 40, 1e-9, defaults::NODE_CAP).unwrap();
        assert_eq!(t.leaf_count(), 1);
        let w = &t.leaf_words()[0];
        let expected: Vec<u8> = (0..40).map(|i| if i % 2 == 0 { 1 } else { 2 }).collect();
        assert_eq!(w.digits(), &expected[..]);
    }
}
