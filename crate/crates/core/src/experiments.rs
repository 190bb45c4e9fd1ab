//! Seeded, reproducible experiments over coding trees: verdict statistics
//! for sampled points, and raster covers retaining boxes whose probe points
//! have unique codings (or block-avoiding codings) to a given depth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::coding::{classify, enumerate_prefixes, CodingVerdict, DigitFilter};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::ifs::{IfsSystem, Word};
use crate::measure::{measure_estimate, system_raster};
use crate::raster::Raster;

/// Verdict fractions over seeded samples.
#[derive(Debug, Clone)]
pub struct SampleStats {
    pub samples: usize,
    pub unique: usize,
    pub branching: usize,
    pub saturated: usize,
    /// Trees with no admissible path to the requested depth (probe not on
    /// the attractor within tolerance).
    pub dead: usize,
    /// Branching trees whose divergence witness was confirmed.
    pub confirmed_witnesses: usize,
    pub mean_growth_exponent: Option<f64>,
    /// Set when the measure preflight could not witness positive measure.
    pub measure_warning: bool,
    pub seed: u64,
    pub depth: usize,
    pub tolerance: f64,
}

impl SampleStats {
    pub fn fraction_unique(&self) -> f64 {
        self.unique as f64 / self.samples as f64
    }

    pub fn fraction_branching(&self) -> f64 {
        self.branching as f64 / self.samples as f64
    }
}

/// Draw one point by rejection sampling: uniform over covered boxes,
/// retained when it passes membership (exact hull containment on certified
/// exact systems).
fn draw_point(
    s: &IfsSystem,
    raster: &Raster,
    marked: &[usize],
    rng: &mut ChaCha8Rng,
    tol: f64,
) -> Result<Vec<f64>> {
    let exact_interval = if s.geom().full_interval && s.is_exact() {
        s.geom().exact_box.as_ref().map(|bb| bb[0].clone())
    } else {
        None
    };
    for _ in 0..1000 {
        let flat = marked[rng.gen_range(0..marked.len())];
        let idx = raster.spec.unflatten(flat);
        let corner = raster.spec.box_low_corner(&idx);
        let x: Vec<f64> =
            corner.iter().map(|c| c + rng.gen::<f64>() * raster.spec.cell_size).collect();
        if let Some((lo, hi)) = &exact_interval {
            let v = num_rational::BigRational::from_float(x[0])
                .ok_or_else(|| Error::InvalidArgument("non-finite sample".into()))?;
            if &v >= lo && &v <= hi {
                return Ok(x);
            }
        } else if crate::cover::membership(s, &x, tol)?.is_inside() {
            return Ok(x);
        }
    }
    Err(Error::SamplingStarvation { rate: 0.999 })
}

/// Classify coding trees at seeded sample points. Deterministic for a fixed
/// (system, parameters, seed) regardless of thread count: every sample uses
/// its own RNG stream.
#[allow(clippy::too_many_arguments)]
pub fn sample_experiment(
    s: &IfsSystem,
    samples: usize,
    depth: usize,
    delta: f64,
    node_cap: usize,
    resolution: f64,
    cell_budget: usize,
    seed: u64,
) -> Result<SampleStats> {
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let estimate = measure_estimate(s, resolution, cell_budget)?;
    let measure_warning = estimate.heuristic_lower <= 0.0;
    let raster = system_raster(s, &Word::empty(), resolution, cell_budget)?;
    let marked: Vec<usize> = raster.marked_flats().collect();
    if marked.is_empty() {
        return Err(Error::SamplingStarvation { rate: 1.0 });
    }

    let results: Vec<Result<(u8, bool, Option<f64>)>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let x = draw_point(s, &raster, &marked, &mut rng, resolution / 10.0)?;
            let tree = enumerate_prefixes(s, &Point::from_f64(&x), depth, delta, node_cap)?;
            let class = classify(&tree);
            let confirmed = tree.witness.as_ref().map(|w| w.confirmed).unwrap_or(false);
            Ok(match class.verdict {
                CodingVerdict::UniquePathToDepth(_) => (0u8, confirmed, None),
                CodingVerdict::Branching { paths: 0 } => (3u8, false, None),
                CodingVerdict::Branching { .. } => (1u8, confirmed, class.growth_exponent),
                CodingVerdict::Saturated { .. } => (2u8, confirmed, None),
            })
        })
        .collect();

    let mut stats = SampleStats {
        samples,
        unique: 0,
        branching: 0,
        saturated: 0,
        dead: 0,
        confirmed_witnesses: 0,
        mean_growth_exponent: None,
        measure_warning,
        seed,
        depth,
        tolerance: delta,
    };
    let mut growth_sum = 0.0;
    let mut growth_n = 0usize;
    for r in results {
        let (kind, confirmed, growth) = r?;
        match kind {
            0 => stats.unique += 1,
            1 => {
                stats.branching += 1;
                if confirmed {
                    stats.confirmed_witnesses += 1;
                }
            }
            2 => stats.saturated += 1,
            _ => stats.dead += 1,
        }
        if let Some(g) = growth {
            growth_sum += g;
            growth_n += 1;
        }
    }
    if growth_n > 0 {
        stats.mean_growth_exponent = Some(growth_sum / growth_n as f64);
    }
    Ok(stats)
}

/// Raster cover retaining boxes whose probe point passed a per-box test;
/// the shape shared by the unique-coding and block-avoiding covers.
#[derive(Debug, Clone)]
pub struct ProbeCover {
    pub depth: usize,
    pub resolution: f64,
    /// Flat indices of retained boxes.
    pub retained: Vec<usize>,
    /// Retained box count × box volume.
    pub retained_measure_upper: f64,
    pub probed: usize,
    pub dead: usize,
    pub saturated: usize,
    /// Retained boxes as a raster (box-counting input).
    pub raster: Raster,
    /// The fixed probe offset from box centers, in box units.
    pub jitter: Vec<f64>,
}

fn probe_cover<F>(
    s: &IfsSystem,
    depth: usize,
    resolution: f64,
    cell_budget: usize,
    seed: u64,
    probe: F,
) -> Result<ProbeCover>
where
    F: Fn(&Point) -> Result<ProbeVerdict> + Sync,
{
    let base = system_raster(s, &Word::empty(), resolution, cell_budget)?;
    let marked: Vec<usize> = base.marked_flats().collect();
    // fixed seeded offset keeps probes away from box-center artifacts
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter: Vec<f64> = (0..s.dimension).map(|_| rng.gen_range(-0.25..0.25)).collect();

    let verdicts: Vec<Result<ProbeVerdict>> = marked
        .par_iter()
        .map(|&flat| {
            let idx = base.spec.unflatten(flat);
            let mut center = base.spec.box_center(&idx);
            for (c, j) in center.iter_mut().zip(&jitter) {
                *c += j * base.spec.cell_size;
            }
            probe(&Point::from_f64(&center))
        })
        .collect();

    let mut retained = Vec::new();
    let mut dead = 0usize;
    let mut saturated = 0usize;
    let mut raster = Raster::empty(base.spec.clone());
    for (&flat, v) in marked.iter().zip(verdicts) {
        match v? {
            ProbeVerdict::Retain => {
                retained.push(flat);
                raster.mark_flat(flat);
            }
            ProbeVerdict::Drop => {}
            ProbeVerdict::Dead => dead += 1,
            ProbeVerdict::Saturated => saturated += 1,
        }
    }
    Ok(ProbeCover {
        depth,
        resolution,
        retained_measure_upper: retained.len() as f64 * base.spec.box_volume(),
        retained,
        probed: marked.len(),
        dead,
        saturated,
        raster,
        jitter,
    })
}

enum ProbeVerdict {
    Retain,
    Drop,
    Dead,
    Saturated,
}

/// Boxes whose probe has a unique admissible path to `depth`.
pub fn univoque_cover(
    s: &IfsSystem,
    depth: usize,
    resolution: f64,
    delta: f64,
    node_cap: usize,
    cell_budget: usize,
    seed: u64,
) -> Result<ProbeCover> {
    probe_cover(s, depth, resolution, cell_budget, seed, |x| {
        let tree = enumerate_prefixes(s, x, depth, delta, node_cap)?;
        Ok(match classify(&tree).verdict {
            CodingVerdict::UniquePathToDepth(_) => ProbeVerdict::Retain,
            CodingVerdict::Branching { paths: 0 } => ProbeVerdict::Dead,
            CodingVerdict::Branching { .. } => ProbeVerdict::Drop,
            CodingVerdict::Saturated { .. } => ProbeVerdict::Saturated,
        })
    })
}

/// Verdict of the block-avoiding tree walk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AvoidVerdict {
    /// Some admissible word contains the block.
    ContainsBlock,
    /// Tree survives to the depth and no node word contains the block.
    AvoidsToDepth { leaves: usize },
    /// No admissible path at all.
    Dead,
    Saturated,
}

/// KMP automaton over the digit alphabet.
pub(crate) struct BlockAutomaton {
    pattern: Vec<u8>,
    failure: Vec<usize>,
}

impl BlockAutomaton {
    pub fn new(pattern: &[u8]) -> BlockAutomaton {
        let mut failure = vec![0usize; pattern.len()];
        let mut k = 0;
        for i in 1..pattern.len() {
            while k > 0 && pattern[i] != pattern[k] {
                k = failure[k - 1];
            }
            if pattern[i] == pattern[k] {
                k += 1;
            }
            failure[i] = k;
        }
        BlockAutomaton { pattern: pattern.to_vec(), failure }
    }

    /// Next state after reading `digit`; `state` counts matched prefix
    /// length. Accepting state = pattern length.
    pub fn step(&self, mut state: usize, digit: u8) -> usize {
        if state == self.pattern.len() {
            return state;
        }
        while state > 0 && self.pattern[state] != digit {
            state = self.failure[state - 1];
        }
        if self.pattern[state] == digit {
            state + 1
        } else {
            0
        }
    }

    pub fn accepts(&self, state: usize) -> bool {
        state == self.pattern.len()
    }
}

/// Breadth-first walk of the admissible tree tracking block progress;
/// stops as soon as any node word contains the block.
pub fn tree_avoids_block(
    s: &IfsSystem,
    x: &Point,
    block: &Word,
    depth: usize,
    delta: f64,
    node_cap: usize,
) -> Result<AvoidVerdict> {
    if block.is_empty() {
        return Err(Error::InvalidArgument("block must be nonempty".into()));
    }
    if block.len() > depth {
        return Err(Error::InvalidArgument(format!(
            "block length {} exceeds depth {depth}",
            block.len()
        )));
    }
    let filter = DigitFilter::new(s, x, delta)?;
    let automaton = BlockAutomaton::new(block.digits());

    struct Entry {
        state: crate::coding::PullbackState,
        word: Vec<u8>,
        kmp: usize,
    }
    let mut frontier = vec![Entry { state: filter.root_state(x), word: Vec::new(), kmp: 0 }];
    let mut nodes = 1usize;
    for _level in 0..depth {
        let mut next = Vec::new();
        for entry in frontier.iter_mut() {
            let Entry { state, word, kmp } = entry;
            for digit in 1..=s.len() as u8 {
                let word_ref: &Vec<u8> = word;
                if let Some(st) = filter.try_digit(state, &|| word_ref.clone(), digit)? {
                    let kmp2 = automaton.step(*kmp, digit);
                    if automaton.accepts(kmp2) {
                        return Ok(AvoidVerdict::ContainsBlock);
                    }
                    nodes += 1;
                    if nodes > node_cap {
                        return Ok(AvoidVerdict::Saturated);
                    }
                    let mut w2 = word.clone();
                    w2.push(digit);
                    next.push(Entry { state: st, word: w2, kmp: kmp2 });
                }
            }
        }
        if next.is_empty() {
            return Ok(AvoidVerdict::Dead);
        }
        frontier = next;
    }
    Ok(AvoidVerdict::AvoidsToDepth { leaves: frontier.len() })
}

/// Boxes whose probe's depth-N tree contains no word with `block` as a
/// factor (and has at least one surviving path).
#[allow(clippy::too_many_arguments)]
pub fn forbidden_block_cover(
    s: &IfsSystem,
    block: &Word,
    depth: usize,
    resolution: f64,
    delta: f64,
    node_cap: usize,
    cell_budget: usize,
    seed: u64,
) -> Result<ProbeCover> {
    if block.len() > depth {
        return Err(Error::InvalidArgument(format!(
            "block length {} exceeds depth {depth}",
            block.len()
        )));
    }
    probe_cover(s, depth, resolution, cell_budget, seed, |x| {
        Ok(match tree_avoids_block(s, x, block, depth, delta, node_cap)? {
            AvoidVerdict::AvoidsToDepth { .. } => ProbeVerdict::Retain,
            AvoidVerdict::ContainsBlock => ProbeVerdict::Drop,
            AvoidVerdict::Dead => ProbeVerdict::Dead,
            AvoidVerdict::Saturated => ProbeVerdict::Saturated,
        })
    })
}
