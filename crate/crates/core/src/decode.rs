//! BP-OSD decoding of detector models and BP-OSD distance upper bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::code::{BBCode, PauliType};
use crate::error::{Error, Result};
use crate::gf2::{BinVector, IncrementalBasis, SparseBinMatrix};
use crate::noise::DetectorModel;

const PRIOR_FLOOR: f64 = 1e-12;

/// Min-sum belief propagation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BPConfig {
    pub max_iter: usize,
    /// Normalization applied to check-to-variable messages.
    pub scaling: f64,
    /// Stop as soon as the hard decision reproduces the syndrome.
    pub early_exit: bool,
}

impl Default for BPConfig {
    fn default() -> Self {
        BPConfig {
            max_iter: 10_000,
            scaling: 0.625,
            early_exit: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OsdMode {
    /// Solution on the information set only.
    Order0,
    /// Order-0 plus all single flips outside the information set and all
    /// pairs among the first `depth` of them.
    CombinationSweep,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct OSDConfig {
    pub mode: OsdMode,
    pub depth: usize,
}

impl Default for OSDConfig {
    fn default() -> Self {
        OSDConfig {
            mode: OsdMode::CombinationSweep,
            depth: 20,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BPResult {
    /// Posterior estimates of `Pr[xi_j = 1]`.
    pub posteriors: Vec<f64>,
    pub hard: BinVector,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct DecodeOutcome {
    pub xi: BinVector,
    /// Logical syndrome of the guess, `D^L xi`.
    pub logical: BinVector,
    pub converged: bool,
    pub iterations: usize,
    /// `sum_j log(1/p_j) xi_j`.
    pub weight: f64,
}

fn log_weights(priors: &[f64]) -> Vec<f64> {
    priors.iter().map(|&p| -(p.max(PRIOR_FLOOR)).ln()).collect()
}

/// Min-sum BP state for one parity-check matrix, reusable across syndromes.
#[derive(Clone, Debug)]
pub struct BeliefPropagation {
    rows: usize,
    cols: usize,
    /// Edges in row-major order; `edge_col[e]` is the column of edge `e`.
    row_start: Vec<usize>,
    edge_col: Vec<u32>,
    edge_row: Vec<u32>,
    /// For each column, the edge ids touching it.
    col_start: Vec<usize>,
    col_edges: Vec<u32>,
    channel: Vec<f32>,
    cfg: BPConfig,
}

impl BeliefPropagation {
    pub fn new(d: &SparseBinMatrix, priors: &[f64], cfg: BPConfig) -> Result<Self> {
        if priors.len() != d.cols() {
            return Err(Error::Dimension(format!("{} priors for {} columns", priors.len(), d.cols())));
        }
        if cfg.max_iter == 0 {
            return Err(Error::InvalidArgument("BP needs at least one iteration".into()));
        }
        let mut row_start = vec![0];
        let mut edge_col = Vec::with_capacity(d.nnz());
        let mut edge_row = Vec::with_capacity(d.nnz());
        for r in 0..d.rows() {
            edge_col.extend(d.row(r).iter().map(|&c| c as u32));
            edge_row.resize(edge_col.len(), r as u32);
            row_start.push(edge_col.len());
        }
        let mut per_col: Vec<Vec<u32>> = vec![Vec::new(); d.cols()];
        for (e, &c) in edge_col.iter().enumerate() {
            per_col[c as usize].push(e as u32);
        }
        let mut col_start = vec![0];
        let mut col_edges = Vec::with_capacity(edge_col.len());
        for v in per_col {
            col_edges.extend(v);
            col_start.push(col_edges.len());
        }
        let channel = priors
            .iter()
            .map(|&p| {
                let p = p.clamp(PRIOR_FLOOR, 1.0 - PRIOR_FLOOR);
                ((1.0 - p) / p).ln() as f32
            })
            .collect();
        Ok(BeliefPropagation {
            rows: d.rows(),
            cols: d.cols(),
            row_start,
            edge_col,
            edge_row,
            col_start,
            col_edges,
            channel,
            cfg,
        })
    }

    pub fn run(&self, syndrome: &BinVector) -> Result<BPResult> {
        if syndrome.len() != self.rows {
            return Err(Error::Dimension(format!(
                "syndrome has length {}, matrix has {} rows",
                syndrome.len(),
                self.rows
            )));
        }
        let syn: Vec<bool> = (0..self.rows).map(|r| syndrome.get(r)).collect();
        let scaling = self.cfg.scaling as f32;
        let ne = self.edge_col.len();
        let mut v2c: Vec<f32> = self.edge_col.iter().map(|&c| self.channel[c as usize]).collect();
        let mut c2v = vec![0.0f32; ne];
        let mut post = self.channel.clone();
        let mut hard: Vec<bool> = post.iter().map(|&l| l < 0.0).collect();
        // parity[r] tracks row r of D * hard; `unsat` counts rows differing from the syndrome
        let mut parity = vec![false; self.rows];
        for (e, &c) in self.edge_col.iter().enumerate() {
            parity[self.edge_row[e] as usize] ^= hard[c as usize];
        }
        let mut unsat = (0..self.rows).filter(|&r| parity[r] != syn[r]).count();
        let mut iterations = 0;
        while !(unsat == 0 && self.cfg.early_exit) && iterations < self.cfg.max_iter {
            iterations += 1;
            for r in 0..self.rows {
                let (lo, hi) = (self.row_start[r], self.row_start[r + 1]);
                let mut sign = syn[r];
                let (mut min1, mut min2, mut arg) = (f32::INFINITY, f32::INFINITY, usize::MAX);
                for (e, &m) in v2c[lo..hi].iter().enumerate() {
                    sign ^= m < 0.0;
                    let a = m.abs();
                    min2 = min2.min(a.max(min1));
                    if a < min1 {
                        arg = e;
                    }
                    min1 = min1.min(a);
                }
                let (min1, min2) = (scaling * min1, scaling * min2);
                for (e, (out, &m)) in c2v[lo..hi].iter_mut().zip(&v2c[lo..hi]).enumerate() {
                    let mag = if e == arg { min2 } else { min1 };
                    *out = if sign ^ (m < 0.0) { -mag } else { mag };
                }
            }
            for c in 0..self.cols {
                let edges = &self.col_edges[self.col_start[c]..self.col_start[c + 1]];
                let total = self.channel[c] + edges.iter().map(|&e| c2v[e as usize]).sum::<f32>();
                post[c] = total;
                for &e in edges {
                    v2c[e as usize] = total - c2v[e as usize];
                }
                let h = total < 0.0;
                if h != hard[c] {
                    hard[c] = h;
                    for &e in edges {
                        let r = self.edge_row[e as usize] as usize;
                        parity[r] ^= true;
                        if parity[r] == syn[r] {
                            unsat -= 1;
                        } else {
                            unsat += 1;
                        }
                    }
                }
            }
        }
        let posteriors = post
            .iter()
            .map(|&l| 1.0 / (1.0 + (l as f64).clamp(-700.0, 700.0).exp()))
            .collect();
        let hard_vec = BinVector::from_support(
            self.cols,
            &hard.iter().enumerate().filter(|(_, &h)| h).map(|(i, _)| i).collect::<Vec<_>>(),
        );
        Ok(BPResult {
            posteriors,
            hard: hard_vec,
            converged: unsat == 0,
            iterations,
        })
    }
}

/// Runs min-sum BP on `d` with the given priors and syndrome.
pub fn bp_marginals(d: &SparseBinMatrix, priors: &[f64], syndrome: &BinVector, cfg: &BPConfig) -> Result<BPResult> {
    BeliefPropagation::new(d, priors, cfg.clone())?.run(syndrome)
}

/// Column order used by OSD: most probable faults first, ties by lower index.
fn osd_order(posteriors: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..posteriors.len()).collect();
    order.sort_by(|&a, &b| posteriors[b].total_cmp(&posteriors[a]).then(a.cmp(&b)));
    order
}

struct Reduced {
    /// Pivot column (original index) of each reduced row.
    pivots: Vec<usize>,
    /// Reduced syndrome restricted to pivot rows.
    solution: Vec<bool>,
    /// Rows of the reduced matrix in permuted column order.
    rows: Vec<Vec<u64>>,
    order: Vec<usize>,
}

/// Gauss-Jordan elimination of `d` with columns visited in `order`.
/// Stops early once `stop_rank` pivots are found.
fn reduce(d: &SparseBinMatrix, syndrome: &BinVector, order: &[usize], stop_rank: Option<usize>) -> Result<Reduced> {
    let nrows = d.rows();
    let ncols = order.len();
    let words = ncols.div_ceil(64);
    let mut rows = vec![vec![0u64; words]; nrows];
    for (pos, &c) in order.iter().enumerate() {
        for &r in d.col(c) {
            rows[r][pos / 64] ^= 1 << (pos % 64);
        }
    }
    let mut syn: Vec<bool> = (0..nrows).map(|r| syndrome.get(r)).collect();
    let mut rank = 0;
    let mut pivot_pos = Vec::new();
    let limit = stop_rank.unwrap_or(nrows).min(nrows);
    for pos in 0..ncols {
        if rank == limit {
            break;
        }
        let (w, b) = (pos / 64, 1u64 << (pos % 64));
        let Some(p) = (rank..nrows).find(|&r| rows[r][w] & b != 0) else {
            continue;
        };
        rows.swap(rank, p);
        syn.swap(rank, p);
        let (head, tail) = rows.split_at_mut(rank);
        let (prow, rest) = tail.split_first_mut().unwrap();
        for (r, row) in head.iter_mut().enumerate() {
            if row[w] & b != 0 {
                for i in w..words {
                    row[i] ^= prow[i];
                }
                syn[r] ^= syn[rank];
            }
        }
        for (off, row) in rest.iter_mut().enumerate() {
            if row[w] & b != 0 {
                for i in w..words {
                    row[i] ^= prow[i];
                }
                syn[rank + 1 + off] ^= syn[rank];
            }
        }
        pivot_pos.push(pos);
        rank += 1;
    }
    if stop_rank.is_none() && syn[rank..].iter().any(|&s| s) {
        return Err(Error::Unsolvable);
    }
    rows.truncate(rank);
    syn.truncate(rank);
    Ok(Reduced {
        pivots: pivot_pos.iter().map(|&p| order[p]).collect(),
        solution: syn,
        rows,
        order: order.to_vec(),
    })
}

fn osd_with(
    d: &SparseBinMatrix,
    weights: &[f64],
    syndrome: &BinVector,
    posteriors: &[f64],
    cfg: &OSDConfig,
    rank: Option<usize>,
) -> Result<BinVector> {
    let order = osd_order(posteriors);
    let red = reduce(d, syndrome, &order, rank)?;
    let mut xi = BinVector::zeros(d.cols());
    for (i, &c) in red.pivots.iter().enumerate() {
        if red.solution[i] {
            xi.set(c, true);
        }
    }
    if rank.is_some() && d.mul_vec(&xi) != *syndrome {
        return Err(Error::Unsolvable);
    }
    if cfg.mode == OsdMode::Order0 || red.pivots.is_empty() {
        return Ok(xi);
    }
    // Reduced columns outside the information set, as lists of pivot rows.
    let is_pivot: std::collections::HashSet<usize> = red.pivots.iter().copied().collect();
    let free: Vec<(usize, usize)> = red
        .order
        .iter()
        .enumerate()
        .filter(|(_, c)| !is_pivot.contains(c))
        .map(|(pos, &c)| (pos, c))
        .collect();
    let column = |pos: usize| -> Vec<usize> {
        let (w, b) = (pos / 64, 1u64 << (pos % 64));
        (0..red.rows.len()).filter(|&r| red.rows[r][w] & b != 0).collect()
    };
    // Change in weight when pivot row r flips.
    let delta: Vec<f64> = red
        .pivots
        .iter()
        .zip(&red.solution)
        .map(|(&c, &s)| if s { -weights[c] } else { weights[c] })
        .collect();
    let base: f64 = xi.iter_ones().map(|c| weights[c]).sum();
    let mut best = base;
    let mut best_flip: Vec<usize> = Vec::new();
    let cols: Vec<Vec<usize>> = free.iter().map(|&(pos, _)| column(pos)).collect();
    for (i, &(_, c)) in free.iter().enumerate() {
        let w = base + weights[c] + cols[i].iter().map(|&r| delta[r]).sum::<f64>();
        if w < best - 1e-9 {
            best = w;
            best_flip = vec![i];
        }
    }
    let depth = cfg.depth.min(free.len());
    let mut mark = vec![false; red.pivots.len()];
    for i in 0..depth {
        for &r in &cols[i] {
            mark[r] = true;
        }
        for j in i + 1..depth {
            let mut w = base + weights[free[i].1] + weights[free[j].1];
            let mut pair = cols[i].iter().map(|&r| delta[r]).sum::<f64>();
            for &r in &cols[j] {
                pair += if mark[r] { -delta[r] } else { delta[r] };
            }
            w += pair;
            if w < best - 1e-9 {
                best = w;
                best_flip = vec![i, j];
            }
        }
        for &r in &cols[i] {
            mark[r] = false;
        }
    }
    for &i in &best_flip {
        xi.flip(free[i].1);
        for &r in &cols[i] {
            xi.flip(red.pivots[r]);
        }
    }
    Ok(xi)
}

/// Ordered-statistics post-processing: solves `D xi = syndrome` on the
/// information set formed by the most probable columns according to
/// `posteriors`, optionally followed by a combination sweep.
pub fn osd_postprocess(
    d: &SparseBinMatrix,
    priors: &[f64],
    syndrome: &BinVector,
    posteriors: &[f64],
    cfg: &OSDConfig,
) -> Result<BinVector> {
    if priors.len() != d.cols() || posteriors.len() != d.cols() {
        return Err(Error::Dimension("priors and posteriors must match the column count".into()));
    }
    if syndrome.len() != d.rows() {
        return Err(Error::Dimension(format!("syndrome has length {}, matrix has {} rows", syndrome.len(), d.rows())));
    }
    osd_with(d, &log_weights(priors), syndrome, posteriors, cfg, None)
}

/// BP-OSD decoder bound to one matrix.
#[derive(Clone, Debug)]
pub struct BpOsd {
    d: SparseBinMatrix,
    bp: BeliefPropagation,
    weights: Vec<f64>,
    osd: OSDConfig,
    rank: usize,
}

impl BpOsd {
    pub fn new(d: &SparseBinMatrix, priors: &[f64], bp: BPConfig, osd: OSDConfig) -> Result<Self> {
        Self::with_weights(d, priors, log_weights(priors), bp, osd)
    }

    /// Like [`BpOsd::new`] but scores OSD candidates with `weights` instead of
    /// `log(1/p_j)`.
    pub fn with_weights(d: &SparseBinMatrix, priors: &[f64], weights: Vec<f64>, bp: BPConfig, osd: OSDConfig) -> Result<Self> {
        if weights.len() != d.cols() {
            return Err(Error::Dimension(format!("{} weights for {} columns", weights.len(), d.cols())));
        }
        let bpd = BeliefPropagation::new(d, priors, bp)?;
        let rank = d.to_dense().rank();
        Ok(BpOsd {
            d: d.clone(),
            bp: bpd,
            weights,
            osd,
            rank,
        })
    }

    pub fn weight(&self, xi: &BinVector) -> f64 {
        xi.iter_ones().map(|c| self.weights[c]).sum()
    }

    /// Returns the guess together with the BP convergence flag and iteration count.
    pub fn solve(&self, syndrome: &BinVector) -> Result<(BinVector, bool, usize)> {
        let bp = self.bp.run(syndrome)?;
        if bp.converged {
            return Ok((bp.hard, true, bp.iterations));
        }
        let xi = osd_with(&self.d, &self.weights, syndrome, &bp.posteriors, &self.osd, Some(self.rank))?;
        debug_assert_eq!(self.d.mul_vec(&xi), *syndrome);
        Ok((xi, false, bp.iterations))
    }
}

/// Decoder for one detector model.
#[derive(Clone, Debug)]
pub struct Decoder {
    inner: BpOsd,
    dl: SparseBinMatrix,
}

impl Decoder {
    pub fn new(model: &DetectorModel, bp: BPConfig, osd: OSDConfig) -> Result<Self> {
        Ok(Decoder {
            inner: BpOsd::new(&model.d, &model.priors, bp, osd)?,
            dl: model.dl.clone(),
        })
    }

    pub fn decode(&self, syndrome: &BinVector) -> Result<DecodeOutcome> {
        let (xi, converged, iterations) = self.inner.solve(syndrome)?;
        if self.inner.d.mul_vec(&xi) != *syndrome {
            return Err(Error::Invariant("decoder output does not reproduce the syndrome".into()));
        }
        Ok(DecodeOutcome {
            logical: self.dl.mul_vec(&xi),
            weight: self.inner.weight(&xi),
            xi,
            converged,
            iterations,
        })
    }
}

/// One-shot BP-OSD decode of `syndrome` against `model` with default settings.
pub fn decode(model: &DetectorModel, syndrome: &BinVector) -> Result<DecodeOutcome> {
    Decoder::new(model, BPConfig::default(), OSDConfig::default())?.decode(syndrome)
}

/// Settings for randomized distance bounds.
#[derive(Clone, Debug)]
pub struct DistanceConfig {
    pub trials: usize,
    pub seed: u64,
    /// Prior assigned to every column.
    pub prior: f64,
    /// Each trial scales the prior of every column by a random factor in
    /// `[1 - jitter, 1 + jitter]`, which varies the OSD ordering between trials.
    pub jitter: f64,
    pub bp: BPConfig,
    pub osd: OSDConfig,
    /// Stop as soon as the bound reaches this value.
    pub target: Option<usize>,
    /// Annealing steps applied to each BP-OSD solution; 0 disables the walk.
    pub anneal_steps: usize,
    pub temperature: f64,
}

impl Default for DistanceConfig {
    fn default() -> Self {
        DistanceConfig {
            trials: 100,
            seed: 0,
            prior: 0.25,
            jitter: 0.9,
            bp: BPConfig {
                max_iter: 100,
                ..BPConfig::default()
            },
            osd: OSDConfig::default(),
            target: None,
            anneal_steps: 200_000,
            temperature: 0.4,
        }
    }
}

/// Fault sets that are invisible to every detector and logical row. Adding
/// one to a solution keeps it a solution of the same logical class.
#[derive(Clone, Debug, Default)]
pub struct GaugeMoves {
    moves: Vec<Vec<usize>>,
    by_col: Vec<Vec<u32>>,
}

impl GaugeMoves {
    pub fn new(cols: usize, moves: Vec<Vec<usize>>) -> Self {
        let mut by_col = vec![Vec::new(); cols];
        for (i, m) in moves.iter().enumerate() {
            for &c in m {
                by_col[c].push(i as u32);
            }
        }
        GaugeMoves { moves, by_col }
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    /// Metropolis walk from `start` over sums with gauge moves, returning the
    /// lightest vector seen.
    pub fn anneal(&self, start: &BinVector, steps: usize, temperature: f64, rng: &mut ChaCha8Rng) -> BinVector {
        let mut cur = start.clone();
        let mut support: Vec<usize> = cur.support();
        let mut pos: HashMap<usize, usize> = support.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let mut best = cur.clone();
        for _ in 0..steps {
            if support.is_empty() {
                break;
            }
            let c = support[rng.gen_range(0..support.len())];
            let options = &self.by_col[c];
            if options.is_empty() {
                continue;
            }
            let m = &self.moves[options[rng.gen_range(0..options.len())] as usize];
            let overlap = m.iter().filter(|&&j| cur.get(j)).count();
            let dw = m.len() as f64 - 2.0 * overlap as f64;
            if dw > 0.0 && rng.gen::<f64>() >= (-dw / temperature).exp() {
                continue;
            }
            for &j in m {
                cur.flip(j);
                if cur.get(j) {
                    pos.insert(j, support.len());
                    support.push(j);
                } else {
                    let i = pos.remove(&j).unwrap();
                    let last = support.pop().unwrap();
                    if last != j {
                        support[i] = last;
                        pos.insert(last, i);
                    }
                }
            }
            if support.len() < best.weight() {
                best = cur.clone();
            }
        }
        best
    }
}

fn sym_diff(a: &[usize], b: &[usize]) -> Vec<usize> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(a.len() + b.len());
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Zero-detector fault sets of size 2 to 4 in a detector model, built from
/// pairs of columns that share a detector. Sets with trivial logical effect
/// become gauge moves; the lightest set with nontrivial logical effect, if
/// any, is returned alongside.
pub fn small_undetectable_sets(model: &DetectorModel) -> (GaugeMoves, Option<Vec<usize>>) {
    const MAX_PAIRS_PER_KEY: usize = 64;
    let cols = model.cols();
    let mut best: Option<Vec<usize>> = None;
    let offer = |set: Vec<usize>, best: &mut Option<Vec<usize>>| {
        if best.as_ref().map_or(true, |b| set.len() < b.len()) {
            *best = Some(set);
        }
    };
    let logical_of = |set: &[usize]| set.iter().fold(Vec::new(), |acc, &c| sym_diff(&acc, model.dl.col(c)));
    let mut single: HashMap<&[usize], Vec<usize>> = HashMap::new();
    for c in 0..cols {
        if model.d.col(c).is_empty() {
            if !model.dl.col(c).is_empty() {
                offer(vec![c], &mut best);
            }
            continue;
        }
        single.entry(model.d.col(c)).or_default().push(c);
    }
    for same in single.values() {
        for i in 0..same.len() {
            for j in i + 1..same.len() {
                offer(vec![same[i], same[j]], &mut best);
            }
        }
    }
    let mut pairs: HashMap<Vec<usize>, Vec<(usize, usize)>> = HashMap::new();
    let mut seen = std::collections::HashSet::new();
    for r in 0..model.rows() {
        let row = model.d.row(r);
        for i in 0..row.len() {
            for j in i + 1..row.len() {
                let (a, b) = (row[i], row[j]);
                if !seen.insert((a, b)) {
                    continue;
                }
                let key = sym_diff(model.d.col(a), model.d.col(b));
                if key.is_empty() {
                    continue;
                }
                let list = pairs.entry(key).or_default();
                if list.len() < MAX_PAIRS_PER_KEY {
                    list.push((a, b));
                }
            }
        }
    }
    let mut moves = std::collections::BTreeSet::new();
    for (key, list) in &pairs {
        let mut candidates: Vec<Vec<usize>> = Vec::new();
        if let Some(cs) = single.get(key.as_slice()) {
            for &(a, b) in list {
                for &c in cs {
                    if c != a && c != b {
                        candidates.push(vec![a, b, c]);
                    }
                }
            }
        }
        for i in 0..list.len() {
            for j in i + 1..list.len() {
                let (a, b) = list[i];
                let (c, d) = list[j];
                if a != c && a != d && b != c && b != d {
                    candidates.push(vec![a, b, c, d]);
                }
            }
        }
        for mut set in candidates {
            set.sort_unstable();
            if logical_of(&set).is_empty() {
                moves.insert(set);
            } else {
                offer(set, &mut best);
            }
        }
    }
    (GaugeMoves::new(cols, moves.into_iter().collect()), best)
}

fn jitter_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Minimum Hamming weight of `xi` in `ker d` with `eta^T xi = 1`, as found by
/// BP-OSD, minimized over the supplied `etas`.
fn min_weight_against<I>(
    d: &SparseBinMatrix,
    etas: I,
    moves: &GaugeMoves,
    rng: &mut ChaCha8Rng,
    cfg: &DistanceConfig,
) -> Result<Option<usize>>
where
    I: Iterator<Item = BinVector>,
{
    let mut syndrome = BinVector::zeros(d.rows() + 1);
    syndrome.set(d.rows(), true);
    let mut best: Option<usize> = None;
    for eta in etas {
        let stacked = d.with_row(&eta.support());
        let priors: Vec<f64> = (0..d.cols())
            .map(|_| cfg.prior * (1.0 + cfg.jitter * (2.0 * rng.gen::<f64>() - 1.0)))
            .collect();
        let dec = BpOsd::with_weights(&stacked, &priors, vec![1.0; d.cols()], cfg.bp.clone(), cfg.osd.clone())?;
        let (mut xi, _, _) = dec.solve(&syndrome)?;
        if cfg.anneal_steps > 0 && !moves.is_empty() {
            xi = moves.anneal(&xi, cfg.anneal_steps, cfg.temperature, rng);
        }
        let w = xi.weight();
        if best.map_or(true, |b| w < b) {
            best = Some(w);
        }
        if let (Some(t), Some(b)) = (cfg.target, best) {
            if b <= t {
                break;
            }
        }
    }
    Ok(best)
}

/// BP-OSD upper bound on the distance of Z-type logical operators, which
/// equals the code distance for BB codes.
pub fn distance_upper_bound(code: &BBCode, cfg: &DistanceConfig) -> Result<usize> {
    if cfg.trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    if code.k == 0 {
        return Err(Error::InvalidArgument("code encodes no logical qubits".into()));
    }
    let kernel = code.hz.nullspace_basis();
    let stab = IncrementalBasis::from_matrix(&code.hx);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = code.n();
    let mut drawn = 0;
    let etas = std::iter::from_fn(|| {
        if drawn == cfg.trials {
            return None;
        }
        drawn += 1;
        loop {
            let mut eta = BinVector::zeros(n);
            for v in &kernel {
                if rng.gen::<bool>() {
                    eta.xor_assign(v);
                }
            }
            if !stab.contains(&eta) {
                return Some(eta);
            }
        }
    });
    let d = code.hx.to_sparse();
    let stabilizers = (0..code.hz.rows()).map(|r| code.hz.row_support(r)).collect();
    let moves = GaugeMoves::new(n, stabilizers);
    Ok(min_weight_against(&d, etas, &moves, &mut jitter_rng(cfg.seed), cfg)?.expect("at least one trial"))
}

/// BP-OSD upper bound on the circuit-level distance for the error type of
/// `model`: minimum number of faults that flip a logical without tripping a
/// detector.
pub fn circuit_distance_upper_bound(model: &DetectorModel, cfg: &DistanceConfig) -> Result<usize> {
    if cfg.trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    if model.k() == 0 {
        return Err(Error::InvalidArgument("model has no logical rows".into()));
    }
    let cols = model.cols();
    let det_rows: Vec<BinVector> = (0..model.rows())
        .map(|r| BinVector::from_support(cols, model.d.row(r)))
        .collect();
    let log_rows: Vec<BinVector> = (0..model.k())
        .map(|r| BinVector::from_support(cols, model.dl.row(r)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut drawn = 0;
    let etas = std::iter::from_fn(|| {
        if drawn == cfg.trials {
            return None;
        }
        drawn += 1;
        let mut eta = BinVector::zeros(cols);
        let mut any = false;
        while !any {
            eta = BinVector::zeros(cols);
            for v in &log_rows {
                if rng.gen::<bool>() {
                    eta.xor_assign(v);
                    any = true;
                }
            }
        }
        for v in &det_rows {
            if rng.gen::<bool>() {
                eta.xor_assign(v);
            }
        }
        Some(eta)
    });
    let (moves, small) = small_undetectable_sets(model);
    let found = min_weight_against(&model.d, etas, &moves, &mut jitter_rng(cfg.seed), cfg)?.expect("at least one trial");
    Ok(small.map_or(found, |s| s.len().min(found)))
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Default enumeration budget for [`exact_distance_small`].
pub const DEFAULT_DISTANCE_BUDGET: u128 = 200_000_000;

/// Exhaustive minimum weight of a nontrivial Z-type logical operator among
/// vectors of weight at most `w_max`. Translations act transitively on each
/// block, so only supports whose smallest element is `L(0)` or `R(0)` are
/// visited. Returns `Ok(None)` if no logical of weight `<= w_max` exists.
pub fn exact_distance_small(code: &BBCode, w_max: usize, budget: u128) -> Result<Option<usize>> {
    let n = code.n();
    let lm = code.lm();
    if w_max == 0 {
        return Ok(None);
    }
    let cost: u128 = (1..=w_max).map(|w| binomial(n - 1, w - 1)).sum();
    if cost > budget {
        return Err(Error::BudgetExceeded(format!(
            "weight <= {w_max} search needs {cost} candidates, budget is {budget}"
        )));
    }
    let words = lm.div_ceil(64);
    let col_syn: Vec<Vec<u64>> = (0..n)
        .map(|c| {
            let mut s = vec![0u64; words];
            for r in 0..code.hx.rows() {
                if code.hx.get(r, c) {
                    s[r / 64] |= 1 << (r % 64);
                }
            }
            s
        })
        .collect();
    let mut by_syn: HashMap<Vec<u64>, Vec<usize>> = HashMap::new();
    for (c, s) in col_syn.iter().enumerate() {
        by_syn.entry(s.clone()).or_default().push(c);
    }
    let xlog = code.logical_basis(PauliType::X);
    let xrows: Vec<BinVector> = (0..xlog.rows()).map(|r| xlog.row(r)).collect();
    let is_logical = |support: &[usize]| {
        xrows
            .iter()
            .any(|row| support.iter().filter(|&&q| row.get(q)).count() % 2 == 1)
    };
    struct Search<'a> {
        n: usize,
        col_syn: &'a [Vec<u64>],
        by_syn: &'a HashMap<Vec<u64>, Vec<usize>>,
        stack: Vec<usize>,
    }
    impl Search<'_> {
        fn run(&mut self, syn: &mut Vec<u64>, remaining: usize, found: &mut dyn FnMut(&[usize]) -> bool) -> bool {
            if remaining == 1 {
                let last = *self.stack.last().unwrap();
                if let Some(cands) = self.by_syn.get(syn.as_slice()) {
                    for &c in cands {
                        if c > last {
                            self.stack.push(c);
                            let hit = found(&self.stack);
                            self.stack.pop();
                            if hit {
                                return true;
                            }
                        }
                    }
                }
                return false;
            }
            let last = *self.stack.last().unwrap();
            for c in last + 1..self.n {
                for (a, b) in syn.iter_mut().zip(&self.col_syn[c]) {
                    *a ^= b;
                }
                self.stack.push(c);
                let hit = self.run(syn, remaining - 1, found);
                self.stack.pop();
                for (a, b) in syn.iter_mut().zip(&self.col_syn[c]) {
                    *a ^= b;
                }
                if hit {
                    return true;
                }
            }
            false
        }
    }
    for w in 1..=w_max {
        for first in [0, lm] {
            if w == 1 {
                if col_syn[first].iter().all(|&x| x == 0) && is_logical(&[first]) {
                    return Ok(Some(1));
                }
                continue;
            }
            let mut search = Search {
                n,
                col_syn: &col_syn,
                by_syn: &by_syn,
                stack: vec![first],
            };
            let mut syn = col_syn[first].clone();
            let mut found = |s: &[usize]| is_logical(s);
            if search.run(&mut syn, w - 1, &mut found) {
                return Ok(Some(w));
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::known_code;
    use crate::gf2::BinMatrix;
    use crate::noise::{build_detector_model, FinalReadout, NoisyCircuit};

    fn code(n: usize) -> BBCode {
        known_code(n).unwrap().spec.build().unwrap()
    }

    #[test]
    fn zero_syndrome_is_immediate() {
        let d = code(72).hx.to_sparse();
        let priors = vec![0.01; d.cols()];
        let r = bp_marginals(&d, &priors, &BinVector::zeros(d.rows()), &BPConfig::default()).unwrap();
        assert!(r.converged && r.hard.is_zero() && r.iterations == 0);
        let xi = osd_postprocess(&d, &priors, &BinVector::zeros(d.rows()), &r.posteriors, &OSDConfig::default()).unwrap();
        assert!(xi.is_zero());
    }

    #[test]
    fn tie_break_prefers_lower_index() {
        let d = BinMatrix::from_dense(&[vec![1, 1]]).to_sparse();
        let s = BinVector::from_support(1, &[0]);
        let xi = osd_postprocess(&d, &[0.1, 0.1], &s, &[0.5, 0.5], &OSDConfig::default()).unwrap();
        assert_eq!(xi.support(), vec![0]);
    }

    #[test]
    fn unsolvable_syndrome_is_reported() {
        let d = BinMatrix::from_dense(&[vec![1, 1], vec![1, 1]]).to_sparse();
        let s = BinVector::from_support(2, &[0]);
        assert!(matches!(
            osd_postprocess(&d, &[0.1, 0.1], &s, &[0.1, 0.1], &OSDConfig::default()),
            Err(Error::Unsolvable)
        ));
    }

    #[test]
    fn combination_sweep_beats_order_zero() {
        // Column 2 = column 0 + column 1; the unreliable order puts 0 and 1 first.
        let d = BinMatrix::from_dense(&[vec![1, 0, 1], vec![0, 1, 1]]).to_sparse();
        let s = BinVector::from_support(2, &[0, 1]);
        let q = [0.4, 0.4, 0.1];
        let o0 = osd_postprocess(&d, &[0.1; 3], &s, &q, &OSDConfig { mode: OsdMode::Order0, depth: 0 }).unwrap();
        assert_eq!(o0.support(), vec![0, 1]);
        let cs = osd_postprocess(&d, &[0.1; 3], &s, &q, &OSDConfig::default()).unwrap();
        assert_eq!(cs.support(), vec![2]);
    }

    #[test]
    fn planted_single_faults_are_recovered() {
        let c = code(72);
        let circ = NoisyCircuit::new(&c, 2, FinalReadout::NoiselessCycles(1)).unwrap();
        let m = build_detector_model(&circ, 0.001);
        let model = m.model(PauliType::X);
        let dec = Decoder::new(model, BPConfig::default(), OSDConfig::default()).unwrap();
        for j in (0..model.cols()).step_by(97) {
            let s = model.d.column_vector(j);
            let out = dec.decode(&s).unwrap();
            assert_eq!(model.d.mul_vec(&out.xi), s);
            assert_eq!(out.logical, model.dl.column_vector(j), "column {j}");
        }
    }

    #[test]
    fn exact_distance_of_small_code() {
        let c = code(72);
        assert_eq!(exact_distance_small(&c, 0, DEFAULT_DISTANCE_BUDGET).unwrap(), None);
        assert_eq!(exact_distance_small(&c, 4, DEFAULT_DISTANCE_BUDGET).unwrap(), None);
        assert!(matches!(exact_distance_small(&c, 40, 1000), Err(Error::BudgetExceeded(_))));
    }

    #[test]
    fn distance_bound_is_deterministic_and_valid() {
        let c = code(72);
        let cfg = DistanceConfig {
            trials: 10,
            seed: 7,
            ..DistanceConfig::default()
        };
        let a = distance_upper_bound(&c, &cfg).unwrap();
        assert_eq!(a, distance_upper_bound(&c, &cfg).unwrap());
        assert!(a >= 6);
    }
}
