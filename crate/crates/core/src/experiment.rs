//! Memory experiments, logical error rate fits, pseudo-thresholds and
//! polynomial code search.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::code::{BBCode, BivariatePoly, CodeSpec, Group, Monomial, PauliType};
use crate::decode::{distance_upper_bound, BPConfig, Decoder, DistanceConfig, OSDConfig};
use crate::error::{Error, Result};
use crate::noise::{build_detector_model, CircuitModel, FinalReadout, NoisyCircuit, ShotOutcome};

/// When a memory run stops.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StopRule {
    pub target_failures: u64,
    pub max_shots: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            target_failures: 100,
            max_shots: 1_000_000,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecoderConfig {
    pub bp: BPConfig,
    pub osd: OSDConfig,
}

impl DecoderConfig {
    /// First 16 hex digits of the SHA-256 of the JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let hash = Sha256::digest(json.as_bytes());
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MemoryConfig {
    pub p: f64,
    /// Defaults to the code distance when known.
    pub n_cycles: Option<usize>,
    pub stop: StopRule,
    pub seed: u64,
    pub decoder: DecoderConfig,
    pub readout: FinalReadout,
}

impl MemoryConfig {
    pub fn new(p: f64, n_cycles: usize, seed: u64) -> Self {
        MemoryConfig {
            p,
            n_cycles: Some(n_cycles),
            stop: StopRule::default(),
            seed,
            decoder: DecoderConfig::default(),
            readout: FinalReadout::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryRunResult {
    pub code: String,
    pub n: usize,
    pub k: usize,
    pub p: f64,
    pub n_cycles: usize,
    pub shots: u64,
    pub failures: u64,
    /// Failure probability of the whole run.
    pub block_error_rate: f64,
    /// Per-cycle logical error rate.
    pub p_l: f64,
    /// Half-width of the one-sigma Wilson interval, per cycle.
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
    pub decoder_digest: String,
}

/// `1 - (1 - P)^(1/N_c)`.
pub fn per_cycle_rate(block: f64, n_cycles: usize) -> f64 {
    if block >= 1.0 {
        return 1.0;
    }
    // -expm1(log1p(-P)/N) keeps precision for small P
    -((-block).ln_1p() / n_cycles as f64).exp_m1()
}

/// Wilson score interval for `failures / shots` at `z` standard deviations.
pub fn wilson_interval(failures: u64, shots: u64, z: f64) -> (f64, f64) {
    if shots == 0 {
        return (0.0, 1.0);
    }
    let n = shots as f64;
    let phat = failures as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (phat + z2 / (2.0 * n)) / denom;
    let half = z / denom * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Decoders for both sides of one circuit model.
pub struct MemoryDecoder {
    pub model: CircuitModel,
    x: Decoder,
    z: Decoder,
}

impl MemoryDecoder {
    pub fn new(circuit: &NoisyCircuit, p: f64, cfg: &DecoderConfig) -> Result<Self> {
        let model = build_detector_model(circuit, p);
        let x = Decoder::new(&model.x, cfg.bp.clone(), cfg.osd.clone())?;
        let z = Decoder::new(&model.z, cfg.bp.clone(), cfg.osd.clone())?;
        Ok(MemoryDecoder { model, x, z })
    }

    /// True when either side's guessed logical syndrome differs from the
    /// true one.
    pub fn fails(&self, shot: &ShotOutcome) -> Result<bool> {
        for (t, dec) in [(PauliType::X, &self.x), (PauliType::Z, &self.z)] {
            let out = dec.decode(shot.detectors(t))?;
            if out.logical != *shot.logicals(t) {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

fn default_cycles(code: &BBCode) -> Result<usize> {
    let spec = code.spec();
    code.distance_exact
        .or(code.distance_upper)
        .or_else(|| {
            crate::code::known_codes()
                .into_iter()
                .find(|c| c.spec.l == spec.l && c.spec.m == spec.m && c.spec.a_poly == spec.a_poly && c.spec.b_poly == spec.b_poly)
                .map(|c| c.d)
        })
        .ok_or_else(|| Error::InvalidArgument("number of cycles not given and code distance unknown".into()))
}

/// Samples noisy memory runs and decodes both error types until the stop
/// rule fires. Shot `i` always uses the same randomness, and the stop rule
/// is applied in shot order, so the result does not depend on the thread
/// count.
pub fn run_memory_experiment(code: &BBCode, code_id: &str, cfg: &MemoryConfig) -> Result<MemoryRunResult> {
    if !(0.0..1.0).contains(&cfg.p) {
        return Err(Error::InvalidArgument(format!("p = {} outside [0, 1)", cfg.p)));
    }
    if cfg.stop.max_shots == 0 {
        return Err(Error::InvalidArgument("max_shots must be positive".into()));
    }
    let n_cycles = match cfg.n_cycles {
        Some(n) => n,
        None => default_cycles(code)?,
    };
    if n_cycles == 0 {
        return Err(Error::InvalidArgument("need at least one cycle".into()));
    }
    let circuit = NoisyCircuit::new(code, n_cycles, cfg.readout)?;
    let decoder = MemoryDecoder::new(&circuit, cfg.p, &cfg.decoder)?;
    let batch = 64 * 4 * rayon::current_num_threads().max(1) as u64;
    let (mut shots, mut failures) = (0u64, 0u64);
    'outer: while shots < cfg.stop.max_shots && failures < cfg.stop.target_failures {
        let count = batch.min(cfg.stop.max_shots - shots);
        let chunks: Vec<(u64, usize)> = (0..count)
            .step_by(64)
            .map(|off| (shots + off, (count - off).min(64) as usize))
            .collect();
        let flags: Vec<Vec<bool>> = chunks
            .par_iter()
            .map(|&(first, lanes)| {
                circuit
                    .sample_shots(cfg.p, cfg.seed, first, lanes)
                    .iter()
                    .map(|s| decoder.fails(s))
                    .collect::<Result<Vec<bool>>>()
            })
            .collect::<Result<_>>()?;
        for fail in flags.into_iter().flatten() {
            shots += 1;
            failures += fail as u64;
            if failures >= cfg.stop.target_failures {
                break 'outer;
            }
        }
    }
    let block = failures as f64 / shots as f64;
    let (lo, hi) = wilson_interval(failures, shots, 1.0);
    let (ci_low, ci_high) = (per_cycle_rate(lo, n_cycles), per_cycle_rate(hi, n_cycles));
    Ok(MemoryRunResult {
        code: code_id.to_string(),
        n: code.n(),
        k: code.k,
        p: cfg.p,
        n_cycles,
        shots,
        failures,
        block_error_rate: block,
        p_l: per_cycle_rate(block, n_cycles),
        stderr: (ci_high - ci_low) / 2.0,
        ci_low,
        ci_high,
        seed: cfg.seed,
        decoder_digest: cfg.decoder.digest(),
    })
}

/// Decodes every single fault of the memory circuit on its own. Returns the
/// number of fault locations and how many of them were decoded to a wrong
/// logical class. Faults sharing a model column share a decode.
pub fn single_fault_sweep(code: &BBCode, n_cycles: usize, readout: FinalReadout, cfg: &DecoderConfig) -> Result<(usize, usize)> {
    let circuit = NoisyCircuit::new(code, n_cycles, readout)?;
    let decoder = MemoryDecoder::new(&circuit, 1e-3, cfg)?;
    let mut bad = vec![false; decoder.model.faults.len()];
    for (model, dec) in [(&decoder.model.x, &decoder.x), (&decoder.model.z, &decoder.z)] {
        let wrong: Vec<bool> = (0..model.cols())
            .into_par_iter()
            .map(|j| Ok(dec.decode(&model.d.column_vector(j))?.logical != model.dl.column_vector(j)))
            .collect::<Result<_>>()?;
        for (j, w) in wrong.into_iter().enumerate() {
            if w {
                for &f in &model.provenance[j] {
                    bad[f as usize] = true;
                }
            }
        }
    }
    Ok((bad.len(), bad.iter().filter(|&&b| b).count()))
}

/// Coefficients of `p_L(p) = p^(d/2) exp(c0 + c1 p + c2 p^2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub d_circ: usize,
    /// `log p_L - fitted log p_L` for each input point.
    #[serde(default)]
    pub residuals: Vec<f64>,
}

impl FitResult {
    pub fn new(c0: f64, c1: f64, c2: f64, d_circ: usize) -> Self {
        FitResult {
            c0,
            c1,
            c2,
            d_circ,
            residuals: Vec::new(),
        }
    }

    pub fn ln_eval(&self, p: f64) -> f64 {
        self.d_circ as f64 / 2.0 * p.ln() + self.c0 + self.c1 * p + self.c2 * p * p
    }

    pub fn eval(&self, p: f64) -> f64 {
        self.ln_eval(p).exp()
    }
}

/// Least-squares fit of `log p_L - (d/2) log p` to a quadratic in `p`.
pub fn fit_curve(points: &[(f64, f64)], d_circ: usize) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 points, got {}", points.len())));
    }
    for &(p, pl) in points {
        if !(p > 0.0 && pl > 0.0 && p.is_finite() && pl.is_finite()) {
            return Err(Error::InvalidArgument(format!("point ({p}, {pl}) is not positive")));
        }
    }
    let scale = points.iter().map(|pt| pt.0).fold(0.0, f64::max);
    let rows = points.len();
    let a = DMatrix::from_fn(rows, 3, |i, j| (points[i].0 / scale).powi(j as i32));
    let y = DVector::from_fn(rows, |i, _| points[i].1.ln() - d_circ as f64 / 2.0 * points[i].0.ln());
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > smax * 1e-10) {
        return Err(Error::InvalidArgument("degenerate fit: fewer than 3 distinct p values".into()));
    }
    let c = svd
        .solve(&y, 0.0)
        .map_err(|e| Error::InvalidArgument(format!("least squares failed: {e}")))?;
    let fitted = &a * &c;
    let mut fit = FitResult::new(c[0], c[1] / scale, c[2] / (scale * scale), d_circ);
    fit.residuals = (0..rows).map(|i| y[i] - fitted[i]).collect();
    Ok(fit)
}

/// Smallest root of `p_L(p) = k p` in `(1e-5, 0.1)`, if `p_L - k p` changes
/// sign there. The interval is scanned on a log grid and the first bracket
/// is bisected.
pub fn pseudo_threshold(fit: &FitResult, k: usize) -> Option<f64> {
    const LO: f64 = 1e-5;
    const HI: f64 = 0.1;
    const GRID: usize = 2000;
    let g = |p: f64| fit.ln_eval(p) - (k as f64 * p).ln();
    let at = |i: usize| LO * (HI / LO).powf(i as f64 / GRID as f64);
    let mut a = LO;
    let mut ga = g(a);
    for i in 1..=GRID {
        let b = at(i);
        let gb = g(b);
        if ga == 0.0 {
            return Some(a);
        }
        if ga.signum() != gb.signum() {
            let (mut lo, mut hi, glo) = (a, b, ga);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if (g(mid) > 0.0) == (glo > 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(0.5 * (lo + hi));
        }
        a = b;
        ga = gb;
    }
    None
}

/// Fit coefficients quoted for the benchmark codes.
#[derive(Clone, Debug)]
pub struct PublishedFit {
    pub n: usize,
    pub k: usize,
    pub fit: FitResult,
}

pub fn published_fits() -> Vec<PublishedFit> {
    let row = |n, k, d, c0, c1, c2| PublishedFit {
        n,
        k,
        fit: FitResult::new(c0, c1, c2, d),
    };
    vec![
        row(72, 12, 6, 11.09, 365.6, -16088.0),
        row(90, 8, 8, 15.08, 524.8, -12670.0),
        row(108, 8, 8, 13.91, 895.0, -46137.0),
        row(144, 12, 10, 18.04, 1337.0, -96007.0),
        row(288, 12, 18, 32.04, 3522.0, -294482.0),
    ]
}

pub fn published_fit(n: usize) -> Option<PublishedFit> {
    published_fits().into_iter().find(|f| f.n == n)
}

/// Polynomial shapes explored by [`code_search`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PolyFamily {
    /// `A = x^a + y^b + y^c` and `B = y^d + x^e + x^f`.
    MixedPowers,
    /// Fixed `(A, B)` pairs, reused for every `(l, m)`.
    Explicit(Vec<(String, String)>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub l_range: (usize, usize),
    pub m_range: (usize, usize),
    pub family: PolyFamily,
    pub k_min: usize,
    pub require_connected: bool,
    /// Trials per distance bound.
    pub trials: usize,
    pub seed: u64,
    /// Cap on the number of distinct codes whose distance is computed.
    pub budget: Option<usize>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            l_range: (6, 6),
            m_range: (6, 6),
            family: PolyFamily::MixedPowers,
            k_min: 4,
            require_connected: true,
            trials: 30,
            seed: 0,
            budget: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchCandidate {
    pub spec: CodeSpec,
    pub n: usize,
    pub k: usize,
    pub d_bp: usize,
    /// `k d^2 / n`.
    pub score: f64,
}

fn mixed_polys(g: Group, lead_x: bool) -> Vec<BivariatePoly> {
    let (single, pair) = if lead_x { (g.l, g.m) } else { (g.m, g.l) };
    let mono = |s: usize, t: usize| if lead_x { Monomial::new(s, t) } else { Monomial::new(t, s) };
    let mut out = Vec::new();
    for s in 0..single {
        for t1 in 0..pair {
            for t2 in t1 + 1..pair {
                if let Ok(p) = BivariatePoly::new(g, vec![mono(s, 0), mono(0, t1), mono(0, t2)]) {
                    out.push(p);
                }
            }
        }
    }
    out
}

fn candidates(g: Group, family: &PolyFamily) -> Result<Vec<(BivariatePoly, BivariatePoly)>> {
    Ok(match family {
        PolyFamily::MixedPowers => {
            let a = mixed_polys(g, true);
            let b = mixed_polys(g, false);
            a.iter().flat_map(|pa| b.iter().map(move |pb| (pa.clone(), pb.clone()))).collect()
        }
        PolyFamily::Explicit(list) => list
            .iter()
            .map(|(a, b)| Ok((BivariatePoly::parse(g, a)?, BivariatePoly::parse(g, b)?)))
            .collect::<Result<_>>()?,
    })
}

/// Least sorted term list over all monomial shifts of `p`.
fn shift_normal(p: &BivariatePoly) -> Vec<Monomial> {
    let g = p.group();
    p.terms()
        .iter()
        .map(|&t| {
            let mut terms: Vec<Monomial> = p.shift(g.inv(t)).terms().to_vec();
            terms.sort();
            terms
        })
        .min()
        .unwrap_or_default()
}

fn swap_xy(p: &BivariatePoly) -> BivariatePoly {
    let g = p.group();
    let h = Group { l: g.m, m: g.l };
    BivariatePoly::from_terms_mod2(h, p.terms().iter().map(|t| Monomial::new(t.b, t.a)))
}

/// Key shared by codes related by block swap, transposition, monomial
/// shifts of either polynomial and (for `l = m`) exchanging `x` and `y`.
fn equivalence_key(a: &BivariatePoly, b: &BivariatePoly) -> Vec<Monomial> {
    let mut forms = vec![(a.clone(), b.clone()), (a.transpose(), b.transpose())];
    if a.group().l == a.group().m {
        forms.push((swap_xy(a), swap_xy(b)));
        forms.push((swap_xy(&a.transpose()), swap_xy(&b.transpose())));
    }
    forms
        .iter()
        .flat_map(|(p, q)| {
            let (np, nq) = (shift_normal(p), shift_normal(q));
            [[np.clone(), nq.clone()].concat(), [nq, np].concat()]
        })
        .min()
        .unwrap_or_default()
}

/// Builds every code of the family in the given size ranges, keeps one
/// representative per equivalence class that passes the filters, bounds its
/// distance and ranks by `k d^2 / n` (best first).
pub fn code_search(cfg: &SearchConfig) -> Result<Vec<SearchCandidate>> {
    let (l0, l1) = cfg.l_range;
    let (m0, m1) = cfg.m_range;
    if l0 == 0 || m0 == 0 || l0 > l1 || m0 > m1 {
        return Err(Error::InvalidArgument("empty or invalid size range".into()));
    }
    let mut pool: Vec<crate::code::BBCode> = Vec::new();
    for l in l0..=l1 {
        for m in m0..=m1 {
            let g = Group::new(l, m)?;
            let mut seen = HashSet::new();
            let pairs: Vec<_> = candidates(g, &cfg.family)?
                .into_iter()
                .filter(|(a, b)| seen.insert(equivalence_key(a, b)))
                .collect();
            let built: Vec<BBCode> = pairs
                .into_par_iter()
                .filter_map(|(a, b)| crate::code::build_code(l, m, a, b).ok())
                .filter(|c| c.k >= cfg.k_min && c.k > 0)
                .filter(|c| !cfg.require_connected || c.components_by_formula() == 1)
                .collect();
            pool.extend(built);
        }
    }
    if let Some(budget) = cfg.budget {
        if pool.len() > budget {
            return Err(Error::BudgetExceeded(format!(
                "{} codes pass the filters, budget is {budget}",
                pool.len()
            )));
        }
    }
    let dcfg = DistanceConfig {
        trials: cfg.trials,
        seed: cfg.seed,
        ..DistanceConfig::default()
    };
    let mut out: Vec<SearchCandidate> = pool
        .par_iter()
        .map(|c| {
            let d = distance_upper_bound(c, &dcfg)?;
            Ok(SearchCandidate {
                spec: c.spec(),
                n: c.n(),
                k: c.k,
                d_bp: d,
                score: (c.k * d * d) as f64 / c.n() as f64,
            })
        })
        .collect::<Result<_>>()?;
    out.sort_by(|x, y| {
        y.score
            .total_cmp(&x.score)
            .then(x.n.cmp(&y.n))
            .then_with(|| (&x.spec.a_poly, &x.spec.b_poly).cmp(&(&y.spec.a_poly, &y.spec.b_poly)))
    });
    Ok(out)
}

/// Monte Carlo sweep over one code.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub code: CodeSpec,
    pub p: Vec<f64>,
    #[serde(default)]
    pub n_cycles: Option<usize>,
    #[serde(default)]
    pub stop: StopRule,
    #[serde(default)]
    pub decoder: DecoderConfig,
    #[serde(default)]
    pub seed: u64,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SweepConfig =
            serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.column(), e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p.is_empty() {
            return Err(Error::InvalidArgument("p list is empty".into()));
        }
        if let Some(bad) = self.p.iter().find(|p| !(0.0..1.0).contains(*p)) {
            return Err(Error::InvalidArgument(format!("p = {bad} outside [0, 1)")));
        }
        if self.n_cycles == Some(0) {
            return Err(Error::InvalidArgument("n_cycles must be positive".into()));
        }
        if self.stop.max_shots == 0 {
            return Err(Error::InvalidArgument("max_shots must be positive".into()));
        }
        Ok(())
    }

    pub fn memory_config(&self, p: f64) -> MemoryConfig {
        MemoryConfig {
            p,
            n_cycles: self.n_cycles,
            stop: self.stop,
            seed: self.seed,
            decoder: self.decoder.clone(),
            readout: FinalReadout::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::known_code;

    #[test]
    fn per_cycle_rate_is_below_block_rate() {
        for &pb in &[0.0, 1e-9, 0.01, 0.3, 0.99] {
            let pl = per_cycle_rate(pb, 6);
            assert!(pl <= pb + 1e-18);
            assert!(((1.0 - pl).powi(6) - (1.0 - pb)).abs() < 1e-12);
        }
        assert_eq!(per_cycle_rate(0.2, 1), 0.2);
    }

    #[test]
    fn wilson_brackets_estimate() {
        let (lo, hi) = wilson_interval(100, 1000, 1.0);
        assert!(lo < 0.1 && 0.1 < hi);
        // roughly p / sqrt(failures)
        assert!(((hi - lo) / 2.0 - 0.0095).abs() < 0.001);
        assert_eq!(wilson_interval(0, 0, 1.0), (0.0, 1.0));
    }

    #[test]
    fn noiseless_memory_never_fails() {
        let code = known_code(72).unwrap().spec.build().unwrap();
        let mut cfg = MemoryConfig::new(0.0, 2, 1);
        cfg.stop.max_shots = 300;
        let r = run_memory_experiment(&code, "72", &cfg).unwrap();
        assert_eq!((r.shots, r.failures), (300, 0));
        assert_eq!(r.p_l, 0.0);
    }

    #[test]
    fn memory_runs_repeat() {
        let code = known_code(72).unwrap().spec.build().unwrap();
        let mut cfg = MemoryConfig::new(0.004, 2, 9);
        cfg.stop = StopRule {
            target_failures: 5,
            max_shots: 400,
        };
        let a = run_memory_experiment(&code, "72", &cfg).unwrap();
        let b = run_memory_experiment(&code, "72", &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.p_l <= a.block_error_rate);
    }

    #[test]
    fn bad_memory_arguments() {
        let code = known_code(72).unwrap().spec.build().unwrap();
        assert!(run_memory_experiment(&code, "", &MemoryConfig::new(1.5, 2, 0)).is_err());
        assert!(run_memory_experiment(&code, "", &MemoryConfig::new(0.01, 0, 0)).is_err());
    }

    #[test]
    fn fit_recovers_synthetic_coefficients() {
        let truth = FitResult::new(11.09, 365.6, -16088.0, 6);
        let pts: Vec<(f64, f64)> = [0.002, 0.003, 0.004, 0.005, 0.006, 0.008]
            .iter()
            .map(|&p| (p, truth.eval(p)))
            .collect();
        let fit = fit_curve(&pts, 6).unwrap();
        assert!((fit.c0 - truth.c0).abs() < 1e-9);
        assert!((fit.c1 - truth.c1).abs() < 1e-9 * truth.c1.abs());
        assert!((fit.c2 - truth.c2).abs() < 1e-9 * truth.c2.abs());
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-9));
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(fit_curve(&[(0.01, 1e-3), (0.02, 1e-2)], 6).is_err());
        assert!(fit_curve(&[(0.01, 1e-3), (0.01, 1e-3), (0.01, 2e-3)], 6).is_err());
        assert!(fit_curve(&[(0.01, 0.0), (0.02, 1e-3), (0.03, 1e-2)], 6).is_err());
    }

    #[test]
    fn threshold_of_published_fits() {
        let f = published_fit(144).unwrap();
        let p0 = pseudo_threshold(&f.fit, f.k).unwrap();
        assert!((p0 - 0.0065).abs() < 0.00065, "{p0}");
        // above break-even everywhere
        let bad = FitResult::new(20.0, 0.0, 0.0, 2);
        assert_eq!(pseudo_threshold(&bad, 12), None);
    }

    #[test]
    fn published_fits_are_monotone_below_threshold() {
        for f in published_fits() {
            let p0 = pseudo_threshold(&f.fit, f.k).unwrap();
            let mut prev = 0.0;
            for i in 1..=100 {
                let p = p0 * i as f64 / 100.0;
                let v = f.fit.eval(p);
                assert!(v >= prev, "n={} p={p}", f.n);
                prev = v;
            }
        }
    }

    #[test]
    fn equivalent_codes_share_a_key() {
        let g = Group::new(6, 6).unwrap();
        let a = BivariatePoly::parse(g, "x3+y1+y2").unwrap();
        let b = BivariatePoly::parse(g, "y3+x1+x2").unwrap();
        let k = equivalence_key(&a, &b);
        assert_eq!(k, equivalence_key(&b, &a));
        assert_eq!(k, equivalence_key(&a.transpose(), &b.transpose()));
        assert_eq!(k, equivalence_key(&a.shift(Monomial::new(1, 4)), &b));
        assert_eq!(k, equivalence_key(&swap_xy(&a), &swap_xy(&b)));
        let c = BivariatePoly::parse(g, "x1+y1+y2").unwrap();
        assert_ne!(k, equivalence_key(&c, &b));
    }

    #[test]
    fn sweep_config_validation() {
        let ok = r#"{"code":{"l":6,"m":6,"a_poly":"x3+y1+y2","b_poly":"y3+x1+x2"},"p":[0.005]}"#;
        let cfg = SweepConfig::from_json(ok).unwrap();
        assert_eq!(cfg.stop, StopRule::default());
        let empty = r#"{"code":{"l":6,"m":6,"a_poly":"x3+y1+y2","b_poly":"y3+x1+x2"},"p":[]}"#;
        assert!(SweepConfig::from_json(empty).is_err());
        assert!(matches!(SweepConfig::from_json("{"), Err(Error::Parse { .. })));
    }

    #[test]
    fn digest_tracks_config() {
        let a = DecoderConfig::default();
        let mut b = a.clone();
        b.osd.depth = 5;
        assert_eq!(a.digest().len(), 16);
        assert_ne!(a.digest(), b.digest());
    }

    #[test]
    fn single_faults_are_corrected() {
        let code = known_code(72).unwrap().spec.build().unwrap();
        let (faults, failed) = single_fault_sweep(&code, 1, FinalReadout::default(), &DecoderConfig::default()).unwrap();
        assert_eq!(faults, 98 * 72);
        assert_eq!(failed, 0);
    }
}
