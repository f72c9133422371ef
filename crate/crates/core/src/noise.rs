//! Circuit-level depolarizing noise: fault enumeration, detector models and
//! Pauli-frame sampling.
//!
//! Every noisy operation fails with probability `p`. A failing CNOT applies
//! one of the 15 non-identity two-qubit Paulis, a failing idle one of X, Y,
//! Z, a failing preparation produces the orthogonal state and a failing
//! measurement reports the flipped outcome.
//!
//! Frames are simulated 64 lanes at a time; a lane is either one candidate
//! fault (enumeration) or one shot (sampling).

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{build_sm_circuit, Op, ScheduledCircuit};
use crate::code::{BBCode, PauliType, Register};
use crate::error::{Error, Result};
use crate::gf2::{BinMatrix, BinVector, SparseBinMatrix};

/// How the syndrome of the final data error reaches the decoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FinalReadout {
    /// Computed directly from the residual data error.
    DataSyndrome,
    /// Measured by this many appended noiseless cycles. The Z-check
    /// initialisation at the end of the last noisy cycle stays noisy, so its
    /// faults reach the readout as single-detector events.
    NoiselessCycles(usize),
}

impl Default for FinalReadout {
    fn default() -> Self {
        FinalReadout::DataSyndrome
    }
}

const PX: u8 = 1;
const PZ: u8 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaultKind {
    /// Pauli pair after a CNOT; two bits per qubit (X = 1, Z = 2), control in
    /// the low bits.
    Cnot(u8),
    /// X, Z or Y (= 3) after an idle step.
    Idle(u8),
    /// Preparation of the orthogonal state.
    Prep,
    /// Flipped measurement outcome.
    MeasFlip,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fault {
    /// Index into the flattened operation list.
    pub op: u32,
    pub round: u32,
    pub kind: FaultKind,
    pub prior: f64,
}

#[derive(Clone, Copy, Debug)]
struct FlatOp {
    op: Op,
    q1: u32,
    q2: u32,
    round: u32,
    noisy: bool,
    meas: u32,
}

#[derive(Clone, Copy, Debug)]
struct Measurement {
    check: PauliType,
    idx: u32,
    cycle: u32,
}

/// A syndrome circuit prepared for noisy simulation.
#[derive(Clone, Debug)]
pub struct NoisyCircuit {
    pub circuit: ScheduledCircuit,
    pub readout: FinalReadout,
    pub lm: usize,
    pub n_cycles: usize,
    /// Cycles whose syndromes are measured (noisy plus readout cycles).
    pub measured_cycles: usize,
    ops: Vec<FlatOp>,
    noisy_ops: Vec<u32>,
    meas: Vec<Measurement>,
    hx: SparseBinMatrix,
    hz: SparseBinMatrix,
    /// Z-type logicals (detect X errors) and X-type logicals.
    zlog: SparseBinMatrix,
    xlog: SparseBinMatrix,
    pub k: usize,
}

impl NoisyCircuit {
    /// Memory circuit for `code` with `n_cycles` noisy cycles. The leading
    /// Z-check initialisation round is noiseless.
    pub fn new(code: &BBCode, n_cycles: usize, readout: FinalReadout) -> Result<Self> {
        let base = build_sm_circuit(code, n_cycles)?;
        let mut circuit = base.with_noiseless_prelude();
        if let FinalReadout::NoiselessCycles(extra) = readout {
            if extra == 0 {
                return Err(Error::InvalidArgument("need at least one readout cycle".into()));
            }
            circuit = circuit.with_noiseless_cycles(extra);
        }
        Ok(Self::from_circuit(code, circuit, n_cycles, readout))
    }

    fn from_circuit(code: &BBCode, circuit: ScheduledCircuit, n_cycles: usize, readout: FinalReadout) -> Self {
        let lm = code.lm();
        let qid = |q: crate::code::Qubit| -> u32 {
            (match q.reg {
                Register::L => q.idx,
                Register::R => lm + q.idx,
                Register::X => 2 * lm + q.idx,
                Register::Z => 3 * lm + q.idx,
            }) as u32
        };
        let cycle_of = |round: usize| -> u32 {
            circuit.cycle_starts.iter().rposition(|&s| s <= round).unwrap_or(0) as u32
        };
        let mut ops = Vec::new();
        let mut meas = Vec::new();
        for (r, round_ops) in circuit.rounds.iter().enumerate() {
            for op in round_ops {
                let qs = op.qubits();
                let mut m = u32::MAX;
                match op {
                    Op::MeasX(q) | Op::MeasZ(q) => {
                        m = meas.len() as u32;
                        meas.push(Measurement {
                            check: if matches!(op, Op::MeasX(_)) { PauliType::X } else { PauliType::Z },
                            idx: q.idx as u32,
                            cycle: cycle_of(r),
                        });
                    }
                    _ => {}
                }
                ops.push(FlatOp {
                    op: *op,
                    q1: qid(qs[0]),
                    q2: qs.get(1).map_or(u32::MAX, |&q| qid(q)),
                    round: r as u32,
                    noisy: !circuit.noiseless[r],
                    meas: m,
                });
            }
        }
        let measured_cycles = circuit.cycle_starts.len();
        let noisy_ops = (0..ops.len() as u32).filter(|&j| ops[j as usize].noisy).collect();
        NoisyCircuit {
            circuit,
            readout,
            lm,
            n_cycles,
            measured_cycles,
            ops,
            noisy_ops,
            meas,
            hx: code.hx.to_sparse(),
            hz: code.hz.to_sparse(),
            zlog: code.logical_basis(PauliType::Z).to_sparse(),
            xlog: code.logical_basis(PauliType::X).to_sparse(),
            k: code.k,
        }
    }

    pub fn n(&self) -> usize {
        2 * self.lm
    }

    pub fn measurement_count(&self) -> usize {
        self.meas.len()
    }

    /// Detector rows for checks of type `t`.
    pub fn detector_rows(&self) -> usize {
        match self.readout {
            FinalReadout::DataSyndrome => (self.measured_cycles + 1) * self.lm,
            FinalReadout::NoiselessCycles(_) => self.measured_cycles * self.lm,
        }
    }

    /// Logical operators detecting errors of type `e`: Z-type logicals for
    /// X errors and X-type logicals for Z errors.
    pub fn logicals(&self, e: PauliType) -> &SparseBinMatrix {
        match e {
            PauliType::X => &self.zlog,
            PauliType::Z => &self.xlog,
        }
    }

    /// Every single fault with its prior, in operation order.
    pub fn fault_locations(&self, p: f64) -> Vec<Fault> {
        let mut out = Vec::new();
        for (j, f) in self.ops.iter().enumerate() {
            if !f.noisy {
                continue;
            }
            let mut push = |kind, prior| {
                out.push(Fault {
                    op: j as u32,
                    round: f.round,
                    kind,
                    prior,
                })
            };
            match f.op {
                Op::Cnot { .. } => (1..16u8).for_each(|c| push(FaultKind::Cnot(c), p / 15.0)),
                Op::Idle(_) => (1..4u8).for_each(|c| push(FaultKind::Idle(c), p / 3.0)),
                Op::InitX(_) | Op::InitZ(_) => push(FaultKind::Prep, p),
                Op::MeasX(_) | Op::MeasZ(_) => push(FaultKind::MeasFlip, p),
            }
        }
        out
    }

    fn injection(&self, fault: &Fault, lanes: u64) -> Injection {
        let f = &self.ops[fault.op as usize];
        let (p1, p2, flip) = match fault.kind {
            FaultKind::Cnot(c) => (c & 3, c >> 2, false),
            FaultKind::Idle(c) => (c, 0, false),
            FaultKind::Prep => (if matches!(f.op, Op::InitX(_)) { PZ } else { PX }, 0, false),
            FaultKind::MeasFlip => (0, 0, true),
        };
        Injection {
            op: fault.op,
            lanes,
            p1,
            p2,
            flip,
        }
    }

    /// Runs the circuit with the given injections (sorted by operation).
    fn simulate(&self, inj: &[Injection]) -> Frames {
        let nq = 4 * self.lm;
        let mut x = vec![0u64; nq];
        let mut z = vec![0u64; nq];
        let mut rec = vec![0u64; self.meas.len()];
        let start = inj.first().map_or(self.ops.len(), |i| i.op as usize);
        let mut ptr = 0;
        for (j, f) in self.ops.iter().enumerate().skip(start) {
            let (a, b) = (f.q1 as usize, f.q2 as usize);
            match f.op {
                Op::Cnot { .. } => {
                    x[b] ^= x[a];
                    z[a] ^= z[b];
                }
                Op::InitX(_) | Op::InitZ(_) => {
                    x[a] = 0;
                    z[a] = 0;
                }
                Op::MeasZ(_) => rec[f.meas as usize] = x[a],
                Op::MeasX(_) => rec[f.meas as usize] = z[a],
                Op::Idle(_) => {}
            }
            while ptr < inj.len() && inj[ptr].op as usize == j {
                let i = &inj[ptr];
                if i.p1 & PX != 0 {
                    x[a] ^= i.lanes;
                }
                if i.p1 & PZ != 0 {
                    z[a] ^= i.lanes;
                }
                if i.p2 & PX != 0 {
                    x[b] ^= i.lanes;
                }
                if i.p2 & PZ != 0 {
                    z[b] ^= i.lanes;
                }
                if i.flip {
                    rec[f.meas as usize] ^= i.lanes;
                }
                ptr += 1;
            }
        }
        let n = self.n();
        x.truncate(n);
        z.truncate(n);
        Frames { rec, x, z }
    }

    /// Detector vector of checks of type `t` from flipped measurement
    /// indices and the final data error seen by those checks.
    fn detectors_from(&self, t: PauliType, flips: &[u32], final_err: &BinVector) -> BinVector {
        let lm = self.lm;
        let rows = self.detector_rows();
        let blocks = rows / lm;
        let mut d = BinVector::zeros(rows);
        for &m in flips {
            let info = self.meas[m as usize];
            if info.check != t {
                continue;
            }
            let c = info.cycle as usize;
            d.flip(c * lm + info.idx as usize);
            if c + 1 < blocks {
                d.flip((c + 1) * lm + info.idx as usize);
            }
        }
        if self.readout == FinalReadout::DataSyndrome {
            let h = match t {
                PauliType::X => &self.hx,
                PauliType::Z => &self.hz,
            };
            let s = h.mul_vec(final_err);
            for i in s.iter_ones() {
                d.flip(self.measured_cycles * lm + i);
            }
        }
        d
    }

    /// Lane `lane` of a simulation: flipped measurement indices and final
    /// X and Z errors on the data qubits.
    fn lane(&self, frames: &Frames, lane: usize) -> (Vec<u32>, BinVector, BinVector) {
        let bit = 1u64 << lane;
        let flips = frames
            .rec
            .iter()
            .enumerate()
            .filter(|(_, &w)| w & bit != 0)
            .map(|(i, _)| i as u32)
            .collect();
        let pick = |v: &[u64]| {
            let ones: Vec<usize> = v.iter().enumerate().filter(|(_, &w)| w & bit != 0).map(|(i, _)| i).collect();
            BinVector::from_support(v.len(), &ones)
        };
        (flips, pick(&frames.x), pick(&frames.z))
    }

    fn outcome(&self, flips: Vec<u32>, ex: BinVector, ez: BinVector) -> ShotOutcome {
        let mut raw = BinVector::zeros(self.meas.len());
        for &m in &flips {
            raw.set(m as usize, true);
        }
        // Z checks and Z logicals see X errors; X checks and X logicals see Z errors.
        let det_for_x = self.detectors_from(PauliType::Z, &flips, &ex);
        let det_for_z = self.detectors_from(PauliType::X, &flips, &ez);
        let log_for_x = self.zlog.mul_vec(&ex);
        let log_for_z = self.xlog.mul_vec(&ez);
        ShotOutcome {
            raw,
            detectors: [det_for_x, det_for_z],
            logicals: [log_for_x, log_for_z],
            final_x: ex,
            final_z: ez,
        }
    }

    /// Propagates every single fault to the end of the circuit.
    pub fn enumerate_faults(&self, p: f64) -> Vec<FaultSignature> {
        let faults = self.fault_locations(p);
        faults
            .par_chunks(64)
            .flat_map_iter(|chunk| {
                let inj: Vec<Injection> = chunk
                    .iter()
                    .enumerate()
                    .map(|(lane, f)| self.injection(f, 1u64 << lane))
                    .collect();
                let frames = self.simulate(&inj);
                chunk
                    .iter()
                    .enumerate()
                    .map(|(lane, f)| {
                        let (flips, ex, ez) = self.lane(&frames, lane);
                        let o = self.outcome(flips, ex, ez);
                        FaultSignature {
                            fault: *f,
                            detectors: [o.detectors[0].support_u32(), o.detectors[1].support_u32()],
                            logicals: [o.logicals[0].support_u32(), o.logicals[1].support_u32()],
                        }
                    })
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    /// Simulates a fixed multiset of faults exactly (faults listed twice
    /// cancel only through frame arithmetic).
    pub fn simulate_faults(&self, faults: &[Fault]) -> ShotOutcome {
        let mut inj: Vec<Injection> = faults.iter().map(|f| self.injection(f, 1)).collect();
        inj.sort_by_key(|i| i.op);
        let frames = self.simulate(&inj);
        let (flips, ex, ez) = self.lane(&frames, 0);
        self.outcome(flips, ex, ez)
    }

    /// Samples faults for one shot: each noisy operation fails independently
    /// with probability `p`. The draw depends only on `(seed, shot)`.
    pub fn sample_faults(&self, p: f64, seed: u64, shot: u64) -> Vec<Fault> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(shot);
        let mut out = Vec::new();
        if p <= 0.0 {
            return out;
        }
        let log_q = (1.0 - p.min(1.0)).ln();
        let mut pos: usize = 0;
        loop {
            // Geometric skip to the next failing operation.
            if p < 1.0 {
                let u: f64 = rng.gen();
                let s = ((1.0 - u).ln() / log_q).floor();
                if !s.is_finite() || s >= (self.noisy_ops.len() - pos.min(self.noisy_ops.len())) as f64 {
                    break;
                }
                pos += s as usize;
            }
            if pos >= self.noisy_ops.len() {
                break;
            }
            let j = self.noisy_ops[pos] as usize;
            let f = &self.ops[j];
            let kind = match f.op {
                Op::Cnot { .. } => FaultKind::Cnot(rng.gen_range(1..16)),
                Op::Idle(_) => FaultKind::Idle(rng.gen_range(1..4)),
                Op::InitX(_) | Op::InitZ(_) => FaultKind::Prep,
                Op::MeasX(_) | Op::MeasZ(_) => FaultKind::MeasFlip,
            };
            out.push(Fault {
                op: j as u32,
                round: f.round,
                kind,
                prior: 0.0,
            });
            pos += 1;
        }
        out
    }

    /// Samples and simulates shots `first..first+count` (at most 64 per
    /// frame pass).
    pub fn sample_shots(&self, p: f64, seed: u64, first: u64, count: usize) -> Vec<ShotOutcome> {
        let mut out = Vec::with_capacity(count);
        let mut start = 0;
        while start < count {
            let lanes = (count - start).min(64);
            let mut inj = Vec::new();
            for lane in 0..lanes {
                for f in self.sample_faults(p, seed, first + (start + lane) as u64) {
                    inj.push(self.injection(&f, 1u64 << lane));
                }
            }
            inj.sort_by_key(|i| i.op);
            let frames = self.simulate(&inj);
            for lane in 0..lanes {
                let (flips, ex, ez) = self.lane(&frames, lane);
                out.push(self.outcome(flips, ex, ez));
            }
            start += lanes;
        }
        out
    }

    /// One sampled shot.
    pub fn sample_circuit_noise(&self, p: f64, seed: u64, shot: u64) -> ShotOutcome {
        self.sample_shots(p, seed, shot, 1).pop().expect("one shot")
    }
}

#[derive(Clone, Copy, Debug)]
struct Injection {
    op: u32,
    lanes: u64,
    p1: u8,
    p2: u8,
    flip: bool,
}

struct Frames {
    rec: Vec<u64>,
    x: Vec<u64>,
    z: Vec<u64>,
}

/// Result of one noisy run. Paired arrays are indexed by error type: index 0
/// holds the Z-check detectors and Z-logical bits that see X errors, index 1
/// the X-check detectors and X-logical bits that see Z errors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShotOutcome {
    /// Raw measurement flips relative to the noiseless run.
    pub raw: BinVector,
    pub detectors: [BinVector; 2],
    pub logicals: [BinVector; 2],
    pub final_x: BinVector,
    pub final_z: BinVector,
}

impl ShotOutcome {
    pub fn detectors(&self, t: PauliType) -> &BinVector {
        &self.detectors[side(t)]
    }

    pub fn logicals(&self, t: PauliType) -> &BinVector {
        &self.logicals[side(t)]
    }
}

#[derive(Clone, Debug)]
pub struct FaultSignature {
    pub fault: Fault,
    pub detectors: [Vec<u32>; 2],
    pub logicals: [Vec<u32>; 2],
}

/// Array slot for errors of type `e`.
#[inline]
pub fn side(e: PauliType) -> usize {
    match e {
        PauliType::X => 0,
        PauliType::Z => 1,
    }
}

trait SupportU32 {
    fn support_u32(&self) -> Vec<u32>;
}

impl SupportU32 for BinVector {
    fn support_u32(&self) -> Vec<u32> {
        self.iter_ones().map(|i| i as u32).collect()
    }
}

/// Decoding matrices for errors of one type. The model for X errors holds
/// Z-check detectors and Z-logical rows, and vice versa.
#[derive(Clone, Debug)]
pub struct DetectorModel {
    pub error_type: PauliType,
    /// Detector rows by columns.
    pub d: SparseBinMatrix,
    /// Logical rows by columns.
    pub dl: SparseBinMatrix,
    pub priors: Vec<f64>,
    /// Indices (into the fault list) merged into each column.
    pub provenance: Vec<Vec<u32>>,
}

impl DetectorModel {
    pub fn cols(&self) -> usize {
        self.d.cols()
    }

    pub fn rows(&self) -> usize {
        self.d.rows()
    }

    pub fn k(&self) -> usize {
        self.dl.rows()
    }

    /// Text dump: header `rows cols k`, then `col: prior; detectors; logicals`.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {} {}\n", self.rows(), self.cols(), self.k());
        for c in 0..self.cols() {
            let join = |v: &[usize]| v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ");
            let _ = writeln!(s, "{c}: {:e}; {}; {}", self.priors[c], join(self.d.col(c)), join(self.dl.col(c)));
        }
        s
    }

    /// Parses [`DetectorModel::to_text`] output. Provenance is not stored in
    /// the dump and comes back empty.
    pub fn from_text(text: &str, error_type: PauliType) -> Result<DetectorModel> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, 1, "missing header"))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::parse(1, 1, format!("bad header token '{t}'"))))
            .collect::<Result<_>>()?;
        let [rows, cols, k] = dims[..] else {
            return Err(Error::parse(1, 1, "header must be 'rows cols k'"));
        };
        if cols > 1 << 26 || rows > 1 << 26 || k > 1 << 16 {
            return Err(Error::parse(1, 1, "dimensions too large"));
        }
        let mut det_cols = Vec::with_capacity(cols.min(1 << 16));
        let mut log_cols = Vec::with_capacity(cols.min(1 << 16));
        let mut priors = Vec::with_capacity(cols.min(1 << 16));
        for (ln, line) in lines {
            let lnum = ln + 1;
            let (idx, rest) = line
                .split_once(':')
                .ok_or_else(|| Error::parse(lnum, 1, "expected 'col: prior; detectors; logicals'"))?;
            let c: usize = idx.trim().parse().map_err(|_| Error::parse(lnum, 1, "bad column index"))?;
            if c != det_cols.len() {
                return Err(Error::parse(lnum, 1, format!("expected column {}, found {c}", det_cols.len())));
            }
            let parts: Vec<&str> = rest.split(';').collect();
            if parts.len() != 3 {
                return Err(Error::parse(lnum, idx.len() + 2, "expected three ';'-separated fields"));
            }
            let prior: f64 = parts[0]
                .trim()
                .parse()
                .map_err(|_| Error::parse(lnum, idx.len() + 2, "bad prior"))?;
            if !(0.0..=1.0).contains(&prior) {
                return Err(Error::parse(lnum, idx.len() + 2, "prior outside [0, 1]"));
            }
            let list = |s: &str, bound: usize, what: &str| -> Result<Vec<usize>> {
                s.split_whitespace()
                    .map(|t| match t.parse::<usize>() {
                        Ok(v) if v < bound => Ok(v),
                        _ => Err(Error::parse(lnum, 1, format!("bad {what} index '{t}'"))),
                    })
                    .collect()
            };
            det_cols.push(list(parts[1], rows, "detector")?);
            log_cols.push(list(parts[2], k, "logical")?);
            priors.push(prior);
        }
        if det_cols.len() != cols {
            return Err(Error::parse(text.lines().count(), 1, format!("expected {cols} columns, found {}", det_cols.len())));
        }
        Ok(DetectorModel {
            error_type,
            d: SparseBinMatrix::from_column_supports(rows, det_cols),
            dl: SparseBinMatrix::from_column_supports(k, log_cols),
            priors,
            provenance: vec![Vec::new(); cols],
        })
    }
}

/// Both decoding models of a noisy memory circuit plus the fault list.
#[derive(Clone, Debug)]
pub struct CircuitModel {
    pub circuit: NoisyCircuit,
    pub p: f64,
    pub faults: Vec<Fault>,
    /// Pre-merge signatures, aligned with `faults`.
    pub signatures: Vec<FaultSignature>,
    /// Model for X-type errors (Z-check detectors).
    pub x: DetectorModel,
    /// Model for Z-type errors (X-check detectors).
    pub z: DetectorModel,
}

impl CircuitModel {
    pub fn model(&self, t: PauliType) -> &DetectorModel {
        match t {
            PauliType::X => &self.x,
            PauliType::Z => &self.z,
        }
    }
}

/// Builds the detector model of `circuit` at noise rate `p`. Faults with
/// identical detector and logical signatures are merged with summed priors.
/// Faults invisible to one side merge into a single all-zero column there.
pub fn build_detector_model(circuit: &NoisyCircuit, p: f64) -> CircuitModel {
    let signatures = circuit.enumerate_faults(p);
    let faults: Vec<Fault> = signatures.iter().map(|s| s.fault).collect();
    let merge = |t: PauliType| -> DetectorModel {
        let sd = side(t);
        let mut index: HashMap<(&[u32], &[u32]), usize> = HashMap::new();
        let mut det_cols: Vec<Vec<usize>> = Vec::new();
        let mut log_cols: Vec<Vec<usize>> = Vec::new();
        let mut priors: Vec<f64> = Vec::new();
        let mut provenance: Vec<Vec<u32>> = Vec::new();
        for (fi, s) in signatures.iter().enumerate() {
            let key = (s.detectors[sd].as_slice(), s.logicals[sd].as_slice());
            let col = *index.entry(key).or_insert_with(|| {
                det_cols.push(key.0.iter().map(|&i| i as usize).collect());
                log_cols.push(key.1.iter().map(|&i| i as usize).collect());
                priors.push(0.0);
                provenance.push(Vec::new());
                det_cols.len() - 1
            });
            priors[col] += s.fault.prior;
            provenance[col].push(fi as u32);
        }
        for q in &mut priors {
            *q = q.min(1.0 - 1e-12);
        }
        DetectorModel {
            error_type: t,
            d: SparseBinMatrix::from_column_supports(circuit.detector_rows(), det_cols),
            dl: SparseBinMatrix::from_column_supports(circuit.k, log_cols),
            priors,
            provenance,
        }
    };
    let x = merge(PauliType::X);
    let z = merge(PauliType::Z);
    CircuitModel {
        circuit: circuit.clone(),
        p,
        faults,
        signatures,
        x,
        z,
    }
}

/// Dense copy of a model's detector matrix stacked over its logical rows.
pub fn stacked_dense(model: &DetectorModel) -> BinMatrix {
    model.d.to_dense().vstack(&model.dl.to_dense())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::known_code;

    fn code(n: usize) -> BBCode {
        known_code(n).unwrap().spec.build().unwrap()
    }

    #[test]
    fn fault_count_and_prior_classes() {
        let c = code(72);
        let nc = NoisyCircuit::new(&c, 3, FinalReadout::NoiselessCycles(1)).unwrap();
        let faults = nc.fault_locations(0.003);
        assert_eq!(faults.len(), 98 * 72 * 3);
        let mut classes: Vec<f64> = faults.iter().map(|f| f.prior).collect();
        classes.sort_by(f64::total_cmp);
        classes.dedup();
        assert_eq!(classes, vec![0.003 / 15.0, 0.003 / 3.0, 0.003]);
    }

    #[test]
    fn zero_noise_is_silent() {
        let c = code(72);
        let nc = NoisyCircuit::new(&c, 2, FinalReadout::DataSyndrome).unwrap();
        for o in nc.sample_shots(0.0, 1, 0, 10) {
            assert!(o.raw.is_zero() && o.final_x.is_zero() && o.final_z.is_zero());
            assert!(o.detectors.iter().all(BinVector::is_zero));
        }
    }

    #[test]
    fn measurement_flip_hits_two_consecutive_detectors() {
        let c = code(72);
        let nc = NoisyCircuit::new(&c, 3, FinalReadout::NoiselessCycles(1)).unwrap();
        let faults = nc.fault_locations(0.001);
        let f = faults
            .iter()
            .find(|f| f.kind == FaultKind::MeasFlip && matches!(nc.ops[f.op as usize].op, Op::MeasX(q) if q.idx == 5))
            .unwrap();
        let o = nc.simulate_faults(&[*f]);
        assert_eq!(o.detectors(PauliType::Z).support(), vec![5, 36 + 5]);
        assert!(o.detectors(PauliType::X).is_zero());
    }

    #[test]
    fn idle_data_error_between_cycles() {
        let c = code(72);
        let nc = NoisyCircuit::new(&c, 3, FinalReadout::NoiselessCycles(1)).unwrap();
        // X error on L(0) during the last round of cycle 1.
        let faults = nc.fault_locations(0.001);
        let f = faults
            .iter()
            .find(|f| {
                f.round as usize == nc.circuit.cycle_starts[0] + 7
                    && f.kind == FaultKind::Idle(1)
                    && matches!(nc.ops[f.op as usize].op, Op::Idle(q) if q.reg == Register::L && q.idx == 0)
            })
            .unwrap();
        let o = nc.simulate_faults(&[*f]);
        // Three Z checks flip from cycle 2 onwards: differences only in cycle 2.
        let det = o.detectors(PauliType::X).support();
        assert_eq!(det.len(), 3);
        assert!(det.iter().all(|&d| d / 36 == 1));
        assert!(o.detectors(PauliType::Z).is_zero());
    }

    #[test]
    fn sampling_is_reproducible() {
        let c = code(72);
        let nc = NoisyCircuit::new(&c, 2, FinalReadout::NoiselessCycles(1)).unwrap();
        let a = nc.sample_shots(0.01, 42, 100, 70);
        let b = nc.sample_shots(0.01, 42, 100, 70);
        assert_eq!(a, b);
        let single = nc.sample_circuit_noise(0.01, 42, 130);
        assert_eq!(single, a[30]);
    }

    #[test]
    fn model_dump_roundtrip() {
        let c = code(72);
        let nc = NoisyCircuit::new(&c, 1, FinalReadout::NoiselessCycles(1)).unwrap();
        let m = build_detector_model(&nc, 0.001);
        let text = m.z.to_text();
        let back = DetectorModel::from_text(&text, PauliType::Z).unwrap();
        assert_eq!(back.d, m.z.d);
        assert_eq!(back.dl, m.z.dl);
        for (a, b) in back.priors.iter().zip(&m.z.priors) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300));
        }
        assert!(DetectorModel::from_text("2 1 1\n0: 0.1; 5; 0\n", PauliType::Z).is_err());
    }
}
