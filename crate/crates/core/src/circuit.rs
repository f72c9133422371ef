//! Syndrome-measurement circuits: generation, block-tableau verification,
//! schedule enumeration and automorphism (shift) circuits.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};

use rayon::prelude::*;
use serde::Serialize;

use crate::code::{BBCode, BivariatePoly, Group, Monomial, Qubit, Register, Term};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum OpKind {
    Cnot,
    InitX,
    InitZ,
    MeasX,
    MeasZ,
    Idle,
}

impl OpKind {
    pub fn name(self) -> &'static str {
        match self {
            OpKind::Cnot => "CNOT",
            OpKind::InitX => "INITX",
            OpKind::InitZ => "INITZ",
            OpKind::MeasX => "MEASX",
            OpKind::MeasZ => "MEASZ",
            OpKind::Idle => "IDLE",
        }
    }

    fn parse(s: &str) -> Option<OpKind> {
        Some(match s {
            "CNOT" => OpKind::Cnot,
            "INITX" => OpKind::InitX,
            "INITZ" => OpKind::InitZ,
            "MEASX" => OpKind::MeasX,
            "MEASZ" => OpKind::MeasZ,
            "IDLE" => OpKind::Idle,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Op {
    Cnot { control: Qubit, target: Qubit },
    InitX(Qubit),
    InitZ(Qubit),
    MeasX(Qubit),
    MeasZ(Qubit),
    Idle(Qubit),
}

impl Op {
    pub fn kind(&self) -> OpKind {
        match self {
            Op::Cnot { .. } => OpKind::Cnot,
            Op::InitX(_) => OpKind::InitX,
            Op::InitZ(_) => OpKind::InitZ,
            Op::MeasX(_) => OpKind::MeasX,
            Op::MeasZ(_) => OpKind::MeasZ,
            Op::Idle(_) => OpKind::Idle,
        }
    }

    pub fn qubits(&self) -> Vec<Qubit> {
        match *self {
            Op::Cnot { control, target } => vec![control, target],
            Op::InitX(q) | Op::InitZ(q) | Op::MeasX(q) | Op::MeasZ(q) | Op::Idle(q) => vec![q],
        }
    }

    fn sort_key(&self) -> (OpKind, Qubit, Option<Qubit>) {
        let qs = self.qubits();
        (self.kind(), qs[0], qs.get(1).copied())
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind().name())?;
        for q in self.qubits() {
            write!(f, " {} {}", q.reg.name(), q.idx)?;
        }
        Ok(())
    }
}

/// Which side of the cycle a CNOT layer belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Side {
    /// `CNOT q(X, beta) -> q(L/R, beta t)`.
    X,
    /// `CNOT q(L/R, beta t^T) -> q(Z, beta)`.
    Z,
}

/// Data register touched by a layer.
pub fn layer_register(term: Term) -> (Register, Register) {
    // (register used by the X-side layer, register used by the Z-side layer)
    match term {
        Term::A(_) => (Register::L, Register::R),
        Term::B(_) => (Register::R, Register::L),
    }
}

/// CNOT layers of one syndrome cycle. Index `r` holds round `r + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Schedule {
    pub x_layers: Vec<Option<Term>>,
    pub z_layers: Vec<Option<Term>>,
}

impl Schedule {
    /// The published depth-8 cycle (CNOT rounds 1 to 7).
    pub fn canonical() -> Self {
        use Term::{A, B};
        Schedule {
            x_layers: vec![None, Some(A(2)), Some(B(2)), Some(B(1)), Some(B(3)), Some(A(1)), Some(A(3))],
            z_layers: vec![Some(A(1)), Some(A(3)), Some(B(1)), Some(B(2)), Some(B(3)), Some(A(2)), None],
        }
    }

    pub fn cnot_rounds(&self) -> usize {
        self.x_layers.len()
    }

    /// No round uses the same data register on both sides, and each of the
    /// twelve layers appears exactly once.
    pub fn is_well_formed(&self) -> bool {
        if self.x_layers.len() != self.z_layers.len() {
            return false;
        }
        let all = |v: &[Option<Term>]| {
            let mut s: Vec<Term> = v.iter().flatten().copied().collect();
            s.sort();
            s == [Term::A(1), Term::A(2), Term::A(3), Term::B(1), Term::B(2), Term::B(3)]
        };
        if !all(&self.x_layers) || !all(&self.z_layers) {
            return false;
        }
        self.x_layers.iter().zip(&self.z_layers).all(|(x, z)| match (x, z) {
            (Some(x), Some(z)) => layer_register(*x).0 != layer_register(*z).1,
            _ => true,
        })
    }

    /// One-line summary such as `-/A1 A2/A3 ...`.
    pub fn describe(&self) -> String {
        let f = |t: &Option<Term>| t.map_or("-".to_string(), |t| t.to_string());
        self.x_layers
            .iter()
            .zip(&self.z_layers)
            .map(|(x, z)| format!("{}/{}", f(x), f(z)))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Clone, Debug)]
pub struct ScheduledCircuit {
    pub lm: usize,
    pub rounds: Vec<Vec<Op>>,
    /// Noisy syndrome cycles.
    pub n_cycles: usize,
    /// Rounds flagged here are executed without faults.
    pub noiseless: Vec<bool>,
    /// First round of each cycle (noisy and noiseless).
    pub cycle_starts: Vec<usize>,
}

/// Rounds of one cycle built from `schedule`: CNOT rounds followed by the
/// X-check readout round. The Z checks are read out in the first round whose
/// Z side is empty after all Z layers.
fn cycle_rounds(code: &BBCode, schedule: &Schedule) -> Vec<Vec<Op>> {
    let g = code.group;
    let lm = g.order();
    let nr = schedule.cnot_rounds();
    let last_z = schedule.z_layers.iter().rposition(|z| z.is_some()).unwrap_or(0);
    let first_x = schedule.x_layers.iter().position(|x| x.is_some()).unwrap_or(nr);
    let mut rounds = Vec::with_capacity(nr + 1);
    for r in 0..nr {
        let mut ops = Vec::new();
        let mut busy = [false; 4];
        if r + 1 == first_x {
            ops.extend((0..lm).map(|i| Op::InitX(Qubit::new(Register::X, i))));
        }
        if let Some(t) = schedule.x_layers[r] {
            let reg = layer_register(t).0;
            busy[reg as usize] = true;
            let tm = code.term(t);
            for beta in g.elements() {
                ops.push(Op::Cnot {
                    control: Qubit::new(Register::X, g.index(beta)),
                    target: Qubit::new(reg, g.index(g.mul(beta, tm))),
                });
            }
        }
        if let Some(t) = schedule.z_layers[r] {
            let reg = layer_register(t).1;
            busy[reg as usize] = true;
            let tm = code.term(t);
            for beta in g.elements() {
                ops.push(Op::Cnot {
                    control: Qubit::new(reg, g.index(g.div(beta, tm))),
                    target: Qubit::new(Register::Z, g.index(beta)),
                });
            }
        } else if r == last_z + 1 {
            ops.extend((0..lm).map(|i| Op::MeasZ(Qubit::new(Register::Z, i))));
        }
        for reg in [Register::L, Register::R] {
            if !busy[reg as usize] {
                ops.extend((0..lm).map(|i| Op::Idle(Qubit::new(reg, i))));
            }
        }
        rounds.push(ops);
    }
    let mut last = Vec::new();
    last.extend((0..lm).map(|i| Op::MeasX(Qubit::new(Register::X, i))));
    last.extend((0..lm).map(|i| Op::InitZ(Qubit::new(Register::Z, i))));
    for reg in [Register::L, Register::R] {
        last.extend((0..lm).map(|i| Op::Idle(Qubit::new(reg, i))));
    }
    rounds.push(last);
    for ops in &mut rounds {
        ops.sort_by_key(Op::sort_key);
    }
    rounds
}

/// Syndrome circuit with `n_cycles` cycles of the published schedule, preceded
/// by one round of Z-check initialisation.
pub fn build_sm_circuit(code: &BBCode, n_cycles: usize) -> Result<ScheduledCircuit> {
    build_sm_circuit_with(code, n_cycles, &Schedule::canonical())
}

pub fn build_sm_circuit_with(code: &BBCode, n_cycles: usize, schedule: &Schedule) -> Result<ScheduledCircuit> {
    if n_cycles == 0 {
        return Err(Error::InvalidArgument("number of cycles must be at least 1".into()));
    }
    if !schedule.is_well_formed() {
        return Err(Error::InvalidArgument(format!("malformed schedule {}", schedule.describe())));
    }
    // X checks need a free round to initialise, Z checks a free round to measure.
    if schedule.x_layers[0].is_some() || schedule.z_layers[schedule.cnot_rounds() - 1].is_some() {
        return Err(Error::InvalidArgument(format!(
            "schedule {} leaves no round for X-check preparation or Z-check readout",
            schedule.describe()
        )));
    }
    let lm = code.lm();
    let cycle = cycle_rounds(code, schedule);
    let mut rounds = vec![(0..lm).map(|i| Op::InitZ(Qubit::new(Register::Z, i))).collect::<Vec<_>>()];
    let mut cycle_starts = Vec::new();
    for _ in 0..n_cycles {
        cycle_starts.push(rounds.len());
        rounds.extend(cycle.iter().cloned());
    }
    let noiseless = vec![false; rounds.len()];
    Ok(ScheduledCircuit {
        lm,
        rounds,
        n_cycles,
        noiseless,
        cycle_starts,
    })
}

impl ScheduledCircuit {
    pub fn depth(&self) -> usize {
        self.rounds.len()
    }

    pub fn ops(&self) -> impl Iterator<Item = (usize, &Op)> {
        self.rounds
            .iter()
            .enumerate()
            .flat_map(|(r, ops)| ops.iter().map(move |op| (r, op)))
    }

    pub fn count(&self, kind: OpKind) -> usize {
        self.ops().filter(|(_, op)| op.kind() == kind).count()
    }

    pub fn cycle_len(&self) -> usize {
        if self.cycle_starts.len() >= 2 {
            self.cycle_starts[1] - self.cycle_starts[0]
        } else {
            self.rounds.len() - self.cycle_starts.first().copied().unwrap_or(0)
        }
    }

    /// Appends `extra` copies of the last cycle, flagged noiseless.
    pub fn with_noiseless_cycles(&self, extra: usize) -> ScheduledCircuit {
        let mut out = self.clone();
        let Some(&start) = self.cycle_starts.last() else {
            return out;
        };
        let len = self.cycle_len();
        let cycle: Vec<Vec<Op>> = self.rounds[start..start + len].to_vec();
        for _ in 0..extra {
            out.cycle_starts.push(out.rounds.len());
            out.rounds.extend(cycle.iter().cloned());
            out.noiseless.extend(std::iter::repeat(true).take(len));
        }
        out
    }

    /// Marks the leading rounds before the first cycle as noiseless.
    pub fn with_noiseless_prelude(&self) -> ScheduledCircuit {
        let mut out = self.clone();
        let first = self.cycle_starts.first().copied().unwrap_or(0);
        for flag in &mut out.noiseless[..first] {
            *flag = true;
        }
        out
    }

    /// First violation of one-op-per-qubit-per-round, if any.
    pub fn check_disjoint(&self) -> std::result::Result<(), String> {
        for (r, ops) in self.rounds.iter().enumerate() {
            let mut seen = BTreeSet::new();
            for op in ops {
                for q in op.qubits() {
                    if !seen.insert(q) {
                        return Err(format!("qubit {} {} used twice in round {r}", q.reg.name(), q.idx));
                    }
                }
            }
        }
        Ok(())
    }

    /// Every CNOT joins a check and a data qubit adjacent in the Tanner graph.
    pub fn check_tanner_edges(&self, code: &BBCode) -> std::result::Result<(), String> {
        let edges = code.tanner_graph().edge_set();
        for (r, op) in self.ops() {
            if let Op::Cnot { control, target } = *op {
                let (check, data) = if control.reg.is_data() { (target, control) } else { (control, target) };
                if !edges.contains(&(check, data)) {
                    return Err(format!("round {r}: {op} is not a Tanner edge"));
                }
            }
        }
        Ok(())
    }

    /// Text form: one `ROUND r; OP ...` line per operation.
    pub fn to_text(&self) -> String {
        let mut s = format!("# lm={} cycles={}\n", self.lm, self.n_cycles);
        for (r, ops) in self.rounds.iter().enumerate() {
            let mut ops = ops.clone();
            ops.sort_by_key(Op::sort_key);
            for op in ops {
                let _ = writeln!(s, "ROUND {r}; {op}");
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<ScheduledCircuit> {
        let mut rounds: Vec<Vec<Op>> = Vec::new();
        let mut lm = None;
        let mut n_cycles = 1;
        let mut max_idx = 0;
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lnum = ln + 1;
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                for tok in rest.split_whitespace() {
                    if let Some(v) = tok.strip_prefix("lm=") {
                        lm = Some(v.parse().map_err(|_| Error::parse(lnum, 1, "bad lm"))?);
                    } else if let Some(v) = tok.strip_prefix("cycles=") {
                        n_cycles = v.parse().map_err(|_| Error::parse(lnum, 1, "bad cycles"))?;
                    }
                }
                continue;
            }
            let (head, body) = line
                .split_once(';')
                .ok_or_else(|| Error::parse(lnum, 1, "expected 'ROUND r; OP ...'"))?;
            let r: usize = head
                .trim()
                .strip_prefix("ROUND")
                .map(str::trim)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::parse(lnum, 1, "expected 'ROUND <number>'"))?;
            if r > 1_000_000 {
                return Err(Error::parse(lnum, 1, "round index too large"));
            }
            let col = head.len() + 2;
            let toks: Vec<&str> = body.split_whitespace().collect();
            let kind = toks
                .first()
                .and_then(|k| OpKind::parse(k))
                .ok_or_else(|| Error::parse(lnum, col, "unknown operation"))?;
            let arity = if kind == OpKind::Cnot { 2 } else { 1 };
            if toks.len() != 1 + 2 * arity {
                return Err(Error::parse(lnum, col, format!("{} takes {arity} qubit(s)", kind.name())));
            }
            let mut qs = Vec::new();
            for pair in toks[1..].chunks(2) {
                let reg = Register::parse(pair[0]).ok_or_else(|| Error::parse(lnum, col, format!("bad register '{}'", pair[0])))?;
                let idx: usize = pair[1]
                    .parse()
                    .map_err(|_| Error::parse(lnum, col, format!("bad index '{}'", pair[1])))?;
                max_idx = max_idx.max(idx);
                qs.push(Qubit::new(reg, idx));
            }
            let op = match kind {
                OpKind::Cnot => Op::Cnot { control: qs[0], target: qs[1] },
                OpKind::InitX => Op::InitX(qs[0]),
                OpKind::InitZ => Op::InitZ(qs[0]),
                OpKind::MeasX => Op::MeasX(qs[0]),
                OpKind::MeasZ => Op::MeasZ(qs[0]),
                OpKind::Idle => Op::Idle(qs[0]),
            };
            if rounds.len() <= r {
                rounds.resize(r + 1, Vec::new());
            }
            rounds[r].push(op);
        }
        let lm = lm.unwrap_or(max_idx.saturating_add(1));
        if max_idx >= lm && !rounds.is_empty() {
            return Err(Error::parse(1, 1, format!("qubit index {max_idx} exceeds lm={lm}")));
        }
        let noiseless = vec![false; rounds.len()];
        let cycle_len = if n_cycles > 0 && rounds.len() > 1 { (rounds.len() - 1) / n_cycles.max(1) } else { 0 };
        let cycle_starts = if cycle_len == 0 { Vec::new() } else { (0..n_cycles).map(|c| 1 + c * cycle_len).collect() };
        Ok(ScheduledCircuit {
            lm,
            rounds,
            n_cycles,
            noiseless,
            cycle_starts,
        })
    }

    /// Recovers the CNOT layer schedule of the first cycle from the concrete
    /// operations. Fails if some round is not a uniform layer.
    pub fn extract_schedule(&self, code: &BBCode) -> std::result::Result<Schedule, String> {
        let start = self.cycle_starts.first().copied().unwrap_or(0);
        let len = self.cycle_len();
        let g = code.group;
        let mut x_layers = Vec::new();
        let mut z_layers = Vec::new();
        let cnot_rounds = len.saturating_sub(1);
        for r in start..start + cnot_rounds {
            let mut xt: BTreeMap<Term, usize> = BTreeMap::new();
            let mut zt: BTreeMap<Term, usize> = BTreeMap::new();
            for op in &self.rounds[r] {
                let Op::Cnot { control, target } = *op else { continue };
                let found = if control.reg == Register::X {
                    let shift = g.div(g.from_index(target.idx), g.from_index(control.idx));
                    let t = find_term(code, target.reg, shift, Side::X);
                    t.map(|t| (Side::X, t))
                } else if target.reg == Register::Z {
                    let shift = g.div(g.from_index(target.idx), g.from_index(control.idx));
                    find_term(code, control.reg, shift, Side::Z).map(|t| (Side::Z, t))
                } else {
                    None
                };
                match found {
                    Some((Side::X, t)) => *xt.entry(t).or_default() += 1,
                    Some((Side::Z, t)) => *zt.entry(t).or_default() += 1,
                    None => return Err(format!("round {r}: {op} does not follow a Tanner edge")),
                }
            }
            let single = |m: &BTreeMap<Term, usize>, side: &str| -> std::result::Result<Option<Term>, String> {
                match m.len() {
                    0 => Ok(None),
                    1 => {
                        let (&t, &c) = m.iter().next().unwrap();
                        if c != self.lm {
                            return Err(format!("round {r}: {side} layer {t} has {c} of {} gates", self.lm));
                        }
                        Ok(Some(t))
                    }
                    _ => Err(format!("round {r}: several {side} layers in one round")),
                }
            };
            x_layers.push(single(&xt, "X-side")?);
            z_layers.push(single(&zt, "Z-side")?);
        }
        Ok(Schedule { x_layers, z_layers })
    }
}

fn find_term(code: &BBCode, reg: Register, shift: Monomial, side: Side) -> Option<Term> {
    for i in 1..=3u8 {
        let (a, b) = (code.a_term(i as usize), code.b_term(i as usize));
        match (side, reg) {
            (Side::X, Register::L) if shift == a => return Some(Term::A(i)),
            (Side::X, Register::R) if shift == b => return Some(Term::B(i)),
            // Z-side: control at beta t^T, target at beta, so target/control = t.
            (Side::Z, Register::R) if shift == a => return Some(Term::A(i)),
            (Side::Z, Register::L) if shift == b => return Some(Term::B(i)),
            _ => {}
        }
    }
    None
}

/// Elements of a commutative algebra in which block tableaux are replayed.
pub trait BlockAlgebra: Clone + PartialEq + fmt::Display {
    fn zero(&self) -> Self;
    fn one(&self) -> Self;
    fn add(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn is_zero(&self) -> bool;
}

/// Laurent polynomials over GF(2) in free commuting symbols
/// `A1 A2 A3 B1 B2 B3 U W`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct SymPoly(BTreeSet<[i8; SYMBOLS]>);

const SYMBOLS: usize = 8;
const SYMBOL_NAMES: [&str; SYMBOLS] = ["A1", "A2", "A3", "B1", "B2", "B3", "U", "W"];

impl SymPoly {
    pub fn symbol(i: usize, power: i8) -> Self {
        let mut e = [0i8; SYMBOLS];
        e[i] = power;
        SymPoly(BTreeSet::from([e]))
    }

    pub fn term(t: Term, power: i8) -> Self {
        match t {
            Term::A(i) => SymPoly::symbol(i as usize - 1, power),
            Term::B(i) => SymPoly::symbol(i as usize + 2, power),
        }
    }

    pub fn sum(polys: &[SymPoly]) -> SymPoly {
        polys.iter().fold(SymPoly::default(), |acc, p| acc.add(p))
    }
}

impl fmt::Display for SymPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "0");
        }
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            let mut any = false;
            for (i, &p) in e.iter().enumerate() {
                if p != 0 {
                    any = true;
                    write!(f, "{}", SYMBOL_NAMES[i])?;
                    if p != 1 {
                        write!(f, "^{p}")?;
                    }
                }
            }
            if !any {
                write!(f, "1")?;
            }
        }
        Ok(())
    }
}

impl BlockAlgebra for SymPoly {
    fn zero(&self) -> Self {
        SymPoly::default()
    }
    fn one(&self) -> Self {
        SymPoly(BTreeSet::from([[0; SYMBOLS]]))
    }
    fn add(&self, other: &Self) -> Self {
        SymPoly(self.0.symmetric_difference(&other.0).copied().collect())
    }
    fn mul(&self, other: &Self) -> Self {
        let mut out = BTreeSet::new();
        for a in &self.0 {
            for b in &other.0 {
                let mut e = [0i8; SYMBOLS];
                for i in 0..SYMBOLS {
                    e[i] = a[i] + b[i];
                }
                if !out.insert(e) {
                    out.remove(&e);
                }
            }
        }
        SymPoly(out)
    }
    fn is_zero(&self) -> bool {
        self.0.is_empty()
    }
}

impl BlockAlgebra for BivariatePoly {
    fn zero(&self) -> Self {
        BivariatePoly::zero(self.group())
    }
    fn one(&self) -> Self {
        BivariatePoly::monomial(self.group(), Monomial::ONE)
    }
    fn add(&self, other: &Self) -> Self {
        BivariatePoly::add(self, other).canonical()
    }
    fn mul(&self, other: &Self) -> Self {
        BivariatePoly::mul(self, other)
    }
    fn is_zero(&self) -> bool {
        BivariatePoly::is_zero(self)
    }
}

/// One row of a block tableau; columns are the registers X, L, R, Z.
type Row<P> = [P; 4];

const COL_X: usize = 0;
const COL_L: usize = 1;
const COL_R: usize = 2;
const COL_Z: usize = 3;

fn col_of(reg: Register) -> usize {
    match reg {
        Register::X => COL_X,
        Register::L => COL_L,
        Register::R => COL_R,
        Register::Z => COL_Z,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub passed: bool,
    pub schedule: String,
    pub failures: Vec<String>,
}

/// Replays the CNOT layers of `schedule` on the X-type and Z-type block
/// tableaux over the algebra generated by `elem` and compares the result
/// with the expected syndrome-extraction action.
///
/// `elem(t, inverse)` maps a term (or its transpose) into the algebra;
/// `markers` supplies the symbols standing for an arbitrary data operator
/// `(u, w)` when the algebra has them.
fn replay<P: BlockAlgebra>(
    schedule: &Schedule,
    elem: &dyn Fn(Term, bool) -> P,
    markers: Option<(P, P)>,
) -> Vec<String> {
    let zero = elem(Term::A(1), false).zero();
    let one = zero.one();
    let sum = |inv: bool, a: bool| {
        (1..=3u8).fold(zero.clone(), |acc, i| acc.add(&elem(if a { Term::A(i) } else { Term::B(i) }, inv)))
    };
    let (a, b, at, bt) = (sum(false, true), sum(false, false), sum(true, true), sum(true, false));
    let z = || zero.clone();

    // X-type rows: X check, X stabilizer on data, generic X data operator.
    let mut xrows: Vec<Row<P>> = vec![[one.clone(), z(), z(), z()], [z(), a.clone(), b.clone(), z()]];
    // Z-type rows: Z check, Z stabilizer on data, generic Z data operator.
    let mut zrows: Vec<Row<P>> = vec![[z(), z(), z(), one.clone()], [z(), bt.clone(), at.clone(), z()]];
    if let Some((u, w)) = &markers {
        xrows.push([z(), u.clone(), w.clone(), z()]);
        zrows.push([z(), u.clone(), w.clone(), z()]);
    }
    // Round of last modification per (tableau, row, column).
    let mut touched = [[[0usize; 4]; 3]; 2];
    for r in 0..schedule.cnot_rounds() {
        if let Some(t) = schedule.x_layers[r] {
            let reg = col_of(layer_register(t).0);
            let (fwd, back) = (elem(t, false), elem(t, true));
            for (i, row) in xrows.iter_mut().enumerate() {
                let add = row[COL_X].mul(&fwd);
                if !add.is_zero() {
                    row[reg] = row[reg].add(&add);
                    touched[0][i][reg] = r + 1;
                }
            }
            for (i, row) in zrows.iter_mut().enumerate() {
                let add = row[reg].mul(&back);
                if !add.is_zero() {
                    row[COL_X] = row[COL_X].add(&add);
                    touched[1][i][COL_X] = r + 1;
                }
            }
        }
        if let Some(t) = schedule.z_layers[r] {
            let reg = col_of(layer_register(t).1);
            let (fwd, back) = (elem(t, false), elem(t, true));
            for (i, row) in xrows.iter_mut().enumerate() {
                let add = row[reg].mul(&fwd);
                if !add.is_zero() {
                    row[COL_Z] = row[COL_Z].add(&add);
                    touched[0][i][COL_Z] = r + 1;
                }
            }
            for (i, row) in zrows.iter_mut().enumerate() {
                let add = row[COL_Z].mul(&back);
                if !add.is_zero() {
                    row[reg] = row[reg].add(&add);
                    touched[1][i][reg] = r + 1;
                }
            }
        }
    }

    let mut expect_x: Vec<Row<P>> = vec![[one.clone(), a.clone(), b.clone(), z()], [z(), a.clone(), b.clone(), z()]];
    let mut expect_z: Vec<Row<P>> = vec![[z(), bt.clone(), at.clone(), one.clone()], [z(), bt.clone(), at.clone(), z()]];
    if let Some((u, w)) = &markers {
        expect_x.push([z(), u.clone(), w.clone(), u.mul(&b).add(&w.mul(&a))]);
        expect_z.push([u.mul(&at).add(&w.mul(&bt)), u.clone(), w.clone(), z()]);
    }
    let names = ["check", "stabilizer", "logical"];
    let cols = ["X", "L", "R", "Z"];
    let mut failures = Vec::new();
    for (tab, (name, got, want)) in [("X", &xrows, &expect_x), ("Z", &zrows, &expect_z)].into_iter().enumerate() {
        for (i, (g, w)) in got.iter().zip(want.iter()).enumerate() {
            for c in 0..4 {
                if g[c] != w[c] {
                    failures.push(format!(
                        "{name}-tableau {} row, column {}: residual {} (last changed in round {})",
                        names[i],
                        cols[c],
                        g[c].add(&w[c]),
                        touched[tab][i][c]
                    ));
                }
            }
        }
    }
    failures
}

/// Symbolic replay in the free algebra (independent of any particular code).
pub fn verify_schedule_symbolic(schedule: &Schedule) -> VerificationReport {
    let elem = |t: Term, inv: bool| SymPoly::term(t, if inv { -1 } else { 1 });
    let markers = Some((SymPoly::symbol(6, 1), SymPoly::symbol(7, 1)));
    let failures = replay(schedule, &elem, markers);
    VerificationReport {
        passed: failures.is_empty(),
        schedule: schedule.describe(),
        failures,
    }
}

/// Replay in the group algebra of a specific code.
pub fn verify_schedule_for_code(schedule: &Schedule, code: &BBCode) -> VerificationReport {
    let g: Group = code.group;
    let elem = |t: Term, inv: bool| {
        let m = code.term(t);
        BivariatePoly::monomial(g, if inv { g.inv(m) } else { m })
    };
    let failures = replay(schedule, &elem, None);
    VerificationReport {
        passed: failures.is_empty(),
        schedule: schedule.describe(),
        failures,
    }
}

/// Verifies the unitary part of the first cycle of `circuit` symbolically.
pub fn verify_sm_circuit(circuit: &ScheduledCircuit, code: &BBCode) -> VerificationReport {
    match circuit.extract_schedule(code) {
        Ok(s) => {
            let mut report = verify_schedule_symbolic(&s);
            if report.passed {
                let concrete = verify_schedule_for_code(&s, code);
                report.failures.extend(concrete.failures);
                report.passed = report.failures.is_empty();
            }
            report
        }
        Err(msg) => VerificationReport {
            passed: false,
            schedule: String::new(),
            failures: vec![msg],
        },
    }
}

/// Enumerates well-formed schedules with `rounds` CNOT rounds in which the
/// X-side layers occupy rounds `x_first..=x_first+5` and the Z-side layers
/// rounds `z_first..=z_first+5` (zero-based), keeping those accepted by
/// `accept`.
pub fn enumerate_schedules(
    rounds: usize,
    x_first: usize,
    z_first: usize,
    accept: &(dyn Fn(&Schedule) -> bool + Sync),
) -> Vec<Schedule> {
    use Term::{A, B};
    let layers = [A(1), A(2), A(3), B(1), B(2), B(3)];
    let perms = permutations(&layers);
    let mut out: Vec<Schedule> = perms
        .par_iter()
        .flat_map_iter(|xp| {
            let perms = &perms;
            perms.iter().filter_map(move |zp| {
                let mut x_layers = vec![None; rounds];
                let mut z_layers = vec![None; rounds];
                for i in 0..6 {
                    x_layers[x_first + i] = Some(xp[i]);
                    z_layers[z_first + i] = Some(zp[i]);
                }
                let s = Schedule { x_layers, z_layers };
                (s.is_well_formed() && accept(&s)).then_some(s)
            })
        })
        .collect();
    out.sort_by_key(|s| s.describe());
    out
}

/// Depth-7 alternatives to the published cycle: X-side layers in rounds
/// 2 to 7 and Z-side layers in rounds 1 to 6, verified symbolically.
pub fn enumerate_depth7_schedules() -> Vec<Schedule> {
    enumerate_schedules(7, 1, 0, &|s| verify_schedule_symbolic(s).passed)
}

/// Same search with the replay done in the group algebra of `code`.
pub fn enumerate_depth7_schedules_for_code(code: &BBCode) -> Vec<Schedule> {
    enumerate_schedules(7, 1, 0, &|s| verify_schedule_for_code(s, code).passed)
}

/// Depth-6 packings (both sides in rounds 1 to 6) accepted for `code`.
pub fn enumerate_depth6_schedules_for_code(code: &BBCode) -> Vec<Schedule> {
    enumerate_schedules(6, 0, 0, &|s| verify_schedule_for_code(s, code).passed)
}

/// Number of well-formed candidates examined by the depth-7 search.
pub fn depth7_candidate_count() -> usize {
    enumerate_schedules(7, 1, 0, &|_| true).len()
}

fn permutations(items: &[Term]) -> Vec<Vec<Term>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum AutomorphismType {
    A,
    B,
}

/// Shift circuit moving every data qubit `q(L, alpha)` to
/// `q(L, s alpha)` and `q(R, alpha)` to `q(R, s alpha)` with
/// `s = A_j A_k^T` (or `B_j B_k^T`). Returns the circuit and `s`.
pub fn build_automorphism_circuit(
    code: &BBCode,
    kind: AutomorphismType,
    j: usize,
    k: usize,
) -> Result<(ScheduledCircuit, Monomial)> {
    if j == k {
        return Err(Error::InvalidArgument("j = k gives the identity automorphism".into()));
    }
    if !(1..=3).contains(&j) || !(1..=3).contains(&k) {
        return Err(Error::InvalidArgument("term indices must be 1, 2 or 3".into()));
    }
    let g = code.group;
    let lm = g.order();
    let (tj, tk) = match kind {
        AutomorphismType::A => (code.a_term(j), code.a_term(k)),
        AutomorphismType::B => (code.b_term(j), code.b_term(k)),
    };
    let s = g.div(tj, tk);
    // Block moved through the X checks and block moved through the Z checks.
    let (via_x, via_z) = match kind {
        AutomorphismType::A => (Register::L, Register::R),
        AutomorphismType::B => (Register::R, Register::L),
    };
    let q = |reg, m: Monomial| Qubit::new(reg, g.index(m));
    let mut rounds: Vec<Vec<Op>> = Vec::new();
    let resets = || -> Vec<Op> {
        (0..lm)
            .flat_map(|i| [Op::InitZ(Qubit::new(Register::X, i)), Op::InitZ(Qubit::new(Register::Z, i))])
            .collect()
    };
    rounds.push(resets());
    let mut layer = |f: &dyn Fn(Monomial) -> [Op; 2]| {
        let ops: Vec<Op> = g.elements().flat_map(|a| f(a)).collect();
        rounds.push(ops);
    };
    // into the ancillas: X(alpha) <- via_x(t_k alpha), Z(t_j alpha) <- via_z(alpha)
    layer(&|a| {
        [
            Op::Cnot { control: q(via_x, g.mul(tk, a)), target: q(Register::X, a) },
            Op::Cnot { control: q(via_z, a), target: q(Register::Z, g.mul(tj, a)) },
        ]
    });
    layer(&|a| {
        [
            Op::Cnot { control: q(Register::X, a), target: q(via_x, g.mul(tk, a)) },
            Op::Cnot { control: q(Register::Z, g.mul(tj, a)), target: q(via_z, a) },
        ]
    });
    // out of the ancillas: X(alpha) -> via_x(t_j alpha), Z(t_j alpha) -> via_z(s alpha)
    layer(&|a| {
        [
            Op::Cnot { control: q(Register::X, a), target: q(via_x, g.mul(tj, a)) },
            Op::Cnot { control: q(Register::Z, g.mul(tj, a)), target: q(via_z, g.mul(s, a)) },
        ]
    });
    layer(&|a| {
        [
            Op::Cnot { control: q(via_x, g.mul(tj, a)), target: q(Register::X, a) },
            Op::Cnot { control: q(via_z, g.mul(s, a)), target: q(Register::Z, g.mul(tj, a)) },
        ]
    });
    for ops in &mut rounds {
        ops.sort_by_key(Op::sort_key);
    }
    let noiseless = vec![false; rounds.len()];
    Ok((
        ScheduledCircuit {
            lm,
            rounds,
            n_cycles: 0,
            noiseless,
            cycle_starts: Vec::new(),
        },
        s,
    ))
}

/// Runs a CNOT/reset circuit on computational basis states and returns the
/// induced permutation of data qubits (`perm[i] = j` sends data index `i`
/// to `j`, indices `0..2lm` over L then R), or an error if some data
/// qubit is not moved cleanly.
pub fn simulate_data_permutation(circuit: &ScheduledCircuit) -> std::result::Result<Vec<usize>, String> {
    let lm = circuit.lm;
    let id = |q: Qubit| match q.reg {
        Register::L => q.idx,
        Register::R => lm + q.idx,
        Register::X => 2 * lm + q.idx,
        Register::Z => 3 * lm + q.idx,
    };
    let mut perm = vec![usize::MAX; 2 * lm];
    // Bit-sliced: lane `i` carries a 1 on data qubit `i` at the start.
    let lanes = (2 * lm + 63) / 64;
    let mut state = vec![vec![0u64; lanes]; 4 * lm];
    for i in 0..2 * lm {
        state[i][i / 64] |= 1 << (i % 64);
    }
    for ops in &circuit.rounds {
        for op in ops {
            match *op {
                Op::Cnot { control, target } => {
                    let (c, t) = (id(control), id(target));
                    for w in 0..lanes {
                        let v = state[c][w];
                        state[t][w] ^= v;
                    }
                }
                Op::InitZ(q) | Op::InitX(q) => {
                    if state[id(q)].iter().any(|&w| w != 0) && circuit.rounds.len() > 0 {
                        return Err(format!("reset of {} {} discards data", q.reg.name(), q.idx));
                    }
                }
                Op::MeasX(_) | Op::MeasZ(_) | Op::Idle(_) => {}
            }
        }
    }
    for (qi, bits) in state.iter().enumerate() {
        for (w, &word) in bits.iter().enumerate() {
            let mut word = word;
            while word != 0 {
                let lane = w * 64 + word.trailing_zeros() as usize;
                word &= word - 1;
                if qi >= 2 * lm {
                    return Err(format!("data qubit {lane} left on an ancilla"));
                }
                if perm[lane] != usize::MAX {
                    return Err(format!("data qubit {lane} spread over several qubits"));
                }
                perm[lane] = qi;
            }
        }
    }
    if perm.iter().any(|&p| p == usize::MAX) {
        return Err("some data qubit vanished".into());
    }
    Ok(perm)
}

/// Data permutation of the translation by `s` on both blocks.
pub fn translation_permutation(code: &BBCode, s: Monomial) -> Vec<usize> {
    let g = code.group;
    let lm = g.order();
    (0..2 * lm)
        .map(|i| {
            let (blk, a) = (i / lm, g.from_index(i % lm));
            blk * lm + g.index(g.mul(s, a))
        })
        .collect()
}

/// True if permuting data qubits by `perm` maps the rows of `H^X` onto rows
/// of `H^X` and the rows of `H^Z` onto rows of `H^Z`.
pub fn verify_automorphism(code: &BBCode, perm: &[usize]) -> bool {
    if perm.len() != code.n() {
        return false;
    }
    let mut seen = vec![false; perm.len()];
    for &p in perm {
        if p >= perm.len() || std::mem::replace(&mut seen[p], true) {
            return false;
        }
    }
    [&code.hx, &code.hz].iter().all(|h| {
        let rows: HashMap<Vec<usize>, usize> = (0..h.rows()).map(|r| (h.row_support(r), r)).collect();
        (0..h.rows()).all(|r| {
            let mut mapped: Vec<usize> = h.row_support(r).iter().map(|&c| perm[c]).collect();
            mapped.sort_unstable();
            rows.contains_key(&mapped)
        })
    })
}

/// Translation automorphism check for the shift `s`: the permuted checks
/// must coincide with checks relabelled by `alpha -> alpha s`.
pub fn verify_translation(code: &BBCode, s: Monomial) -> bool {
    let g = code.group;
    let perm = translation_permutation(code, s);
    [&code.hx, &code.hz].iter().all(|h| {
        (0..h.rows()).all(|r| {
            let target = g.index(g.mul(g.from_index(r), s));
            let mut mapped: Vec<usize> = h.row_support(r).iter().map(|&c| perm[c]).collect();
            mapped.sort_unstable();
            mapped == h.row_support(target)
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::known_code;

    fn code(n: usize) -> BBCode {
        known_code(n).unwrap().spec.build().unwrap()
    }

    #[test]
    fn canonical_circuit_counts() {
        let c = code(144);
        let circ = build_sm_circuit(&c, 1).unwrap();
        assert_eq!(circ.count(OpKind::Cnot), 6 * 144);
        assert_eq!(circ.depth(), 9);
        assert_eq!(circ.count(OpKind::InitX) + circ.count(OpKind::InitZ), 144 + 72);
        assert_eq!(circ.count(OpKind::MeasX) + circ.count(OpKind::MeasZ), 144);
        assert_eq!(circ.count(OpKind::Idle), 2 * 144);
        circ.check_disjoint().unwrap();
        circ.check_tanner_edges(&c).unwrap();
        let three = build_sm_circuit(&c, 3).unwrap();
        assert_eq!(three.depth(), 8 * 3 + 1);
        assert!(build_sm_circuit(&c, 0).is_err());
    }

    #[test]
    fn first_round_matches_published_layout() {
        let c = code(72);
        let circ = build_sm_circuit(&c, 1).unwrap();
        let g = c.group;
        let r1 = &circ.rounds[1];
        assert_eq!(r1.iter().filter(|o| o.kind() == OpKind::InitX).count(), 36);
        assert!(r1.iter().filter(|o| o.kind() == OpKind::Idle).all(|o| o.qubits()[0].reg == Register::L));
        let a1t = g.inv(c.a_term(1));
        for op in r1 {
            if let Op::Cnot { control, target } = *op {
                assert_eq!(control.reg, Register::R);
                assert_eq!(g.from_index(control.idx), g.mul(g.from_index(target.idx), a1t));
            }
        }
    }

    #[test]
    fn canonical_schedule_verifies() {
        let report = verify_schedule_symbolic(&Schedule::canonical());
        assert!(report.passed, "{:?}", report.failures);
        let c = code(144);
        let circ = build_sm_circuit(&c, 2).unwrap();
        assert_eq!(circ.extract_schedule(&c).unwrap(), Schedule::canonical());
        assert!(verify_sm_circuit(&circ, &c).passed);
    }

    #[test]
    fn swapped_rounds_fail() {
        let mut s = Schedule::canonical();
        s.x_layers.swap(1, 5);
        assert!(s.is_well_formed());
        let report = verify_schedule_symbolic(&s);
        assert!(!report.passed);
        assert!(report.failures.iter().any(|f| f.contains("round")));
    }

    #[test]
    fn empty_circuit_fails() {
        let s = Schedule { x_layers: vec![None; 7], z_layers: vec![None; 7] };
        assert!(!verify_schedule_symbolic(&s).passed);
        let c = code(72);
        let mut circ = build_sm_circuit(&c, 1).unwrap();
        for ops in &mut circ.rounds {
            ops.retain(|o| o.kind() != OpKind::Cnot);
        }
        assert!(!verify_sm_circuit(&circ, &c).passed);
    }

    #[test]
    fn text_roundtrip() {
        let c = code(72);
        let circ = build_sm_circuit(&c, 2).unwrap();
        let text = circ.to_text();
        let back = ScheduledCircuit::from_text(&text).unwrap();
        assert_eq!(back.lm, 36);
        assert_eq!(back.rounds.len(), circ.rounds.len());
        assert_eq!(back.to_text(), text);
        assert_eq!(back.extract_schedule(&c).unwrap(), Schedule::canonical());
        assert!(ScheduledCircuit::from_text("ROUND 1; CNOT X 0").is_err());
        assert!(ScheduledCircuit::from_text("ROUND x; IDLE L 0").is_err());
        assert!(ScheduledCircuit::from_text("ROUND 1; FOO L 0").is_err());
    }

    #[test]
    fn automorphism_circuits_shift_both_blocks() {
        let c = code(144);
        let (circ, s) = build_automorphism_circuit(&c, AutomorphismType::A, 2, 3).unwrap();
        assert_eq!(s, c.group.mono(0, -1));
        assert_eq!(circ.count(OpKind::Cnot) / (2 * c.lm()), 4);
        circ.check_disjoint().unwrap();
        circ.check_tanner_edges(&c).unwrap();
        let perm = simulate_data_permutation(&circ).unwrap();
        assert_eq!(perm, translation_permutation(&c, s));
        assert!(verify_automorphism(&c, &perm));
        assert!(verify_translation(&c, s));
        assert!(build_automorphism_circuit(&c, AutomorphismType::A, 2, 2).is_err());

        let c90 = code(90);
        let (circ, s) = build_automorphism_circuit(&c90, AutomorphismType::B, 1, 2).unwrap();
        let g = c90.group;
        assert_eq!(s, g.div(c90.b_term(1), c90.b_term(2)));
        circ.check_tanner_edges(&c90).unwrap();
        assert_eq!(simulate_data_permutation(&circ).unwrap(), translation_permutation(&c90, s));
    }

    #[test]
    fn automorphisms_compose() {
        let c = code(72);
        let g = c.group;
        let (c1, s1) = build_automorphism_circuit(&c, AutomorphismType::A, 1, 2).unwrap();
        let (c2, s2) = build_automorphism_circuit(&c, AutomorphismType::B, 3, 1).unwrap();
        let p1 = simulate_data_permutation(&c1).unwrap();
        let p2 = simulate_data_permutation(&c2).unwrap();
        let composed: Vec<usize> = (0..c.n()).map(|i| p2[p1[i]]).collect();
        assert_eq!(composed, translation_permutation(&c, g.mul(s1, s2)));
    }

    #[test]
    fn transposition_is_not_an_automorphism() {
        let c = code(72);
        let mut perm: Vec<usize> = (0..72).collect();
        assert!(verify_automorphism(&c, &perm));
        perm.swap(0, 5);
        assert!(!verify_automorphism(&c, &perm));
        assert!(verify_translation(&c, Monomial::ONE));
    }
}
