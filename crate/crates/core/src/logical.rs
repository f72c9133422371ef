//! Logical operators of BB codes, the ZX-duality swap plan and ancilla
//! systems for logical measurement.
//!
//! Operators are written `X(P, Q)` / `Z(P, Q)` with `P` the support on the
//! left data block and `Q` on the right one. The basis is generated by
//! polynomials `f, g, h` with `Bf = 0` and `gB + hA = 0`:
//!
//! ```text
//! X_a  = X(a f, 0)     Z_a  = Z(a h^T, a g^T)
//! X'_a = X(a g, a h)   Z'_a = Z(0, a f^T)
//! ```

use std::collections::{HashMap, HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::code::{BBCode, BivariatePoly, Group, Monomial, PauliType, Qubit, Register, Term};
use crate::error::{Error, Result};
use crate::gf2::{BinMatrix, BinVector};

/// True iff `X(p, q)` anticommutes with `Z(pb, qb)`, i.e. the identity
/// monomial appears in `p pb^T + q qb^T`.
pub fn pauli_anticommute(p: &BivariatePoly, q: &BivariatePoly, pb: &BivariatePoly, qb: &BivariatePoly) -> bool {
    p.mul(&pb.transpose()).add(&q.mul(&qb.transpose())).contains(Monomial::ONE)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogicalPauli {
    pub kind: PauliType,
    pub left: BivariatePoly,
    pub right: BivariatePoly,
}

impl LogicalPauli {
    pub fn x(left: BivariatePoly, right: BivariatePoly) -> Self {
        LogicalPauli {
            kind: PauliType::X,
            left,
            right,
        }
    }

    pub fn z(left: BivariatePoly, right: BivariatePoly) -> Self {
        LogicalPauli {
            kind: PauliType::Z,
            left,
            right,
        }
    }

    pub fn weight(&self) -> usize {
        self.left.weight() + self.right.weight()
    }

    /// Support over the `n` data qubits, left block first.
    pub fn support(&self) -> BinVector {
        self.left.to_vector().concat(&self.right.to_vector())
    }

    /// Commutes with every check of the opposite type: `PB + QA = 0` for
    /// X-type, `A P^T + B Q^T = 0` for Z-type.
    pub fn commutes_with_checks(&self, code: &BBCode) -> bool {
        match self.kind {
            PauliType::X => self.left.mul(&code.b).add(&self.right.mul(&code.a)).is_zero(),
            PauliType::Z => code
                .a
                .mul(&self.left.transpose())
                .add(&code.b.mul(&self.right.transpose()))
                .is_zero(),
        }
    }

    pub fn anticommutes(&self, other: &LogicalPauli) -> bool {
        match (self.kind, other.kind) {
            (PauliType::X, PauliType::Z) => pauli_anticommute(&self.left, &self.right, &other.left, &other.right),
            (PauliType::Z, PauliType::X) => pauli_anticommute(&other.left, &other.right, &self.left, &self.right),
            _ => false,
        }
    }
}

/// Generating polynomials of a logical basis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasisTriple {
    pub f: BivariatePoly,
    pub g: BivariatePoly,
    pub h: BivariatePoly,
}

impl BasisTriple {
    pub fn parse(group: Group, f: &str, g: &str, h: &str) -> Result<Self> {
        Ok(BasisTriple {
            f: BivariatePoly::parse(group, f)?,
            g: BivariatePoly::parse(group, g)?,
            h: BivariatePoly::parse(group, h)?,
        })
    }

    /// `max(|f|, |g| + |h|)`.
    pub fn weight(&self) -> usize {
        self.f.weight().max(self.g.weight() + self.h.weight())
    }

    pub fn x_bar(&self, a: Monomial) -> LogicalPauli {
        let zero = BivariatePoly::zero(self.f.group());
        LogicalPauli::x(self.f.shift(a), zero)
    }

    pub fn z_bar(&self, a: Monomial) -> LogicalPauli {
        LogicalPauli::z(self.h.transpose().shift(a), self.g.transpose().shift(a))
    }

    pub fn x_prime(&self, a: Monomial) -> LogicalPauli {
        LogicalPauli::x(self.g.shift(a), self.h.shift(a))
    }

    pub fn z_prime(&self, a: Monomial) -> LogicalPauli {
        let zero = BivariatePoly::zero(self.f.group());
        LogicalPauli::z(zero, self.f.transpose().shift(a))
    }

    /// `Bf = 0` and `gB + hA = 0`.
    pub fn solves(&self, code: &BBCode) -> bool {
        code.b.mul(&self.f).is_zero() && self.g.mul(&code.b).add(&self.h.mul(&code.a)).is_zero()
    }

    /// Number of logical qubits in each block: the rank of multiplication
    /// by `fh`, which is the anticommutation matrix of `X_a` against `Z_b`.
    pub fn block_rank(&self) -> usize {
        self.f.mul(&self.h).to_matrix().rank()
    }

    /// Valid when it solves the kernel equations and spans all `k` qubits.
    pub fn is_valid(&self, code: &BBCode) -> bool {
        self.solves(code) && 2 * self.block_rank() == code.k
    }

    fn sort_key(&self) -> (usize, Vec<Monomial>, Vec<Monomial>, Vec<Monomial>) {
        let sorted = |p: &BivariatePoly| p.canonical().terms().to_vec();
        (self.weight(), sorted(&self.f), sorted(&self.g), sorted(&self.h))
    }
}

/// Settings for [`find_basis_polynomials`].
#[derive(Clone, Debug)]
pub struct BasisSearch {
    /// Kernels up to this dimension are enumerated exhaustively; larger ones
    /// are sampled with random information sets.
    pub max_enumeration_dim: usize,
    pub trials: usize,
    pub seed: u64,
    /// Words up to this much heavier than the lightest useful one are kept.
    pub slack: usize,
    pub max_results: usize,
}

impl Default for BasisSearch {
    fn default() -> Self {
        BasisSearch {
            max_enumeration_dim: 20,
            trials: 300,
            seed: 0,
            slack: 2,
            max_results: 16,
        }
    }
}

/// Matrix of `v -> sum_i P_i v` as a map on stacked vectors, one block per
/// polynomial.
fn product_map(group: Group, polys: &[&BivariatePoly]) -> BinMatrix {
    let lm = group.order();
    let mut m = BinMatrix::zeros(lm, lm * polys.len());
    for (blk, p) in polys.iter().enumerate() {
        for u in group.elements() {
            for t in p.shift(u).terms() {
                m.flip(group.index(*t), blk * lm + group.index(u));
            }
        }
    }
    m
}

fn kernel(m: &BinMatrix) -> BinMatrix {
    let basis = m.nullspace_basis();
    BinMatrix::from_rows(m.cols(), &basis)
}

/// Every nonzero word of the row space with weight at most `max_weight`.
fn enumerate_words(basis: &BinMatrix, max_weight: usize) -> Vec<BinVector> {
    let k = basis.rows();
    let mut cur = BinVector::zeros(basis.cols());
    let mut out = Vec::new();
    // Gray code walk
    for i in 1u64..(1u64 << k) {
        let bit = i.trailing_zeros() as usize;
        cur.xor_assign(&basis.row(bit));
        if cur.weight() <= max_weight {
            out.push(cur.clone());
        }
    }
    out
}

/// Low-weight words of the row space: rows of random systematic generator
/// matrices and sums of two such rows.
fn sample_words(basis: &BinMatrix, trials: usize, max_weight: usize, rng: &mut ChaCha8Rng) -> Vec<BinVector> {
    let n = basis.cols();
    let mut found: HashSet<BinVector> = HashSet::new();
    let mut perm: Vec<usize> = (0..n).collect();
    for _ in 0..trials {
        perm.shuffle(rng);
        let mut permuted = BinMatrix::zeros(basis.rows(), n);
        for r in 0..basis.rows() {
            for c in basis.row_support(r) {
                permuted.set(r, perm[c], true);
            }
        }
        let ech = permuted.echelon();
        let rows: Vec<BinVector> = (0..ech.rank())
            .map(|i| {
                let row = ech.matrix().row(i);
                BinVector::from_support(n, &(0..n).filter(|&c| row.get(perm[c])).collect::<Vec<_>>())
            })
            .collect();
        for i in 0..rows.len() {
            if rows[i].weight() <= max_weight {
                found.insert(rows[i].clone());
            }
            for j in i + 1..rows.len() {
                let s = rows[i].xor(&rows[j]);
                if s.weight() <= max_weight {
                    found.insert(s);
                }
            }
        }
    }
    let mut out: Vec<BinVector> = found.into_iter().collect();
    out.sort_by_key(|v| (v.weight(), v.support()));
    out
}

fn words(basis: &BinMatrix, cfg: &BasisSearch, max_weight: usize, rng: &mut ChaCha8Rng) -> Vec<BinVector> {
    if basis.rows() <= cfg.max_enumeration_dim {
        enumerate_words(basis, max_weight)
    } else {
        sample_words(basis, cfg.trials, max_weight, rng)
    }
}

/// Lightest shift of `polys` (shifted jointly), compared as sorted term lists.
fn least_shift(group: Group, polys: &[BivariatePoly]) -> Vec<BivariatePoly> {
    group
        .elements()
        .map(|u| polys.iter().map(|p| p.shift(u).canonical()).collect::<Vec<_>>())
        .min_by(|x, y| {
            let kx: Vec<&[Monomial]> = x.iter().map(|p| p.terms()).collect();
            let ky: Vec<&[Monomial]> = y.iter().map(|p| p.terms()).collect();
            kx.cmp(&ky)
        })
        .unwrap_or_default()
}

/// Keeps the words lighter than `lightest useful + slack`, one per shift
/// class, as joint polynomial tuples.
fn useful_classes(group: Group, ws: Vec<BinVector>, blocks: usize, useful: impl Fn(&[BivariatePoly]) -> bool, slack: usize) -> Vec<Vec<BivariatePoly>> {
    let lm = group.order();
    let split = |v: &BinVector| -> Vec<BivariatePoly> {
        (0..blocks)
            .map(|b| BivariatePoly::from_vector(group, &v.slice(b * lm, (b + 1) * lm)))
            .collect()
    };
    let mut kept: Vec<(usize, Vec<BivariatePoly>)> = Vec::new();
    let mut seen = HashSet::new();
    let mut lightest = usize::MAX;
    let mut ws = ws;
    ws.sort_by_key(|v| (v.weight(), v.support()));
    for v in ws {
        let w = v.weight();
        if lightest != usize::MAX && w > lightest + slack {
            break;
        }
        let polys = split(&v);
        let rep = least_shift(group, &polys);
        let key: Vec<Vec<Monomial>> = rep.iter().map(|p| p.terms().to_vec()).collect();
        if !seen.insert(key) || !useful(&rep) {
            continue;
        }
        lightest = lightest.min(w);
        kept.push((w, rep));
    }
    kept.into_iter().map(|(_, p)| p).collect()
}

/// Enumerates triples `(f, g, h)` spanning all logical qubits, lightest
/// `max(|f|, |g|+|h|)` first with ties in lexicographic monomial order.
/// Each triple is a representative of its shift class.
pub fn find_basis_polynomials(code: &BBCode, cfg: &BasisSearch) -> Result<Vec<BasisTriple>> {
    if code.k < 2 {
        return Err(Error::InvalidArgument(format!("code has k = {}", code.k)));
    }
    let g = code.group;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cap = code.n();
    let x_stab = code.hx.echelon();
    let z_stab = code.hz.echelon();

    let kf = kernel(&product_map(g, &[&code.b]));
    let fs = useful_classes(
        g,
        words(&kf, cfg, cap, &mut rng),
        1,
        |p| !p[0].is_zero() && !x_stab.reduce(&LogicalPauli::x(p[0].clone(), BivariatePoly::zero(g)).support()).is_zero(),
        cfg.slack,
    );
    let kgh = kernel(&product_map(g, &[&code.b, &code.a]));
    let ghs = useful_classes(
        g,
        words(&kgh, cfg, cap, &mut rng),
        2,
        |p| {
            let z = LogicalPauli::z(p[1].transpose(), p[0].transpose());
            !z_stab.reduce(&z.support()).is_zero()
        },
        cfg.slack,
    );

    let mut pairs: Vec<BasisTriple> = Vec::new();
    for f in &fs {
        for gh in &ghs {
            pairs.push(BasisTriple {
                f: f[0].clone(),
                g: gh[0].clone(),
                h: gh[1].clone(),
            });
        }
    }
    pairs.sort_by_key(|t| t.sort_key());
    let mut out = Vec::new();
    for t in pairs {
        if out.len() == cfg.max_results {
            break;
        }
        if t.is_valid(code) {
            out.push(t);
        }
    }
    Ok(out)
}

/// Node budget of the label search.
pub const LABEL_SEARCH_BUDGET: u64 = 10_000_000;

/// Chooses `k/2` monomials `n_i` and `m_i` with `n_i^T m_j` in `fh` exactly
/// when `i = j`, so `X_{n_i}` and `Z_{m_j}` pair up into qubits. `n_1 = 1`.
pub fn select_qubit_labels(code: &BBCode, basis: &BasisTriple) -> Result<(Vec<Monomial>, Vec<Monomial>)> {
    let g = code.group;
    let want = code.k / 2;
    if want == 0 {
        return Err(Error::InvalidArgument("code has no logical qubits".into()));
    }
    let fh = basis.f.mul(&basis.h);
    let lm = g.order();
    let hit: Vec<Vec<bool>> = (0..lm)
        .map(|a| {
            let ainv = g.inv(g.from_index(a));
            (0..lm).map(|b| fh.contains(g.mul(ainv, g.from_index(b)))).collect()
        })
        .collect();

    struct Search<'a> {
        hit: &'a [Vec<bool>],
        want: usize,
        ns: Vec<usize>,
        ms: Vec<usize>,
        nodes: u64,
    }
    impl Search<'_> {
        fn go(&mut self) -> Result<bool> {
            if self.ns.len() == self.want {
                return Ok(true);
            }
            let lm = self.hit.len();
            let start = if self.ns.is_empty() { 0 } else { self.ns[self.ns.len() - 1] + 1 };
            let end = if self.ns.is_empty() { 1 } else { lm };
            for a in start..end {
                if self.ms.iter().any(|&m| self.hit[a][m]) {
                    continue;
                }
                for b in 0..lm {
                    self.nodes += 1;
                    if self.nodes > LABEL_SEARCH_BUDGET {
                        return Err(Error::BudgetExceeded(format!("label search exceeded {LABEL_SEARCH_BUDGET} nodes")));
                    }
                    if !self.hit[a][b] || self.ms.contains(&b) || self.ns.iter().any(|&n| self.hit[n][b]) {
                        continue;
                    }
                    self.ns.push(a);
                    self.ms.push(b);
                    if self.go()? {
                        return Ok(true);
                    }
                    self.ns.pop();
                    self.ms.pop();
                }
            }
            Ok(false)
        }
    }
    let mut s = Search {
        hit: &hit,
        want,
        ns: Vec::new(),
        ms: Vec::new(),
        nodes: 0,
    };
    if !s.go()? {
        return Err(Error::Infeasible("no label set exists for this triple".into()));
    }
    Ok((
        s.ns.iter().map(|&i| g.from_index(i)).collect(),
        s.ms.iter().map(|&i| g.from_index(i)).collect(),
    ))
}

/// True iff `X_{n_i}` anticommutes with `Z_{m_j}` exactly when `i = j`.
pub fn labels_valid(basis: &BasisTriple, ns: &[Monomial], ms: &[Monomial]) -> bool {
    ns.len() == ms.len()
        && ns.iter().enumerate().all(|(i, &a)| {
            ms.iter()
                .enumerate()
                .all(|(j, &b)| basis.x_bar(a).anticommutes(&basis.z_bar(b)) == (i == j))
        })
}

/// A basis with chosen qubit labels.
#[derive(Clone, Debug)]
pub struct LogicalBasis {
    pub triple: BasisTriple,
    pub n_labels: Vec<Monomial>,
    pub m_labels: Vec<Monomial>,
}

impl LogicalBasis {
    pub fn new(code: &BBCode, triple: BasisTriple) -> Result<Self> {
        let (n_labels, m_labels) = select_qubit_labels(code, &triple)?;
        Ok(LogicalBasis {
            triple,
            n_labels,
            m_labels,
        })
    }

    /// The `k` X-type and `k` Z-type operators, unprimed block first.
    pub fn operators(&self) -> (Vec<LogicalPauli>, Vec<LogicalPauli>) {
        let t = &self.triple;
        let xs = self
            .n_labels
            .iter()
            .map(|&a| t.x_bar(a))
            .chain(self.n_labels.iter().map(|&a| t.x_prime(a)))
            .collect();
        let zs = self
            .m_labels
            .iter()
            .map(|&b| t.z_bar(b))
            .chain(self.m_labels.iter().map(|&b| t.z_prime(b)))
            .collect();
        (xs, zs)
    }

    /// Checks the kernel equations, that every operator commutes with the
    /// checks and that the anticommutation matrix is the identity, which
    /// makes the operators independent modulo the stabilizer.
    pub fn verify(&self, code: &BBCode) -> Result<()> {
        if !self.triple.solves(code) {
            return Err(Error::Invariant("f, g, h do not solve Bf = 0, gB + hA = 0".into()));
        }
        let (xs, zs) = self.operators();
        if xs.len() != code.k {
            return Err(Error::Invariant(format!("{} operators per type for k = {}", xs.len(), code.k)));
        }
        for op in xs.iter().chain(&zs) {
            let other = code.check_matrix(match op.kind {
                PauliType::X => PauliType::Z,
                PauliType::Z => PauliType::X,
            });
            if !op.commutes_with_checks(code) || !other.mul_vec(&op.support()).is_zero() {
                return Err(Error::Invariant("operator does not commute with the checks".into()));
            }
        }
        for (i, x) in xs.iter().enumerate() {
            for (j, z) in zs.iter().enumerate() {
                if x.anticommutes(z) != (i == j) {
                    return Err(Error::Invariant(format!("operators {i} and {j} have the wrong commutation")));
                }
            }
        }
        Ok(())
    }

    pub fn export(&self) -> BasisExport {
        let terms = |p: &BivariatePoly| p.terms().to_vec();
        BasisExport {
            f: terms(&self.triple.f),
            g: terms(&self.triple.g),
            h: terms(&self.triple.h),
            n_labels: self.n_labels.clone(),
            m_labels: self.m_labels.clone(),
            weight: self.triple.weight(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisExport {
    pub f: Vec<Monomial>,
    pub g: Vec<Monomial>,
    pub h: Vec<Monomial>,
    pub n_labels: Vec<Monomial>,
    pub m_labels: Vec<Monomial>,
    pub weight: usize,
}

/// Data permutation `q(L, a) <-> q(R, a^T)`.
pub fn duality_permutation(code: &BBCode) -> Vec<usize> {
    let g = code.group;
    let lm = g.order();
    (0..2 * lm)
        .map(|i| {
            let t = g.index(g.inv(g.from_index(i % lm)));
            if i < lm {
                lm + t
            } else {
                t
            }
        })
        .collect()
}

/// True iff `perm` maps the support of the X check at `b` onto the support
/// of the Z check at `b^T`, for every `b`.
pub fn is_zx_duality(code: &BBCode, perm: &[usize]) -> bool {
    let g = code.group;
    if perm.len() != code.n() {
        return false;
    }
    (0..g.order()).all(|r| {
        let mut mapped: Vec<usize> = code.hx.row_support(r).iter().map(|&c| perm[c]).collect();
        mapped.sort_unstable();
        let t = g.index(g.inv(g.from_index(r)));
        mapped == code.hz.row_support(t)
    })
}

pub fn zx_duality_check(code: &BBCode) -> bool {
    is_zx_duality(code, &duality_permutation(code))
}

/// One cyclic factor of prime-power order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CyclicFactor {
    pub name: String,
    pub order: usize,
    pub prime: usize,
    pub generator: Monomial,
    /// Generated from `x` (true) or `y`.
    pub from_x: bool,
}

/// `Z_l x Z_m` as a product of cyclic groups of prime-power order, with
/// generators named `p, q, r, ...` in order: factors of `x` first, smaller
/// primes first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupDecomposition {
    pub l: usize,
    pub m: usize,
    pub factors: Vec<CyclicFactor>,
}

fn prime_powers(mut n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            let mut q = 1;
            while n % p == 0 {
                n /= p;
                q *= p;
            }
            out.push((p, q));
        }
        p += 1;
    }
    if n > 1 {
        out.push((n, n));
    }
    out
}

pub fn decompose_group(l: usize, m: usize) -> Result<GroupDecomposition> {
    let g = Group::new(l, m)?;
    let mut factors = Vec::new();
    for (modulus, from_x) in [(l, true), (m, false)] {
        for (prime, q) in prime_powers(modulus) {
            // c = 1 mod q and 0 mod modulus/q
            let c = (0..modulus).step_by(modulus / q).find(|c| c % q == 1 % q).unwrap_or(0);
            let generator = if from_x { g.mono(c as i64, 0) } else { g.mono(0, c as i64) };
            let name = ((b'p' + factors.len() as u8) as char).to_string();
            factors.push(CyclicFactor {
                name,
                order: q,
                prime,
                generator,
                from_x,
            });
        }
    }
    Ok(GroupDecomposition { l, m, factors })
}

impl GroupDecomposition {
    pub fn group(&self) -> Group {
        Group { l: self.l, m: self.m }
    }

    /// E.g. `p^4 q^3 r^2 s^3`.
    pub fn orders(&self) -> String {
        self.factors
            .iter()
            .map(|f| format!("{}^{}", f.name, f.order))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Exponent of each factor in `u`.
    pub fn coordinates(&self, u: Monomial) -> Vec<usize> {
        self.factors
            .iter()
            .map(|f| if f.from_x { u.a % f.order } else { u.b % f.order })
            .collect()
    }

    pub fn element(&self, exps: &[usize]) -> Monomial {
        let g = self.group();
        self.factors
            .iter()
            .zip(exps)
            .fold(Monomial::ONE, |acc, (f, &e)| g.mul(acc, g.pow(f.generator, e as i64)))
    }

    /// `u` in generator notation, e.g. `p s r^2`; `1` for the identity.
    pub fn describe(&self, u: Monomial) -> String {
        let parts: Vec<String> = self
            .factors
            .iter()
            .zip(self.coordinates(u))
            .filter(|(_, e)| *e != 0)
            .map(|(f, e)| if e == 1 { f.name.clone() } else { format!("{}^{}", f.name, e) })
            .collect();
        if parts.is_empty() {
            "1".into()
        } else {
            parts.join(" ")
        }
    }
}

/// A ratio used as one link of the swap chain, written as a product of
/// available ratios `A_i A_j^T` or `B_i B_j^T`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwapRatio {
    pub element: Monomial,
    pub name: String,
    pub factors: Vec<(Term, Term)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorPlan {
    pub factor: String,
    pub order: usize,
    /// The exchange realised is `i <-> centre - i`; the leftover shift is
    /// undone by a translation.
    pub centre: usize,
    pub ratios: Vec<SwapRatio>,
    /// Links this generator adds to the chain.
    pub links: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwapPlan {
    pub decomposition: GroupDecomposition,
    pub generators: Vec<GeneratorPlan>,
    pub chain_length: usize,
    pub cnot_depth: usize,
}

impl SwapPlan {
    /// Every distinct ratio named in the plan.
    pub fn ratio_names(&self) -> Vec<String> {
        self.generators
            .iter()
            .flat_map(|g| g.ratios.iter().map(|r| r.name.clone()))
            .collect()
    }
}

/// CNOT depth of one nearest-neighbour exchange.
pub const EXCHANGE_DEPTH: usize = 12;

/// Shortest products of available ratios reaching each group element, up
/// to `max_factors` factors.
fn ratio_words(code: &BBCode, max_factors: usize) -> HashMap<Monomial, Vec<(Term, Term)>> {
    let g = code.group;
    let mut gens: Vec<(Monomial, (Term, Term))> = Vec::new();
    for (poly, mk) in [(&code.a, Term::A as fn(u8) -> Term), (&code.b, Term::B as fn(u8) -> Term)] {
        for i in 1..=poly.weight() {
            for j in 1..=poly.weight() {
                if i != j {
                    gens.push((g.div(poly.term(i), poly.term(j)), (mk(i as u8), mk(j as u8))));
                }
            }
        }
    }
    let mut best: HashMap<Monomial, Vec<(Term, Term)>> = HashMap::new();
    best.insert(Monomial::ONE, Vec::new());
    let mut queue = VecDeque::from([Monomial::ONE]);
    while let Some(u) = queue.pop_front() {
        let word = best[&u].clone();
        if word.len() == max_factors {
            continue;
        }
        for &(s, t) in &gens {
            let v = g.mul(u, s);
            if let std::collections::hash_map::Entry::Vacant(e) = best.entry(v) {
                let mut w = word.clone();
                w.push(t);
                e.insert(w);
                queue.push_back(v);
            }
        }
    }
    best
}

/// Plans `q(L, a) <-> q(L, a^T)` as a chain of exchanges, one generator of
/// the primary decomposition at a time. For a generator of order `o` the
/// exchange `i <-> c - i` needs one ratio per distinct offset `c - 2i`
/// (up to sign). A ratio may carry an extra order-two factor `u`, in which
/// case `u` itself is added once as a further link. Ratios are products of
/// at most `max_factors` available ratios.
pub fn plan_duality_swaps(code: &BBCode, max_factors: usize) -> Result<SwapPlan> {
    let g = code.group;
    let dec = decompose_group(g.l, g.m)?;
    let words = ratio_words(code, max_factors);
    let cost = |u: Monomial| words.get(&u).map(|w| w.len());
    let involutions: Vec<Monomial> = g
        .elements()
        .filter(|&u| u != Monomial::ONE && g.mul(u, u) == Monomial::ONE)
        .collect();
    let ratio = |u: Monomial| SwapRatio {
        element: u,
        name: dec.describe(u),
        factors: words[&u].clone(),
    };
    let mut generators = Vec::new();
    for f in &dec.factors {
        let o = f.order;
        // (total, centre, chosen elements, dressing)
        let mut best: Option<(usize, usize, Vec<Monomial>, Option<Monomial>)> = None;
        for c in 0..o {
            let mut offsets: Vec<usize> = (0..o)
                .filter_map(|i| {
                    let j = (c + o - i) % o;
                    (i < j).then(|| {
                        let e = (j - i) % o;
                        e.min(o - e)
                    })
                })
                .collect();
            offsets.sort_unstable();
            offsets.dedup();
            for dress in std::iter::once(None).chain(involutions.iter().copied().map(Some)) {
                let mut total = 0;
                let mut chosen = Vec::new();
                let mut used = false;
                let mut feasible = true;
                for &e in &offsets {
                    let plain = [g.pow(f.generator, e as i64), g.pow(f.generator, -(e as i64))];
                    let mut options: Vec<(usize, Monomial, bool)> =
                        plain.iter().filter_map(|&u| cost(u).map(|k| (k, u, false))).collect();
                    if let Some(d) = dress {
                        options.extend(plain.iter().filter_map(|&u| {
                            let v = g.mul(u, d);
                            cost(v).map(|k| (k, v, true))
                        }));
                    }
                    match options.into_iter().min_by_key(|o| (o.0, o.2)) {
                        Some((k, u, dressed)) => {
                            total += k;
                            chosen.push(u);
                            used |= dressed;
                        }
                        None => feasible = false,
                    }
                }
                if !feasible {
                    continue;
                }
                let dressing = if used { dress } else { None };
                if let Some(d) = dressing {
                    match cost(d) {
                        Some(k) => total += k,
                        None => continue,
                    }
                }
                if best.as_ref().map_or(true, |b| total < b.0) {
                    best = Some((total, c, chosen, dressing));
                }
            }
        }
        let Some((links, centre, chosen, dressing)) = best else {
            return Err(Error::Infeasible(format!(
                "generator {} of order {o} cannot be reflected with ratios of at most {max_factors} factors",
                f.name
            )));
        };
        let mut ratios: Vec<SwapRatio> = dressing.into_iter().chain(chosen).map(ratio).collect();
        ratios.dedup();
        generators.push(GeneratorPlan {
            factor: f.name.clone(),
            order: o,
            centre,
            ratios,
            links,
        });
    }
    let chain_length: usize = generators.iter().map(|g| g.links).sum();
    Ok(SwapPlan {
        decomposition: dec,
        generators,
        chain_length,
        cnot_depth: if chain_length == 0 { 0 } else { (2 * chain_length - 1) * EXCHANGE_DEPTH },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeasuredLogical {
    /// `X(f, 0)`.
    XBar,
    /// `Z(h^T, g^T)`.
    ZBar,
}

/// The operator's data qubits, the opposite-type checks touching them and
/// the Tanner edges between the two.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subgraph {
    pub qubits: Vec<Qubit>,
    pub checks: Vec<Qubit>,
    /// `(qubit index, check index, tag)`.
    pub edges: Vec<(usize, usize, Term)>,
}

impl Subgraph {
    pub fn size(&self) -> usize {
        self.qubits.len() + self.checks.len()
    }

    /// Component sizes `(vertices, edges)` of the edges carrying `tags`.
    pub fn components(&self, tags: &[Term]) -> Vec<(usize, usize)> {
        let nq = self.qubits.len();
        let nv = self.size();
        let mut parent: Vec<usize> = (0..nv).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let chosen: Vec<(usize, usize)> = self
            .edges
            .iter()
            .filter(|e| tags.contains(&e.2))
            .map(|&(q, c, _)| (q, nq + c))
            .collect();
        for &(u, v) in &chosen {
            let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
            parent[ru] = rv;
        }
        let mut sizes: HashMap<usize, (usize, usize)> = HashMap::new();
        for v in 0..nv {
            let r = find(&mut parent, v);
            sizes.entry(r).or_default().0 += 1;
        }
        for &(u, _) in &chosen {
            let r = find(&mut parent, u);
            sizes.entry(r).or_default().1 += 1;
        }
        let mut out: Vec<(usize, usize)> = sizes.into_values().collect();
        out.sort_unstable();
        out
    }
}

/// Edge tags of the two planes of the thickness-2 layout.
pub const PLANE_A: [Term; 3] = [Term::A(2), Term::A(3), Term::B(3)];
pub const PLANE_B: [Term; 3] = [Term::A(1), Term::B(1), Term::B(2)];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaneReport {
    /// `(vertices, edges)` per component, sorted.
    pub components: Vec<(usize, usize)>,
}

impl PlaneReport {
    pub fn max_vertices(&self) -> usize {
        self.components.iter().map(|c| c.0).max().unwrap_or(0)
    }

    /// Every component is a single vertex or one edge.
    pub fn only_pairs(&self) -> bool {
        self.max_vertices() <= 2
    }

    pub fn pair_count(&self) -> usize {
        self.components.iter().filter(|c| c.0 == 2).count()
    }

    /// Every component has at most one cycle (a ring with trees attached,
    /// or a tree).
    pub fn at_most_one_cycle(&self) -> bool {
        self.components.iter().all(|&(v, e)| e <= v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    Primal,
    Dual,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AncillaLayer {
    pub index: usize,
    pub kind: LayerKind,
    /// Layer 1 of the primal kind is the subgraph inside the code itself.
    pub in_code: bool,
}

/// Layered measurement system for one logical operator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AncillaSystem {
    pub target: MeasuredLogical,
    pub r: usize,
    pub subgraph: Subgraph,
    /// In order `G[1], G^T[1], G[2], ..., G^T[r]`.
    pub layers: Vec<AncillaLayer>,
    /// Pairing edges `v - v^T`, `c - c^T` between consecutive layers.
    pub inter_layer_edges: usize,
    pub added_qubits: usize,
    pub plane_a: PlaneReport,
    pub plane_b: PlaneReport,
}

impl AncillaSystem {
    pub fn qubits_per_layer(&self) -> usize {
        self.subgraph.size()
    }

    /// Vertex roles (true = qubit) and edges of a primal or dual layer.
    pub fn layer_graph(&self, kind: LayerKind) -> (Vec<bool>, Vec<(usize, usize)>) {
        let nq = self.subgraph.qubits.len();
        let roles = (0..self.subgraph.size())
            .map(|v| (v < nq) == (kind == LayerKind::Primal))
            .collect();
        let edges = self.subgraph.edges.iter().map(|&(q, c, _)| (q, nq + c)).collect();
        (roles, edges)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("system serializes")
    }
}

/// Builds the ancilla system measuring `X_1` or `Z_1` with `r` dual and
/// `r - 1` extra primal layers.
pub fn build_ancilla_system(code: &BBCode, basis: &BasisTriple, target: MeasuredLogical, r: usize) -> Result<AncillaSystem> {
    if r < 1 {
        return Err(Error::InvalidArgument("ancilla system needs r >= 1".into()));
    }
    let g = code.group;
    let lm = g.order();
    let op = match target {
        MeasuredLogical::XBar => basis.x_bar(Monomial::ONE),
        MeasuredLogical::ZBar => basis.z_bar(Monomial::ONE),
    };
    let check_reg = match op.kind {
        PauliType::X => Register::Z,
        PauliType::Z => Register::X,
    };
    let support = op.support();
    let qubits: Vec<Qubit> = support
        .iter_ones()
        .map(|i| if i < lm { Qubit::new(Register::L, i) } else { Qubit::new(Register::R, i - lm) })
        .collect();
    let qpos: HashMap<Qubit, usize> = qubits.iter().enumerate().map(|(i, &q)| (q, i)).collect();
    let graph = code.tanner_graph();
    let touching: Vec<_> = graph
        .edges
        .iter()
        .filter(|e| e.check.reg == check_reg && qpos.contains_key(&e.data))
        .collect();
    let mut checks: Vec<Qubit> = touching.iter().map(|e| e.check).collect();
    checks.sort_unstable();
    checks.dedup();
    let cpos: HashMap<Qubit, usize> = checks.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let edges = touching.iter().map(|e| (qpos[&e.data], cpos[&e.check], e.tag)).collect();
    let subgraph = Subgraph { qubits, checks, edges };

    let mut layers = vec![AncillaLayer {
        index: 1,
        kind: LayerKind::Primal,
        in_code: true,
    }];
    for j in 1..=r {
        layers.push(AncillaLayer {
            index: j,
            kind: LayerKind::Dual,
            in_code: false,
        });
        if j < r {
            layers.push(AncillaLayer {
                index: j + 1,
                kind: LayerKind::Primal,
                in_code: false,
            });
        }
    }
    let per_layer = subgraph.size();
    let added_layers = layers.iter().filter(|l| !l.in_code).count();
    Ok(AncillaSystem {
        target,
        r,
        plane_a: PlaneReport {
            components: subgraph.components(&PLANE_A),
        },
        plane_b: PlaneReport {
            components: subgraph.components(&PLANE_B),
        },
        inter_layer_edges: (layers.len() - 1) * per_layer,
        added_qubits: added_layers * per_layer,
        layers,
        subgraph,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::translation_permutation;
    use crate::code::known_code;

    fn code(n: usize) -> BBCode {
        known_code(n).unwrap().spec.build().unwrap()
    }

    /// The triple drawn for the 144-qubit code.
    fn drawn_triple(c: &BBCode) -> BasisTriple {
        BasisTriple::parse(
            c.group,
            "x+1+x2+x3+x6+x7+x8+x9+xy3+x5y3+x7y3+x11y3",
            "xy2+y4+x2y3+x+y2+x2y",
            "y3+y2+xy3+y+1+xy",
        )
        .unwrap()
    }

    fn monos(g: Group, s: &str) -> Vec<Monomial> {
        BivariatePoly::parse(g, s).unwrap().terms().to_vec()
    }

    #[test]
    fn anticommutation_lemma() {
        let g = Group::new(6, 6).unwrap();
        let u = BivariatePoly::monomial(g, Monomial::new(2, 3));
        let zero = BivariatePoly::zero(g);
        assert!(pauli_anticommute(&u, &zero, &u, &zero));
        let v = BivariatePoly::monomial(g, Monomial::new(1, 1));
        assert!(!pauli_anticommute(&u, &zero, &v, &zero));
        let two = BivariatePoly::parse(g, "x2y3+xy").unwrap();
        assert!(!pauli_anticommute(&two, &zero, &two, &zero));
    }

    #[test]
    fn drawn_triple_is_valid() {
        let c = code(144);
        let t = drawn_triple(&c);
        assert!(t.solves(&c));
        assert_eq!(t.block_rank(), 6);
        assert_eq!((t.f.weight(), t.g.weight() + t.h.weight()), (12, 12));
        let ns = monos(c.group, "1+y+x2y+x2y5+x3y2+x4");
        let ms = monos(c.group, "y+y5+xy+1+x4+x5y2");
        assert!(labels_valid(&t, &ns, &ms));
        let basis = LogicalBasis {
            triple: t.clone(),
            n_labels: ns,
            m_labels: ms,
        };
        basis.verify(&c).unwrap();
        let mut swapped = basis.clone();
        swapped.m_labels.swap(0, 1);
        assert!(swapped.verify(&c).is_err());
    }

    #[test]
    fn operator_families_commute_across_blocks() {
        let c = code(144);
        let t = drawn_triple(&c);
        let g = c.group;
        let fh = t.f.mul(&t.h);
        for a in g.elements().step_by(7) {
            for b in g.elements().step_by(5) {
                assert!(!t.x_bar(a).anticommutes(&t.z_prime(b)));
                assert!(!t.x_prime(a).anticommutes(&t.z_bar(b)));
                let expect = fh.contains(g.mul(g.inv(a), b));
                assert_eq!(t.x_bar(a).anticommutes(&t.z_bar(b)), expect);
                assert_eq!(t.x_prime(a).anticommutes(&t.z_prime(b)), expect);
            }
            for op in [t.x_bar(a), t.z_bar(a), t.x_prime(a), t.z_prime(a)] {
                assert!(op.commutes_with_checks(&c));
            }
        }
    }

    #[test]
    fn translations_shift_operator_labels() {
        let c = code(144);
        let t = drawn_triple(&c);
        let g = c.group;
        let s = Monomial::new(3, 1);
        let perm = translation_permutation(&c, s);
        for a in [Monomial::ONE, Monomial::new(2, 5)] {
            let moved: Vec<usize> = t.x_bar(a).support().iter_ones().map(|i| perm[i]).collect();
            let mut want = t.x_bar(g.mul(s, a)).support().support();
            want.sort_unstable();
            let mut moved = moved;
            moved.sort_unstable();
            assert_eq!(moved, want);
        }
    }

    #[test]
    fn search_finds_minimum_weight_basis() {
        let c = code(144);
        let found = find_basis_polynomials(&c, &BasisSearch::default()).unwrap();
        assert!(!found.is_empty());
        let best = &found[0];
        assert!(best.is_valid(&c));
        assert_eq!((best.f.weight(), best.g.weight() + best.h.weight()), (12, 12));
        assert!(found.windows(2).all(|w| w[0].weight() <= w[1].weight()));
        let basis = LogicalBasis::new(&c, best.clone()).unwrap();
        assert_eq!(basis.n_labels.len(), 6);
        assert_eq!(basis.n_labels[0], Monomial::ONE);
        basis.verify(&c).unwrap();
    }

    #[test]
    fn search_on_small_code() {
        let c = code(72);
        let found = find_basis_polynomials(&c, &BasisSearch::default()).unwrap();
        let basis = LogicalBasis::new(&c, found[0].clone()).unwrap();
        basis.verify(&c).unwrap();
        assert_eq!(found[0].f.weight(), 6);
    }

    #[test]
    fn duality_is_a_zx_duality() {
        for k in crate::code::known_codes() {
            let c = k.spec.build().unwrap();
            assert!(zx_duality_check(&c), "{}", k.name);
            let id: Vec<usize> = (0..c.n()).collect();
            assert!(!is_zx_duality(&c, &id));
        }
    }

    #[test]
    fn group_decompositions() {
        let d = decompose_group(15, 3).unwrap();
        assert_eq!(d.orders(), "p^3 q^5 r^3");
        let g = d.group();
        let (p, q, r) = (d.factors[0].generator, d.factors[1].generator, d.factors[2].generator);
        assert_eq!(g.mul(p, q), Monomial::new(1, 0));
        assert_eq!(r, Monomial::new(0, 1));
        assert_eq!(decompose_group(12, 6).unwrap().orders(), "p^4 q^3 r^2 s^3");
        assert!(decompose_group(1, 1).unwrap().factors.is_empty());
        for (l, m) in [(6, 6), (9, 6), (12, 12), (30, 6), (21, 18)] {
            let d = decompose_group(l, m).unwrap();
            assert_eq!(d.factors.iter().map(|f| f.order).product::<usize>(), l * m);
            let g = d.group();
            for f in &d.factors {
                assert_eq!(g.element_order(f.generator), f.order);
            }
            for u in g.elements() {
                assert_eq!(d.element(&d.coordinates(u)), u);
            }
        }
    }

    #[test]
    fn duality_chain_lengths() {
        for (n, chain) in [(72, 4), (90, 6), (108, 9), (144, 6), (288, 10), (360, 11)] {
            let plan = plan_duality_swaps(&code(n), 4).unwrap();
            assert_eq!(plan.chain_length, chain, "n = {n}: {plan:?}");
        }
        let plan = plan_duality_swaps(&code(144), 4).unwrap();
        assert_eq!(plan.cnot_depth, 132);
        let mut names = plan_duality_swaps(&code(72), 4).unwrap().ratio_names();
        names.sort();
        assert_eq!(names, ["q", "s"]);
    }

    #[test]
    fn ratio_words_multiply_out() {
        let c = code(144);
        let g = c.group;
        let plan = plan_duality_swaps(&c, 4).unwrap();
        for gp in &plan.generators {
            for r in &gp.ratios {
                let prod = r.factors.iter().fold(Monomial::ONE, |acc, &(i, j)| g.mul(acc, g.div(c.term(i), c.term(j))));
                assert_eq!(prod, r.element);
            }
        }
    }

    #[test]
    fn ancilla_systems_for_drawn_triple() {
        let c = code(144);
        let t = drawn_triple(&c);
        let x = build_ancilla_system(&c, &t, MeasuredLogical::XBar, 12).unwrap();
        let z = build_ancilla_system(&c, &t, MeasuredLogical::ZBar, 12).unwrap();
        assert_eq!((x.qubits_per_layer(), z.qubits_per_layer()), (30, 30));
        assert_eq!(x.added_qubits + z.added_qubits, 1380);
        assert!(x.subgraph.qubits.iter().all(|q| q.reg == Register::L));
        assert!(x.plane_a.only_pairs());
        assert_eq!(x.plane_a.pair_count(), 12);
        assert!(x.plane_b.at_most_one_cycle());
        assert!(z.plane_a.at_most_one_cycle() && z.plane_b.at_most_one_cycle());
        let one = build_ancilla_system(&c, &t, MeasuredLogical::XBar, 1).unwrap();
        assert_eq!(one.added_qubits, 30);
        assert_eq!(one.layers.len(), 2);
        assert!(build_ancilla_system(&c, &t, MeasuredLogical::XBar, 0).is_err());
        let parsed: AncillaSystem = serde_json::from_str(&x.to_json()).unwrap();
        assert_eq!(parsed, x);
    }

    #[test]
    fn primal_and_dual_layers_match_without_roles() {
        let c = code(144);
        let x = build_ancilla_system(&c, &drawn_triple(&c), MeasuredLogical::XBar, 2).unwrap();
        let (rp, ep) = x.layer_graph(LayerKind::Primal);
        let (rd, ed) = x.layer_graph(LayerKind::Dual);
        assert_eq!(ep, ed);
        assert!(rp.iter().zip(&rd).all(|(a, b)| a != b));
    }
}
