//! Bivariate bicycle codes: polynomials over `Z_l x Z_m`, check matrices,
//! Tanner graphs and the structural analyses built on them.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::{BinMatrix, BinVector, IncrementalBasis};

/// The group `Z_l x Z_m`, written multiplicatively with generators `x`, `y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Group {
    pub l: usize,
    pub m: usize,
}

/// `x^a y^b` with `a < l`, `b < m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Monomial {
    pub a: usize,
    pub b: usize,
}

impl Monomial {
    pub const ONE: Monomial = Monomial { a: 0, b: 0 };

    pub fn new(a: usize, b: usize) -> Self {
        Monomial { a, b }
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.a, self.b) {
            (0, 0) => write!(f, "1"),
            (a, 0) => write!(f, "x{a}"),
            (0, b) => write!(f, "y{b}"),
            (a, b) => write!(f, "x{a}y{b}"),
        }
    }
}

impl Group {
    pub fn new(l: usize, m: usize) -> Result<Self> {
        if l == 0 || m == 0 {
            return Err(Error::InvalidCode(format!(
                "group dimensions must be positive, got l={l}, m={m}"
            )));
        }
        Ok(Group { l, m })
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.l * self.m
    }

    #[inline]
    pub fn mono(&self, a: i64, b: i64) -> Monomial {
        Monomial {
            a: a.rem_euclid(self.l as i64) as usize,
            b: b.rem_euclid(self.m as i64) as usize,
        }
    }

    #[inline]
    pub fn mul(&self, u: Monomial, v: Monomial) -> Monomial {
        Monomial {
            a: (u.a + v.a) % self.l,
            b: (u.b + v.b) % self.m,
        }
    }

    /// Transpose of the permutation matrix, i.e. the group inverse.
    #[inline]
    pub fn inv(&self, u: Monomial) -> Monomial {
        Monomial {
            a: (self.l - u.a) % self.l,
            b: (self.m - u.b) % self.m,
        }
    }

    #[inline]
    pub fn div(&self, u: Monomial, v: Monomial) -> Monomial {
        self.mul(u, self.inv(v))
    }

    pub fn pow(&self, u: Monomial, e: i64) -> Monomial {
        self.mono(u.a as i64 * e, u.b as i64 * e)
    }

    /// Row/column index of a monomial: `a*m + b`.
    #[inline]
    pub fn index(&self, u: Monomial) -> usize {
        u.a * self.m + u.b
    }

    #[inline]
    pub fn from_index(&self, i: usize) -> Monomial {
        Monomial {
            a: i / self.m,
            b: i % self.m,
        }
    }

    pub fn elements(&self) -> impl Iterator<Item = Monomial> + '_ {
        (0..self.order()).map(move |i| self.from_index(i))
    }

    /// Multiplicative order by repeated multiplication.
    pub fn element_order(&self, u: Monomial) -> usize {
        let mut acc = u;
        let mut k = 1;
        while acc != Monomial::ONE {
            acc = self.mul(acc, u);
            k += 1;
        }
        k
    }

    /// Elements of the subgroup generated by `gens`.
    pub fn subgroup(&self, gens: &[Monomial]) -> Vec<Monomial> {
        let mut seen = vec![false; self.order()];
        let mut out = vec![Monomial::ONE];
        seen[0] = true;
        let mut queue = VecDeque::from([Monomial::ONE]);
        while let Some(u) = queue.pop_front() {
            for &g in gens {
                let v = self.mul(u, g);
                let i = self.index(v);
                if !seen[i] {
                    seen[i] = true;
                    out.push(v);
                    queue.push_back(v);
                }
            }
        }
        out
    }

    /// Permutation matrix of `u`: row `beta` has its one at column `beta*u`.
    pub fn monomial_matrix(&self, u: Monomial) -> BinMatrix {
        let n = self.order();
        let mut mat = BinMatrix::zeros(n, n);
        for beta in self.elements() {
            mat.set(self.index(beta), self.index(self.mul(beta, u)), true);
        }
        mat
    }
}

/// Element of the group algebra `F2[Z_l x Z_m]`, kept as a list of distinct
/// monomials. Construction preserves the given order, which matters for
/// the three-term polynomials defining a code.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BivariatePoly {
    group: Group,
    terms: Vec<Monomial>,
}

impl BivariatePoly {
    /// Terms must be distinct after reduction modulo `(l, m)`.
    pub fn new(group: Group, terms: Vec<Monomial>) -> Result<Self> {
        let mut reduced = Vec::with_capacity(terms.len());
        let mut seen = HashSet::new();
        for t in terms {
            let t = group.mono(t.a as i64, t.b as i64);
            if !seen.insert(t) {
                return Err(Error::InvalidCode(format!("duplicate term {t}")));
            }
            reduced.push(t);
        }
        Ok(BivariatePoly {
            group,
            terms: reduced,
        })
    }

    /// Sum of monomials modulo 2; repeated terms cancel. Terms come out sorted.
    pub fn from_terms_mod2(group: Group, terms: impl IntoIterator<Item = Monomial>) -> Self {
        let mut parity = vec![false; group.order()];
        for t in terms {
            let t = group.mono(t.a as i64, t.b as i64);
            parity[group.index(t)] ^= true;
        }
        let terms = parity
            .iter()
            .enumerate()
            .filter(|(_, &p)| p)
            .map(|(i, _)| group.from_index(i))
            .collect();
        BivariatePoly { group, terms }
    }

    pub fn zero(group: Group) -> Self {
        BivariatePoly {
            group,
            terms: Vec::new(),
        }
    }

    pub fn monomial(group: Group, u: Monomial) -> Self {
        BivariatePoly {
            group,
            terms: vec![group.mono(u.a as i64, u.b as i64)],
        }
    }

    /// Parses `"x3+y1+y2"`. Tokens are `1`, or products of `x<digits>` and
    /// `y<digits>` (a missing exponent means 1, `^` is tolerated).
    pub fn parse(group: Group, text: &str) -> Result<Self> {
        let terms = parse_terms(text)?;
        BivariatePoly::new(group, terms.into_iter().map(|(a, b)| group.mono(a, b)).collect())
    }

    pub fn group(&self) -> Group {
        self.group
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    /// One-based term access matching the written order.
    pub fn term(&self, i: usize) -> Monomial {
        self.terms[i - 1]
    }

    pub fn weight(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn contains(&self, u: Monomial) -> bool {
        self.terms.contains(&u)
    }

    /// Matrix `sum_t M(t)`.
    pub fn to_matrix(&self) -> BinMatrix {
        let n = self.group.order();
        let mut mat = BinMatrix::zeros(n, n);
        for beta in self.group.elements() {
            for &t in &self.terms {
                mat.flip(self.group.index(beta), self.group.index(self.group.mul(beta, t)));
            }
        }
        mat
    }

    pub fn transpose(&self) -> Self {
        BivariatePoly::from_terms_mod2(self.group, self.terms.iter().map(|&t| self.group.inv(t)))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.group, other.group);
        BivariatePoly::from_terms_mod2(self.group, self.terms.iter().chain(&other.terms).copied())
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.group, other.group);
        let g = self.group;
        BivariatePoly::from_terms_mod2(
            g,
            self.terms
                .iter()
                .flat_map(|&s| other.terms.iter().map(move |&t| g.mul(s, t))),
        )
    }

    pub fn shift(&self, u: Monomial) -> Self {
        let g = self.group;
        BivariatePoly {
            group: g,
            terms: self.terms.iter().map(|&t| g.mul(t, u)).collect(),
        }
    }

    /// Indicator vector over the `l*m` monomials.
    pub fn to_vector(&self) -> BinVector {
        let idx: Vec<usize> = self.terms.iter().map(|&t| self.group.index(t)).collect();
        BinVector::from_support(self.group.order(), &idx)
    }

    pub fn from_vector(group: Group, v: &BinVector) -> Self {
        BivariatePoly {
            group,
            terms: v.iter_ones().map(|i| group.from_index(i)).collect(),
        }
    }

    /// Sorted copy, for order-insensitive comparison.
    pub fn canonical(&self) -> Self {
        let mut terms = self.terms.clone();
        terms.sort();
        BivariatePoly {
            group: self.group,
            terms,
        }
    }

    pub fn is_pure_powers(&self) -> bool {
        self.terms.iter().all(|t| t.a == 0 || t.b == 0)
    }
}

impl fmt::Display for BivariatePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, "+")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

fn parse_terms(text: &str) -> Result<Vec<(i64, i64)>> {
    let chars: Vec<char> = text.chars().collect();
    let mut pos = 0;
    let mut terms = Vec::new();
    let err = |pos: usize, msg: &str| Error::parse(1, pos + 1, msg.to_string());
    let skip_ws = |pos: &mut usize| {
        while *pos < chars.len() && chars[*pos].is_whitespace() {
            *pos += 1;
        }
    };
    loop {
        skip_ws(&mut pos);
        if pos >= chars.len() {
            return Err(err(pos, "expected a monomial"));
        }
        let (mut a, mut b) = (0i64, 0i64);
        if chars[pos] == '1' && !chars.get(pos + 1).is_some_and(|c| c.is_ascii_digit()) {
            pos += 1;
        } else {
            let start = pos;
            while pos < chars.len() && (chars[pos] == 'x' || chars[pos] == 'y') {
                let var = chars[pos];
                pos += 1;
                if pos < chars.len() && chars[pos] == '^' {
                    pos += 1;
                }
                let dstart = pos;
                while pos < chars.len() && chars[pos].is_ascii_digit() {
                    pos += 1;
                }
                let e: i64 = if dstart == pos {
                    if chars.get(pos - 1) == Some(&'^') {
                        return Err(err(pos, "expected exponent after '^'"));
                    }
                    1
                } else {
                    let s: String = chars[dstart..pos].iter().collect();
                    s.parse()
                        .map_err(|_| err(dstart, "exponent out of range"))?
                };
                if var == 'x' {
                    a = a.checked_add(e).ok_or_else(|| err(dstart, "exponent overflow"))?;
                } else {
                    b = b.checked_add(e).ok_or_else(|| err(dstart, "exponent overflow"))?;
                }
            }
            if pos == start {
                return Err(err(pos, &format!("unexpected '{}'", chars[pos])));
            }
        }
        terms.push((a, b));
        skip_ws(&mut pos);
        if pos == chars.len() {
            return Ok(terms);
        }
        if chars[pos] != '+' {
            return Err(err(pos, &format!("expected '+', found '{}'", chars[pos])));
        }
        pos += 1;
    }
}

/// JSON code specification: `{"l":12, "m":6, "a_poly":"x3+y1+y2", "b_poly":"y3+x1+x2"}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub l: usize,
    pub m: usize,
    pub a_poly: String,
    pub b_poly: String,
}

impl CodeSpec {
    pub fn new(l: usize, m: usize, a_poly: &str, b_poly: &str) -> Self {
        CodeSpec {
            name: None,
            l,
            m,
            a_poly: a_poly.to_string(),
            b_poly: b_poly.to_string(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.column(), e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }

    pub fn build(&self) -> Result<BBCode> {
        let group = Group::new(self.l, self.m)?;
        let a = BivariatePoly::parse(group, &self.a_poly).map_err(|e| field_error(e, "a_poly"))?;
        let b = BivariatePoly::parse(group, &self.b_poly).map_err(|e| field_error(e, "b_poly"))?;
        build_code(self.l, self.m, a, b)
    }
}

fn field_error(e: Error, field: &str) -> Error {
    match e {
        Error::Parse {
            line,
            column,
            message,
        } => Error::Parse {
            line,
            column,
            message: format!("{field}: {message}"),
        },
        Error::InvalidCode(msg) => Error::InvalidCode(format!("{field}: {msg}")),
        other => other,
    }
}

impl FromStr for CodeSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        CodeSpec::from_json(s)
    }
}

/// A catalogued code with its known parameters.
#[derive(Clone, Debug)]
pub struct KnownCode {
    pub name: &'static str,
    pub spec: CodeSpec,
    pub n: usize,
    pub k: usize,
    pub d: usize,
    /// `d` is only an upper bound.
    pub d_is_bound: bool,
}

/// The seven benchmark codes, smallest first.
pub fn known_codes() -> Vec<KnownCode> {
    let row = |name: &'static str, l, m, a: &str, b: &str, n, k, d, bound| {
        let mut spec = CodeSpec::new(l, m, a, b);
        spec.name = Some(name.to_string());
        KnownCode {
            name,
            spec,
            n,
            k,
            d,
            d_is_bound: bound,
        }
    };
    vec![
        row("[[72,12,6]]", 6, 6, "x3+y1+y2", "y3+x1+x2", 72, 12, 6, false),
        row("[[90,8,10]]", 15, 3, "x9+y1+y2", "1+x2+x7", 90, 8, 10, false),
        row("[[108,8,10]]", 9, 6, "x3+y1+y2", "y3+x1+x2", 108, 8, 10, false),
        row("[[144,12,12]]", 12, 6, "x3+y1+y2", "y3+x1+x2", 144, 12, 12, false),
        row("[[288,12,18]]", 12, 12, "x3+y2+y7", "y3+x1+x2", 288, 12, 18, false),
        row("[[360,12,<=24]]", 30, 6, "x9+y1+y2", "y3+x25+x26", 360, 12, 24, true),
        row("[[756,16,<=34]]", 21, 18, "x3+y10+y17", "y5+x3+x19", 756, 16, 34, true),
    ]
}

pub fn known_code(n: usize) -> Option<KnownCode> {
    known_codes().into_iter().find(|c| c.n == n)
}

/// Pauli type of an operator or check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliType {
    X,
    Z,
}

/// Classification of a data-qubit Pauli operator relative to the code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorClass {
    Stabilizer,
    Logical,
    Neither,
}

#[derive(Clone, Debug)]
pub struct BBCode {
    pub group: Group,
    pub a: BivariatePoly,
    pub b: BivariatePoly,
    pub hx: BinMatrix,
    pub hz: BinMatrix,
    pub k: usize,
    pub distance_upper: Option<usize>,
    pub distance_exact: Option<usize>,
}

/// Builds `QC(A, B)` and checks its defining invariants.
pub fn build_code(l: usize, m: usize, a: BivariatePoly, b: BivariatePoly) -> Result<BBCode> {
    let group = Group::new(l, m)?;
    if a.group() != group || b.group() != group {
        return Err(Error::InvalidCode("polynomials defined over a different group".into()));
    }
    for (name, p) in [("A", &a), ("B", &b)] {
        if p.weight() != 3 {
            return Err(Error::InvalidCode(format!(
                "{name} must have exactly 3 distinct terms, has {}",
                p.weight()
            )));
        }
    }
    let am = a.to_matrix();
    let bm = b.to_matrix();
    let hx = am.hstack(&bm);
    let hz = bm.transpose().hstack(&am.transpose());
    if !hx.matmul(&hz.transpose()).is_zero() {
        return Err(Error::Invariant("H^X (H^Z)^T is nonzero".into()));
    }
    let mut code = BBCode {
        group,
        a,
        b,
        hx,
        hz,
        k: 0,
        distance_upper: None,
        distance_exact: None,
    };
    code.k = compute_k(&code)?;
    Ok(code)
}

/// Like [`build_code`] but insists every term is a pure power of `x` or `y`.
pub fn build_code_strict(l: usize, m: usize, a: BivariatePoly, b: BivariatePoly) -> Result<BBCode> {
    if !a.is_pure_powers() || !b.is_pure_powers() {
        return Err(Error::InvalidCode("terms must be powers of x or y".into()));
    }
    build_code(l, m, a, b)
}

/// `k` as `n - 2 rank(H^Z)` and as `2 dim(ker A ∩ ker B)`; fails if they differ.
pub fn compute_k(code: &BBCode) -> Result<usize> {
    let n = code.n();
    let rx = code.hx.rank();
    let rz = code.hz.rank();
    if rx != rz {
        return Err(Error::Invariant(format!("rank H^X = {rx} but rank H^Z = {rz}")));
    }
    let k1 = n - 2 * rz;
    let stacked = code.a.to_matrix().vstack(&code.b.to_matrix());
    let k2 = 2 * (stacked.cols() - stacked.rank());
    if k1 != k2 {
        return Err(Error::Invariant(format!("k formulas disagree: {k1} vs {k2}")));
    }
    Ok(k1)
}

impl BBCode {
    pub fn from_spec(spec: &CodeSpec) -> Result<Self> {
        spec.build()
    }

    pub fn lm(&self) -> usize {
        self.group.order()
    }

    pub fn n(&self) -> usize {
        2 * self.group.order()
    }

    pub fn spec(&self) -> CodeSpec {
        CodeSpec::new(self.group.l, self.group.m, &self.a.to_string(), &self.b.to_string())
    }

    pub fn a_term(&self, i: usize) -> Monomial {
        self.a.term(i)
    }

    pub fn b_term(&self, i: usize) -> Monomial {
        self.b.term(i)
    }

    pub fn term(&self, t: Term) -> Monomial {
        match t {
            Term::A(i) => self.a.term(i as usize),
            Term::B(i) => self.b.term(i as usize),
        }
    }

    pub fn check_matrix(&self, t: PauliType) -> &BinMatrix {
        match t {
            PauliType::X => &self.hx,
            PauliType::Z => &self.hz,
        }
    }

    pub fn tanner_graph(&self) -> TannerGraph {
        TannerGraph::new(self)
    }

    /// Classifies `v` (over the `n` data qubits) as an operator of type `t`.
    pub fn logical_operator_syndromes(&self, v: &BinVector, t: PauliType) -> Result<OperatorClass> {
        if v.len() != self.n() {
            return Err(Error::Dimension(format!(
                "operator has length {}, code has {} qubits",
                v.len(),
                self.n()
            )));
        }
        let (same, other) = match t {
            PauliType::X => (&self.hx, &self.hz),
            PauliType::Z => (&self.hz, &self.hx),
        };
        if same.in_rowspace(v) {
            Ok(OperatorClass::Stabilizer)
        } else if other.mul_vec(v).is_zero() {
            Ok(OperatorClass::Logical)
        } else {
            Ok(OperatorClass::Neither)
        }
    }

    /// `k` logical operators of type `t`, independent modulo stabilizers.
    /// Rows are chosen greedily from the kernel basis of the opposite checks.
    pub fn logical_basis(&self, t: PauliType) -> BinMatrix {
        let (same, other) = match t {
            PauliType::X => (&self.hx, &self.hz),
            PauliType::Z => (&self.hz, &self.hx),
        };
        let mut span = IncrementalBasis::from_matrix(same);
        let mut out = BinMatrix::zeros(0, self.n());
        for v in other.nullspace_basis() {
            if out.rows() == self.k {
                break;
            }
            if span.insert(&v) {
                out.push_row(&v);
            }
        }
        out
    }

    /// `l*m / |<A_i A_j^T, B_i B_j^T>|`.
    pub fn components_by_formula(&self) -> usize {
        let g = self.group;
        let mut gens = Vec::new();
        for p in [&self.a, &self.b] {
            for &s in p.terms() {
                for &t in p.terms() {
                    if s != t {
                        gens.push(g.div(s, t));
                    }
                }
            }
        }
        g.order() / g.subgroup(&gens).len()
    }

    pub fn components_by_traversal(&self) -> usize {
        let graph = self.tanner_graph();
        let all: Vec<usize> = (0..graph.edges.len()).collect();
        graph.components(&all).len()
    }

    /// Tanner graph component count; both computations must agree.
    pub fn connected_components(&self) -> Result<usize> {
        let f = self.components_by_formula();
        let t = self.components_by_traversal();
        if f != t {
            return Err(Error::Invariant(format!(
                "component count by group order {f} differs from traversal {t}"
            )));
        }
        Ok(f)
    }

    pub fn thickness_decomposition(&self) -> ThicknessReport {
        let graph = self.tanner_graph();
        let g = self.group;
        let ga = [Term::A(2), Term::A(3), Term::B(3)];
        let gb = [Term::A(1), Term::B(1), Term::B(2)];
        let p_a = g.element_order(g.div(self.a_term(3), self.a_term(2)));
        let p_b = g.element_order(g.div(self.b_term(2), self.b_term(1)));
        ThicknessReport {
            g_a: graph.wheel_check(&ga, &[Term::A(2), Term::A(3)], p_a),
            g_b: graph.wheel_check(&gb, &[Term::B(1), Term::B(2)], p_b),
        }
    }

    /// Every tuple `(i, j, g, h)` satisfying the toric-layout condition, in
    /// lexicographic order.
    pub fn toric_layouts(&self) -> Vec<ToricLayout> {
        let g = self.group;
        let mut out = Vec::new();
        for i in 1..=3 {
            for j in 1..=3 {
                if i == j {
                    continue;
                }
                let u = g.div(self.a_term(i), self.a_term(j));
                let mu = g.element_order(u);
                for gi in 1..=3 {
                    for h in 1..=3 {
                        if gi == h {
                            continue;
                        }
                        let v = g.div(self.b_term(gi), self.b_term(h));
                        let lambda = g.element_order(v);
                        if mu * lambda == g.order() && g.subgroup(&[u, v]).len() == g.order() {
                            out.push(ToricLayout {
                                i,
                                j,
                                g: gi,
                                h,
                                mu,
                                lambda,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn toric_layout(&self) -> Option<ToricLayout> {
        self.toric_layouts().into_iter().next()
    }
}

/// Generating term of a Tanner edge (one-based index).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    A(u8),
    B(u8),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::A(i) => write!(f, "A{i}"),
            Term::B(i) => write!(f, "B{i}"),
        }
    }
}

/// Qubit register.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Register {
    X,
    L,
    R,
    Z,
}

impl Register {
    pub const ALL: [Register; 4] = [Register::X, Register::L, Register::R, Register::Z];

    pub fn name(self) -> &'static str {
        match self {
            Register::X => "X",
            Register::L => "L",
            Register::R => "R",
            Register::Z => "Z",
        }
    }

    pub fn parse(s: &str) -> Option<Register> {
        match s {
            "X" => Some(Register::X),
            "L" => Some(Register::L),
            "R" => Some(Register::R),
            "Z" => Some(Register::Z),
            _ => None,
        }
    }

    pub fn is_data(self) -> bool {
        matches!(self, Register::L | Register::R)
    }
}

/// `q(T, alpha)` with `alpha` stored as its index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Qubit {
    pub reg: Register,
    pub idx: usize,
}

impl Qubit {
    pub fn new(reg: Register, idx: usize) -> Self {
        Qubit { reg, idx }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TannerEdge {
    /// X or Z check.
    pub check: Qubit,
    /// L or R data qubit.
    pub data: Qubit,
    pub tag: Term,
}

/// Tanner graph with vertices `q(T, alpha)`; vertex ids follow the order
/// L, R, X, Z with `l*m` vertices each.
#[derive(Clone, Debug)]
pub struct TannerGraph {
    pub lm: usize,
    pub edges: Vec<TannerEdge>,
}

impl TannerGraph {
    pub fn new(code: &BBCode) -> Self {
        let g = code.group;
        let mut edges = Vec::with_capacity(12 * g.order());
        for beta in g.elements() {
            let bi = g.index(beta);
            for t in 1..=3u8 {
                let at = code.a_term(t as usize);
                let bt = code.b_term(t as usize);
                edges.push(TannerEdge {
                    check: Qubit::new(Register::X, bi),
                    data: Qubit::new(Register::L, g.index(g.mul(beta, at))),
                    tag: Term::A(t),
                });
                edges.push(TannerEdge {
                    check: Qubit::new(Register::X, bi),
                    data: Qubit::new(Register::R, g.index(g.mul(beta, bt))),
                    tag: Term::B(t),
                });
                edges.push(TannerEdge {
                    check: Qubit::new(Register::Z, bi),
                    data: Qubit::new(Register::L, g.index(g.div(beta, bt))),
                    tag: Term::B(t),
                });
                edges.push(TannerEdge {
                    check: Qubit::new(Register::Z, bi),
                    data: Qubit::new(Register::R, g.index(g.div(beta, at))),
                    tag: Term::A(t),
                });
            }
        }
        TannerGraph {
            lm: g.order(),
            edges,
        }
    }

    pub fn vertex_count(&self) -> usize {
        4 * self.lm
    }

    pub fn vertex_id(&self, q: Qubit) -> usize {
        let off = match q.reg {
            Register::L => 0,
            Register::R => 1,
            Register::X => 2,
            Register::Z => 3,
        };
        off * self.lm + q.idx
    }

    pub fn vertex(&self, id: usize) -> Qubit {
        let reg = [Register::L, Register::R, Register::X, Register::Z][id / self.lm];
        Qubit::new(reg, id % self.lm)
    }

    pub fn degrees(&self, edge_ids: &[usize]) -> Vec<usize> {
        let mut d = vec![0; self.vertex_count()];
        for &e in edge_ids {
            d[self.vertex_id(self.edges[e].check)] += 1;
            d[self.vertex_id(self.edges[e].data)] += 1;
        }
        d
    }

    pub fn contains_edge(&self, check: Qubit, data: Qubit) -> bool {
        self.edges.iter().any(|e| e.check == check && e.data == data)
    }

    /// Edge set as `(check, data)` pairs for fast membership tests.
    pub fn edge_set(&self) -> HashSet<(Qubit, Qubit)> {
        self.edges.iter().map(|e| (e.check, e.data)).collect()
    }

    fn adjacency(&self, edge_ids: &[usize]) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.vertex_count()];
        for &e in edge_ids {
            let u = self.vertex_id(self.edges[e].check);
            let v = self.vertex_id(self.edges[e].data);
            adj[u].push((v, e));
            adj[v].push((u, e));
        }
        adj
    }

    /// Connected components (vertex id lists) of the subgraph spanned by
    /// `edge_ids`, over all vertices.
    pub fn components(&self, edge_ids: &[usize]) -> Vec<Vec<usize>> {
        let adj = self.adjacency(edge_ids);
        let mut seen = vec![false; self.vertex_count()];
        let mut out = Vec::new();
        for s in 0..self.vertex_count() {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s];
            let mut stack = vec![s];
            while let Some(u) = stack.pop() {
                for &(v, _) in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                        stack.push(v);
                    }
                }
            }
            out.push(comp);
        }
        out
    }

    /// Checks that every component of the subgraph with edge tags `tags`
    /// is a circular ladder: two disjoint rim cycles (edges tagged `rim`)
    /// joined by spokes in a consistent rotation.
    fn wheel_check(&self, tags: &[Term], rim: &[Term], expected_half: usize) -> WheelReport {
        let edge_ids: Vec<usize> = (0..self.edges.len())
            .filter(|&e| tags.contains(&self.edges[e].tag))
            .collect();
        let degrees = self.degrees(&edge_ids);
        let mut problems = Vec::new();
        if let Some(v) = degrees.iter().position(|&d| d != 3) {
            problems.push(format!(
                "vertex {:?} has degree {}",
                self.vertex(v),
                degrees[v]
            ));
        }
        let adj = self.adjacency(&edge_ids);
        let is_rim = |e: usize| rim.contains(&self.edges[e].tag);
        let comps = self.components(&edge_ids);
        let mut half_lengths = BTreeSet::new();
        if problems.is_empty() {
            for comp in &comps {
                match self.ladder_shape(comp, &adj, &is_rim) {
                    Ok(p) => {
                        half_lengths.insert(p);
                    }
                    Err(msg) => {
                        problems.push(msg);
                        break;
                    }
                }
            }
        }
        if problems.is_empty() && half_lengths.iter().any(|&p| p != expected_half) {
            problems.push(format!(
                "rim half-lengths {half_lengths:?} differ from element order {expected_half}"
            ));
        }
        WheelReport {
            edge_count: edge_ids.len(),
            components: comps.len(),
            half_length: expected_half,
            all_degree_three: degrees.iter().all(|&d| d == 3),
            problems,
        }
    }

    fn ladder_shape(
        &self,
        comp: &[usize],
        adj: &[Vec<(usize, usize)>],
        is_rim: &dyn Fn(usize) -> bool,
    ) -> std::result::Result<usize, String> {
        // Walk the rim cycle through a vertex, returning vertices in order.
        let walk = |start: usize| -> std::result::Result<Vec<usize>, String> {
            let mut cycle = vec![start];
            let mut prev_edge = usize::MAX;
            let mut cur = start;
            loop {
                let rims: Vec<&(usize, usize)> =
                    adj[cur].iter().filter(|(_, e)| is_rim(*e)).collect();
                if rims.len() != 2 {
                    return Err(format!("vertex {:?} has {} rim edges", self.vertex(cur), rims.len()));
                }
                let &&(next, e) = rims
                    .iter()
                    .find(|(_, e)| *e != prev_edge)
                    .ok_or_else(|| format!("rim dead end at {:?}", self.vertex(cur)))?;
                if next == start {
                    return Ok(cycle);
                }
                if cycle.len() > comp.len() {
                    return Err("rim walk does not close".into());
                }
                cycle.push(next);
                prev_edge = e;
                cur = next;
            }
        };
        let spoke = |v: usize| -> std::result::Result<usize, String> {
            let s: Vec<usize> = adj[v]
                .iter()
                .filter(|(_, e)| !is_rim(*e))
                .map(|&(u, _)| u)
                .collect();
            if s.len() != 1 {
                return Err(format!("vertex {:?} has {} spokes", self.vertex(v), s.len()));
            }
            Ok(s[0])
        };
        let outer = walk(comp[0])?;
        let inner = walk(spoke(outer[0])?)?;
        if outer.len() != inner.len() || outer.len() + inner.len() != comp.len() {
            return Err(format!(
                "component of {} vertices has rims of length {} and {}",
                comp.len(),
                outer.len(),
                inner.len()
            ));
        }
        let len = inner.len();
        let mut pos = vec![usize::MAX; self.vertex_count()];
        for (i, &v) in inner.iter().enumerate() {
            pos[v] = i;
        }
        let mut step = None;
        for i in 0..outer.len() {
            let a = pos[spoke(outer[i])?];
            let b = pos[spoke(outer[(i + 1) % len])?];
            if a == usize::MAX || b == usize::MAX {
                return Err("spoke leaves the inner rim".into());
            }
            let d = (b + len - a) % len;
            if d != 1 && d != len - 1 {
                return Err("spokes are not in cyclic order".into());
            }
            if *step.get_or_insert(d) != d {
                return Err("spoke rotation changes direction".into());
            }
        }
        if len % 2 != 0 {
            return Err("odd rim cycle in a bipartite graph".into());
        }
        Ok(len / 2)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WheelReport {
    pub edge_count: usize,
    pub components: usize,
    /// Number of checks (equivalently data qubits) on each rim cycle.
    pub half_length: usize,
    pub all_degree_three: bool,
    pub problems: Vec<String>,
}

impl WheelReport {
    pub fn is_valid(&self) -> bool {
        self.problems.is_empty()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ThicknessReport {
    pub g_a: WheelReport,
    pub g_b: WheelReport,
}

impl ThicknessReport {
    pub fn is_valid(&self) -> bool {
        self.g_a.is_valid() && self.g_b.is_valid()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToricLayout {
    pub i: usize,
    pub j: usize,
    pub g: usize,
    pub h: usize,
    pub mu: usize,
    pub lambda: usize,
}

impl ToricLayout {
    /// Places every vertex on `Z_{2mu} x Z_{2lambda}`. Returns the placement
    /// indexed by Tanner vertex id, or a description of the first failure
    /// (non-bijective placement or an edge that is not a torus edge).
    pub fn embed(&self, code: &BBCode) -> std::result::Result<Vec<(usize, usize)>, String> {
        let g = code.group;
        let graph = code.tanner_graph();
        let u = g.div(code.a_term(self.i), code.a_term(self.j));
        let v = g.div(code.b_term(self.g), code.b_term(self.h));
        let aj_t = g.inv(code.a_term(self.j));
        let bg = code.b_term(self.g);
        let (w, hgt) = (2 * self.mu, 2 * self.lambda);
        let mut place = vec![None; graph.vertex_count()];
        for a in 0..self.mu {
            for b in 0..self.lambda {
                let alpha = g.mul(g.pow(u, a as i64), g.pow(v, b as i64));
                let spots = [
                    (Register::L, alpha, (2 * a, 2 * b)),
                    (Register::R, g.mul(g.mul(alpha, aj_t), bg), (2 * a + 1, 2 * b + 1)),
                    (Register::X, g.mul(alpha, aj_t), (2 * a + 1, 2 * b)),
                    (Register::Z, g.mul(alpha, bg), (2 * a, 2 * b + 1)),
                ];
                for (reg, mono, xy) in spots {
                    let id = graph.vertex_id(Qubit::new(reg, g.index(mono)));
                    if place[id].replace(xy).is_some() {
                        return Err(format!("vertex {:?} placed twice", graph.vertex(id)));
                    }
                }
            }
        }
        let place: Vec<(usize, usize)> = place
            .into_iter()
            .enumerate()
            .map(|(id, p)| p.ok_or_else(|| format!("vertex {:?} not placed", graph.vertex(id))))
            .collect::<std::result::Result<_, _>>()?;
        let tags = [
            Term::A(self.i as u8),
            Term::A(self.j as u8),
            Term::B(self.g as u8),
            Term::B(self.h as u8),
        ];
        let mut used = HashSet::new();
        for e in graph.edges.iter().filter(|e| tags.contains(&e.tag)) {
            let p = place[graph.vertex_id(e.check)];
            let q = place[graph.vertex_id(e.data)];
            let dx = (q.0 + w - p.0) % w;
            let dy = (q.1 + hgt - p.1) % hgt;
            let adjacent = (dy == 0 && (dx == 1 || dx == w - 1)) || (dx == 0 && (dy == 1 || dy == hgt - 1));
            if !adjacent {
                return Err(format!("edge {:?}-{:?} ({}) is not a torus edge", e.check, e.data, e.tag));
            }
            let key = if p < q { (p, q) } else { (q, p) };
            if !used.insert(key) {
                return Err(format!("torus edge {key:?} used twice"));
            }
        }
        if used.len() != 2 * w * hgt {
            return Err(format!("{} torus edges covered, expected {}", used.len(), 2 * w * hgt));
        }
        Ok(place)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn code(n: usize) -> BBCode {
        known_code(n).unwrap().spec.build().unwrap()
    }

    #[test]
    fn parse_polynomials() {
        let g = Group::new(12, 6).unwrap();
        let p = BivariatePoly::parse(g, "x3+y1+y2").unwrap();
        assert_eq!(p.terms(), &[Monomial::new(3, 0), Monomial::new(0, 1), Monomial::new(0, 2)]);
        let q = BivariatePoly::parse(g, " 1 + x^2 + x7y ").unwrap();
        assert_eq!(q.terms(), &[Monomial::ONE, Monomial::new(2, 0), Monomial::new(7, 1)]);
        assert_eq!(q.to_string(), "1+x2+x7y1");
        assert!(BivariatePoly::parse(g, "x3+x15").is_err());
        assert!(matches!(
            BivariatePoly::parse(g, "x3+z1"),
            Err(Error::Parse { column: 4, .. })
        ));
        assert!(BivariatePoly::parse(g, "x3+").is_err());
        assert!(BivariatePoly::parse(g, "").is_err());
    }

    #[test]
    fn spec_json_roundtrip() {
        let s = CodeSpec::from_json(r#"{"l":12, "m":6, "a_poly":"x3+y1+y2", "b_poly":"y3+x1+x2"}"#).unwrap();
        assert_eq!(s.l, 12);
        assert_eq!(CodeSpec::from_json(&s.to_json()).unwrap(), s);
        assert!(matches!(
            CodeSpec::from_json("{\"l\":12,\n \"m\":}"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(CodeSpec::new(0, 6, "x3+y1+y2", "y3+x1+x2").build().is_err());
        assert!(CodeSpec::new(6, 6, "x3+y1+y1", "y3+x1+x2").build().is_err());
        assert!(CodeSpec::new(6, 6, "x3+y1", "y3+x1+x2").build().is_err());
        let g = Group::new(6, 6).unwrap();
        let mixed = BivariatePoly::parse(g, "x3y1+y1+y2").unwrap();
        let b = BivariatePoly::parse(g, "y3+x1+x2").unwrap();
        assert!(build_code_strict(6, 6, mixed.clone(), b.clone()).is_err());
        assert!(build_code(6, 6, mixed, b).is_ok());
    }

    #[test]
    fn small_code_parameters() {
        let c = code(72);
        assert_eq!((c.n(), c.k), (72, 12));
        assert_eq!(c.hx.rank(), 30);
        assert_eq!(c.hx.row_weights(), vec![6; 36]);
        assert_eq!(c.hz.col_weights(), vec![3; 72]);
        assert_eq!(c.connected_components().unwrap(), 1);
    }

    #[test]
    fn equal_polynomials_give_twice_kernel_dimension() {
        let g = Group::new(7, 1).unwrap();
        let a = BivariatePoly::parse(g, "1+x1+x3").unwrap();
        let c = build_code(7, 1, a.clone(), a.clone()).unwrap();
        let am = a.to_matrix();
        assert_eq!(c.k, 2 * (am.cols() - am.rank()));
        assert_eq!(c.k, 6);
    }

    #[test]
    fn tanner_graph_shape() {
        let c = code(72);
        let t = c.tanner_graph();
        assert_eq!(t.edges.len(), 12 * 36);
        let all: Vec<usize> = (0..t.edges.len()).collect();
        assert!(t.degrees(&all).iter().all(|&d| d == 6));
        for e in &t.edges {
            let h = if e.check.reg == Register::X { &c.hx } else { &c.hz };
            let col = if e.data.reg == Register::L { e.data.idx } else { 36 + e.data.idx };
            assert!(h.get(e.check.idx, col));
        }
    }

    #[test]
    fn thickness_of_gross_code() {
        let c = code(144);
        let r = c.thickness_decomposition();
        assert!(r.is_valid(), "{r:?}");
        assert_eq!(r.g_a.half_length, 6);
        assert_eq!(r.g_a.edge_count, 6 * 72);
        assert_eq!(r.g_b.edge_count, 6 * 72);
        assert!(r.g_a.all_degree_three && r.g_b.all_degree_three);
    }

    #[test]
    fn toric_layouts() {
        let c90 = code(90);
        let layouts = c90.toric_layouts();
        assert!(layouts.iter().any(|t| (t.i, t.j, t.g, t.h) == (2, 3, 1, 3)));
        for t in &layouts {
            t.embed(&c90).unwrap();
        }
        let none = CodeSpec::new(28, 14, "x26+y6+y8", "y7+x9+x20").build().unwrap();
        assert!(none.toric_layout().is_none());
        let some = CodeSpec::new(18, 12, "x1+y11+y3", "y2+x15+x1").build().unwrap();
        let layouts = some.toric_layouts();
        assert!(!layouts.is_empty());
        assert!(layouts.iter().all(|t| (t.mu, t.lambda) == (36, 6)));
        layouts[0].embed(&some).unwrap();
    }

    #[test]
    fn doubled_x_splits_gross_code() {
        let c = CodeSpec::new(12, 6, "x6+y1+y2", "y3+x2+x4").build().unwrap();
        assert_eq!(c.connected_components().unwrap(), 2);
    }

    #[test]
    fn classify_operators() {
        let c = code(72);
        let row = c.hx.row(3);
        assert_eq!(c.logical_operator_syndromes(&row, PauliType::X).unwrap(), OperatorClass::Stabilizer);
        let zero = BinVector::zeros(72);
        assert_eq!(c.logical_operator_syndromes(&zero, PauliType::Z).unwrap(), OperatorClass::Stabilizer);
        let single = BinVector::from_support(72, &[0]);
        assert_eq!(c.logical_operator_syndromes(&single, PauliType::X).unwrap(), OperatorClass::Neither);
        assert!(c.logical_operator_syndromes(&BinVector::zeros(5), PauliType::X).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(30))]

        #[test]
        fn polynomial_algebra_matches_matrices(l in 1usize..7, m in 1usize..7, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let g = Group::new(l, m).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut rand_poly = || BivariatePoly::from_terms_mod2(
                g,
                (0..4).map(|_| g.from_index(rng.gen_range(0..g.order()))),
            );
            let p = rand_poly();
            let q = rand_poly();
            prop_assert_eq!(p.mul(&q).to_matrix(), p.to_matrix().matmul(&q.to_matrix()));
            prop_assert_eq!(p.transpose().to_matrix(), p.to_matrix().transpose());
            prop_assert_eq!(p.mul(&q), q.mul(&p));
        }
    }
}
