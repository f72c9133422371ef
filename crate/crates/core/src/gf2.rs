//! Bit-packed linear algebra over GF(2).
//!
//! [`BinMatrix`] stores rows as packed 64-bit words and is used for all
//! elimination work. [`SparseBinMatrix`] keeps sorted row and column
//! supports and is the view consumed by message passing.

use std::fmt;

use crate::error::{Error, Result};

const WORD: usize = 64;

#[inline]
fn words_for(bits: usize) -> usize {
    (bits + WORD - 1) / WORD
}

/// Packed binary vector.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BinVector {
    len: usize,
    words: Vec<u64>,
}

impl BinVector {
    pub fn zeros(len: usize) -> Self {
        BinVector {
            len,
            words: vec![0; words_for(len)],
        }
    }

    pub fn from_support(len: usize, support: &[usize]) -> Self {
        let mut v = BinVector::zeros(len);
        for &i in support {
            v.flip(i);
        }
        v
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        let mut v = BinVector::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b & 1 == 1 {
                v.set(i, true);
            }
        }
        v
    }

    pub(crate) fn from_words(len: usize, words: Vec<u64>) -> Self {
        debug_assert_eq!(words.len(), words_for(len));
        BinVector { len, words }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "index {i} out of range {}", self.len);
        (self.words[i / WORD] >> (i % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "index {i} out of range {}", self.len);
        let mask = 1u64 << (i % WORD);
        if value {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "index {i} out of range {}", self.len);
        self.words[i / WORD] ^= 1u64 << (i % WORD);
    }

    /// Hamming weight.
    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn xor_assign(&mut self, other: &BinVector) {
        assert_eq!(self.len, other.len, "length mismatch");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn xor(&self, other: &BinVector) -> BinVector {
        let mut out = self.clone();
        out.xor_assign(other);
        out
    }

    /// Parity of the overlap.
    pub fn dot(&self, other: &BinVector) -> bool {
        assert_eq!(self.len, other.len, "length mismatch");
        let ones: u32 = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum();
        ones & 1 == 1
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let tz = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * WORD + tz)
                }
            })
        })
    }

    pub fn support(&self) -> Vec<usize> {
        self.iter_ones().collect()
    }

    pub fn to_bits(&self) -> Vec<u8> {
        (0..self.len).map(|i| self.get(i) as u8).collect()
    }

    /// Concatenation `[self | other]`.
    pub fn concat(&self, other: &BinVector) -> BinVector {
        let mut out = BinVector::zeros(self.len + other.len);
        for i in self.iter_ones() {
            out.set(i, true);
        }
        for i in other.iter_ones() {
            out.set(self.len + i, true);
        }
        out
    }

    pub fn slice(&self, start: usize, end: usize) -> BinVector {
        assert!(start <= end && end <= self.len);
        let mut out = BinVector::zeros(end - start);
        for i in self.iter_ones().filter(|&i| i >= start && i < end) {
            out.set(i - start, true);
        }
        out
    }
}

impl fmt::Debug for BinVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BinVector[")?;
        for i in 0..self.len {
            write!(f, "{}", self.get(i) as u8)?;
        }
        write!(f, "]")
    }
}

/// Dense packed binary matrix, row major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinMatrix {
    rows: usize,
    cols: usize,
    stride: usize,
    data: Vec<u64>,
}

impl BinMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let stride = words_for(cols);
        BinMatrix {
            rows,
            cols,
            stride,
            data: vec![0; rows * stride],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = BinMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn from_rows(cols: usize, rows: &[BinVector]) -> Self {
        let mut m = BinMatrix::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), cols, "row {i} has wrong length");
            m.row_words_mut(i).copy_from_slice(r.words());
        }
        m
    }

    pub fn from_dense(rows: &[Vec<u8>]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let vs: Vec<BinVector> = rows.iter().map(|r| BinVector::from_bits(r)).collect();
        BinMatrix::from_rows(cols, &vs)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        assert!(r < self.rows && c < self.cols);
        (self.data[r * self.stride + c / WORD] >> (c % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        assert!(r < self.rows && c < self.cols);
        let w = &mut self.data[r * self.stride + c / WORD];
        let mask = 1u64 << (c % WORD);
        if value {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, r: usize, c: usize) {
        assert!(r < self.rows && c < self.cols);
        self.data[r * self.stride + c / WORD] ^= 1u64 << (c % WORD);
    }

    #[inline]
    pub fn row_words(&self, r: usize) -> &[u64] {
        &self.data[r * self.stride..(r + 1) * self.stride]
    }

    #[inline]
    fn row_words_mut(&mut self, r: usize) -> &mut [u64] {
        &mut self.data[r * self.stride..(r + 1) * self.stride]
    }

    pub fn row(&self, r: usize) -> BinVector {
        BinVector::from_words(self.cols, self.row_words(r).to_vec())
    }

    pub fn column(&self, c: usize) -> BinVector {
        let mut v = BinVector::zeros(self.rows);
        for r in 0..self.rows {
            if self.get(r, c) {
                v.set(r, true);
            }
        }
        v
    }

    pub fn row_support(&self, r: usize) -> Vec<usize> {
        self.row(r).support()
    }

    /// `rows[dst] ^= rows[src]`.
    fn xor_rows(&mut self, dst: usize, src: usize) {
        debug_assert_ne!(dst, src);
        let s = self.stride;
        let (a, b) = if dst < src {
            let (lo, hi) = self.data.split_at_mut(src * s);
            (&mut lo[dst * s..dst * s + s], &hi[..s])
        } else {
            let (lo, hi) = self.data.split_at_mut(dst * s);
            (&mut hi[..s], &lo[src * s..src * s + s])
        };
        for (x, y) in a.iter_mut().zip(b.iter()) {
            *x ^= *y;
        }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for w in 0..self.stride {
            self.data.swap(a * self.stride + w, b * self.stride + w);
        }
    }

    pub fn transpose(&self) -> BinMatrix {
        let mut t = BinMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in self.row(r).iter_ones() {
                t.set(c, r, true);
            }
        }
        t
    }

    pub fn mul_vec(&self, v: &BinVector) -> BinVector {
        assert_eq!(v.len(), self.cols, "vector length must equal column count");
        let mut out = BinVector::zeros(self.rows);
        for r in 0..self.rows {
            let ones: u32 = self
                .row_words(r)
                .iter()
                .zip(v.words())
                .map(|(a, b)| (a & b).count_ones())
                .sum();
            if ones & 1 == 1 {
                out.set(r, true);
            }
        }
        out
    }

    pub fn matmul(&self, other: &BinMatrix) -> BinMatrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = BinMatrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in self.row(r).iter_ones() {
                let (dst, src) = (r * out.stride, k * other.stride);
                for w in 0..out.stride {
                    out.data[dst + w] ^= other.data[src + w];
                }
            }
        }
        out
    }

    /// `[self | other]`.
    pub fn hstack(&self, other: &BinMatrix) -> BinMatrix {
        assert_eq!(self.rows, other.rows);
        let mut out = BinMatrix::zeros(self.rows, self.cols + other.cols);
        for r in 0..self.rows {
            for c in self.row(r).iter_ones() {
                out.set(r, c, true);
            }
            for c in other.row(r).iter_ones() {
                out.set(r, self.cols + c, true);
            }
        }
        out
    }

    /// `[self ; other]`.
    pub fn vstack(&self, other: &BinMatrix) -> BinMatrix {
        assert_eq!(self.cols, other.cols);
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        BinMatrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            stride: self.stride,
            data,
        }
    }

    pub fn push_row(&mut self, v: &BinVector) {
        assert_eq!(v.len(), self.cols);
        self.data.extend_from_slice(v.words());
        self.rows += 1;
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&w| w == 0)
    }

    pub fn row_weights(&self) -> Vec<usize> {
        (0..self.rows)
            .map(|r| {
                self.row_words(r)
                    .iter()
                    .map(|w| w.count_ones() as usize)
                    .sum()
            })
            .collect()
    }

    pub fn col_weights(&self) -> Vec<usize> {
        let mut w = vec![0; self.cols];
        for r in 0..self.rows {
            for c in self.row(r).iter_ones() {
                w[c] += 1;
            }
        }
        w
    }

    pub fn to_sparse(&self) -> SparseBinMatrix {
        let rows: Vec<Vec<usize>> = (0..self.rows).map(|r| self.row_support(r)).collect();
        SparseBinMatrix::from_row_supports(self.cols, rows)
    }

    /// Reduced row echelon form with pivots chosen as the first nonzero column
    /// and the lowest row index holding it.
    pub fn echelon(&self) -> Echelon {
        Echelon::new(self.clone())
    }

    pub fn rank(&self) -> usize {
        self.echelon().rank()
    }

    /// Basis of `{v : Mv = 0}`.
    pub fn nullspace_basis(&self) -> Vec<BinVector> {
        self.echelon().nullspace_basis()
    }

    /// Some `x` with `Mx = s`, or `None` when the system is inconsistent.
    pub fn solve(&self, s: &BinVector) -> Option<BinVector> {
        assert_eq!(s.len(), self.rows, "syndrome length must equal row count");
        let mut aug = self.clone();
        let mut rhs: Vec<bool> = (0..self.rows).map(|i| s.get(i)).collect();
        let mut pivots = Vec::new();
        let mut rank = 0;
        for c in 0..aug.cols {
            let Some(p) = (rank..aug.rows).find(|&r| aug.get(r, c)) else {
                continue;
            };
            aug.swap_rows(rank, p);
            rhs.swap(rank, p);
            for r in 0..aug.rows {
                if r != rank && aug.get(r, c) {
                    aug.xor_rows(r, rank);
                    rhs[r] ^= rhs[rank];
                }
            }
            pivots.push(c);
            rank += 1;
            if rank == aug.rows {
                break;
            }
        }
        if rhs[rank..].iter().any(|&b| b) {
            return None;
        }
        let mut x = BinVector::zeros(self.cols);
        for (i, &c) in pivots.iter().enumerate() {
            if rhs[i] {
                x.set(c, true);
            }
        }
        Some(x)
    }

    pub fn in_rowspace(&self, v: &BinVector) -> bool {
        assert_eq!(v.len(), self.cols, "vector length must equal column count");
        self.echelon().reduce(v).is_zero()
    }

    /// Plain-text dump: `"rows cols"` then one line of `0`/`1` per row.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.rows, self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                s.push(if self.get(r, c) { '1' } else { '0' });
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<BinMatrix> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .by_ref()
            .find(|(_, l)| !l.trim().is_empty())
            .ok_or_else(|| Error::parse(1, 1, "missing header"))?;
        let mut parts = header.split_whitespace();
        let mut dim = |what: &str| -> Result<usize> {
            let tok = parts
                .next()
                .ok_or_else(|| Error::parse(1, 1, format!("missing {what}")))?;
            tok.parse::<usize>()
                .map_err(|_| Error::parse(1, 1, format!("bad {what} '{tok}'")))
        };
        let rows = dim("row count")?;
        let cols = dim("column count")?;
        if parts.next().is_some() {
            return Err(Error::parse(1, 1, "trailing tokens in header"));
        }
        // Refuse absurd headers before allocating.
        if rows.saturating_mul(cols) > 1 << 32 {
            return Err(Error::parse(1, 1, "matrix too large"));
        }
        let mut m = BinMatrix::zeros(rows, cols);
        let mut r = 0;
        for (ln, line) in lines {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            if r == rows {
                return Err(Error::parse(ln + 1, 1, "more rows than declared"));
            }
            if line.chars().count() != cols {
                return Err(Error::parse(
                    ln + 1,
                    1,
                    format!("expected {cols} entries, found {}", line.chars().count()),
                ));
            }
            for (c, ch) in line.chars().enumerate() {
                match ch {
                    '0' => {}
                    '1' => m.set(r, c, true),
                    other => {
                        return Err(Error::parse(ln + 1, c + 1, format!("unexpected '{other}'")))
                    }
                }
            }
            r += 1;
        }
        if r != rows {
            return Err(Error::parse(
                text.lines().count().max(1),
                1,
                format!("expected {rows} rows, found {r}"),
            ));
        }
        Ok(m)
    }
}

impl fmt::Debug for BinMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BinMatrix {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows.min(32) {
            for c in 0..self.cols.min(128) {
                write!(f, "{}", self.get(r, c) as u8)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Reduced row echelon form of a matrix.
#[derive(Clone, Debug)]
pub struct Echelon {
    reduced: BinMatrix,
    pivots: Vec<usize>,
}

impl Echelon {
    fn new(mut m: BinMatrix) -> Self {
        let mut pivots = Vec::new();
        let mut rank = 0;
        for c in 0..m.cols {
            if rank == m.rows {
                break;
            }
            let Some(p) = (rank..m.rows).find(|&r| m.get(r, c)) else {
                continue;
            };
            m.swap_rows(rank, p);
            for r in 0..m.rows {
                if r != rank && m.get(r, c) {
                    m.xor_rows(r, rank);
                }
            }
            pivots.push(c);
            rank += 1;
        }
        Echelon { reduced: m, pivots }
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    pub fn matrix(&self) -> &BinMatrix {
        &self.reduced
    }

    /// Reduce `v` against the pivot rows; zero iff `v` lies in the row space.
    pub fn reduce(&self, v: &BinVector) -> BinVector {
        let mut v = v.clone();
        for (i, &c) in self.pivots.iter().enumerate() {
            if v.get(c) {
                for (a, b) in v.words.iter_mut().zip(self.reduced.row_words(i)) {
                    *a ^= b;
                }
            }
        }
        v
    }

    pub fn nullspace_basis(&self) -> Vec<BinVector> {
        let cols = self.reduced.cols;
        let mut is_pivot = vec![false; cols];
        for &c in &self.pivots {
            is_pivot[c] = true;
        }
        (0..cols)
            .filter(|&c| !is_pivot[c])
            .map(|free| {
                let mut v = BinVector::zeros(cols);
                v.set(free, true);
                for (i, &p) in self.pivots.iter().enumerate() {
                    if self.reduced.get(i, free) {
                        v.set(p, true);
                    }
                }
                v
            })
            .collect()
    }
}

/// Growing set of independent vectors kept in echelon form.
#[derive(Clone, Debug)]
pub struct IncrementalBasis {
    len: usize,
    rows: Vec<BinVector>,
    pivots: Vec<usize>,
}

impl IncrementalBasis {
    pub fn new(len: usize) -> Self {
        IncrementalBasis {
            len,
            rows: Vec::new(),
            pivots: Vec::new(),
        }
    }

    pub fn from_matrix(m: &BinMatrix) -> Self {
        let mut b = IncrementalBasis::new(m.cols());
        for r in 0..m.rows() {
            b.insert(&m.row(r));
        }
        b
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn reduce(&self, v: &BinVector) -> BinVector {
        assert_eq!(v.len(), self.len);
        let mut v = v.clone();
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            if v.get(p) {
                v.xor_assign(row);
            }
        }
        v
    }

    pub fn contains(&self, v: &BinVector) -> bool {
        self.reduce(v).is_zero()
    }

    /// Adds `v` if it is independent of the current span; returns whether it was.
    pub fn insert(&mut self, v: &BinVector) -> bool {
        let r = self.reduce(v);
        let lead = r.iter_ones().next();
        match lead {
            Some(p) => {
                self.rows.push(r);
                self.pivots.push(p);
                true
            }
            None => false,
        }
    }
}

/// Row/column support lists of a binary matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseBinMatrix {
    rows: usize,
    cols: usize,
    row_support: Vec<Vec<usize>>,
    col_support: Vec<Vec<usize>>,
}

impl SparseBinMatrix {
    /// Entries listed twice cancel.
    pub fn from_row_supports(cols: usize, rows: Vec<Vec<usize>>) -> Self {
        let nrows = rows.len();
        let mut row_support = Vec::with_capacity(nrows);
        let mut col_support = vec![Vec::new(); cols];
        for (r, mut support) in rows.into_iter().enumerate() {
            support.sort_unstable();
            let support = cancel_pairs(support);
            for &c in &support {
                assert!(c < cols, "column {c} out of range {cols}");
                col_support[c].push(r);
            }
            row_support.push(support);
        }
        SparseBinMatrix {
            rows: nrows,
            cols,
            row_support,
            col_support,
        }
    }

    pub fn from_column_supports(rows: usize, columns: Vec<Vec<usize>>) -> Self {
        let ncols = columns.len();
        let mut row_lists = vec![Vec::new(); rows];
        for (c, support) in columns.into_iter().enumerate() {
            for r in support {
                assert!(r < rows, "row {r} out of range {rows}");
                row_lists[r].push(c);
            }
        }
        SparseBinMatrix::from_row_supports(ncols, row_lists)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[usize] {
        &self.row_support[r]
    }

    pub fn col(&self, c: usize) -> &[usize] {
        &self.col_support[c]
    }

    pub fn nnz(&self) -> usize {
        self.row_support.iter().map(Vec::len).sum()
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.row_support[r].binary_search(&c).is_ok()
    }

    pub fn max_row_weight(&self) -> usize {
        self.row_support.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn max_col_weight(&self) -> usize {
        self.col_support.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn mul_vec(&self, v: &BinVector) -> BinVector {
        assert_eq!(v.len(), self.cols);
        let mut out = BinVector::zeros(self.rows);
        for (r, support) in self.row_support.iter().enumerate() {
            if support.iter().filter(|&&c| v.get(c)).count() % 2 == 1 {
                out.set(r, true);
            }
        }
        out
    }

    /// `M * x` where `x` is given by its support.
    pub fn mul_support(&self, support: &[usize]) -> BinVector {
        let mut out = BinVector::zeros(self.rows);
        for &c in support {
            for &r in &self.col_support[c] {
                out.flip(r);
            }
        }
        out
    }

    pub fn column_vector(&self, c: usize) -> BinVector {
        BinVector::from_support(self.rows, &self.col_support[c])
    }

    pub fn to_dense(&self) -> BinMatrix {
        let mut m = BinMatrix::zeros(self.rows, self.cols);
        for (r, support) in self.row_support.iter().enumerate() {
            for &c in support {
                m.set(r, c, true);
            }
        }
        m
    }

    /// Append a row given by its support.
    pub fn with_row(&self, support: &[usize]) -> SparseBinMatrix {
        let mut rows = self.row_support.clone();
        rows.push(support.to_vec());
        SparseBinMatrix::from_row_supports(self.cols, rows)
    }
}

fn cancel_pairs(sorted: Vec<usize>) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(sorted.len());
    for c in sorted {
        if out.last() == Some(&c) {
            out.pop();
        } else {
            out.push(c);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, density: f64) -> BinMatrix {
        let mut m = BinMatrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                if rng.gen_bool(density) {
                    m.set(r, c, true);
                }
            }
        }
        m
    }

    #[test]
    fn identity_and_zero_rank() {
        assert_eq!(BinMatrix::identity(5).rank(), 5);
        assert_eq!(BinMatrix::zeros(3, 4).rank(), 0);
        assert!(BinMatrix::identity(4).nullspace_basis().is_empty());
        assert_eq!(BinMatrix::zeros(6, 6).nullspace_basis().len(), 6);
    }

    #[test]
    fn solve_trivial_cases() {
        let s = BinVector::from_bits(&[1, 0, 1, 1]);
        assert_eq!(BinMatrix::identity(4).solve(&s), Some(s.clone()));
        assert_eq!(BinMatrix::zeros(4, 3).solve(&s), None);
        assert_eq!(
            BinMatrix::zeros(4, 3).solve(&BinVector::zeros(4)),
            Some(BinVector::zeros(3))
        );
    }

    #[test]
    fn rowspace_membership() {
        let m = BinMatrix::from_dense(&[vec![1, 1, 0, 0], vec![0, 1, 1, 0]]);
        assert!(m.in_rowspace(&m.row(0)));
        assert!(m.in_rowspace(&BinVector::zeros(4)));
        assert!(m.in_rowspace(&BinVector::from_bits(&[1, 0, 1, 0])));
        assert!(!m.in_rowspace(&BinVector::from_bits(&[0, 0, 0, 1])));
    }

    #[test]
    fn text_roundtrip_and_errors() {
        let m = BinMatrix::from_dense(&[vec![1, 0, 1], vec![0, 1, 1]]);
        let text = m.to_text();
        assert_eq!(text, "2 3\n101\n011\n");
        assert_eq!(BinMatrix::from_text(&text).unwrap(), m);
        assert!(matches!(
            BinMatrix::from_text("2 3\n101\n0x1\n"),
            Err(Error::Parse { line: 3, column: 2, .. })
        ));
        assert!(BinMatrix::from_text("2 3\n101\n").is_err());
        assert!(BinMatrix::from_text("1 3\n10\n").is_err());
        assert!(BinMatrix::from_text("").is_err());
    }

    #[test]
    fn sparse_dense_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_matrix(&mut rng, 17, 70, 0.2);
        let s = m.to_sparse();
        for r in 0..m.rows() {
            for c in 0..m.cols() {
                assert_eq!(m.get(r, c), s.get(r, c));
            }
        }
        assert_eq!(s.to_dense(), m);
        let v = BinVector::from_support(70, &[1, 5, 64, 69]);
        assert_eq!(s.mul_vec(&v), m.mul_vec(&v));
        assert_eq!(s.mul_support(&[1, 5, 64, 69]), m.mul_vec(&v));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn rank_equals_transpose_rank(seed in any::<u64>(), rows in 1usize..200, cols in 1usize..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_matrix(&mut rng, rows, cols, 0.1);
            prop_assert_eq!(m.rank(), m.transpose().rank());
        }

        #[test]
        fn nullspace_vectors_are_annihilated(seed in any::<u64>(), rows in 1usize..80, cols in 1usize..120) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_matrix(&mut rng, rows, cols, 0.15);
            let basis = m.nullspace_basis();
            prop_assert_eq!(basis.len(), cols - m.rank());
            for b in &basis {
                prop_assert!(m.mul_vec(b).is_zero());
            }
            prop_assert_eq!(BinMatrix::from_rows(cols, &basis).rank(), basis.len());
        }

        #[test]
        fn rowspace_iff_rank_unchanged(seed in any::<u64>(), rows in 1usize..60, cols in 1usize..90) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_matrix(&mut rng, rows, cols, 0.1);
            let v = if rng.gen_bool(0.5) {
                // combination of rows
                let mut v = BinVector::zeros(cols);
                for r in 0..rows {
                    if rng.gen_bool(0.5) { v.xor_assign(&m.row(r)); }
                }
                v
            } else {
                random_matrix(&mut rng, 1, cols, 0.3).row(0)
            };
            let mut appended = m.clone();
            appended.push_row(&v);
            prop_assert_eq!(m.in_rowspace(&v), appended.rank() == m.rank());
        }

        #[test]
        fn solve_round_trips(seed in any::<u64>(), rows in 1usize..80, cols in 1usize..120) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_matrix(&mut rng, rows, cols, 0.1);
            let x0 = random_matrix(&mut rng, 1, cols, 0.2).row(0);
            let s = m.mul_vec(&x0);
            let x = m.solve(&s).expect("consistent by construction");
            prop_assert_eq!(m.mul_vec(&x), s);
            let s2 = random_matrix(&mut rng, 1, rows, 0.5).row(0);
            if let Some(x2) = m.solve(&s2) {
                prop_assert_eq!(m.mul_vec(&x2), s2);
            }
        }
    }
}
