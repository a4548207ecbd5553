//! Exact diagonalization: Smith normal form over `Z` and over `Z/p^e`,
//! cokernel Sylow-type extraction with saturation certificates, and `F_p`
//! rank.
//!
//! The modular path pivots on the entry of minimum `p`-valuation (ties broken
//! by smallest row, then column index) so output is deterministic, and uses
//! fixed-width arithmetic only while `p^e` leaves headroom for products in a
//! `u128`; beyond that it switches to arbitrary precision.  The integer path
//! works in `BigInt` throughout.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::abelian::Partition;

/// Largest prime-power modulus handled in word arithmetic; above this the
/// elimination runs on `BigUint`s.
const WORD_MODULUS_LIMIT: u64 = 1 << 62;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LinalgError {
    NotSquare,
    InvalidModulus { detail: String },
    Overflow { detail: String },
}

impl fmt::Display for LinalgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinalgError::NotSquare => write!(f, "matrix must be square"),
            LinalgError::InvalidModulus { detail } => write!(f, "invalid modulus: {detail}"),
            LinalgError::Overflow { detail } => write!(f, "overflow: {detail}"),
        }
    }
}

impl core::error::Error for LinalgError {}

/// Square integer matrix with exact `i64` entries.
///
/// Every matrix produced by the samplers fits comfortably: Laplacian entries
/// are bounded by the vertex count and model entries by the modulus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZMatrix {
    n: usize,
    entries: Vec<i64>,
}

impl ZMatrix {
    pub fn new(n: usize, entries: Vec<i64>) -> Result<Self, LinalgError> {
        if entries.len() != n * n {
            return Err(LinalgError::NotSquare);
        }
        Ok(ZMatrix { n, entries })
    }

    pub fn zero(n: usize) -> Self {
        ZMatrix {
            n,
            entries: vec![0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = ZMatrix::zero(n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self, LinalgError> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(LinalgError::NotSquare);
        }
        Ok(ZMatrix {
            n,
            entries: rows.concat(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.entries[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: i64) {
        self.entries[i * self.n + j] = v;
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Entrywise reduction into canonical residues modulo `p^e`.
    pub fn reduce_mod(&self, p: u64, e: u32) -> Result<ResidueMatrix, LinalgError> {
        let mut m = ResidueMatrix::zero(self.n, self.n, p, e)?;
        match &mut m.repr {
            Repr::Word { pe, v } => {
                let pe_i = *pe as i128;
                for (dst, &src) in v.iter_mut().zip(self.entries.iter()) {
                    *dst = (src as i128).rem_euclid(pe_i) as u64;
                }
            }
            Repr::Big { pe, v } => {
                let pe_int = BigInt::from(pe.clone());
                for (dst, &src) in v.iter_mut().zip(self.entries.iter()) {
                    *dst = BigInt::from(src)
                        .mod_floor(&pe_int)
                        .to_biguint()
                        .expect("canonical residue");
                }
            }
        }
        Ok(m)
    }
}

/// Matrix over `Z/p^e` with entries kept in the canonical range `[0, p^e)`.
///
/// Rectangular shapes are allowed; the square-only public operations check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidueMatrix {
    rows: usize,
    cols: usize,
    p: u64,
    e: u32,
    repr: Repr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Repr {
    Word { pe: u64, v: Vec<u64> },
    Big { pe: BigUint, v: Vec<BigUint> },
}

fn checked_pow(p: u64, e: u32) -> Option<u64> {
    let mut acc: u64 = 1;
    for _ in 0..e {
        acc = acc.checked_mul(p)?;
        if acc > WORD_MODULUS_LIMIT {
            return None;
        }
    }
    Some(acc)
}

impl ResidueMatrix {
    pub fn zero(rows: usize, cols: usize, p: u64, e: u32) -> Result<Self, LinalgError> {
        if e == 0 || !crate::abelian::is_prime(p) {
            return Err(LinalgError::InvalidModulus {
                detail: alloc::format!("{p}^{e}"),
            });
        }
        let repr = match checked_pow(p, e) {
            Some(pe) => Repr::Word {
                pe,
                v: vec![0; rows * cols],
            },
            None => Repr::Big {
                pe: BigUint::from(p).pow(e),
                v: vec![BigUint::zero(); rows * cols],
            },
        };
        Ok(ResidueMatrix {
            rows,
            cols,
            p,
            e,
            repr,
        })
    }

    pub fn from_rows(p: u64, e: u32, rows: &[Vec<u64>]) -> Result<Self, LinalgError> {
        let r = rows.len();
        let c = rows.first().map(|x| x.len()).unwrap_or(0);
        if rows.iter().any(|x| x.len() != c) {
            return Err(LinalgError::NotSquare);
        }
        let mut m = ResidueMatrix::zero(r, c, p, e)?;
        for (i, row) in rows.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                m.set_u64(i, j, x);
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn e(&self) -> u32 {
        self.e
    }

    pub fn set_u64(&mut self, i: usize, j: usize, x: u64) {
        let idx = i * self.cols + j;
        match &mut self.repr {
            Repr::Word { pe, v } => v[idx] = x % *pe,
            Repr::Big { pe, v } => v[idx] = BigUint::from(x) % &*pe,
        }
    }

    pub fn get_u64(&self, i: usize, j: usize) -> Option<u64> {
        let idx = i * self.cols + j;
        match &self.repr {
            Repr::Word { v, .. } => Some(v[idx]),
            Repr::Big { v, .. } => u64::try_from(&v[idx]).ok(),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        if self.rows != self.cols {
            return false;
        }
        match &self.repr {
            Repr::Word { v, .. } => {
                (0..self.rows).all(|i| (0..i).all(|j| v[i * self.cols + j] == v[j * self.cols + i]))
            }
            Repr::Big { v, .. } => {
                (0..self.rows).all(|i| (0..i).all(|j| v[i * self.cols + j] == v[j * self.cols + i]))
            }
        }
    }
}

/// Smith normal form over `Z`: invariant factors `d_1 | d_2 | …`, zeros
/// trailing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntSnf {
    pub diag: Vec<BigUint>,
}

impl IntSnf {
    pub fn rank(&self) -> usize {
        self.diag.iter().filter(|d| !d.is_zero()).count()
    }

    /// Product of the nonzero invariant factors (`|det|` when nonsingular).
    pub fn diag_product(&self) -> BigUint {
        self.diag
            .iter()
            .filter(|d| !d.is_zero())
            .fold(BigUint::one(), |acc, d| acc * d)
    }

    /// `p`-valuations of the invariant factors; `None` marks a zero factor.
    pub fn valuations(&self, p: u64) -> Vec<Option<u32>> {
        let p = BigUint::from(p);
        self.diag
            .iter()
            .map(|d| {
                if d.is_zero() {
                    return None;
                }
                let mut v = 0u32;
                let mut x = d.clone();
                while (&x % &p).is_zero() {
                    x /= &p;
                    v += 1;
                }
                Some(v)
            })
            .collect()
    }
}

/// Diagonal `p`-valuations over `Z/p^e`, weakly increasing, each in `[0, e]`
/// (`e` stands for a zero diagonal entry).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModSnf {
    pub vals: Vec<u32>,
    pub e: u32,
}

impl ModSnf {
    /// Rank over `F_p`: entries of valuation zero.
    pub fn rank_mod_p(&self) -> usize {
        self.vals.iter().filter(|&&v| v == 0).count()
    }
}

/// Smith normal form of a square integer matrix.
///
/// Gcd-based elimination on `BigInt`s with a divisibility fixup pass, so the
/// diagonal satisfies the chain condition exactly.
pub fn snf_integer(m: &ZMatrix) -> IntSnf {
    let n = m.n;
    let mut a: Vec<BigInt> = m.entries.iter().map(|&x| BigInt::from(x)).collect();
    let at = |a: &Vec<BigInt>, i: usize, j: usize| -> BigInt { a[i * n + j].clone() };

    let mut diag: Vec<BigUint> = Vec::with_capacity(n);
    for k in 0..n {
        'pivot: loop {
            // smallest |entry| in the trailing submatrix
            let mut best: Option<(usize, usize)> = None;
            for i in k..n {
                for j in k..n {
                    if !a[i * n + j].is_zero() {
                        let better = match best {
                            None => true,
                            Some((bi, bj)) => a[i * n + j].abs() < a[bi * n + bj].abs(),
                        };
                        if better {
                            best = Some((i, j));
                        }
                    }
                }
            }
            let Some((pi, pj)) = best else {
                break 'pivot;
            };
            if pi != k {
                for j in 0..n {
                    a.swap(pi * n + j, k * n + j);
                }
            }
            if pj != k {
                for i in 0..n {
                    a.swap(i * n + pj, i * n + k);
                }
            }

            let pivot = at(&a, k, k);
            for i in k + 1..n {
                if !a[i * n + k].is_zero() {
                    let q = at(&a, i, k).div_floor(&pivot);
                    if !q.is_zero() {
                        for j in k..n {
                            let t = at(&a, k, j) * &q;
                            a[i * n + j] -= t;
                        }
                    }
                    if !a[i * n + k].is_zero() {
                        // remainder became a smaller pivot candidate
                        continue 'pivot;
                    }
                }
            }
            for j in k + 1..n {
                if !a[k * n + j].is_zero() {
                    let q = at(&a, k, j).div_floor(&pivot);
                    if !q.is_zero() {
                        for i in k..n {
                            let t = at(&a, i, k) * &q;
                            a[i * n + j] -= t;
                        }
                    }
                    if !a[k * n + j].is_zero() {
                        continue 'pivot;
                    }
                }
            }
            // enforce divisibility of the trailing block by the pivot
            for i in k + 1..n {
                for j in k + 1..n {
                    if !(&a[i * n + j] % &pivot).is_zero() {
                        for jj in k..n {
                            let t = at(&a, i, jj);
                            a[k * n + jj] += t;
                        }
                        continue 'pivot;
                    }
                }
            }
            break 'pivot;
        }
        diag.push(a[k * n + k].abs().to_biguint().expect("abs"));
    }
    IntSnf { diag }
}

/// Determinant by fraction-free (Bareiss) elimination.  Independent of the
/// Smith normal form path; used as its oracle and for spanning-tree counts.
pub fn det_bareiss(m: &ZMatrix) -> BigInt {
    let n = m.n;
    if n == 0 {
        return BigInt::one();
    }
    let mut a: Vec<BigInt> = m.entries.iter().map(|&x| BigInt::from(x)).collect();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if a[k * n + k].is_zero() {
            let Some(r) = (k + 1..n).find(|&r| !a[r * n + k].is_zero()) else {
                return BigInt::zero();
            };
            for j in 0..n {
                a.swap(r * n + j, k * n + j);
            }
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let t = &a[i * n + j] * &a[k * n + k] - &a[i * n + k] * &a[k * n + j];
                a[i * n + j] = t / &prev;
            }
            a[i * n + k] = BigInt::zero();
        }
        prev = a[k * n + k].clone();
    }
    sign * a[n * n - 1].clone()
}

// ---------------------------------------------------------------------------
// elimination over Z/p^e, generic over word-size and big residues

trait ModElem: Clone + PartialEq + Sized {
    type Modulus: Clone;
    fn is_zero_elem(&self) -> bool;
    /// `p`-valuation, reported as `e` for zero.
    fn valuation(&self, p: u64, e: u32) -> u32;
    /// `self / p^k`, assuming exact divisibility.
    fn shift_down(&self, p: u64, k: u32) -> Self;
    fn mul_mod(&self, other: &Self, m: &Self::Modulus) -> Self;
    fn sub_mod(&self, other: &Self, m: &Self::Modulus) -> Self;
    /// Inverse of a unit (valuation 0).
    fn inv_unit(&self, m: &Self::Modulus) -> Self;
}

impl ModElem for u64 {
    type Modulus = u64;

    fn is_zero_elem(&self) -> bool {
        *self == 0
    }

    fn valuation(&self, p: u64, e: u32) -> u32 {
        if *self == 0 {
            return e;
        }
        let mut v = 0;
        let mut x = *self;
        while x.is_multiple_of(p) {
            x /= p;
            v += 1;
        }
        v
    }

    fn shift_down(&self, p: u64, k: u32) -> Self {
        let mut x = *self;
        for _ in 0..k {
            debug_assert_eq!(x % p, 0);
            x /= p;
        }
        x
    }

    fn mul_mod(&self, other: &Self, m: &u64) -> Self {
        ((*self as u128 * *other as u128) % *m as u128) as u64
    }

    fn sub_mod(&self, other: &Self, m: &u64) -> Self {
        let (d, borrow) = self.overflowing_sub(*other);
        if borrow {
            d.wrapping_add(*m)
        } else {
            d
        }
    }

    fn inv_unit(&self, m: &u64) -> Self {
        // extended Euclid on i128
        let (mut r0, mut r1) = (*m as i128, *self as i128);
        let (mut t0, mut t1) = (0i128, 1i128);
        while r1 != 0 {
            let q = r0 / r1;
            (r0, r1) = (r1, r0 - q * r1);
            (t0, t1) = (t1, t0 - q * t1);
        }
        debug_assert_eq!(r0, 1, "inverse of non-unit");
        t0.rem_euclid(*m as i128) as u64
    }
}

impl ModElem for BigUint {
    type Modulus = BigUint;

    fn is_zero_elem(&self) -> bool {
        num_traits::Zero::is_zero(self)
    }

    fn valuation(&self, p: u64, e: u32) -> u32 {
        if num_traits::Zero::is_zero(self) {
            return e;
        }
        let p = BigUint::from(p);
        let mut v = 0;
        let mut x = self.clone();
        while (&x % &p).is_zero() {
            x /= &p;
            v += 1;
        }
        v
    }

    fn shift_down(&self, p: u64, k: u32) -> Self {
        self / BigUint::from(p).pow(k)
    }

    fn mul_mod(&self, other: &Self, m: &BigUint) -> Self {
        (self * other) % m
    }

    fn sub_mod(&self, other: &Self, m: &BigUint) -> Self {
        if self >= other {
            self - other
        } else {
            m - other + self
        }
    }

    fn inv_unit(&self, m: &BigUint) -> Self {
        let (mut r0, mut r1) = (BigInt::from(m.clone()), BigInt::from(self.clone()));
        let (mut t0, mut t1) = (BigInt::zero(), BigInt::one());
        while !r1.is_zero() {
            let q = &r0 / &r1;
            let r = &r0 - &q * &r1;
            r0 = core::mem::replace(&mut r1, r);
            let t = &t0 - &q * &t1;
            t0 = core::mem::replace(&mut t1, t);
        }
        debug_assert!(r0.is_one(), "inverse of non-unit");
        t0.mod_floor(&BigInt::from(m.clone()))
            .to_biguint()
            .expect("canonical")
    }
}

struct Elim<'a, T: ModElem> {
    a: &'a mut [T],
    w: Option<&'a mut [T]>, // right transform, cols × cols
    rows: usize,
    cols: usize,
    p: u64,
    e: u32,
    m: T::Modulus,
}

impl<T: ModElem> Elim<'_, T> {
    fn run(&mut self) -> Vec<u32> {
        let steps = self.rows.min(self.cols);
        let mut vals = Vec::with_capacity(steps);
        for k in 0..steps {
            // minimum-valuation pivot, ties to smallest row then column
            let mut best: Option<(u32, usize, usize)> = None;
            'scan: for i in k..self.rows {
                for j in k..self.cols {
                    let x = &self.a[i * self.cols + j];
                    if x.is_zero_elem() {
                        continue;
                    }
                    let v = x.valuation(self.p, self.e);
                    if best.is_none_or(|(bv, _, _)| v < bv) {
                        best = Some((v, i, j));
                        if v == 0 {
                            break 'scan;
                        }
                    }
                }
            }
            let Some((pv, pi, pj)) = best else {
                vals.resize(steps, self.e);
                return vals;
            };
            self.swap_rows(k, pi);
            self.swap_cols(k, pj);

            // pivot = unit * p^pv; eliminate the rest of column k, then row k
            let unit_inv = self.a[k * self.cols + k]
                .shift_down(self.p, pv)
                .inv_unit(&self.m);
            for i in k + 1..self.rows {
                let x = self.a[i * self.cols + k].clone();
                if x.is_zero_elem() {
                    continue;
                }
                let f = x.shift_down(self.p, pv).mul_mod(&unit_inv, &self.m);
                for j in k..self.cols {
                    let t = f.mul_mod(&self.a[k * self.cols + j], &self.m);
                    self.a[i * self.cols + j] = self.a[i * self.cols + j].sub_mod(&t, &self.m);
                }
            }
            for j in k + 1..self.cols {
                let x = self.a[k * self.cols + j].clone();
                if x.is_zero_elem() {
                    continue;
                }
                let f = x.shift_down(self.p, pv).mul_mod(&unit_inv, &self.m);
                self.col_sub_mul(j, k, &f);
            }
            vals.push(pv);
        }
        vals
    }

    fn swap_rows(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        for c in 0..self.cols {
            self.a.swap(i * self.cols + c, j * self.cols + c);
        }
    }

    fn swap_cols(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        for r in 0..self.rows {
            self.a.swap(r * self.cols + i, r * self.cols + j);
        }
        if let Some(w) = self.w.as_deref_mut() {
            for r in 0..self.cols {
                w.swap(r * self.cols + i, r * self.cols + j);
            }
        }
    }

    /// `col_j -= f * col_k`, mirrored into the transform.
    fn col_sub_mul(&mut self, j: usize, k: usize, f: &T) {
        for r in 0..self.rows {
            let t = f.mul_mod(&self.a[r * self.cols + k], &self.m);
            self.a[r * self.cols + j] = self.a[r * self.cols + j].sub_mod(&t, &self.m);
        }
        if let Some(w) = self.w.as_deref_mut() {
            for r in 0..self.cols {
                let t = f.mul_mod(&w[r * self.cols + k], &self.m);
                w[r * self.cols + j] = w[r * self.cols + j].sub_mod(&t, &self.m);
            }
        }
    }
}

fn snf_mod_inner(m: &ResidueMatrix, want_transform: bool) -> (Vec<u32>, Option<ResidueMatrix>) {
    let mut work = m.clone();
    let (rows, cols, p, e) = (m.rows, m.cols, m.p, m.e);
    match &mut work.repr {
        Repr::Word { pe, v } => {
            let mut wmat: Vec<u64> = if want_transform {
                let mut id = vec![0u64; cols * cols];
                for i in 0..cols {
                    id[i * cols + i] = 1;
                }
                id
            } else {
                Vec::new()
            };
            let mut elim = Elim::<u64> {
                a: v,
                w: want_transform.then_some(wmat.as_mut_slice()),
                rows,
                cols,
                p,
                e,
                m: *pe,
            };
            let vals = elim.run();
            let t = want_transform.then_some(ResidueMatrix {
                rows: cols,
                cols,
                p,
                e,
                repr: Repr::Word { pe: *pe, v: wmat },
            });
            (vals, t)
        }
        Repr::Big { pe, v } => {
            let mut wmat: Vec<BigUint> = if want_transform {
                let mut id = vec![BigUint::zero(); cols * cols];
                for i in 0..cols {
                    id[i * cols + i] = BigUint::one();
                }
                id
            } else {
                Vec::new()
            };
            let mut elim = Elim::<BigUint> {
                a: v,
                w: want_transform.then_some(wmat.as_mut_slice()),
                rows,
                cols,
                p,
                e,
                m: pe.clone(),
            };
            let vals = elim.run();
            let t = want_transform.then(|| ResidueMatrix {
                rows: cols,
                cols,
                p,
                e,
                repr: Repr::Big {
                    pe: pe.clone(),
                    v: wmat,
                },
            });
            (vals, t)
        }
    }
}

/// Diagonal `p`-valuations of a square matrix over `Z/p^e`, weakly
/// increasing by minimum-valuation pivoting.
pub fn snf_mod_prime_power(m: &ResidueMatrix) -> Result<ModSnf, LinalgError> {
    if m.rows != m.cols {
        return Err(LinalgError::NotSquare);
    }
    let (mut vals, _) = snf_mod_inner(m, false);
    vals.sort_unstable();
    Ok(ModSnf { vals, e: m.e })
}

/// Rectangular elimination returning the diagonal valuations together with
/// the accumulated right transform `W` (so `M · W` is the diagonalized form
/// up to row operations).  Used for relation-matrix kernel extraction.
pub(crate) fn snf_mod_with_transform(m: &ResidueMatrix) -> (Vec<u32>, ResidueMatrix) {
    let (vals, t) = snf_mod_inner(m, true);
    (vals, t.expect("transform requested"))
}

pub(crate) fn snf_mod_rect(m: &ResidueMatrix) -> Vec<u32> {
    snf_mod_inner(m, false).0
}

/// Rank of the matrix over `F_p`.
pub fn rank_mod_p(m: &ZMatrix, p: u64) -> usize {
    let n = m.n;
    let mut a: Vec<u64> = m
        .entries
        .iter()
        .map(|&x| (x as i128).rem_euclid(p as i128) as u64)
        .collect();
    let mut rank = 0;
    for col in 0..n {
        let Some(piv) = (rank..n).find(|&r| a[r * n + col] != 0) else {
            continue;
        };
        for j in 0..n {
            a.swap(piv * n + j, rank * n + j);
        }
        let inv = a[rank * n + col].inv_unit(&p);
        for r in 0..n {
            if r != rank && a[r * n + col] != 0 {
                let f = a[r * n + col].mul_mod(&inv, &p);
                for j in 0..n {
                    let t = f.mul_mod(&a[rank * n + j], &p);
                    a[r * n + j] = a[r * n + j].sub_mod(&t, &p);
                }
            }
        }
        rank += 1;
        if rank == n {
            break;
        }
    }
    rank
}

/// Outcome of a Sylow-type extraction at working exponent `e`.
///
/// `saturated` certifies that every valuation stayed strictly below the
/// working exponent, so the partition is the exact Sylow-`p` type of the
/// cokernel rather than a truncation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SylowType {
    pub partition: Partition,
    pub saturated: bool,
    /// Exponent at which the final computation ran.
    pub exponent: u32,
}

/// Default ceiling for the saturation retry protocol.
pub const DEFAULT_EXPONENT_CEILING: u32 = 64;

/// Sylow-`p` type of `cok(M)`, computed modulo `p^e` with saturation retry.
///
/// If any diagonal valuation reaches the working exponent the computation is
/// repeated with the exponent doubled, up to `ceiling`; past the ceiling the
/// (possibly truncated) partition is returned unsaturated.
pub fn cokernel_sylow_type(
    m: &ZMatrix,
    p: u64,
    e: u32,
    ceiling: u32,
) -> Result<SylowType, LinalgError> {
    let mut e = e.max(1);
    loop {
        let snf = snf_mod_prime_power(&m.reduce_mod(p, e)?)?;
        let saturated = snf.vals.iter().all(|&v| v < e);
        if saturated || e >= ceiling {
            return Ok(SylowType {
                partition: Partition::from_unsorted(snf.vals),
                saturated,
                exponent: e,
            });
        }
        e = (e * 2).min(ceiling.max(1));
    }
}

/// Sylow-`p` type of `cok(M) ⊗ Z/p^e` for a matrix already reduced mod
/// `p^e` (the mod-`a` matrix models).  Parts equal to `e` are exact for the
/// tensored statistic, so no saturation question arises.
pub fn cokernel_type_mod(m: &ResidueMatrix) -> Result<Partition, LinalgError> {
    Ok(Partition::from_unsorted(snf_mod_prime_power(m)?.vals))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(rows: &[&[i64]]) -> ZMatrix {
        ZMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn snf_integer_examples() {
        let id = ZMatrix::identity(3);
        assert_eq!(
            snf_integer(&id).diag,
            vec![BigUint::one(), BigUint::one(), BigUint::one()]
        );

        let d = z(&[&[2, 0], &[0, 4]]);
        assert_eq!(
            snf_integer(&d).diag,
            vec![BigUint::from(2u32), BigUint::from(4u32)]
        );

        // det 3, gcd of entries 1
        let m = z(&[&[2, 1], &[1, 2]]);
        assert_eq!(
            snf_integer(&m).diag,
            vec![BigUint::one(), BigUint::from(3u32)]
        );

        let zero = ZMatrix::zero(2);
        assert_eq!(
            snf_integer(&zero).diag,
            vec![BigUint::zero(), BigUint::zero()]
        );
    }

    #[test]
    fn snf_mod_examples() {
        let id = ZMatrix::identity(3).reduce_mod(2, 3).unwrap();
        assert_eq!(snf_mod_prime_power(&id).unwrap().vals, vec![0, 0, 0]);

        let d = z(&[&[2, 0], &[0, 4]]).reduce_mod(2, 3).unwrap();
        assert_eq!(snf_mod_prime_power(&d).unwrap().vals, vec![1, 2]);

        // matches snf_integer (1, 3) capped at e = 2 over Z/9
        let m = z(&[&[2, 1], &[1, 2]]).reduce_mod(3, 2).unwrap();
        assert_eq!(snf_mod_prime_power(&m).unwrap().vals, vec![0, 1]);
    }

    #[test]
    fn sylow_type_examples() {
        let id = ZMatrix::identity(3);
        let t = cokernel_sylow_type(&id, 2, 3, 64).unwrap();
        assert!(t.saturated);
        assert!(t.partition.is_empty());

        let d = z(&[&[2, 0], &[0, 4]]);
        let t = cokernel_sylow_type(&d, 2, 3, 64).unwrap();
        assert!(t.saturated);
        assert_eq!(t.partition.parts(), &[2, 1]);

        // valuation hits e = 3, retry at 6 resolves
        let m = z(&[&[8]]);
        let t = cokernel_sylow_type(&m, 2, 3, 64).unwrap();
        assert!(t.saturated);
        assert_eq!(t.partition.parts(), &[3]);
        assert_eq!(t.exponent, 6);

        // genuinely singular: ceiling reached, reported unsaturated
        let s = ZMatrix::zero(1);
        let t = cokernel_sylow_type(&s, 2, 4, 16).unwrap();
        assert!(!t.saturated);
        assert_eq!(t.partition.parts(), &[16]);
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank_mod_p(&ZMatrix::identity(4), 5), 4);
        assert_eq!(rank_mod_p(&ZMatrix::zero(3), 2), 0);
        assert_eq!(rank_mod_p(&z(&[&[1, 1], &[1, 1]]), 2), 1);
    }

    #[test]
    fn det_bareiss_matches_known() {
        assert_eq!(det_bareiss(&z(&[&[2, 1], &[1, 2]])), BigInt::from(3));
        assert_eq!(
            det_bareiss(&z(&[&[1, 2, 3], &[4, 5, 6], &[7, 8, 10]])),
            BigInt::from(-3)
        );
        assert_eq!(det_bareiss(&ZMatrix::zero(3)), BigInt::zero());
    }

    #[test]
    fn big_modulus_path_agrees_with_word_path() {
        let m = z(&[&[6, 3, 1], &[3, 10, 4], &[1, 4, 12]]);
        let a = snf_mod_prime_power(&m.reduce_mod(2, 8).unwrap()).unwrap();
        // e = 70 forces the BigUint representation
        let b = snf_mod_prime_power(&m.reduce_mod(2, 70).unwrap()).unwrap();
        let caps: Vec<u32> = b.vals.iter().map(|&v| v.min(8)).collect();
        assert_eq!(a.vals, caps);
    }

    fn random_matrix(n: usize, seed: u64) -> ZMatrix {
        let mut s = seed;
        let mut next = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            s
        };
        let entries: Vec<i64> = (0..n * n).map(|_| (next() % 19) as i64 - 9).collect();
        ZMatrix::new(n, entries).unwrap()
    }

    #[test]
    fn snf_round_trip_against_bareiss() {
        for seed in 1..=40u64 {
            let n = 2 + (seed % 7) as usize; // up to 8
            let m = random_matrix(n, seed.wrapping_mul(0x9E3779B97F4A7C15));
            let snf = snf_integer(&m);
            let det = det_bareiss(&m).abs().to_biguint().unwrap();
            if det.is_zero() {
                assert!(snf.rank() < n);
            } else {
                assert_eq!(snf.diag_product(), det);
                // divisibility chain
                for w in snf.diag.windows(2) {
                    if !w[1].is_zero() {
                        assert!((&w[1] % &w[0]).is_zero());
                    }
                }
                // saturated sylow type equals the valuation profile of the diagonal
                for p in [2u64, 3, 5] {
                    let t = cokernel_sylow_type(&m, p, 2, 64).unwrap();
                    assert!(t.saturated);
                    let mut vals: Vec<u32> = snf
                        .valuations(p)
                        .into_iter()
                        .map(|v| v.unwrap())
                        .filter(|&v| v > 0)
                        .collect();
                    vals.sort_unstable_by(|a, b| b.cmp(a));
                    assert_eq!(t.partition.parts(), vals.as_slice());
                }
            }
        }
    }

    #[test]
    fn mod_snf_agrees_with_integer_snf() {
        for (p, e) in [
            (2u64, 1u32),
            (2, 2),
            (2, 4),
            (3, 1),
            (3, 2),
            (3, 4),
            (5, 1),
            (5, 2),
            (5, 4),
        ] {
            for seed in 1..=100u64 {
                let n = 2 + (seed % 5) as usize;
                let m = random_matrix(n, seed.wrapping_mul(0xD1B54A32D192ED03) + p + e as u64);
                let snf = snf_integer(&m);
                let mut expect: Vec<u32> = snf
                    .valuations(p)
                    .into_iter()
                    .map(|v| v.map_or(e, |x| x.min(e)))
                    .collect();
                expect.sort_unstable();
                let got = snf_mod_prime_power(&m.reduce_mod(p, e).unwrap()).unwrap();
                assert_eq!(got.vals, expect, "p={p} e={e} seed={seed}");
                assert_eq!(got.rank_mod_p(), rank_mod_p(&m, p));
            }
        }
    }
}
