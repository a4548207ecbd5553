//! Moment-problem inversion: recovering a distribution over group types
//! from its Hom-moments.
//!
//! The index space is the set `M` of tuples of partitions, one per prime,
//! where each partition is the TRANSPOSE of a Sylow type and has at most
//! `m_j` parts.  The moments `C_λ = Σ_{G₁ ≤ G_λ'} |∧²G₁|` satisfy
//! `Σ_μ x_μ ∏_j p_j^{Σ_i λ^j_i μ^j_i} = C_λ`, and the solver walks the
//! indices in increasing lexicographic order: at step `ν` the coefficient
//! table of an entire analytic function tuned to `ν` collapses the system
//! to one equation in `x_ν` and already-solved unknowns.
//!
//! Truncation is explicit.  The index set keeps the tail coordinates within
//! `size_cap` (that bound is structural: coefficients vanish beyond it for
//! every reported step) and extends the head coordinate to `head_cap`,
//! because the alternating head series converges like `p^{-λ_1}`.  Absent
//! higher indices are treated as zero and every solve step logs the
//! boundary-layer residual so the truncation error is surfaced, not hidden.
//! Arithmetic is exact rational throughout, with results rounded to 192
//! fractional bits after each step to keep denominators from compounding.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::abelian::{self, GroupSpec, Partition};
use crate::theory::big_ratio_to_f64;

#[derive(Debug, Clone, PartialEq)]
pub enum RecoverError {
    InvalidSpec {
        detail: String,
    },
    /// A solve step met a pivot value too close to zero.
    IllConditioned {
        index: String,
        u: f64,
    },
    /// A computed moment violated its growth envelope.
    EnvelopeViolated {
        index: String,
    },
}

impl fmt::Display for RecoverError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecoverError::InvalidSpec { detail } => write!(f, "invalid spec: {detail}"),
            RecoverError::IllConditioned { index, u } => {
                write!(f, "ill-conditioned solve step at {index}: |u| = {u:e}")
            }
            RecoverError::EnvelopeViolated { index } => {
                write!(f, "moment at {index} violates its growth envelope")
            }
        }
    }
}

impl core::error::Error for RecoverError {}

/// Parameters of one analytic function: `m` variables, prime `p`, and the
/// weakly decreasing exponent vector `b` it is tuned to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HactsSpec {
    pub m: usize,
    pub p: u64,
    pub b: Vec<u32>,
}

impl HactsSpec {
    pub fn new(m: usize, p: u64, b: Vec<u32>) -> Result<Self, RecoverError> {
        if m == 0 || b.len() != m || b.windows(2).any(|w| w[0] < w[1]) {
            return Err(RecoverError::InvalidSpec {
                detail: alloc::format!("need b decreasing of length m = {m}"),
            });
        }
        if !crate::abelian::is_prime(p) {
            return Err(RecoverError::InvalidSpec {
                detail: alloc::format!("{p} is not prime"),
            });
        }
        Ok(HactsSpec { m, p, b })
    }
}

/// Coefficient table of `H_{m,p,b}(z) = G(z_1)·H(z_2,…,z_m)`.
///
/// `G(z_1) = ∏_{j≥b_1+1}(1 − z_1/p^j)` contributes the infinite head series
/// `c_{d_1}` (kept to `d1_cap`); each tail variable `z_i` contributes a
/// finite polynomial of degree `b_{i−1} − b_i`.  Multi-indices factor, so
/// the table stores one vector per variable.
#[derive(Debug, Clone)]
pub struct HactsTable {
    pub spec: HactsSpec,
    d1_cap: u32,
    /// Head series coefficients `c_0 … c_{d1_cap}`.
    c: Vec<BigRational>,
    /// `polys[i-2]` = coefficients of the `z_i` factor, constant term first.
    polys: Vec<Vec<BigRational>>,
    /// The decay constant `E`: coefficients satisfy
    /// `|a_d| ≤ E·p^{−b_1 d_1 − d_1(d_1+1)/2}`.
    pub e_bound: BigRational,
}

/// Builds the coefficient table.
///
/// The head recursion is `c_n = −p^{−b_1} c_{n−1} / (p^n − 1)` with
/// `c_0 = 1`; the tail factor for `z_i` is
/// `∏_{j=L_i}^{U_i}(1 − z_i/p^j)` with `L_i = b_1+⋯+b_i + 1` and
/// `U_i = b_1+⋯+b_{i−2} + 2b_{i−1}`.
pub fn hacts_coefficients(spec: &HactsSpec, d1_cap: u32) -> HactsTable {
    let p = BigInt::from(spec.p);
    let b1 = spec.b[0];
    let p_b1 = BigRational::new(BigInt::one(), p.clone().pow(b1));

    let mut c = Vec::with_capacity(d1_cap as usize + 1);
    c.push(BigRational::one());
    for n in 1..=d1_cap {
        let prev = c.last().expect("nonempty").clone();
        let denom = p.clone().pow(n) - BigInt::one();
        c.push(-prev * &p_b1 / BigRational::from_integer(denom));
    }

    let prefix = |k: usize| -> u64 { spec.b[..k].iter().map(|&x| x as u64).sum() };
    let mut polys = Vec::with_capacity(spec.m.saturating_sub(1));
    for i in 2..=spec.m {
        let lo = prefix(i) + 1;
        let hi = prefix(i - 2) + 2 * spec.b[i - 2] as u64;
        let mut poly = vec![BigRational::one()];
        let mut j = lo;
        while j <= hi {
            // multiply by (1 − z/p^j)
            let root = BigRational::new(-BigInt::one(), p.clone().pow(j as u32));
            let mut next = vec![BigRational::zero(); poly.len() + 1];
            for (d, coef) in poly.iter().enumerate() {
                next[d] += coef;
                let t = coef * &root;
                next[d + 1] += t;
            }
            poly = next;
            j += 1;
        }
        polys.push(poly);
    }

    // E = max|e| / (lower bound of ∏_{i≥1}(1 − p^{-i}))
    let mut max_e = BigRational::one();
    for poly in &polys {
        let m = poly
            .iter()
            .map(|x| x.abs())
            .max()
            .unwrap_or_else(BigRational::one);
        max_e *= m;
    }
    let mut euler_lb = BigRational::one();
    for i in 1..=40u32 {
        euler_lb *= BigRational::one() - BigRational::new(BigInt::one(), p.clone().pow(i));
    }
    euler_lb *= BigRational::one()
        - BigRational::new(
            BigInt::one(),
            p.clone().pow(40) * (p.clone() - BigInt::one()),
        );
    let e_bound = max_e / euler_lb;

    HactsTable {
        spec: spec.clone(),
        d1_cap,
        c,
        polys,
        e_bound,
    }
}

impl HactsTable {
    pub fn d1_cap(&self) -> u32 {
        self.d1_cap
    }

    /// Coefficient `a_d`; exactly zero outside the structural support
    /// `d_2 + ⋯ + d_m ≤ b_1` (each factor's degree enforces it).
    pub fn coeff(&self, d: &[u32]) -> BigRational {
        assert_eq!(d.len(), self.spec.m);
        assert!(d[0] <= self.d1_cap, "head degree beyond table cap");
        let mut acc = self.c[d[0] as usize].clone();
        for (i, poly) in self.polys.iter().enumerate() {
            let deg = d[i + 1] as usize;
            if deg >= poly.len() {
                return BigRational::zero();
            }
            acc *= &poly[deg];
        }
        acc
    }

    /// Exact-rational evaluation at `z_i = p^{t_i}` for cumulative
    /// exponents `t`; the head factor is the truncated series, the tail
    /// factors are exact polynomial values.
    pub fn eval_at_powers(&self, t: &[u64]) -> BigRational {
        assert_eq!(t.len(), self.spec.m);
        let p = BigInt::from(self.spec.p);
        let z1 = BigRational::from_integer(p.clone().pow(u32::try_from(t[0]).expect("small")));
        let mut head = BigRational::zero();
        let mut z_pow = BigRational::one();
        for coef in &self.c {
            head += coef * &z_pow;
            z_pow *= &z1;
        }
        let mut acc = head;
        for (i, poly) in self.polys.iter().enumerate() {
            let z =
                BigRational::from_integer(p.clone().pow(u32::try_from(t[i + 1]).expect("small")));
            let mut value = BigRational::zero();
            let mut zp = BigRational::one();
            for coef in poly {
                value += coef * &zp;
                zp *= &z;
            }
            acc *= value;
        }
        acc
    }

    /// Whether the product form vanishes identically at the lattice point of
    /// the partition `f` (cumulative exponents `t_i = f_1+⋯+f_i`): the head
    /// factor has a root at every `p^j`, `j ≥ b_1+1`, and tail factor `i`
    /// at `L_i ≤ t_i ≤ U_i`.
    pub fn exact_zero_at(&self, f: &[u32]) -> bool {
        let b1 = self.spec.b[0] as u64;
        let mut cum = 0u64;
        let prefix = |k: usize| -> u64 { self.spec.b[..k].iter().map(|&x| x as u64).sum() };
        for (i, &fi) in f.iter().enumerate() {
            cum += fi as u64;
            if i == 0 {
                if cum > b1 {
                    return true;
                }
            } else {
                let lo = prefix(i + 1) + 1;
                let hi = prefix(i - 1) + 2 * self.spec.b[i - 1] as u64;
                if lo <= cum && cum <= hi {
                    return true;
                }
            }
        }
        false
    }

    /// Exact check of the decay bound for every stored multi-index.
    pub fn coefficients_within_bound(&self) -> bool {
        let p = BigInt::from(self.spec.p);
        let b1 = self.spec.b[0];
        for d1 in 0..=self.d1_cap {
            let scale = BigRational::new(BigInt::one(), p.clone().pow(b1 * d1 + d1 * (d1 + 1) / 2));
            let budget = &self.e_bound * scale;
            let mut shape = vec![0u32; self.spec.m];
            shape[0] = d1;
            if !self.check_tail_coeffs(&mut shape, 1, &budget) {
                return false;
            }
        }
        true
    }

    fn check_tail_coeffs(&self, shape: &mut Vec<u32>, pos: usize, budget: &BigRational) -> bool {
        if pos == self.spec.m {
            return self.coeff(shape).abs() <= *budget;
        }
        let deg = self.polys[pos - 1].len() as u32;
        for d in 0..deg {
            shape[pos] = d;
            if !self.check_tail_coeffs(shape, pos + 1, budget) {
                return false;
            }
        }
        shape[pos] = 0;
        true
    }
}

/// Index-set truncation: per-prime part counts `max_parts`, tail-coordinate
/// cap `size_cap` (also the reporting cap), and head-coordinate cap
/// `head_cap` governing solve accuracy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MomentCaps {
    pub max_parts: Vec<u32>,
    pub size_cap: u32,
    pub head_cap: u32,
}

impl MomentCaps {
    /// Single-prime caps with the default head extension (24 beyond the
    /// reporting cap, which pushes the head-series truncation far below the
    /// reporting tolerances).
    pub fn single(max_parts: u32, size_cap: u32) -> Self {
        MomentCaps {
            max_parts: vec![max_parts],
            size_cap,
            head_cap: size_cap + 24,
        }
    }

    fn validate(&self, primes: &[u64]) -> Result<(), RecoverError> {
        if self.max_parts.len() != primes.len()
            || self.max_parts.contains(&0)
            || self.head_cap < self.size_cap
        {
            return Err(RecoverError::InvalidSpec {
                detail: String::from("caps: one positive max_parts per prime, head ≥ size"),
            });
        }
        Ok(())
    }
}

/// A truncated family of Hom-moments, indexed by tuples of transposed
/// types (one per prime, zero-padded to `max_parts` entries).
#[derive(Debug, Clone)]
pub struct MomentVector {
    pub primes: Vec<u64>,
    pub caps: MomentCaps,
    pub values: BTreeMap<Vec<Vec<u32>>, BigRational>,
}

fn padded(parts: &[u32], len: u32) -> Vec<u32> {
    let mut v = parts.to_vec();
    v.resize(len as usize, 0);
    v
}

/// Per-prime index set: transposed partitions `f` with `f_1 ≤ head_cap` and
/// every later coordinate `≤ size_cap`.  The tail restriction is structural:
/// solve steps for reported indices have coefficient support `f_2 ≤ size_cap`.
fn index_set(max_parts: u32, size_cap: u32, head_cap: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    Partition::for_each(
        size_cap as u64 * (max_parts as u64 - 1),
        size_cap,
        max_parts as usize - 1,
        &mut |tail| {
            let start = tail.first();
            for f1 in start..=head_cap {
                let mut f = vec![f1];
                f.extend_from_slice(tail.parts());
                out.push(padded(&f, max_parts));
            }
        },
    );
    out.sort_unstable();
    out.dedup();
    out
}

/// Exact theoretical moments on the truncated index set:
/// `C = ∏_j Σ_{G₁ ≤ G_j} |∧²G₁|` with `G_j` the group whose transposed
/// type is the `j`-th index coordinate.  Each factor is checked against its
/// growth envelope `F^{m_j} p^{Σ f_i(f_i−1)/2}` (with the rational
/// under-approximation `F ≥ 83`).
pub fn build_theoretical_moments(
    primes: &[u64],
    caps: &MomentCaps,
) -> Result<MomentVector, RecoverError> {
    caps.validate(primes)?;
    let mut per_prime: Vec<Vec<(Vec<u32>, BigUint)>> = Vec::with_capacity(primes.len());
    for (j, &p) in primes.iter().enumerate() {
        if !crate::abelian::is_prime(p) {
            return Err(RecoverError::InvalidSpec {
                detail: alloc::format!("{p} is not prime"),
            });
        }
        let mut list = Vec::new();
        for f in index_set(caps.max_parts[j], caps.size_cap, caps.head_cap) {
            let c = abelian::sum_wedge2_transposed(p, &f);
            let envelope_exp: u64 = f
                .iter()
                .map(|&x| x as u64 * (x as u64).saturating_sub(1) / 2)
                .sum();
            let envelope = BigUint::from(83u32).pow(caps.max_parts[j])
                * BigUint::from(p).pow(u32::try_from(envelope_exp).expect("small"));
            if c > envelope {
                return Err(RecoverError::EnvelopeViolated {
                    index: alloc::format!("{f:?}"),
                });
            }
            list.push((f, c));
        }
        per_prime.push(list);
    }

    // cartesian product across primes
    let mut values: BTreeMap<Vec<Vec<u32>>, BigRational> = BTreeMap::new();
    let mut stack: Vec<(usize, Vec<Vec<u32>>, BigUint)> = vec![(0, Vec::new(), BigUint::one())];
    while let Some((j, idx, acc)) = stack.pop() {
        if j == primes.len() {
            values.insert(idx, BigRational::from_integer(BigInt::from(acc)));
            continue;
        }
        for (f, c) in &per_prime[j] {
            let mut idx2 = idx.clone();
            idx2.push(f.clone());
            stack.push((j + 1, idx2, &acc * c));
        }
    }
    Ok(MomentVector {
        primes: primes.to_vec(),
        caps: caps.clone(),
        values,
    })
}

/// One recovered probability with its solve diagnostics.
///
/// `x` estimates the limiting probability that the tensor-truncated group
/// `X ⊗ Z/a` (with `a = ∏ p_j^{m_j}`) is isomorphic to `group`.  For types
/// whose parts all stay strictly below the exponent cap this equals the
/// plain limiting Sylow probability; a type with a part at the cap
/// aggregates the geometric tail of everything truncating onto it.
#[derive(Debug, Clone)]
pub struct RecoveredEntry {
    /// Group whose (multi-prime) type transposes to the solved index.
    pub group: GroupSpec,
    /// The solved index itself (transposed types, zero-padded).
    pub index: Vec<Vec<u32>>,
    pub x: f64,
    /// Boundary-layer sum dropped by the head truncation, raw.
    pub residual_raw: f64,
    /// The same residual divided by the pivot value `u`.
    pub residual_scaled: f64,
}

/// Full output of a solve.
#[derive(Debug, Clone)]
pub struct Recovery {
    pub entries: Vec<RecoveredEntry>,
    pub total_mass: f64,
    pub max_scaled_residual: f64,
    /// Most negative recovered value (truncation noise pushes slightly
    /// below zero).
    pub min_x: f64,
}

impl Recovery {
    pub fn lookup(&self, group: &GroupSpec) -> Option<&RecoveredEntry> {
        self.entries.iter().find(|e| &e.group == group)
    }
}

const ROUND_BITS: u32 = 192;
const PIVOT_FLOOR: f64 = 1e-12;

fn round_bits(x: BigRational, bits: u32) -> BigRational {
    let scale = BigInt::one() << bits;
    let scaled = x * BigRational::from_integer(scale.clone());
    BigRational::new(scaled.round().to_integer(), scale)
}

/// Recovers the distribution from a truncated moment vector by the
/// lexicographic triangular solve.
///
/// Returns one entry per index within the reporting caps, in solve order.
/// Missing moment indices are treated as zero; each step logs the
/// boundary-layer residual (head-shell contribution to the collapsed sum)
/// so truncation error is visible alongside the recovered values.
pub fn recover_distribution(mv: &MomentVector) -> Result<Recovery, RecoverError> {
    mv.caps.validate(&mv.primes)?;
    let s = mv.primes.len();

    // reporting set: every coordinate within size_cap
    let mut report: Vec<Vec<Vec<u32>>> = Vec::new();
    let mut per_prime_report: Vec<Vec<Vec<u32>>> = Vec::new();
    for j in 0..s {
        let mut set: Vec<Vec<u32>> = Partition::all(
            mv.caps.size_cap as u64 * mv.caps.max_parts[j] as u64,
            mv.caps.size_cap,
            mv.caps.max_parts[j] as usize,
        )
        .into_iter()
        .map(|lam| padded(lam.parts(), mv.caps.max_parts[j]))
        .collect();
        set.sort_unstable();
        set.dedup();
        per_prime_report.push(set);
    }
    let mut stack: Vec<(usize, Vec<Vec<u32>>)> = vec![(0, Vec::new())];
    while let Some((j, idx)) = stack.pop() {
        if j == s {
            report.push(idx);
            continue;
        }
        for f in &per_prime_report[j] {
            let mut idx2 = idx.clone();
            idx2.push(f.clone());
            stack.push((j + 1, idx2));
        }
    }
    report.sort_unstable();

    let head_shell = mv.caps.head_cap;
    let mut solved: Vec<(Vec<Vec<u32>>, BigRational)> = Vec::new();
    let mut entries = Vec::with_capacity(report.len());
    let mut max_scaled_residual = 0.0f64;

    for nu in &report {
        // coefficient tables tuned to ν
        let tables: Vec<HactsTable> = (0..s)
            .map(|j| {
                let spec =
                    HactsSpec::new(mv.caps.max_parts[j] as usize, mv.primes[j], nu[j].clone())
                        .expect("report indices are valid specs");
                hacts_coefficients(&spec, mv.caps.head_cap)
            })
            .collect();

        // collapse the moment sum: S1 = Σ_λ A_λ C_λ, tracking the head shell
        let mut s1 = BigRational::zero();
        let mut shell = BigRational::zero();
        for (lam, c) in &mv.values {
            let mut a = BigRational::one();
            let mut on_shell = false;
            for j in 0..s {
                let f = &lam[j];
                let mut d: Vec<u32> = Vec::with_capacity(f.len());
                for i in 0..f.len() {
                    let next = if i + 1 < f.len() { f[i + 1] } else { 0 };
                    d.push(f[i] - next);
                }
                a *= tables[j].coeff(&d);
                if a.is_zero() {
                    break;
                }
                on_shell |= f[0] == head_shell;
            }
            if a.is_zero() {
                continue;
            }
            let term = a * c;
            if on_shell {
                shell += &term;
            }
            s1 += term;
        }

        // pivot u = ∏_j H_j at the ν lattice point
        let mut u = BigRational::one();
        for j in 0..s {
            let cums: Vec<u64> = nu[j]
                .iter()
                .scan(0u64, |acc, &x| {
                    *acc += x as u64;
                    Some(*acc)
                })
                .collect();
            u *= tables[j].eval_at_powers(&cums);
        }
        let u_f64 = big_ratio_to_f64(&u);
        if u_f64.abs() <= PIVOT_FLOOR || !u_f64.is_finite() {
            return Err(RecoverError::IllConditioned {
                index: alloc::format!("{nu:?}"),
                u: u_f64,
            });
        }

        // back-substitution over already-solved smaller indices
        let mut back = BigRational::zero();
        for (mu, x_mu) in &solved {
            let mut w = BigRational::one();
            let mut vanishes = false;
            for j in 0..s {
                if tables[j].exact_zero_at(&mu[j]) {
                    vanishes = true;
                    break;
                }
            }
            if vanishes {
                continue;
            }
            for j in 0..s {
                let cums: Vec<u64> = mu[j]
                    .iter()
                    .scan(0u64, |acc, &x| {
                        *acc += x as u64;
                        Some(*acc)
                    })
                    .collect();
                w *= tables[j].eval_at_powers(&cums);
            }
            back += w * x_mu;
        }

        let x = round_bits((s1 - back) / &u, ROUND_BITS);
        let residual_raw = big_ratio_to_f64(&shell);
        let residual_scaled = (residual_raw / u_f64).abs();
        max_scaled_residual = max_scaled_residual.max(residual_scaled);

        let group = GroupSpec::new(mv.primes.iter().enumerate().filter_map(|(j, &p)| {
            let t = Partition::from_unsorted(nu[j].clone()).transpose();
            (!t.is_empty()).then_some((p, t))
        }))
        .expect("primes are prime");
        entries.push(RecoveredEntry {
            group,
            index: nu.clone(),
            x: big_ratio_to_f64(&x),
            residual_raw,
            residual_scaled,
        });
        solved.push((nu.clone(), x));
    }

    let total_mass: f64 = entries.iter().map(|e| e.x).sum();
    let min_x = entries.iter().map(|e| e.x).fold(f64::INFINITY, f64::min);
    Ok(Recovery {
        entries,
        total_mass,
        max_scaled_residual,
        min_x,
    })
}

/// Convenience: `ratio_to_f64` re-exported for CLI use on moment values.
pub fn moment_to_f64(c: &BigRational) -> f64 {
    big_ratio_to_f64(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;

    fn spec(m: usize, p: u64, b: &[u32]) -> HactsSpec {
        HactsSpec::new(m, p, b.to_vec()).unwrap()
    }

    #[test]
    fn head_series_first_coefficients() {
        for p in [2u64, 3, 5] {
            for b1 in 0..=3u32 {
                let t = hacts_coefficients(&spec(1, p, &[b1]), 8);
                assert_eq!(t.c[0], BigRational::one());
                // c₁ = −p^{−b₁}/(p−1), matching the expansion of the first
                // product factor Σ_{j≥b₁+1} p^{−j}
                let expect = BigRational::new(
                    BigInt::from(-1),
                    BigInt::from(p).pow(b1) * (BigInt::from(p) - BigInt::one()),
                );
                assert_eq!(t.c[1], expect, "p={p} b1={b1}");
                // against direct expansion: c₂ = Σ_{b1<i<j} p^{−i−j}
                let mut c2 = BigRational::zero();
                for i in b1 + 1..=b1 + 60 {
                    for j in i + 1..=b1 + 60 {
                        c2 += BigRational::new(BigInt::one(), BigInt::from(p).pow(i + j));
                    }
                }
                let diff = (&t.c[2] - &c2).abs().to_f64().unwrap();
                assert!(diff < 1e-12, "p={p} b1={b1}");
            }
        }
    }

    #[test]
    fn tail_polynomials_have_expected_degrees() {
        // per-variable degree is b_{i−1} − b_i
        let t = hacts_coefficients(&spec(3, 2, &[3, 2, 0]), 4);
        assert_eq!(t.polys[0].len() - 1, 1); // z₂ degree 3−2
        assert_eq!(t.polys[1].len() - 1, 2); // z₃ degree 2−0
        let t = hacts_coefficients(&spec(3, 2, &[0, 0, 0]), 4);
        assert!(t.polys.iter().all(|p| p.len() == 1));
    }

    #[test]
    fn coefficient_decay_bound_exact() {
        for b in [[0u32, 0, 0], [2, 1, 0], [3, 3, 1], [4, 2, 2]] {
            for p in [2u64, 3] {
                let t = hacts_coefficients(&spec(3, p, &b), 24);
                assert!(t.coefficients_within_bound(), "p={p} b={b:?}");
            }
        }
    }

    #[test]
    fn vanishing_grid() {
        // exhaustive grid of partitions f with parts ≤ 4 compared against b
        let m = 3;
        for p in [2u64, 3] {
            for b_part in Partition::all(12, 4, m) {
                let b = padded(b_part.parts(), m as u32);
                let table = hacts_coefficients(&spec(m, p, &b), 40);
                for f_part in Partition::all(12, 4, m) {
                    let f = padded(f_part.parts(), m as u32);
                    let cums: Vec<u64> = f
                        .iter()
                        .scan(0u64, |acc, &x| {
                            *acc += x as u64;
                            Some(*acc)
                        })
                        .collect();
                    let value = table.eval_at_powers(&cums);
                    let vf = big_ratio_to_f64(&value);
                    // partial-sum magnitude for the relative zero test
                    let mut mag = 0.0f64;
                    {
                        let pf = p as f64;
                        let mut zpow = 1.0f64;
                        for coef in &table.c {
                            mag += big_ratio_to_f64(&coef.abs()) * zpow;
                            zpow *= crate::theory::powi(pf, cums[0] as i64);
                        }
                    }
                    if f > b {
                        assert!(
                            table.exact_zero_at(&f),
                            "product form must vanish: p={p} b={b:?} f={f:?}"
                        );
                        assert!(
                            vf.abs() <= 1e-10 * mag.max(1.0),
                            "series must vanish: p={p} b={b:?} f={f:?} got {vf:e}"
                        );
                    }
                    if f == b {
                        assert!(!table.exact_zero_at(&f));
                        assert!(vf.abs() > 1e-9, "nonzero at f = b, got {vf:e}");
                    }
                }
            }
        }
    }

    #[test]
    fn moments_match_subgroup_sums() {
        let caps = MomentCaps {
            max_parts: vec![3],
            size_cap: 2,
            head_cap: 4,
        };
        let mv = build_theoretical_moments(&[2], &caps).unwrap();
        // trivial index
        assert_eq!(mv.values[&vec![vec![0u32, 0, 0]]], BigRational::one());
        // f = (1,0,0) transposes to type [1]: C = 1 + 1 = 2
        assert_eq!(
            mv.values[&vec![vec![1u32, 0, 0]]],
            BigRational::from_integer(2.into())
        );
        // f = (1,1,0) transposes to type [2] (Z/4): chain 1 + 1 + 1
        assert_eq!(
            mv.values[&vec![vec![1u32, 1, 0]]],
            BigRational::from_integer(3.into())
        );
        // f = (2,0,0) transposes to type [1,1] (Klein): 1 + 3 + 2
        assert_eq!(
            mv.values[&vec![vec![2u32, 0, 0]]],
            BigRational::from_integer(6.into())
        );
    }

    #[test]
    fn index_set_respects_caps() {
        let set = index_set(3, 2, 5);
        assert!(set.iter().all(|f| f[0] <= 5 && f[1] <= 2 && f[2] <= f[1]));
        assert!(set.contains(&vec![5, 2, 2]));
        assert!(set.contains(&vec![0, 0, 0]));
        // downward closure along the solve's coefficient support
        assert!(!set.iter().any(|f| f[1] > 2));
    }
}
