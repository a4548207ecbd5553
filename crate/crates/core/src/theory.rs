//! Closed-form evaluation of the limiting probabilities, moments, bounds,
//! and constants.
//!
//! Every probability comes back as a [`Bounded`] value carrying an explicit
//! truncation-tail bound and a floating round-off estimate, so downstream
//! comparisons can use principled tolerances instead of magic numbers.
//!
//! The limiting Sylow probability is always computed along two independent
//! routes — the exact pairing/automorphism counts, and the transpose-side
//! product expansion — and the two must agree to `10^{-12}` relative or the
//! call reports an internal inconsistency.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::abelian::{self, GroupSpec, Partition};

/// Truncation control for the infinite products.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    /// Stop once the next factor differs from 1 by less than this.
    pub rel_tol: f64,
    /// Hard cap on the number of product factors.
    pub max_index: u32,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            rel_tol: 1e-15,
            max_index: 256,
        }
    }
}

impl TruncationPolicy {
    pub fn validate(&self) -> Result<(), TheoryError> {
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-6) || self.max_index < 64 {
            return Err(TheoryError::InvalidPolicy);
        }
        Ok(())
    }
}

/// A floating value with its error budget: `tail_bound` covers series and
/// product truncation, `roundoff` the accumulated f64 rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounded {
    pub value: f64,
    pub tail_bound: f64,
    pub roundoff: f64,
}

impl Bounded {
    pub fn exact(value: f64) -> Self {
        Bounded {
            value,
            tail_bound: 0.0,
            roundoff: f64::EPSILON * value.abs(),
        }
    }

    /// Total attached error bound.
    pub fn total_bound(&self) -> f64 {
        self.tail_bound + self.roundoff
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TheoryError {
    InvalidPolicy,
    /// The two closed forms disagreed beyond tolerance: an implementation
    /// bug, not a data issue.
    InternalInconsistency {
        detail: String,
    },
    /// `limit_prob_multi` needs every prime dividing the group order.
    MissingPrime {
        p: u64,
    },
    OutOfRange {
        detail: String,
    },
}

impl fmt::Display for TheoryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TheoryError::InvalidPolicy => write!(f, "tolerance must be in (0, 1e-6], cap ≥ 64"),
            TheoryError::InternalInconsistency { detail } => {
                write!(f, "dual-formula disagreement: {detail}")
            }
            TheoryError::MissingPrime { p } => {
                write!(f, "prime set must contain every prime of |G|; missing {p}")
            }
            TheoryError::OutOfRange { detail } => write!(f, "{detail}"),
        }
    }
}

impl core::error::Error for TheoryError {}

#[inline]
fn fabs(x: f64) -> f64 {
    if x < 0.0 {
        -x
    } else {
        x
    }
}

/// `base^exp` for integer exponents by squaring (core has no `powi`).
pub(crate) fn powi(base: f64, exp: i64) -> f64 {
    if exp < 0 {
        return 1.0 / powi(base, -exp);
    }
    let mut acc = 1.0;
    let mut b = base;
    let mut e = exp as u64;
    while e > 0 {
        if e & 1 == 1 {
            acc *= b;
        }
        b *= b;
        e >>= 1;
    }
    acc
}

/// Float of `num/den` via bit-length rescaling, safe when either side
/// overflows `f64` on its own.
pub fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let shift_n = num.bits().saturating_sub(64) as i64;
    let shift_d = den.bits().saturating_sub(64) as i64;
    let top = (num >> shift_n as u64).to_f64().expect("fits after shift");
    let bot = (den >> shift_d as u64).to_f64().expect("fits after shift");
    (top / bot) * powi(2.0, shift_n - shift_d)
}

pub fn big_ratio_to_f64(r: &BigRational) -> f64 {
    let sign = if r.is_negative() { -1.0 } else { 1.0 };
    sign * ratio_to_f64(r.numer().magnitude(), r.denom().magnitude())
}

/// `∏_{k≥0}(1 − p^{−2k−1})`: the probability mass factor of the trivial
/// group at `p`.
///
/// The partial product stops when the next factor differs from 1 by less
/// than the policy tolerance; the reported tail bound is the remaining
/// geometric sum `Σ p^{−2k−1} = p^{−2K−1}/(1−p^{−2})`.
pub fn normalizing_constant(p: u64, policy: &TruncationPolicy) -> Bounded {
    let pf = p as f64;
    let mut value = 1.0;
    let mut term = 1.0 / pf; // p^{-(2k+1)} at k = 0
    let mut k = 0;
    while term >= policy.rel_tol && k < policy.max_index {
        value *= 1.0 - term;
        term /= pf * pf;
        k += 1;
    }
    let tail_sum = term / (1.0 - 1.0 / (pf * pf));
    Bounded {
        value,
        tail_bound: value * tail_sum / (1.0 - tail_sum),
        roundoff: value * f64::EPSILON * (k as f64 + 2.0),
    }
}

/// The limiting probability that the Sylow-`p` subgroup has type `λ`.
///
/// Route A: `#pairings / (|G| · |Aut(G)|)` from the exact counts.
/// Route B: the transpose-side expansion
/// `p^{−Σ μ_i(μ_i+1)/2} ∏_{i=1}^{λ_1} ∏_{j=1}^{⌊(μ_i−μ_{i+1})/2⌋} (1−p^{−2j})^{−1}`
/// with `μ = λ'`.  Both are multiplied by [`normalizing_constant`].
pub fn limit_prob_sylow(
    p: u64,
    lam: &Partition,
    policy: &TruncationPolicy,
) -> Result<Bounded, TheoryError> {
    policy.validate()?;
    let fraction_a = {
        let num = abelian::pairing_count(p, lam);
        let den = lam.group_order(p) * abelian::aut_order(p, lam);
        ratio_to_f64(&num, &den)
    };
    let (fraction_b, ops_b) = emain_fraction(p, lam);
    let scale = fabs(fraction_a)
        .max(fabs(fraction_b))
        .max(f64::MIN_POSITIVE);
    if fabs(fraction_a - fraction_b) > 1e-12 * scale {
        return Err(TheoryError::InternalInconsistency {
            detail: alloc::format!(
                "p={p} λ={lam}: counts give {fraction_a:e}, product gives {fraction_b:e}"
            ),
        });
    }
    let norm = normalizing_constant(p, policy);
    let value = fraction_b * norm.value;
    Ok(Bounded {
        value,
        tail_bound: fraction_b * norm.tail_bound,
        roundoff: value * f64::EPSILON * (ops_b + 4) as f64 + fraction_b * norm.roundoff,
    })
}

/// The fraction of the product expansion, plus an operation count for the
/// round-off model.
fn emain_fraction(p: u64, lam: &Partition) -> (f64, u32) {
    let mu = lam.transpose();
    let exp: i64 = mu
        .parts()
        .iter()
        .map(|&m| (m as i64) * (m as i64 + 1) / 2)
        .sum();
    let mut value = powi(p as f64, -exp);
    let mut ops = 1u32;
    for i in 1..=lam.first() as usize {
        let gap = mu.part(i) - mu.part(i + 1);
        for j in 1..=(gap / 2) as i64 {
            value /= 1.0 - powi(p as f64, -2 * j);
            ops += 1;
        }
    }
    (value, ops)
}

/// Joint limiting probability over a finite prime set `P ⊇ primes(|G|)`:
/// the per-prime Sylow probabilities multiply (asymptotic independence).
pub fn limit_prob_multi(
    primes: &[u64],
    g: &GroupSpec,
    policy: &TruncationPolicy,
) -> Result<Bounded, TheoryError> {
    policy.validate()?;
    if let Some(p) = g.primes().find(|p| !primes.contains(p)) {
        return Err(TheoryError::MissingPrime { p });
    }
    let mut value = 1.0;
    let mut tail = 0.0;
    let mut round = 0.0;
    for &p in primes {
        let b = limit_prob_sylow(p, &g.sylow(p), policy)?;
        tail = tail * b.value + b.tail_bound * value;
        round = round * b.value + b.roundoff * value;
        value *= b.value;
    }
    Ok(Bounded {
        value,
        tail_bound: tail,
        roundoff: round + value * f64::EPSILON * primes.len() as f64,
    })
}

/// Limiting probability that the `p`-rank equals `r`:
/// `p^{−r(r+1)/2} ∏_{i=r+1}^∞ (1−p^{−i}) ∏_{i=1}^∞ (1−p^{−2i})^{−1}`.
pub fn prank_prob(p: u64, r: u32, policy: &TruncationPolicy) -> Bounded {
    let pf = p as f64;
    let mut value = powi(pf, -((r as i64) * (r as i64 + 1) / 2));
    let mut ops = 1u32;
    // ∏_{i=r+1..K}(1 − p^{-i})
    let mut term = powi(pf, -(r as i64 + 1));
    let mut i = r + 1;
    while term >= policy.rel_tol && i < r + policy.max_index {
        value *= 1.0 - term;
        term /= pf;
        i += 1;
        ops += 1;
    }
    let tail1 = term / (1.0 - 1.0 / pf);
    // ∏_{i=1..K}(1 − p^{-2i})^{-1}
    let mut term2 = 1.0 / (pf * pf);
    let mut k = 0;
    while term2 >= policy.rel_tol && k < policy.max_index {
        value /= 1.0 - term2;
        term2 /= pf * pf;
        k += 1;
        ops += 1;
    }
    let tail2 = term2 / (1.0 - 1.0 / (pf * pf));
    Bounded {
        value,
        tail_bound: value * (tail1 + tail2) * 1.5,
        roundoff: value * f64::EPSILON * (ops + 2) as f64,
    }
}

/// Number of symmetric `n×n` matrices over `F_p` of rank `n − r`, exactly:
/// `p^{n(n+1)/2 − r(r+1)/2} ∏_{i=1}^{⌊(n−r)/2⌋}(1−p^{−2i})^{−1} ∏_{i=r+1}^{n}(1−p^{−i})`.
pub fn macwilliams_rank_count(p: u64, n: u32, r: u32) -> Result<BigUint, TheoryError> {
    if r > n {
        return Err(TheoryError::OutOfRange {
            detail: alloc::format!("rank deficiency {r} exceeds size {n}"),
        });
    }
    let big_p = BigUint::from(p);
    let mut acc = BigRational::from_integer(big_p.pow(n * (n + 1) / 2 - r * (r + 1) / 2).into());
    for i in 1..=(n - r) / 2 {
        // (1 − p^{−2i})^{−1} = p^{2i} / (p^{2i} − 1)
        let p2i = big_p.pow(2 * i);
        acc *= BigRational::new(p2i.clone().into(), (p2i - BigUint::one()).into());
    }
    for i in r + 1..=n {
        let pi = big_p.pow(i);
        acc *= BigRational::new((pi - BigUint::one()).into(), big_p.pow(i).into());
    }
    if !acc.is_integer() {
        return Err(TheoryError::InternalInconsistency {
            detail: String::from("rank count did not simplify to an integer"),
        });
    }
    Ok(acc.to_integer().magnitude().clone())
}

const SIEVE_LIMIT_FLOOR: u64 = 1 << 14;

/// Primes up to `limit` by Eratosthenes.
fn primes_up_to(limit: u64) -> Vec<u64> {
    let limit = limit as usize;
    let mut composite = vec![false; limit + 1];
    let mut out = Vec::new();
    for n in 2..=limit {
        if !composite[n] {
            out.push(n as u64);
            let mut m = n * n;
            while m <= limit {
                composite[m] = true;
                m += n;
            }
        }
    }
    out
}

/// Shared driver for the prime-product constants.  `factor` maps a prime to
/// its local factor; the tail over omitted primes is bounded through
/// `Σ_{n>P} 2 n^{-3} ≤ P^{-2}` on the log scale.  Per-prime factors run at
/// a tolerance four orders finer than the target so their truncations
/// cannot accumulate past it.
fn prime_product(
    policy: &TruncationPolicy,
    factor: impl Fn(u64, &TruncationPolicy) -> f64,
) -> Bounded {
    let tol = policy.rel_tol.max(1e-12);
    // choose P with P^{-2} < tol/2
    let mut limit = SIEVE_LIMIT_FLOOR;
    while (limit as f64) * (limit as f64) < 2.0 / tol && limit < (1 << 26) {
        limit *= 2;
    }
    let primes = primes_up_to(limit);
    let inner = TruncationPolicy {
        rel_tol: (tol * 1e-4).max(1e-15),
        max_index: policy.max_index,
    };
    let mut value = 1.0;
    for &p in &primes {
        value *= factor(p, &inner);
    }
    let log_tail = 1.0 / ((limit as f64) * (limit as f64));
    let inner_accum = 2.0 * inner.rel_tol * primes.len() as f64;
    Bounded {
        value,
        tail_bound: value * (log_tail * 2.0 + inner_accum),
        roundoff: value * f64::EPSILON * primes.len() as f64 * 4.0,
    }
}

/// `∏_p ∏_{i≥1}(1−p^{−2i−1})`: asymptotic upper bound for `P(S cyclic)`,
/// equal to `ζ(3)^{−1}ζ(5)^{−1}ζ(7)^{−1}⋯`.
pub fn cyclic_upper_bound(policy: &TruncationPolicy) -> Bounded {
    prime_product(policy, |p, pol| {
        // ∏_{i≥1}(1−p^{−2i−1}) = normalizing constant without its k=0 factor
        normalizing_constant(p, pol).value / (1.0 - 1.0 / p as f64)
    })
}

/// `∏_p (1+p^{−1}) ∏_{k≥0}(1−p^{−2k−1})`: asymptotic upper bound for
/// `P(#spanning trees square-free)`, equal to `ζ(2)^{−1}ζ(3)^{−1}ζ(5)^{−1}⋯`.
pub fn squarefree_upper_bound(policy: &TruncationPolicy) -> Bounded {
    prime_product(policy, |p, pol| {
        (1.0 + 1.0 / p as f64) * normalizing_constant(p, pol).value
    })
}

/// `Σ_λ P(S_p ≅ G_λ) · #Sur(G_λ, G_κ)` truncated at `|λ| ≤ size_cap`.
///
/// This is the theory side of the moment identity: as the cap grows the sum
/// approaches `|∧²G_κ|`.  The tail bound is the crude positive-series bound
/// `(last shell) · p/(p−1) · 3`.
pub fn sur_moment_sum(
    p: u64,
    target: &Partition,
    policy: &TruncationPolicy,
    size_cap: u64,
) -> Result<Bounded, TheoryError> {
    policy.validate()?;
    let mut value = 0.0;
    let mut err = 0.0;
    let mut last_shell = 0.0;
    for size in 0..=size_cap {
        let mut shell = 0.0;
        let mut shell_err = 0.0;
        Partition::for_each(size, size as u32, size as usize, &mut |lam| {
            if lam.size() != size {
                return;
            }
            let prob = match limit_prob_sylow(p, lam, policy) {
                Ok(b) => b,
                Err(_) => return,
            };
            let sur = ratio_to_f64(&abelian::sur_count_p(p, lam, target), &BigUint::one());
            shell += prob.value * sur;
            shell_err += prob.total_bound() * sur;
        });
        value += shell;
        err += shell_err;
        last_shell = shell;
    }
    Ok(Bounded {
        value,
        tail_bound: err + last_shell * 3.0 * p as f64 / (p as f64 - 1.0),
        roundoff: value * f64::EPSILON * 64.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::str::FromStr;

    fn part(s: &str) -> Partition {
        Partition::from_str(s).unwrap()
    }

    fn policy() -> TruncationPolicy {
        TruncationPolicy::default()
    }

    #[test]
    fn normalizing_constant_values() {
        let b = normalizing_constant(2, &policy());
        assert!((b.value - 0.419_422_5).abs() < 1e-6, "{}", b.value);
        assert!((1.0 - b.value - 0.5806).abs() < 1e-4);
        // large p: dominated by the first factor
        let b = normalizing_constant(101, &policy());
        assert!((b.value - (1.0 - 1.0 / 101.0)).abs() < 1e-4);
        // sandwich (1−p⁻¹)(1 − p^{−3}/(1−p^{−2})) < value < (1−p⁻¹)
        for p in [2u64, 3, 5, 7, 101] {
            let pf = p as f64;
            let b = normalizing_constant(p, &policy());
            assert!(b.value < 1.0 - 1.0 / pf);
            let lower = (1.0 - 1.0 / pf) * (1.0 - powi(pf, -3) / (1.0 - powi(pf, -2)));
            assert!(b.value > lower);
        }
    }

    #[test]
    fn sylow_probabilities_match_hand_values() {
        // cyclic λ = [r]: fraction exactly p^{-r}
        for p in [2u64, 3, 5, 7] {
            for r in 0..=6i64 {
                let lam = Partition::from_unsorted(vec![r as u32]);
                let b = limit_prob_sylow(p, &lam, &policy()).unwrap();
                let norm = normalizing_constant(p, &policy()).value;
                assert!(
                    fabs(b.value - powi(p as f64, -r) * norm) < 1e-13,
                    "p={p} r={r}"
                );
            }
        }
        // λ = [] gives the normalizing constant itself
        let b = limit_prob_sylow(2, &part("[]"), &policy()).unwrap();
        assert!(fabs(b.value - normalizing_constant(2, &policy()).value) < 1e-15);
        // elementary abelian of rank r: fraction ≈ p^{-r(r+1)/2}
        let b = limit_prob_sylow(2, &part("[1,1]"), &policy()).unwrap();
        let norm = normalizing_constant(2, &policy()).value;
        assert!(fabs(b.value - norm / 6.0) < 1e-14); // 4/(4·6) = 1/6
    }

    #[test]
    fn dual_formula_agreement_wide_grid() {
        for p in [2u64, 3, 5, 7] {
            for lam in Partition::all(12, 6, 12) {
                limit_prob_sylow(p, &lam, &policy())
                    .unwrap_or_else(|e| panic!("{e} at p={p} λ={lam}"));
            }
        }
    }

    #[test]
    fn multi_prime_factorizes() {
        let g = GroupSpec::from_invariant_factors(&[6]).unwrap();
        let joint = limit_prob_multi(&[2, 3], &g, &policy()).unwrap();
        let p2 = limit_prob_sylow(2, &part("[1]"), &policy()).unwrap();
        let p3 = limit_prob_sylow(3, &part("[1]"), &policy()).unwrap();
        assert!(fabs(joint.value - p2.value * p3.value) < 1e-15);
        // missing prime is an error
        assert!(matches!(
            limit_prob_multi(&[2], &g, &policy()),
            Err(TheoryError::MissingPrime { p: 3 })
        ));
        // trivial group over one prime is the normalizing constant
        let t = limit_prob_multi(&[2], &GroupSpec::trivial(), &policy()).unwrap();
        assert!(fabs(t.value - normalizing_constant(2, &policy()).value) < 1e-15);
    }

    #[test]
    fn trivial_mass_decreases_with_more_primes() {
        let primes = primes_up_to(100);
        let mut prev = 1.0;
        for k in 1..=primes.len() {
            let b = limit_prob_multi(&primes[..k], &GroupSpec::trivial(), &policy()).unwrap();
            assert!(b.value < prev);
            prev = b.value;
        }
        assert!(prev < 0.2); // heading to zero
    }

    #[test]
    fn prank_values() {
        let b = prank_prob(2, 0, &policy());
        let norm = normalizing_constant(2, &policy()).value;
        assert!(fabs(b.value - norm) < 1e-12, "{} vs {}", b.value, norm);
        // completeness at the stated criterion tolerance
        let total: f64 = (0..=40).map(|r| prank_prob(2, r, &policy()).value).sum();
        assert!(fabs(total - 1.0) < 1e-10, "total {total}");
        // marginalization: Σ over λ with r parts of P(λ) = prank(r)
        for r in 0..=3u32 {
            let mut sum = 0.0;
            Partition::for_each(34, 30, r as usize, &mut |lam| {
                if lam.len() == r as usize {
                    sum += limit_prob_sylow(2, lam, &policy()).unwrap().value;
                }
            });
            let expect = prank_prob(2, r, &policy()).value;
            assert!(fabs(sum - expect) < 1e-6, "r={r}: {sum} vs {expect}");
        }
    }

    #[test]
    fn macwilliams_small_and_total() {
        // n = 1: one rank-0 and p−1 rank-1 matrices
        assert_eq!(macwilliams_rank_count(2, 1, 1).unwrap(), BigUint::one());
        assert_eq!(macwilliams_rank_count(2, 1, 0).unwrap(), BigUint::one());
        // Σ_r count = p^{n(n+1)/2}
        for p in [2u64, 3] {
            for n in 1..=5u32 {
                let total: BigUint = (0..=n)
                    .map(|r| macwilliams_rank_count(p, n, r).unwrap())
                    .sum();
                assert_eq!(total, BigUint::from(p).pow(n * (n + 1) / 2), "p={p} n={n}");
            }
        }
        assert!(macwilliams_rank_count(2, 2, 3).is_err());
    }

    #[test]
    fn constants_reproduce_published_digits() {
        let pol = TruncationPolicy {
            rel_tol: 1e-9,
            ..TruncationPolicy::default()
        };
        let c = cyclic_upper_bound(&pol);
        assert!(
            (c.value - 0.793_521_2).abs() < 1e-6,
            "cyclic {} ± {}",
            c.value,
            c.total_bound()
        );
        let s = squarefree_upper_bound(&pol);
        assert!(
            (s.value - 0.482_403_06).abs() < 1e-6,
            "squarefree {} ± {}",
            s.value,
            s.total_bound()
        );
    }

    #[test]
    fn cyclic_bound_agrees_with_zeta_series() {
        // independent route: ζ(k)^{-1} for odd k ≥ 3 by direct summation
        let zeta = |k: i64| -> f64 {
            let mut s = 1.0;
            for n in 2..200_000i64 {
                s += powi(n as f64, -k);
            }
            // integral tail bound
            s + powi(200_000.0, 1 - k) / (k - 1) as f64
        };
        let mut expect = 1.0;
        let mut k = 3;
        loop {
            let z = zeta(k);
            expect /= z;
            if z - 1.0 < 1e-17 {
                break;
            }
            k += 2;
        }
        let got = cyclic_upper_bound(&TruncationPolicy {
            rel_tol: 1e-9,
            ..TruncationPolicy::default()
        });
        assert!(
            (got.value - expect).abs() < 1e-8,
            "{} vs {expect}",
            got.value
        );
    }

    #[test]
    fn normalization_deficit_is_small() {
        // Σ over |λ| ≤ 30 exceeds 1 − 1e-6 (criterion-4 scale, p = 2)
        let mut total = 0.0;
        Partition::for_each(30, 30, 30, &mut |lam| {
            total += limit_prob_sylow(2, lam, &policy()).unwrap().value;
        });
        assert!(total <= 1.0 + 1e-9);
        assert!(total >= 1.0 - 1e-6, "deficit {}", 1.0 - total);
    }

    #[test]
    fn finite_rank_census_converges_to_rank_limit() {
        // count(n, r) / p^{n(n+1)/2} approaches the limiting rank-deficiency
        // probability as n grows; at n = 40 the gap is far below 1e-8
        for p in [2u64, 3] {
            for r in 0..=3u32 {
                let n = 40;
                let frac = ratio_to_f64(
                    &macwilliams_rank_count(p, n, r).unwrap(),
                    &BigUint::from(p).pow(n * (n + 1) / 2),
                );
                let limit = prank_prob(p, r, &policy()).value;
                assert!(fabs(frac - limit) < 1e-8, "p={p} r={r}: {frac} vs {limit}");
            }
        }
    }

    #[test]
    fn moment_identity_small_targets() {
        for p in [2u64, 3] {
            for target in [part("[]"), part("[1]"), part("[2]"), part("[1,1]")] {
                let got = sur_moment_sum(p, &target, &policy(), 26).unwrap();
                let expect = ratio_to_f64(&abelian::wedge2_order(p, &target), &BigUint::one());
                assert!(
                    fabs(got.value - expect) < 1e-4,
                    "p={p} κ={target}: {} vs {expect} (tail {})",
                    got.value,
                    got.tail_bound
                );
            }
        }
    }
}
