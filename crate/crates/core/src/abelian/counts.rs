use alloc::vec;
use alloc::vec::Vec;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};

use super::partition::{GroupSpec, Partition};
use super::table::subgroup_type_from_generators;

fn ppow(p: u64, e: u64) -> BigUint {
    BigUint::from(p).pow(u32::try_from(e).expect("exponent fits u32"))
}

/// `|∧²G|` for the `p`-group of type `λ`: `p^{Σ_j λ'_j(λ'_j−1)/2}`,
/// equivalently `∏_i p^{(i−1)λ_i}`.
pub fn wedge2_order(p: u64, lam: &Partition) -> BigUint {
    let t = lam.transpose();
    let exp: u64 = t
        .parts()
        .iter()
        .map(|&c| (c as u64) * (c as u64 - 1) / 2)
        .sum();
    ppow(p, exp)
}

/// `|∧²G| = ∏_i a_i^{i−1}` over the invariant factors `a_r | … | a_1`.
pub fn moment_value(g: &GroupSpec) -> BigUint {
    let mut acc = BigUint::one();
    for (i, a) in g.invariant_factors().iter().enumerate() {
        acc *= a.pow(i as u32);
    }
    acc
}

/// `|Hom(G_μ, G_λ)| = p^{Σ_i μ'_i λ'_i}`.
pub fn hom_count(p: u64, mu: &Partition, lam: &Partition) -> BigUint {
    let (mt, lt) = (mu.transpose(), lam.transpose());
    let exp: u64 = (1..=mt.len().min(lt.len()))
        .map(|i| mt.part(i) as u64 * lt.part(i) as u64)
        .sum();
    ppow(p, exp)
}

/// `|Aut(G_λ)| = p^{Σ_i (λ'_i)²} ∏_{i=1}^{λ_1} ∏_{j=1}^{m_i} (1−p^{−j})`
/// with `m_i = λ'_i − λ'_{i+1}`, evaluated as an exact integer.
pub fn aut_order(p: u64, lam: &Partition) -> BigUint {
    let t = lam.transpose();
    let mut exp: i64 = t.parts().iter().map(|&c| (c as i64) * (c as i64)).sum();
    let mut units = BigUint::one();
    for i in 1..=lam.first() {
        let m_i = lam.multiplicity(i) as i64;
        for j in 1..=m_i {
            // (1 − p^{−j}) = (p^j − 1) / p^j
            units *= ppow(p, j as u64) - BigUint::one();
            exp -= j;
        }
    }
    assert!(exp >= 0, "automorphism count is an integer");
    ppow(p, exp as u64) * units
}

/// Number of symmetric, bilinear, perfect pairings `G_λ × G_λ → C*`:
/// `p^{Σ_i λ'_i(λ'_i+1)/2} ∏_{i=1}^{λ_1} ∏_{j=1}^{⌈m_i/2⌉} (1−p^{1−2j})`.
pub fn pairing_count(p: u64, lam: &Partition) -> BigUint {
    let t = lam.transpose();
    let mut exp: i64 = t
        .parts()
        .iter()
        .map(|&c| (c as i64) * (c as i64 + 1) / 2)
        .sum();
    let mut units = BigUint::one();
    for i in 1..=lam.first() {
        let m_i = lam.multiplicity(i);
        for j in 1..=(m_i as i64 + 1) / 2 {
            // (1 − p^{1−2j}) = (p^{2j−1} − 1) / p^{2j−1}
            units *= ppow(p, (2 * j - 1) as u64) - BigUint::one();
            exp -= 2 * j - 1;
        }
    }
    assert!(exp >= 0, "pairing count is an integer");
    ppow(p, exp as u64) * units
}

/// Gaussian binomial `[n, k]_p`: the number of `k`-dimensional subspaces of
/// `F_p^n`.
pub fn gaussian_binomial(n: u32, k: u32, p: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let mut num = BigUint::one();
    let mut den = BigUint::one();
    for i in 0..k {
        num *= ppow(p, (n - i) as u64) - BigUint::one();
        den *= ppow(p, (i + 1) as u64) - BigUint::one();
    }
    let (q, r) = num_integer::Integer::div_rem(&num, &den);
    debug_assert!(r.is_zero());
    q
}

/// Number of subgroups of type `μ` inside the abelian `p`-group of type `λ`.
///
/// Classical product formula in the transposes `a = λ'`, `b = μ'`:
/// `∏_i p^{b_{i+1}(a_i − b_i)} · [a_i − b_{i+1}, b_i − b_{i+1}]_p`,
/// zero unless `b_i ≤ a_i` for all `i`.  Cross-checked against exhaustive
/// subgroup enumeration in the oracle tests.
pub fn subgroup_count_of_type(p: u64, mu: &Partition, lam: &Partition) -> BigUint {
    subgroup_count_transposed(p, mu.transpose().parts(), lam.transpose().parts())
}

/// Same count with both arguments already transposed (`b = μ'`, `a = λ'`).
pub(crate) fn subgroup_count_transposed(p: u64, b: &[u32], a: &[u32]) -> BigUint {
    let depth = a.len().max(b.len());
    let at = |s: &[u32], i: usize| -> u64 {
        if i < s.len() {
            s[i] as u64
        } else {
            0
        }
    };
    let mut count = BigUint::one();
    for i in 0..depth {
        let (ai, bi, bi1) = (at(a, i), at(b, i), at(b, i + 1));
        if bi > ai {
            return BigUint::zero();
        }
        count *= ppow(p, bi1 * (ai - bi));
        count *= gaussian_binomial((ai - bi1) as u32, (bi - bi1) as u32, p);
    }
    count
}

/// `Σ_{G₁ ≤ G_λ} |∧²G₁|`, the Hom-moment companion of [`wedge2_order`].
///
/// Evaluated through the subgroup type counts, so it stays exact far beyond
/// the range of exhaustive enumeration.
pub fn sum_wedge2_over_subgroups(p: u64, lam: &Partition) -> BigUint {
    sum_wedge2_transposed(p, lam.transpose().parts())
}

/// Transpose-side version: ambient group has transposed type `a`.
pub(crate) fn sum_wedge2_transposed(p: u64, a: &[u32]) -> BigUint {
    // subgroup types in transpose space are the partitions inside the box
    // b_i ≤ a_i; the summand is p^{Σ b_i(b_i−1)/2}
    let mut acc = BigUint::zero();
    let mut b: Vec<u32> = Vec::new();
    fn rec(p: u64, a: &[u32], b: &mut Vec<u32>, acc: &mut BigUint) {
        let i = b.len();
        if i == a.len() {
            let exp: u64 = b
                .iter()
                .map(|&x| x as u64 * (x as u64).saturating_sub(1) / 2)
                .sum();
            *acc += subgroup_count_transposed(p, b, a) * ppow(p, exp);
            return;
        }
        let hi = a[i].min(if i == 0 { a[i] } else { b[i - 1] });
        for x in 0..=hi {
            b.push(x);
            rec(p, a, b, acc);
            b.pop();
        }
    }
    if a.is_empty() {
        return BigUint::one();
    }
    rec(p, a, &mut b, &mut acc);
    acc
}

/// Checks the subgroup-count bound: enumerated `#{G_μ ⊆ G_λ}` against
/// `(∏_{i≥1}(1−2^{−i}))^{−λ_1} p^{Σ_i μ'_i λ'_i − (μ'_i)²}`.
///
/// The irrational prefactor is replaced by a slightly larger rational one
/// (an upper bound for `1/∏(1−2^{−i})`), so a `true` answer certifies the
/// inequality.
pub fn nsub_bound_check(
    p: u64,
    mu: &Partition,
    lam: &Partition,
    oracle_bound: u64,
) -> Result<bool, super::AbelianError> {
    let subgroups = super::table::enumerate_subgroups(p, lam, oracle_bound)?;
    let count = subgroups
        .iter()
        .find(|(t, _)| t == mu)
        .map(|(_, c)| c.clone())
        .unwrap_or_else(BigUint::zero);
    if count.is_zero() {
        return Ok(true);
    }
    let (mt, lt) = (mu.transpose(), lam.transpose());
    let mut exp: i64 = 0;
    for i in 1..=lam.first() as usize {
        let (m, l) = (mt.part(i) as i64, lt.part(i) as i64);
        exp += m * l - m * m;
    }
    assert!(exp >= 0, "nonzero count forces μ' ≤ λ'");
    // ∏_{i≥1}(1−2^{−i}) = 0.2887880950866…; use the lower bound 0.28878809
    // so that count / 0.28878809^{λ_1} dominates the true bound.
    let lam1 = lam.first();
    let lhs = count * BigUint::from(28_878_809u64).pow(lam1);
    let rhs = ppow(p, exp as u64) * BigUint::from(100_000_000u64).pow(lam1);
    Ok(lhs <= rhs)
}

/// `#Sur(H, G)`, exactly.
///
/// Per prime, surjectivity only depends on the induced map to `G/pG`
/// (Nakayama), so the count is an inclusion–exclusion over the subspace
/// lattice of `G/pG` with weights `(−1)^k p^{k(k−1)/2}` for corank `k`,
/// applied to `|Hom|` into the subspace preimages.
pub fn sur_count(h: &GroupSpec, g: &GroupSpec) -> BigUint {
    let mut acc = BigUint::one();
    for (p, lam) in g.factors() {
        acc *= sur_count_p(p, &h.sylow(p), lam);
        if acc.is_zero() {
            return acc;
        }
    }
    acc
}

/// Single-prime surjection count `#Sur(G_μ, G_λ)`.
pub fn sur_count_p(p: u64, mu: &Partition, lam: &Partition) -> BigUint {
    let mut total = BigInt::zero();
    for (preimage, weight) in subspace_weight_table(p, lam) {
        total += weight * BigInt::from(hom_count(p, mu, &preimage));
    }
    assert!(!total.is_negative(), "inclusion–exclusion yields a count");
    total.to_biguint().expect("nonnegative")
}

/// Collapsed inclusion–exclusion table for a fixed target: pairs of
/// (preimage type of a subspace `W ≤ G/pG`, summed signed weight).
pub(crate) fn subspace_weight_table(p: u64, lam: &Partition) -> Vec<(Partition, BigInt)> {
    let d = lam.len() as u32; // dim G/pG
    let mut table: Vec<(Partition, BigInt)> = Vec::new();
    let mut push = |t: Partition, w: BigInt| {
        if let Some(entry) = table.iter_mut().find(|(s, _)| *s == t) {
            entry.1 += w;
        } else {
            table.push((t, w));
        }
    };

    if lam.first() <= 1 {
        // elementary target: the preimage of a k-dimensional subspace is
        // (Z/p)^k, so only dimension counts matter
        for k in 0..=d {
            let corank = (d - k) as u64;
            let mut w = BigInt::from(ppow(p, corank * (corank.max(1) - 1) / 2));
            if corank % 2 == 1 {
                w = -w;
            }
            w *= BigInt::from(gaussian_binomial(d, k, p));
            push(Partition::from_unsorted(vec![1; k as usize]), w);
        }
        return table;
    }

    // general target: walk every subspace of F_p^d in reduced echelon form
    let gens_p_g: Vec<Vec<u64>> = (0..lam.len())
        .map(|i| {
            let mut v = vec![0u64; lam.len()];
            v[i] = p; // p·e_i generates pG
            v
        })
        .collect();
    for_each_subspace(p, d, &mut |basis| {
        let k = basis.len() as u32;
        let corank = (d - k) as u64;
        let mut gens: Vec<Vec<u64>> = basis.to_vec();
        gens.extend(gens_p_g.iter().cloned());
        let preimage = subgroup_type_from_generators(p, lam.first(), &gens, lam)
            .expect("generators lie in the ambient group");
        let mut w = BigInt::from(ppow(p, corank * (corank.max(1) - 1) / 2));
        if corank % 2 == 1 {
            w = -w;
        }
        push(preimage, w);
    });
    table
}

/// Visits every subspace of `F_p^d` once, presenting a row-reduced basis
/// (entries in `[0, p)`).  Subspaces are enumerated by pivot-column pattern
/// and free-entry assignment of the reduced echelon form.
pub(crate) fn for_each_subspace(p: u64, d: u32, f: &mut impl FnMut(&[Vec<u64>])) {
    let d = d as usize;
    f(&[]); // the zero subspace
    for k in 1..=d {
        // choose pivot columns c_1 < … < c_k
        let mut pivots: Vec<usize> = (0..k).collect();
        loop {
            // free positions: row i, non-pivot columns right of pivots[i]
            let mut free: Vec<(usize, usize)> = Vec::new();
            for (i, &ci) in pivots.iter().enumerate() {
                for c in ci + 1..d {
                    if !pivots.contains(&c) {
                        free.push((i, c));
                    }
                }
            }
            let mut assignment = vec![0u64; free.len()];
            loop {
                let mut basis = vec![vec![0u64; d]; k];
                for (i, &ci) in pivots.iter().enumerate() {
                    basis[i][ci] = 1;
                }
                for (slot, &(i, c)) in free.iter().enumerate() {
                    basis[i][c] = assignment[slot];
                }
                f(&basis);
                // next assignment in mixed radix p
                let mut carry = true;
                for digit in assignment.iter_mut() {
                    *digit += 1;
                    if *digit == p {
                        *digit = 0;
                    } else {
                        carry = false;
                        break;
                    }
                }
                if carry {
                    break;
                }
            }
            // next pivot combination
            let mut i = k;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                if pivots[i] < d - (k - i) {
                    pivots[i] += 1;
                    for j in i + 1..k {
                        pivots[j] = pivots[j - 1] + 1;
                    }
                    break;
                }
                if i == 0 {
                    pivots.clear();
                    break;
                }
            }
            if pivots.is_empty() {
                break;
            }
        }
    }
}
