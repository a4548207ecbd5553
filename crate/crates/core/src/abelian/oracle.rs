//! Exhaustive brute-force oracles over explicit element tables.
//!
//! Everything here counts by enumeration, never by formula, so the results
//! are independent checks of the closed-form counters.  Each
//! oracle takes a work budget and returns `None` when enumeration would
//! exceed it.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigUint;

use super::partition::Partition;
use super::table::SmallGroupTable;
use crate::linalg::{rank_mod_p, ZMatrix};

/// Deterministic primality check for the small moduli used here.
pub fn is_prime_u64(n: u64) -> bool {
    super::partition::is_prime(n)
}

/// `|Hom(G_μ, G_λ)|` by counting, for each cyclic generator of `G_μ`, the
/// elements of the table it can map to (those killed by its order).  The
/// per-order counts come from scanning the table, not from a formula.
pub fn hom_count(table: &SmallGroupTable, mu: &Partition) -> BigUint {
    let mut acc = BigUint::from(1u32);
    for &part in mu.parts() {
        acc *= BigUint::from(table.torsion_mask(part).len());
    }
    acc
}

/// `#Sur(G_μ, G_λ)` by enumerating every homomorphism (image tuples of the
/// canonical generators) and testing whether the images generate.
pub fn sur_count(table: &SmallGroupTable, mu: &Partition, max_ops: u64) -> Option<BigUint> {
    let image_sets: Vec<Vec<u64>> = mu.parts().iter().map(|&k| table.killed_by(k)).collect();
    let tuples: u64 = image_sets
        .iter()
        .try_fold(1u64, |acc, s| acc.checked_mul(s.len() as u64))?;
    if tuples.checked_mul(table.order())? > max_ops {
        return None;
    }
    let mut count = 0u64;
    let mut picks = vec![0usize; image_sets.len()];
    loop {
        let gens: Vec<u64> = picks
            .iter()
            .zip(image_sets.iter())
            .map(|(&i, s)| s[i])
            .collect();
        if table.generates(&gens) {
            count += 1;
        }
        // next tuple
        let mut i = 0;
        loop {
            if i == picks.len() {
                return Some(BigUint::from(count));
            }
            picks[i] += 1;
            if picks[i] < image_sets[i].len() {
                break;
            }
            picks[i] = 0;
            i += 1;
        }
    }
}

/// `|Aut(G_λ)|`: surjective endomorphisms of a finite group are bijective.
pub fn aut_order(table: &SmallGroupTable, max_ops: u64) -> Option<BigUint> {
    sur_count(table, table.lambda(), max_ops)
}

/// Number of symmetric, bilinear, perfect pairings `G_λ × G_λ → C*`.
///
/// A symmetric bilinear form is a symmetric array `β_{ij} ∈ Z/p^{min(λ_i,λ_j)}`
/// (the value `b(e_i, e_j) = β_{ij}/p^{min(λ_i,λ_j)}` in `Q/Z`); it is perfect
/// iff no nonzero element pairs to zero with every generator.
pub fn pairing_count(table: &SmallGroupTable, max_ops: u64) -> Option<BigUint> {
    let lam = table.lambda().clone();
    let r = lam.len();
    if r == 0 {
        return Some(BigUint::from(1u32));
    }
    let p = table.p();
    let denom_exp = lam.first();
    let scale = |i: usize, j: usize| -> u64 {
        // lift β_{ij}/p^{min} into the common denominator p^{λ_1}
        p.pow(denom_exp - lam.parts()[i.max(j)])
    };
    let slots: Vec<(usize, usize, u64)> = (0..r)
        .flat_map(|i| (i..r).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, p.pow(lam.parts()[i.max(j)])))
        .collect();
    let candidates: u64 = slots
        .iter()
        .try_fold(1u64, |acc, &(_, _, m)| acc.checked_mul(m))?;
    if candidates
        .checked_mul(table.order())?
        .checked_mul(r as u64)?
        > max_ops
    {
        return None;
    }

    let modulus = p.pow(denom_exp);
    let mut beta = vec![0u64; slots.len()];
    let mut count = 0u64;
    loop {
        // gram[i][j] scaled into Z/p^{λ_1}
        let mut gram = vec![vec![0u64; r]; r];
        for (slot, &(i, j, _)) in slots.iter().enumerate() {
            let v = (beta[slot] as u128 * scale(i, j) as u128 % modulus as u128) as u64;
            gram[i][j] = v;
            gram[j][i] = v;
        }
        // kernel scan: g is in the radical iff Σ_i g_i·gram[i][j] ≡ 0 for
        // all j; the gram array is symmetric so rows double as columns
        let mut kernel = 0u64;
        'elems: for idx in 0..table.order() {
            let g = table.element(idx);
            for row in &gram {
                let s: u128 = g
                    .iter()
                    .zip(row.iter())
                    .map(|(&gi, &w)| gi as u128 * w as u128)
                    .sum();
                if !s.is_multiple_of(modulus as u128) {
                    continue 'elems;
                }
            }
            kernel += 1;
        }
        if kernel == 1 {
            count += 1;
        }
        // next candidate
        let mut s = 0;
        loop {
            if s == slots.len() {
                return Some(BigUint::from(count));
            }
            beta[s] += 1;
            if beta[s] < slots[s].2 {
                break;
            }
            beta[s] = 0;
            s += 1;
        }
    }
}

/// Counts symmetric `n×n` matrices over `F_p` by rank, by scanning all
/// `p^{n(n+1)/2}` of them.
pub fn symmetric_matrices_by_rank(p: u64, n: u32, max_ops: u64) -> Option<Vec<BigUint>> {
    let n = n as usize;
    let slots: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let total = (p as u128).checked_pow(slots.len() as u32)?;
    if total.checked_mul(n as u128 * n as u128)? > max_ops as u128 {
        return None;
    }
    let mut counts = vec![0u64; n + 1];
    let mut assign = vec![0u64; slots.len()];
    loop {
        let mut m = ZMatrix::zero(n);
        for (slot, &(i, j)) in slots.iter().enumerate() {
            m.set(i, j, assign[slot] as i64);
            m.set(j, i, assign[slot] as i64);
        }
        counts[rank_mod_p(&m, p)] += 1;
        let mut s = 0;
        loop {
            if s == slots.len() {
                return Some(counts.into_iter().map(BigUint::from).collect());
            }
            assign[s] += 1;
            if assign[s] < p {
                break;
            }
            assign[s] = 0;
            s += 1;
        }
    }
}
