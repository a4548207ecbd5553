use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigUint;

use super::partition::Partition;
use super::AbelianError;
use crate::linalg::{snf_mod_rect, snf_mod_with_transform, ResidueMatrix};

/// Element set of a subgroup as a bitset over table indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ElementSet {
    bits: Vec<u64>,
    len: u32,
}

impl ElementSet {
    fn empty(order: u64) -> Self {
        ElementSet {
            bits: vec![0; (order as usize).div_ceil(64)],
            len: 0,
        }
    }

    #[inline]
    pub fn contains(&self, i: u64) -> bool {
        self.bits[(i / 64) as usize] >> (i % 64) & 1 == 1
    }

    #[inline]
    fn insert(&mut self, i: u64) {
        let w = &mut self.bits[(i / 64) as usize];
        let mask = 1 << (i % 64);
        if *w & mask == 0 {
            *w |= mask;
            self.len += 1;
        }
    }

    pub fn len(&self) -> u64 {
        self.len as u64
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.bits.iter().enumerate().flat_map(|(w, &word)| {
            let mut word = word;
            core::iter::from_fn(move || {
                if word == 0 {
                    return None;
                }
                let b = word.trailing_zeros();
                word &= word - 1;
                Some(w as u64 * 64 + b as u64)
            })
        })
    }

    fn intersection_size(&self, mask: &[u64]) -> u64 {
        self.bits
            .iter()
            .zip(mask.iter())
            .map(|(a, b)| (a & b).count_ones() as u64)
            .sum()
    }

    pub fn to_sorted(&self) -> BTreeSet<u64> {
        self.iter().collect()
    }
}

/// Explicit element table of `G_λ = ⊕_i Z/p^{λ_i}` as exponent vectors.
///
/// Elements are listed in mixed-radix order (last coordinate fastest), so an
/// element's index is computable arithmetically.  For orders up to 512 the
/// full addition table is precomputed, which is what keeps the exhaustive
/// oracles fast.  This is the substrate for brute-force verification.
#[derive(Debug, Clone)]
pub struct SmallGroupTable {
    p: u64,
    lambda: Partition,
    moduli: Vec<u64>,
    order: u64,
    add_table: Option<Vec<u16>>,
}

const ADD_TABLE_LIMIT: u64 = 512;

impl SmallGroupTable {
    /// Builds the table if `p^{|λ|}` stays within `bound`.
    pub fn new(p: u64, lambda: &Partition, bound: u64) -> Result<Self, AbelianError> {
        if !super::is_prime(p) {
            return Err(AbelianError::InvalidArgument {
                detail: alloc::format!("{p} is not prime"),
            });
        }
        let mut order: u64 = 1;
        let mut moduli = Vec::with_capacity(lambda.len());
        for &part in lambda.parts() {
            let m = p
                .checked_pow(part)
                .filter(|&m| order.checked_mul(m).is_some_and(|o| o <= bound))
                .ok_or_else(|| AbelianError::OracleBoundExceeded {
                    detail: alloc::format!("|G| = {p}^{} exceeds {bound}", lambda.size()),
                })?;
            moduli.push(m);
            order *= m;
        }
        let mut table = SmallGroupTable {
            p,
            lambda: lambda.clone(),
            moduli,
            order,
            add_table: None,
        };
        if order <= ADD_TABLE_LIMIT {
            let n = order as usize;
            let mut add = vec![0u16; n * n];
            for a in 0..n {
                for b in a..n {
                    let s = table.add_arith(a as u64, b as u64) as u16;
                    add[a * n + b] = s;
                    add[b * n + a] = s;
                }
            }
            table.add_table = Some(add);
        }
        Ok(table)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn lambda(&self) -> &Partition {
        &self.lambda
    }

    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn rank(&self) -> usize {
        self.moduli.len()
    }

    /// Exponent vector of the element with the given index.
    pub fn element(&self, mut index: u64) -> Vec<u64> {
        let mut v = vec![0u64; self.moduli.len()];
        for i in (0..self.moduli.len()).rev() {
            v[i] = index % self.moduli[i];
            index /= self.moduli[i];
        }
        v
    }

    /// Index of an exponent vector (coordinates reduced by the moduli).
    pub fn index_of(&self, v: &[u64]) -> u64 {
        let mut idx = 0u64;
        for (i, &m) in self.moduli.iter().enumerate() {
            idx = idx * m + v[i] % m;
        }
        idx
    }

    fn add_arith(&self, a: u64, b: u64) -> u64 {
        let (va, vb) = (self.element(a), self.element(b));
        let sum: Vec<u64> = va
            .iter()
            .zip(vb.iter())
            .zip(self.moduli.iter())
            .map(|((x, y), &m)| (x + y) % m)
            .collect();
        self.index_of(&sum)
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        match &self.add_table {
            Some(t) => t[a as usize * self.order as usize + b as usize] as u64,
            None => self.add_arith(a, b),
        }
    }

    pub fn scalar_mul(&self, s: u64, a: u64) -> u64 {
        let va = self.element(a);
        let out: Vec<u64> = va
            .iter()
            .zip(self.moduli.iter())
            .map(|(&x, &m)| ((x as u128 * s as u128) % m as u128) as u64)
            .collect();
        self.index_of(&out)
    }

    /// Number of elements killed by `p^k` (closed form; the scanning
    /// equivalent is [`Self::torsion_mask`]).
    pub fn kill_count(&self, k: u32) -> u64 {
        let pk = self.p.pow(k.min(self.lambda.first()));
        self.moduli
            .iter()
            .map(|&m| num_integer::gcd(m, pk))
            .product()
    }

    /// Bitset of elements killed by `p^k`, found by scanning the table.
    pub fn torsion_mask(&self, k: u32) -> ElementSet {
        let pk = self.p.pow(k.min(self.lambda.first()));
        let mut mask = ElementSet::empty(self.order);
        for i in 0..self.order {
            let killed = self
                .element(i)
                .iter()
                .zip(self.moduli.iter())
                .all(|(&x, &m)| (x as u128 * pk as u128).is_multiple_of(m as u128));
            if killed {
                mask.insert(i);
            }
        }
        mask
    }

    /// Indices of all elements killed by `p^k`, in increasing order.
    pub fn killed_by(&self, k: u32) -> Vec<u64> {
        self.torsion_mask(k).iter().collect()
    }

    /// Closure of a subgroup bitset under one more generator: the union of
    /// cosets `S + k·g`.
    fn extend_subgroup(&self, s: &ElementSet, g: u64) -> ElementSet {
        let mut out = s.clone();
        let mut shift = g;
        while !out.contains(shift) {
            for x in s.iter() {
                out.insert(self.add(x, shift));
            }
            shift = self.add(shift, g);
        }
        out
    }

    /// Subgroup generated by a set of elements, as a bitset.
    pub fn span_bits(&self, gens: &[u64]) -> ElementSet {
        let mut s = ElementSet::empty(self.order);
        s.insert(0);
        for &g in gens {
            if !s.contains(g) {
                s = self.extend_subgroup(&s, g);
            }
        }
        s
    }

    /// Subgroup generated by a set of elements, as sorted indices.
    pub fn span(&self, gens: &[u64]) -> BTreeSet<u64> {
        self.span_bits(gens).to_sorted()
    }

    /// Whether the given elements generate the whole group.
    pub fn generates(&self, gens: &[u64]) -> bool {
        self.span_bits(gens).len() == self.order
    }

    /// Type of a subgroup from its element bitset, read off the
    /// `p^j`-torsion filtration: `μ'_j = log_p(t_j / t_{j−1})`.
    pub fn type_of_bits(&self, elems: &ElementSet, masks: &[ElementSet]) -> Partition {
        let mut transpose = Vec::new();
        let mut prev: u64 = 1;
        for mask in masks {
            let t_j = elems.intersection_size(&mask.bits);
            debug_assert_eq!(t_j % prev, 0);
            let ratio = t_j / prev;
            let mut col = 0u32;
            let mut r = ratio;
            while r > 1 {
                debug_assert_eq!(r % self.p, 0);
                r /= self.p;
                col += 1;
            }
            transpose.push(col);
            prev = t_j;
        }
        Partition::from_unsorted(transpose).transpose()
    }

    /// Torsion masks for `j = 1..=λ_1`, the input to [`Self::type_of_bits`].
    pub fn torsion_masks(&self) -> Vec<ElementSet> {
        (1..=self.lambda.first())
            .map(|j| self.torsion_mask(j))
            .collect()
    }

    /// Type of a subgroup given as a sorted element set.
    pub fn type_of_subgroup(&self, elems: &BTreeSet<u64>) -> Partition {
        let mut bits = ElementSet::empty(self.order);
        for &i in elems {
            bits.insert(i);
        }
        self.type_of_bits(&bits, &self.torsion_masks())
    }
}

/// Hard cap on the number of subgroups the exhaustive walk will discover.
const SUBGROUP_WALK_CAP: usize = 2_000_000;

/// Every subgroup of `G_λ`, counted once and keyed by type.
///
/// Breadth-first walk of the subgroup lattice: each discovered subgroup is
/// extended by every outside element.  Exhaustive and formula-free, which is
/// what makes it an oracle; `bound` caps `p^{|λ|}`.
pub fn enumerate_subgroups(
    p: u64,
    lambda: &Partition,
    bound: u64,
) -> Result<Vec<(Partition, BigUint)>, AbelianError> {
    let table = SmallGroupTable::new(p, lambda, bound)?;
    let masks = table.torsion_masks();
    let mut seen: BTreeSet<Vec<u64>> = BTreeSet::new();
    let mut queue: Vec<ElementSet> = Vec::new();
    let mut counts: BTreeMap<Partition, u64> = BTreeMap::new();

    let mut trivial = ElementSet::empty(table.order());
    trivial.insert(0);
    seen.insert(trivial.bits.clone());
    queue.push(trivial);

    while let Some(s) = queue.pop() {
        *counts.entry(table.type_of_bits(&s, &masks)).or_insert(0) += 1;
        for g in 1..table.order() {
            if s.contains(g) {
                continue;
            }
            let t = table.extend_subgroup(&s, g);
            if seen.insert(t.bits.clone()) {
                if seen.len() > SUBGROUP_WALK_CAP {
                    return Err(AbelianError::OracleBoundExceeded {
                        detail: alloc::format!("more than {SUBGROUP_WALK_CAP} subgroups"),
                    });
                }
                queue.push(t);
            }
        }
    }
    Ok(counts
        .into_iter()
        .map(|(t, c)| (t, BigUint::from(c)))
        .collect())
}

/// Type of the subgroup of `G_λ` generated by the given exponent vectors.
///
/// Relation-matrix method over `Z/p^e` (`e ≥ λ_1`): with `A` the generator
/// matrix and `D = diag(p^{λ_i})`, the kernel of `[A | D]` projects onto the
/// relation module of the generators; diagonalizing the projected relations
/// yields the subgroup type as the positive valuations.
pub fn subgroup_type_from_generators(
    p: u64,
    e: u32,
    generators: &[Vec<u64>],
    lambda: &Partition,
) -> Result<Partition, AbelianError> {
    let r = lambda.len();
    let k = generators.len();
    if r == 0 || k == 0 {
        return Ok(Partition::empty());
    }
    let e = e.max(lambda.first());
    if generators.iter().any(|g| g.len() != r) {
        return Err(AbelianError::InvalidArgument {
            detail: alloc::string::String::from("generator arity mismatch"),
        });
    }

    // M = [A | D] over Z/p^e, rows indexed by the ambient coordinates
    let mut m =
        ResidueMatrix::zero(r, k + r, p, e).map_err(|err| AbelianError::InvalidArgument {
            detail: alloc::format!("{err}"),
        })?;
    for (j, g) in generators.iter().enumerate() {
        for (i, &x) in g.iter().enumerate() {
            m.set_u64(i, j, x);
        }
    }
    for i in 0..r {
        // p^{λ_i} may equal p^e, in which case the entry reduces to zero
        if lambda.parts()[i] < e {
            m.set_u64(i, k + i, p.pow(lambda.parts()[i]));
        }
    }

    let (vals, w) = snf_mod_with_transform(&m);

    // kernel generators: p^{e − v_i}·w_i for the r diagonal positions, plus
    // the remaining transform columns verbatim; keep the first k coordinates
    let mut rel =
        ResidueMatrix::zero(k, k + r, p, e).map_err(|err| AbelianError::InvalidArgument {
            detail: alloc::format!("{err}"),
        })?;
    for col in 0..k + r {
        let scale = if col < vals.len() {
            p.checked_pow(e - vals[col])
        } else {
            Some(1)
        };
        for row in 0..k {
            let x = w
                .get_u64(row, col)
                .ok_or_else(|| AbelianError::InvalidArgument {
                    detail: alloc::string::String::from("transform entry out of word range"),
                })?;
            match scale {
                Some(s) => rel.set_u64(row, col, ((x as u128 * s as u128) % modulus(p, e)) as u64),
                // p^{e−v} = p^e ≡ 0
                None => rel.set_u64(row, col, 0),
            }
        }
    }

    let mut parts: Vec<u32> = snf_mod_rect(&rel);
    parts.retain(|&v| v > 0);
    Ok(Partition::from_unsorted(parts))
}

fn modulus(p: u64, e: u32) -> u128 {
    (p as u128).pow(e)
}
