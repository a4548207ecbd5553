use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_bigint::BigUint;
use num_traits::One;

/// A partition: weakly decreasing positive integers.
///
/// The empty partition is allowed and stands for the trivial group.  When a
/// partition is the type of an abelian `p`-group, part `λ_i` is the exponent
/// of the cyclic factor `Z/p^{λ_i}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Partition {
    parts: Vec<u32>,
}

impl Partition {
    /// The empty partition (trivial group).
    pub fn empty() -> Self {
        Partition { parts: Vec::new() }
    }

    /// Builds a partition, rejecting zero parts and out-of-order input.
    pub fn new(parts: Vec<u32>) -> Result<Self, ParseError> {
        for w in parts.windows(2) {
            if w[0] < w[1] {
                return Err(ParseError::NotDecreasing);
            }
        }
        if parts.contains(&0) {
            return Err(ParseError::ZeroPart);
        }
        Ok(Partition { parts })
    }

    /// Builds a partition from arbitrary multiplicities, sorting and dropping
    /// zeros.
    pub fn from_unsorted(mut parts: Vec<u32>) -> Self {
        parts.retain(|&x| x > 0);
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Partition { parts }
    }

    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    /// Number of parts (the rank of the corresponding group).
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// `λ_i` with 1-based index, zero beyond the last part.
    pub fn part(&self, i: usize) -> u32 {
        if i == 0 || i > self.parts.len() {
            0
        } else {
            self.parts[i - 1]
        }
    }

    /// Largest part, 0 for the empty partition.
    pub fn first(&self) -> u32 {
        self.parts.first().copied().unwrap_or(0)
    }

    /// Sum of the parts, `|λ|`.
    pub fn size(&self) -> u64 {
        self.parts.iter().map(|&x| x as u64).sum()
    }

    /// The transpose partition: `λ'_j = #{i : λ_i ≥ j}`.
    pub fn transpose(&self) -> Partition {
        let mut t = Vec::with_capacity(self.first() as usize);
        for j in 1..=self.first() {
            t.push(self.parts.iter().filter(|&&x| x >= j).count() as u32);
        }
        Partition { parts: t }
    }

    /// `m_i = λ'_i − λ'_{i+1}`: the multiplicity of `i` as a part of `λ`.
    pub fn multiplicity(&self, i: u32) -> u32 {
        self.parts.iter().filter(|&&x| x == i).count() as u32
    }

    /// Order of the `p`-group of this type, `p^{|λ|}`.
    pub fn group_order(&self, p: u64) -> BigUint {
        BigUint::from(p).pow(self.size() as u32)
    }

    /// Truncates every part at `e` (the type of `G ⊗ Z/p^e`).
    pub fn truncate(&self, e: u32) -> Partition {
        Partition::from_unsorted(self.parts.iter().map(|&x| x.min(e)).collect())
    }

    /// Calls `f` on every partition with `size ≤ max_size`, parts at most
    /// `max_part`, and at most `max_parts` parts.  Partitions are produced in
    /// a deterministic order starting from the empty one.
    pub fn for_each(
        max_size: u64,
        max_part: u32,
        max_parts: usize,
        f: &mut impl FnMut(&Partition),
    ) {
        let mut stack: Vec<u32> = Vec::new();
        fn rec(
            stack: &mut Vec<u32>,
            remaining: u64,
            max_next: u32,
            slots: usize,
            f: &mut impl FnMut(&Partition),
        ) {
            f(&Partition {
                parts: stack.clone(),
            });
            if slots == 0 {
                return;
            }
            let cap = (max_next as u64).min(remaining) as u32;
            for next in (1..=cap).rev() {
                stack.push(next);
                rec(stack, remaining - next as u64, next, slots - 1, f);
                stack.pop();
            }
        }
        rec(&mut stack, max_size, max_part, max_parts, f);
    }

    /// All partitions within the given box, in the order of [`Self::for_each`].
    pub fn all(max_size: u64, max_part: u32, max_parts: usize) -> Vec<Partition> {
        let mut out = Vec::new();
        Partition::for_each(max_size, max_part, max_parts, &mut |lam| {
            out.push(lam.clone())
        });
        out
    }
}

/// Text form: `[3,1,1]`; the empty partition is `[]`.
impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, p) in self.parts.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "]")
    }
}

impl FromStr for Partition {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, ParseError> {
        let s = s.trim();
        let inner = s
            .strip_prefix('[')
            .and_then(|t| t.strip_suffix(']'))
            .ok_or(ParseError::Syntax)?;
        let inner = inner.trim();
        if inner.is_empty() {
            return Ok(Partition::empty());
        }
        let mut parts = Vec::new();
        for tok in inner.split(',') {
            parts.push(tok.trim().parse::<u32>().map_err(|_| ParseError::Syntax)?);
        }
        Partition::new(parts)
    }
}

/// A finite abelian group as one partition per prime.
///
/// Primes with trivial Sylow subgroup are absent; the trivial group is the
/// empty map.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct GroupSpec {
    factors: BTreeMap<u64, Partition>,
}

impl GroupSpec {
    pub fn trivial() -> Self {
        GroupSpec {
            factors: BTreeMap::new(),
        }
    }

    /// Builds a spec; trivial partitions are dropped, non-primes rejected.
    pub fn new(factors: impl IntoIterator<Item = (u64, Partition)>) -> Result<Self, ParseError> {
        let mut map = BTreeMap::new();
        for (p, lam) in factors {
            if !is_prime(p) {
                return Err(ParseError::NotPrime(p));
            }
            if !lam.is_empty() && map.insert(p, lam).is_some() {
                return Err(ParseError::DuplicatePrime(p));
            }
        }
        Ok(GroupSpec { factors: map })
    }

    /// Single-prime group of type `λ`.
    pub fn p_group(p: u64, lam: Partition) -> Self {
        GroupSpec::new([(p, lam)]).expect("prime expected")
    }

    /// The cyclic group `Z/nZ`, `n ≥ 1`, factored by trial division.
    pub fn cyclic(n: u64) -> Self {
        let mut factors = BTreeMap::new();
        let mut m = n;
        let mut d = 2u64;
        while d * d <= m {
            if m.is_multiple_of(d) {
                let mut e = 0u32;
                while m.is_multiple_of(d) {
                    m /= d;
                    e += 1;
                }
                factors.insert(d, Partition::new(alloc::vec![e]).unwrap());
            }
            d += 1;
        }
        if m > 1 {
            factors.insert(m, Partition::new(alloc::vec![1]).unwrap());
        }
        GroupSpec { factors }
    }

    pub fn is_trivial(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.factors.keys().copied()
    }

    pub fn factors(&self) -> impl Iterator<Item = (u64, &Partition)> + '_ {
        self.factors.iter().map(|(&p, lam)| (p, lam))
    }

    /// The Sylow type at `p` (empty if `p` does not divide the order).
    pub fn sylow(&self, p: u64) -> Partition {
        self.factors.get(&p).cloned().unwrap_or_default()
    }

    pub fn order(&self) -> BigUint {
        let mut n = BigUint::one();
        for (&p, lam) in &self.factors {
            n *= lam.group_order(p);
        }
        n
    }

    /// Largest rank over the primes.
    pub fn rank(&self) -> usize {
        self.factors.values().map(|l| l.len()).max().unwrap_or(0)
    }

    /// Invariant factors `a_1, …, a_r` with `a_r | a_{r-1} | … | a_1`.
    pub fn invariant_factors(&self) -> Vec<BigUint> {
        let r = self.rank();
        let mut out = Vec::with_capacity(r);
        for i in 1..=r {
            let mut a = BigUint::one();
            for (&p, lam) in &self.factors {
                a *= BigUint::from(p).pow(lam.part(i));
            }
            out.push(a);
        }
        out
    }

    /// Rebuilds a spec from invariant factors (ones are ignored).
    ///
    /// Inverse of [`Self::invariant_factors`] whenever the chain condition
    /// `a_{i+1} | a_i` holds.
    pub fn from_invariant_factors(factors: &[u64]) -> Result<Self, ParseError> {
        let mut per_prime: BTreeMap<u64, Vec<u32>> = BTreeMap::new();
        for &a in factors {
            if a == 0 {
                return Err(ParseError::Syntax);
            }
            let mut m = a;
            let mut d = 2u64;
            while d * d <= m {
                if m % d == 0 {
                    let mut e = 0u32;
                    while m % d == 0 {
                        m /= d;
                        e += 1;
                    }
                    per_prime.entry(d).or_default().push(e);
                }
                d += 1;
            }
            if m > 1 {
                per_prime.entry(m).or_default().push(1);
            }
        }
        GroupSpec::new(
            per_prime
                .into_iter()
                .map(|(p, parts)| (p, Partition::from_unsorted(parts))),
        )
    }

    /// The type of `G ⊗ Z/p^e` at each prime of `a = ∏ p^{e_p}`.
    pub fn tensor_truncate(&self, exponents: &BTreeMap<u64, u32>) -> GroupSpec {
        let mut map = BTreeMap::new();
        for (&p, lam) in &self.factors {
            if let Some(&e) = exponents.get(&p) {
                let t = lam.truncate(e);
                if !t.is_empty() {
                    map.insert(p, t);
                }
            }
        }
        GroupSpec { factors: map }
    }
}

/// Text form: `2:[2,1];3:[1]`; the trivial group is `1`.
impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return write!(f, "1");
        }
        for (i, (p, lam)) in self.factors.iter().enumerate() {
            if i > 0 {
                write!(f, ";")?;
            }
            write!(f, "{p}:{lam}")?;
        }
        Ok(())
    }
}

impl FromStr for GroupSpec {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, ParseError> {
        let s = s.trim();
        if s.is_empty() || s == "1" {
            return Ok(GroupSpec::trivial());
        }
        let mut factors = Vec::new();
        for chunk in s.split(';') {
            let (p, lam) = chunk.split_once(':').ok_or(ParseError::Syntax)?;
            let p: u64 = p.trim().parse().map_err(|_| ParseError::Syntax)?;
            factors.push((p, lam.parse::<Partition>()?));
        }
        GroupSpec::new(factors)
    }
}

/// Parse/validation failures for [`Partition`] and [`GroupSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseError {
    Syntax,
    NotDecreasing,
    ZeroPart,
    NotPrime(u64),
    DuplicatePrime(u64),
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::Syntax => write!(f, "malformed partition or group text"),
            ParseError::NotDecreasing => write!(f, "partition parts must be weakly decreasing"),
            ParseError::ZeroPart => write!(f, "partition parts must be positive"),
            ParseError::NotPrime(p) => write!(f, "{p} is not prime"),
            ParseError::DuplicatePrime(p) => write!(f, "duplicate prime {p}"),
        }
    }
}

impl core::error::Error for ParseError {}

/// Deterministic primality test for 64-bit inputs (trial division; the
/// primes used in this crate are tiny).
pub(crate) fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}
