//! Seeded random generators for graphs and symmetric integer matrices, and
//! extraction of sandpile/cokernel Sylow types.
//!
//! Every sample is a pure function of `(master seed, sample index)`: each
//! sample owns a counter-based [`rng::StreamRng`] stream, so experiments are
//! reproducible bit-for-bit no matter how samples are scheduled across
//! workers.
//!
//! Graphs use a single constant edge probability per experiment.  Letting
//! the probability vary by pair (while staying bounded away from 0 and 1)
//! would leave the limiting statistics unchanged and is a possible
//! extension of the sampler.

pub mod rng;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::fmt::Write as _;

use crate::abelian::Partition;
use crate::linalg::{cokernel_sylow_type, LinalgError, ZMatrix, DEFAULT_EXPONENT_CEILING};
use rng::{StreamRng, StreamTag};

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    /// Edge probability outside (0, 1), or a vertex count below 2.
    InvalidParameter {
        detail: String,
    },
    /// Entry distribution failed its balance certificate.
    Unbalanced {
        prime: u64,
        max_residue_prob: f64,
        declared_alpha: f64,
    },
    Linalg(LinalgError),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::InvalidParameter { detail } => write!(f, "invalid parameter: {detail}"),
            ModelError::Unbalanced {
                prime,
                max_residue_prob,
                declared_alpha,
            } => write!(
                f,
                "entry distribution is not {declared_alpha}-balanced mod {prime}: \
                 a residue has probability {max_residue_prob}"
            ),
            ModelError::Linalg(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for ModelError {}

impl From<LinalgError> for ModelError {
    fn from(e: LinalgError) -> Self {
        ModelError::Linalg(e)
    }
}

/// An Erdős–Rényi sample: symmetric loop-free adjacency plus the seed
/// provenance that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphSample {
    n: usize,
    words_per_row: usize,
    bits: Vec<u64>,
    pub master_seed: u64,
    pub sample_index: u64,
}

impl GraphSample {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn edge(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.words_per_row + j / 64] >> (j % 64) & 1 == 1
    }

    fn set_edge(&mut self, i: usize, j: usize) {
        self.bits[i * self.words_per_row + j / 64] |= 1 << (j % 64);
        self.bits[j * self.words_per_row + i / 64] |= 1 << (i % 64);
    }

    pub fn degree(&self, i: usize) -> usize {
        self.bits[i * self.words_per_row..(i + 1) * self.words_per_row]
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum()
    }

    pub fn edge_count(&self) -> usize {
        (0..self.n).map(|i| self.degree(i)).sum::<usize>() / 2
    }

    /// Union-find connectivity.
    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.edge(i, j) {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a] = b;
                }
            }
        }
        let root = find(&mut parent, 0);
        (1..self.n).all(|i| find(&mut parent, i) == root)
    }

    /// Laplacian with the printed sign convention: 1 on edges, −deg on the
    /// diagonal, reduced by deleting the highest-index vertex.
    pub fn reduced_laplacian(&self) -> ZMatrix {
        let m = self.n - 1;
        let mut out = ZMatrix::zero(m);
        for i in 0..m {
            out.set(i, i, -(self.degree(i) as i64));
            for j in 0..m {
                if i != j && self.edge(i, j) {
                    out.set(i, j, 1);
                }
            }
        }
        out
    }

    /// Plain-text edge list, one `u v` pair per line, for debugging.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.edge(i, j) {
                    let _ = writeln!(s, "{i} {j}");
                }
            }
        }
        s
    }
}

/// Samples `Γ ∈ G(n, q)`: each unordered pair independently with
/// probability `q`, pairs drawn in row-major order from the sample's own
/// edge stream.
pub fn sample_graph(
    n: usize,
    q: f64,
    master_seed: u64,
    sample_index: u64,
) -> Result<GraphSample, ModelError> {
    if !(q > 0.0 && q < 1.0) {
        return Err(ModelError::InvalidParameter {
            detail: alloc::format!("edge probability {q} outside (0, 1)"),
        });
    }
    if n < 2 {
        return Err(ModelError::InvalidParameter {
            detail: alloc::format!("need at least 2 vertices, got {n}"),
        });
    }
    let words_per_row = n.div_ceil(64);
    let mut g = GraphSample {
        n,
        words_per_row,
        bits: vec![0; n * words_per_row],
        master_seed,
        sample_index,
    };
    let mut stream = StreamRng::for_sample(master_seed, sample_index, StreamTag::GraphEdges);
    for i in 0..n {
        for j in i + 1..n {
            if stream.bernoulli(q) {
                g.set_edge(i, j);
            }
        }
    }
    Ok(g)
}

/// Result of a Sylow-type extraction on one sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SylowOutcome {
    /// The sandpile group is infinite; no type.
    Disconnected,
    Type {
        partition: Partition,
        saturated: bool,
    },
}

/// Sylow-`p` type of the sandpile group of `Γ`, through the reduced
/// Laplacian mod `p^e` with saturation retry.  Connectivity is checked
/// first; disconnected samples carry no type.
pub fn sandpile_sylow_type(
    graph: &GraphSample,
    p: u64,
    e: u32,
    ceiling: u32,
) -> Result<SylowOutcome, ModelError> {
    if !graph.is_connected() {
        return Ok(SylowOutcome::Disconnected);
    }
    let t = cokernel_sylow_type(&graph.reduced_laplacian(), p, e, ceiling)?;
    Ok(SylowOutcome::Type {
        partition: t.partition,
        saturated: t.saturated,
    })
}

/// Convenience wrapper with the default retry ceiling.
pub fn sandpile_sylow_type_default(
    graph: &GraphSample,
    p: u64,
    e: u32,
) -> Result<SylowOutcome, ModelError> {
    sandpile_sylow_type(graph, p, e, DEFAULT_EXPONENT_CEILING)
}

/// Entry law for the symmetric matrix models, carrying its balance
/// certificate: for every prime in scope, no residue class mod `p` holds
/// more than `1 − α` of the mass.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryDistribution {
    kind: EntryKind,
    alpha: f64,
    primes: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EntryKind {
    /// Uniform on `{0, …, a−1}`.
    UniformMod(u64),
    /// Finite support with explicit probabilities.
    IidPmf(Vec<(i64, f64)>),
}

impl EntryDistribution {
    /// Uniform residues mod `a`, certified `alpha`-balanced for `primes`.
    pub fn uniform_mod(a: u64, alpha: f64, primes: &[u64]) -> Result<Self, ModelError> {
        if a < 2 {
            return Err(ModelError::InvalidParameter {
                detail: alloc::format!("modulus {a} too small"),
            });
        }
        let d = EntryDistribution {
            kind: EntryKind::UniformMod(a),
            alpha,
            primes: primes.to_vec(),
        };
        d.verify_balance()?;
        Ok(d)
    }

    /// Finite-support integer law with the given pmf.
    pub fn iid_pmf(pmf: Vec<(i64, f64)>, alpha: f64, primes: &[u64]) -> Result<Self, ModelError> {
        let total: f64 = pmf.iter().map(|&(_, w)| w).sum();
        if pmf.is_empty() || pmf.iter().any(|&(_, w)| w < 0.0) || (total - 1.0).abs() > 1e-12 {
            return Err(ModelError::InvalidParameter {
                detail: String::from("pmf must be nonnegative and sum to 1"),
            });
        }
        let d = EntryDistribution {
            kind: EntryKind::IidPmf(pmf),
            alpha,
            primes: primes.to_vec(),
        };
        d.verify_balance()?;
        Ok(d)
    }

    /// The signed `±1` coin: balanced mod every odd prime with α = 1/2, but
    /// degenerate mod 2 (every value is odd).
    pub fn plus_minus_one(primes: &[u64]) -> Result<Self, ModelError> {
        EntryDistribution::iid_pmf(vec![(-1, 0.5), (1, 0.5)], 0.5, primes)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn kind(&self) -> &EntryKind {
        &self.kind
    }

    fn verify_balance(&self) -> Result<(), ModelError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(ModelError::InvalidParameter {
                detail: alloc::format!("alpha {} outside (0, 1)", self.alpha),
            });
        }
        for &p in &self.primes {
            if !crate::abelian::is_prime(p) {
                return Err(ModelError::InvalidParameter {
                    detail: alloc::format!("{p} is not prime"),
                });
            }
            let worst = self.max_residue_prob(p);
            if worst > 1.0 - self.alpha + 1e-15 {
                return Err(ModelError::Unbalanced {
                    prime: p,
                    max_residue_prob: worst,
                    declared_alpha: self.alpha,
                });
            }
        }
        Ok(())
    }

    fn max_residue_prob(&self, p: u64) -> f64 {
        match &self.kind {
            EntryKind::UniformMod(a) => {
                // residue t < a % p appears ⌈a/p⌉ times
                let ceil = a.div_ceil(p);
                ceil as f64 / *a as f64
            }
            EntryKind::IidPmf(pmf) => {
                let mut per_residue = vec![0.0f64; p as usize];
                for &(v, w) in pmf {
                    per_residue[(v as i128).rem_euclid(p as i128) as usize] += w;
                }
                per_residue.into_iter().fold(0.0, f64::max)
            }
        }
    }

    fn draw(&self, stream: &mut StreamRng) -> i64 {
        match &self.kind {
            EntryKind::UniformMod(a) => stream.below(*a) as i64,
            EntryKind::IidPmf(pmf) => {
                let u = stream.next_f64();
                let mut acc = 0.0;
                for &(v, w) in pmf {
                    acc += w;
                    if u < acc {
                        return v;
                    }
                }
                pmf.last().expect("nonempty pmf").0
            }
        }
    }
}

/// Samples a symmetric `n×n` integer matrix: entries on and above the
/// diagonal iid from `dist` (drawn in row-major upper-triangle order),
/// mirrored below.
pub fn sample_symmetric(
    n: usize,
    dist: &EntryDistribution,
    master_seed: u64,
    sample_index: u64,
) -> ZMatrix {
    let mut stream = StreamRng::for_sample(master_seed, sample_index, StreamTag::MatrixEntries);
    let mut m = ZMatrix::zero(n);
    for i in 0..n {
        for j in i..n {
            let v = dist.draw(&mut stream);
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    m
}
