//! Experiment orchestration: seeded sampling campaigns, mergeable counters,
//! canonical records, and empirical Sur-moments.

use std::collections::BTreeMap;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use cokernel_core::abelian::{self, GroupSpec, Partition};
use cokernel_core::linalg::{cokernel_sylow_type, snf_mod_prime_power, ZMatrix};
use cokernel_core::models::{sample_graph, sample_symmetric, EntryDistribution, ModelError};
use cokernel_core::recover::{MomentCaps, MomentVector};
use cokernel_core::theory::ratio_to_f64;

/// Environment variable consulted for the default worker count.
pub const WORKERS_ENV: &str = "COKERNEL_WORKERS";

/// Retry ceiling for saturation on the integer-matrix models.
const EXPONENT_CEILING: u32 = 64;

/// Which sampler an experiment runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpec {
    /// Erdős–Rényi graph; the statistic is the sandpile group.
    Graph { n: usize, q: f64 },
    /// Symmetric matrix with entries uniform mod `a`; the statistic is the
    /// cokernel over `Z/a`.
    MatrixUniform { n: usize, modulus: u64 },
    /// Symmetric integer matrix with iid entries from an explicit pmf.
    MatrixIid {
        n: usize,
        pmf: Vec<(i64, f64)>,
        alpha: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeSpec {
    pub p: u64,
    pub e: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    /// Primes (with working exponents) whose Sylow types are extracted.
    pub primes: Vec<PrimeSpec>,
    pub samples: u64,
    pub master_seed: u64,
    /// Groups whose empirical Sur-moments the record carries, as text
    /// encodings.
    pub moment_groups: Vec<String>,
    /// Worker count (0 = `COKERNEL_WORKERS` or rayon default).  Scheduling
    /// only — deliberately excluded from the serialized record so reruns at
    /// different widths stay byte-identical.
    #[serde(skip)]
    pub workers: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            bail!("need at least one sample");
        }
        let mut seen = std::collections::BTreeSet::new();
        for ps in &self.primes {
            if ps.e == 0 || !seen.insert(ps.p) {
                bail!("primes must be distinct with exponents ≥ 1");
            }
        }
        if self.primes.is_empty() {
            bail!("need at least one prime to extract");
        }
        if let ModelSpec::MatrixUniform { modulus, .. } = self.model {
            for ps in &self.primes {
                if modulus % ps.p != 0 {
                    bail!(
                        "prime {} does not divide the matrix modulus {}",
                        ps.p,
                        modulus
                    );
                }
            }
        }
        for g in &self.moment_groups {
            g.parse::<GroupSpec>()
                .ok()
                .with_context(|| format!("bad group encoding {g:?}"))?;
        }
        Ok(())
    }

    fn entry_distribution(&self) -> Result<Option<EntryDistribution>> {
        let primes: Vec<u64> = self.primes.iter().map(|ps| ps.p).collect();
        match &self.model {
            ModelSpec::Graph { .. } => Ok(None),
            ModelSpec::MatrixUniform { modulus, .. } => {
                // uniform residues: every residue class mod p | a has mass
                // exactly 1/p, so 0.49 is a safe declared balance
                Ok(Some(
                    EntryDistribution::uniform_mod(*modulus, 0.49, &primes).map_err(model_err)?,
                ))
            }
            ModelSpec::MatrixIid { pmf, alpha, .. } => Ok(Some(
                EntryDistribution::iid_pmf(pmf.clone(), *alpha, &primes).map_err(model_err)?,
            )),
        }
    }
}

fn model_err(e: ModelError) -> anyhow::Error {
    anyhow::anyhow!("{e}")
}

/// Deterministic, canonically serialized result of a campaign.
///
/// Counter maps are `BTreeMap`s and the volatile timing field is skipped by
/// serde, so identical `(config, seed)` runs produce byte-identical files
/// regardless of worker count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub schema_version: String,
    pub config: ExperimentConfig,
    /// Joint Sylow-type counts keyed by `GroupSpec` text encoding.
    pub counts: BTreeMap<String, u64>,
    pub disconnected: u64,
    pub unsaturated: u64,
    /// Empirical Sur-moments for the configured groups.
    pub moments: BTreeMap<String, f64>,
    /// Set when unsaturated samples were dropped, making each moment a
    /// lower bound only.
    pub moments_lower_bound_only: bool,
    #[serde(skip)]
    pub elapsed_ms: u128,
}

impl ExperimentRecord {
    /// Samples that produced a finite, fully saturated type.
    pub fn classified(&self) -> u64 {
        self.config.samples - self.disconnected - self.unsaturated
    }

    /// Canonical JSON bytes (pretty, trailing newline).
    pub fn to_canonical_json(&self) -> Result<Vec<u8>> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    /// Marginal empirical table at one prime: type → frequency among
    /// classified samples.
    pub fn marginal_table(&self, p: u64) -> Result<BTreeMap<Partition, f64>> {
        let denom = self.classified() as f64;
        let mut table: BTreeMap<Partition, f64> = BTreeMap::new();
        for (key, &count) in &self.counts {
            let g: GroupSpec = key
                .parse()
                .map_err(|e| anyhow::anyhow!("bad record key {key:?}: {e}"))?;
            *table.entry(g.sylow(p)).or_insert(0.0) += count as f64 / denom;
        }
        Ok(table)
    }

    /// CSV rendering of the counts table.
    pub fn counts_csv(&self) -> String {
        let mut out = String::from("group,count\n");
        for (k, v) in &self.counts {
            out.push_str(&format!("{k},{v}\n"));
        }
        out.push_str(&format!("__disconnected__,{}\n", self.disconnected));
        out.push_str(&format!("__unsaturated__,{}\n", self.unsaturated));
        out
    }
}

#[derive(Default, Clone)]
struct Tally {
    counts: BTreeMap<String, u64>,
    disconnected: u64,
    unsaturated: u64,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        for (k, v) in other.counts {
            *self.counts.entry(k).or_insert(0) += v;
        }
        self.disconnected += other.disconnected;
        self.unsaturated += other.unsaturated;
        self
    }
}

enum SampleOutcome {
    Disconnected,
    Unsaturated,
    Type(GroupSpec),
}

fn classify(
    config: &ExperimentConfig,
    dist: Option<&EntryDistribution>,
    index: u64,
) -> SampleOutcome {
    match &config.model {
        ModelSpec::Graph { n, q } => {
            let graph =
                sample_graph(*n, *q, config.master_seed, index).expect("validated parameters");
            if !graph.is_connected() {
                return SampleOutcome::Disconnected;
            }
            let lap = graph.reduced_laplacian();
            integer_matrix_types(&lap, &config.primes)
        }
        ModelSpec::MatrixUniform { n, modulus } => {
            let m = sample_symmetric(*n, dist.expect("matrix model"), config.master_seed, index);
            // the statistic is the cokernel over Z/a: extract at e = v_p(a),
            // where parts hitting the cap are exact for the tensored group
            let mut factors = Vec::new();
            for ps in &config.primes {
                let mut e = 0u32;
                let mut a = *modulus;
                while a % ps.p == 0 {
                    a /= ps.p;
                    e += 1;
                }
                let reduced = m.reduce_mod(ps.p, e).expect("valid modulus");
                let snf = snf_mod_prime_power(&reduced).expect("square");
                let lam = Partition::from_unsorted(snf.vals);
                if !lam.is_empty() {
                    factors.push((ps.p, lam));
                }
            }
            SampleOutcome::Type(GroupSpec::new(factors).expect("primes validated"))
        }
        ModelSpec::MatrixIid { n, .. } => {
            let m = sample_symmetric(*n, dist.expect("matrix model"), config.master_seed, index);
            integer_matrix_types(&m, &config.primes)
        }
    }
}

fn integer_matrix_types(m: &ZMatrix, primes: &[PrimeSpec]) -> SampleOutcome {
    let mut factors = Vec::new();
    for ps in primes {
        let t = cokernel_sylow_type(m, ps.p, ps.e, EXPONENT_CEILING).expect("valid modulus");
        if !t.saturated {
            return SampleOutcome::Unsaturated;
        }
        if !t.partition.is_empty() {
            factors.push((ps.p, t.partition));
        }
    }
    SampleOutcome::Type(GroupSpec::new(factors).expect("primes validated"))
}

/// Runs a campaign: `samples` independent draws, each a pure function of
/// `(master seed, index)`, tallied with commutative merges so the record is
/// identical for any worker count.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentRecord> {
    config.validate()?;
    let dist = config.entry_distribution()?;
    let started = Instant::now();

    let workers = if config.workers > 0 {
        config.workers
    } else {
        std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(0)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("building worker pool")?;

    let tally = pool.install(|| {
        (0..config.samples)
            .into_par_iter()
            .fold(Tally::default, |mut acc, index| {
                match classify(config, dist.as_ref(), index) {
                    SampleOutcome::Disconnected => acc.disconnected += 1,
                    SampleOutcome::Unsaturated => acc.unsaturated += 1,
                    SampleOutcome::Type(g) => *acc.counts.entry(g.to_string()).or_insert(0) += 1,
                }
                acc
            })
            .reduce(Tally::default, Tally::merge)
    });

    let mut record = ExperimentRecord {
        schema_version: String::from("1"),
        config: config.clone(),
        counts: tally.counts,
        disconnected: tally.disconnected,
        unsaturated: tally.unsaturated,
        moments: BTreeMap::new(),
        moments_lower_bound_only: tally.unsaturated > 0,
        elapsed_ms: 0,
    };
    let groups: Vec<GroupSpec> = config
        .moment_groups
        .iter()
        .map(|g| g.parse().expect("validated"))
        .collect();
    record.moments = empirical_moments(&record, &groups)?
        .into_iter()
        .map(|(g, v)| (g.to_string(), v))
        .collect();
    record.elapsed_ms = started.elapsed().as_millis();
    Ok(record)
}

/// Empirical Sur-moments `Ê[#Sur(S, G)] = Σ_types freq(type)·#Sur(type, G)`
/// over the classified samples.
pub fn empirical_moments(
    record: &ExperimentRecord,
    groups: &[GroupSpec],
) -> Result<Vec<(GroupSpec, f64)>> {
    let denom = BigUint::from(record.classified());
    let mut out = Vec::with_capacity(groups.len());
    for g in groups {
        let mut weighted = BigUint::from(0u32);
        for (key, &count) in &record.counts {
            let h: GroupSpec = key
                .parse()
                .map_err(|e| anyhow::anyhow!("bad record key {key:?}: {e}"))?;
            weighted += abelian::sur_count(&h, g) * BigUint::from(count);
        }
        out.push((g.clone(), ratio_to_f64(&weighted, &denom)));
    }
    Ok(out)
}

/// Empirical Hom-moments, used by the subgroup-consistency identity
/// `Ê[#Hom(·, G)] = Σ_{K ≤ G} Ê[#Sur(·, K)]`.
pub fn empirical_hom_moment(record: &ExperimentRecord, g: &GroupSpec) -> Result<f64> {
    let denom = BigUint::from(record.classified());
    let mut weighted = BigUint::from(0u32);
    for (key, &count) in &record.counts {
        let h: GroupSpec = key
            .parse()
            .map_err(|e| anyhow::anyhow!("bad record key {key:?}: {e}"))?;
        let mut hom = BigUint::from(1u32);
        for (p, lam) in g.factors() {
            hom *= abelian::hom_count(p, &h.sylow(p), lam);
        }
        weighted += hom * BigUint::from(count);
    }
    Ok(ratio_to_f64(&weighted, &denom))
}

/// Empirical Hom-moment vector at one prime, as exact sample fractions, on
/// the index set the inversion solver expects.
///
/// Feeding this into `recover_distribution` closes the loop from simulated
/// samples back to a distribution; the deep head indices carry heavy
/// Monte Carlo noise, but the solver's coefficient decay suppresses them,
/// so the leading recovered values track the empirical frequencies.
pub fn empirical_moment_vector(
    record: &ExperimentRecord,
    p: u64,
    caps: &MomentCaps,
) -> Result<MomentVector> {
    if caps.max_parts.len() != 1 {
        bail!("empirical moment vectors are single-prime");
    }
    if !record.config.primes.iter().any(|ps| ps.p == p) {
        bail!("record does not extract p = {p}");
    }
    // exact per-type sample counts at this prime
    let mut type_counts: BTreeMap<Partition, u64> = BTreeMap::new();
    for (key, &count) in &record.counts {
        let g: GroupSpec = key
            .parse()
            .map_err(|e| anyhow::anyhow!("bad record key {key:?}: {e}"))?;
        *type_counts.entry(g.sylow(p)).or_insert(0) += count;
    }
    let denom = BigInt::from(record.classified());

    let mut values = BTreeMap::new();
    let m = caps.max_parts[0];
    for tail in Partition::all(
        caps.size_cap as u64 * (m as u64 - 1).max(1),
        caps.size_cap,
        m.saturating_sub(1) as usize,
    ) {
        for f1 in tail.first()..=caps.head_cap {
            let mut f = vec![f1];
            f.extend_from_slice(tail.parts());
            f.resize(m as usize, 0);
            let target = Partition::from_unsorted(f.clone()).transpose();
            let mut weighted = BigUint::from(0u32);
            for (lam, &count) in &type_counts {
                weighted += abelian::hom_count(p, lam, &target) * BigUint::from(count);
            }
            values.insert(
                vec![f],
                BigRational::new(BigInt::from(weighted), denom.clone()),
            );
        }
    }
    Ok(MomentVector {
        primes: vec![p],
        caps: caps.clone(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_graph_config(samples: u64, workers: usize) -> ExperimentConfig {
        ExperimentConfig {
            model: ModelSpec::Graph { n: 12, q: 0.5 },
            primes: vec![PrimeSpec { p: 2, e: 8 }],
            samples,
            master_seed: 20_240_817,
            moment_groups: vec!["2:[1]".into(), "2:[1,1]".into()],
            workers,
        }
    }

    #[test]
    fn record_accounting_balances() {
        let rec = run_experiment(&small_graph_config(400, 2)).unwrap();
        let counted: u64 = rec.counts.values().sum();
        assert_eq!(
            counted + rec.disconnected + rec.unsaturated,
            rec.config.samples
        );
        // trivial-group moment is identically 1
        let (_, trivial) = empirical_moments(&rec, &[GroupSpec::trivial()]).unwrap()[0].clone();
        assert_eq!(trivial, 1.0);
    }

    #[test]
    fn worker_count_does_not_change_bytes() {
        let a = run_experiment(&small_graph_config(300, 1)).unwrap();
        let b = run_experiment(&small_graph_config(300, 8)).unwrap();
        assert_eq!(
            a.to_canonical_json().unwrap(),
            b.to_canonical_json().unwrap()
        );
    }

    #[test]
    fn hom_moment_is_subgroup_sum_of_sur_moments() {
        let rec = run_experiment(&small_graph_config(500, 0)).unwrap();
        for target in ["2:[1]", "2:[2]", "2:[1,1]"] {
            let g: GroupSpec = target.parse().unwrap();
            let hom = empirical_hom_moment(&rec, &g).unwrap();
            // Σ over subgroup types of G, with multiplicity
            let lam = g.sylow(2);
            let mut sum = 0.0;
            for (mu, mult) in abelian::enumerate_subgroups(2, &lam, 4096).unwrap() {
                let k = if mu.is_empty() {
                    GroupSpec::trivial()
                } else {
                    GroupSpec::p_group(2, mu)
                };
                let m = empirical_moments(&rec, &[k]).unwrap()[0].1;
                sum += ratio_to_f64(&mult, &BigUint::from(1u32)) * m;
            }
            assert!(
                (hom - sum).abs() < 1e-9 * hom.max(1.0),
                "{target}: {hom} vs {sum}"
            );
        }
    }

    #[test]
    fn uniform_matrix_model_runs() {
        let cfg = ExperimentConfig {
            model: ModelSpec::MatrixUniform { n: 10, modulus: 8 },
            primes: vec![PrimeSpec { p: 2, e: 3 }],
            samples: 200,
            master_seed: 7,
            moment_groups: vec![],
            workers: 2,
        };
        let rec = run_experiment(&cfg).unwrap();
        assert_eq!(rec.disconnected, 0);
        assert_eq!(rec.unsaturated, 0);
        // types never exceed the modulus cap
        for key in rec.counts.keys() {
            let g: GroupSpec = key.parse().unwrap();
            assert!(g.sylow(2).first() <= 3, "type {key} beyond cap");
        }
    }

    #[test]
    fn mismatched_modulus_prime_rejected() {
        let cfg = ExperimentConfig {
            model: ModelSpec::MatrixUniform { n: 10, modulus: 8 },
            primes: vec![PrimeSpec { p: 3, e: 2 }],
            samples: 10,
            master_seed: 7,
            moment_groups: vec![],
            workers: 1,
        };
        assert!(run_experiment(&cfg).is_err());
    }
}
