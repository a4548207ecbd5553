//! Comparison of experiment records against the closed-form limits:
//! per-type z-scores, rank-distribution bands, total-variation distance,
//! and moment deviations, each with machine-readable verdicts.

use std::collections::BTreeMap;

use anyhow::Result;
use num_bigint::BigUint;
use serde::Serialize;

use cokernel_core::abelian::{self, GroupSpec, Partition};
use cokernel_core::theory::{limit_prob_sylow, prank_prob, ratio_to_f64, TruncationPolicy};

use crate::harness::{ExperimentRecord, ModelSpec};

/// Thresholds for [`compare_to_theory`].  Statistical bands are 3σ binomial
/// unless a wider absolute floor is given; both are recorded in the verdicts.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonSettings {
    /// Theory tables include every type with `|λ| ≤ table_size_cap`.
    pub table_size_cap: u64,
    pub z_band: f64,
    /// Absolute floor for the rank-distribution bands.
    pub prank_floor: f64,
    pub prank_max_r: u32,
    /// Total-variation threshold at the reference sample count; runs with
    /// fewer samples get it widened by `sqrt(reference/N)` since the
    /// expected empirical TV scales like `1/sqrt(N)`.
    pub tv_threshold: f64,
    pub tv_reference_samples: u64,
}

impl Default for ComparisonSettings {
    fn default() -> Self {
        ComparisonSettings {
            table_size_cap: 28,
            z_band: 3.0,
            prank_floor: 0.02,
            prank_max_r: 3,
            tv_threshold: 0.03,
            tv_reference_samples: 10_000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub name: String,
    pub observed: f64,
    pub expected: f64,
    pub band: f64,
    pub pass: bool,
}

impl Verdict {
    fn new(name: String, observed: f64, expected: f64, band: f64) -> Self {
        let pass = (observed - expected).abs() <= band;
        Verdict {
            name,
            observed,
            expected,
            band,
            pass,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PrimeReport {
    pub p: u64,
    /// Total-variation distance between the empirical type table and the
    /// truncated theoretical one.
    pub tv_distance: f64,
    pub tv_threshold: f64,
    pub tv_pass: bool,
    /// Mass the truncated theory table leaves uncovered.
    pub theory_tail: f64,
    pub rank_verdicts: Vec<Verdict>,
    pub type_verdicts: Vec<Verdict>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub settings: ComparisonSettings,
    pub primes: Vec<PrimeReport>,
    pub moment_verdicts: Vec<Verdict>,
    pub pass: bool,
}

/// Exponent at which a model's reported types are structurally capped
/// (`v_p(a)` for the mod-`a` matrix model; effectively unbounded otherwise).
pub fn effective_exponent(model: &ModelSpec, p: u64) -> u32 {
    match model {
        ModelSpec::MatrixUniform { modulus, .. } => {
            let mut e = 0;
            let mut a = *modulus;
            while a % p == 0 {
                a /= p;
                e += 1;
            }
            e
        }
        _ => u32::MAX,
    }
}

/// Theoretical type table at `p`, tensor-truncated to exponent `e`.
pub fn theory_table(
    p: u64,
    size_cap: u64,
    e: u32,
    policy: &TruncationPolicy,
) -> (BTreeMap<Partition, f64>, f64) {
    let mut table: BTreeMap<Partition, f64> = BTreeMap::new();
    let mut mass = 0.0;
    Partition::for_each(size_cap, size_cap as u32, size_cap as usize, &mut |lam| {
        let prob = limit_prob_sylow(p, lam, policy)
            .expect("formulas agree")
            .value;
        mass += prob;
        *table.entry(lam.truncate(e)).or_insert(0.0) += prob;
    });
    (table, 1.0 - mass)
}

fn tv_distance(a: &BTreeMap<Partition, f64>, b: &BTreeMap<Partition, f64>) -> f64 {
    let mut keys: Vec<&Partition> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    0.5 * keys
        .into_iter()
        .map(|k| (a.get(k).copied().unwrap_or(0.0) - b.get(k).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

/// Full comparison of one record against theory.
pub fn compare_to_theory(
    record: &ExperimentRecord,
    settings: &ComparisonSettings,
) -> Result<ComparisonReport> {
    let policy = TruncationPolicy::default();
    let n_classified = record.classified() as f64;
    let mut primes = Vec::new();
    let mut pass = true;

    for ps in &record.config.primes {
        let p = ps.p;
        let e_eff = effective_exponent(&record.config.model, p);
        let empirical = record.marginal_table(p)?;
        let (theory, tail) = theory_table(p, settings.table_size_cap, e_eff, &policy);

        let tv = tv_distance(&empirical, &theory);
        let tv_threshold = settings.tv_threshold
            * (settings.tv_reference_samples as f64 / n_classified)
                .sqrt()
                .max(1.0);
        let tv_pass = tv < tv_threshold;
        pass &= tv_pass;

        // rank distribution: compare against the closed form, with the
        // mod-a models inheriting the same marginal (ranks are untouched by
        // tensoring)
        let mut rank_verdicts = Vec::new();
        for r in 0..=settings.prank_max_r {
            let observed: f64 = empirical
                .iter()
                .filter(|(lam, _)| lam.len() == r as usize)
                .map(|(_, f)| f)
                .sum();
            let expected = prank_prob(p, r, &policy).value;
            let sigma = (expected * (1.0 - expected) / n_classified).sqrt();
            let band = (settings.z_band * sigma).max(settings.prank_floor);
            let v = Verdict::new(format!("p={p} rank {r}"), observed, expected, band);
            pass &= v.pass;
            rank_verdicts.push(v);
        }

        // per-type z-scores where the expected count is large enough for a
        // normal band to mean something
        let mut type_verdicts = Vec::new();
        for (lam, &expected) in &theory {
            if expected * n_classified < 25.0 {
                continue;
            }
            let observed = empirical.get(lam).copied().unwrap_or(0.0);
            let sigma = (expected * (1.0 - expected) / n_classified).sqrt();
            let v = Verdict::new(
                format!("p={p} type {lam}"),
                observed,
                expected,
                settings.z_band * sigma + expected * 1e-6,
            );
            pass &= v.pass;
            type_verdicts.push(v);
        }

        primes.push(PrimeReport {
            p,
            tv_distance: tv,
            tv_threshold,
            tv_pass,
            theory_tail: tail,
            rank_verdicts,
            type_verdicts,
        });
    }

    // moments: empirical Ê[#Sur(·, G)] against |∧²G|, with a 3σ band from
    // the empirical second moment
    let mut moment_verdicts = Vec::new();
    for (key, &observed) in &record.moments {
        let g: GroupSpec = key
            .parse()
            .map_err(|e| anyhow::anyhow!("bad moment key {key:?}: {e}"))?;
        let expected = ratio_to_f64(&abelian::moment_value(&g), &BigUint::from(1u32));
        let mut second = 0.0;
        for (tk, &count) in &record.counts {
            let h: GroupSpec = tk
                .parse()
                .map_err(|e| anyhow::anyhow!("bad record key {tk:?}: {e}"))?;
            let sur = ratio_to_f64(&abelian::sur_count(&h, &g), &BigUint::from(1u32));
            second += (count as f64 / n_classified) * sur * sur;
        }
        let variance = (second - observed * observed).max(0.0);
        let band = settings.z_band * (variance / n_classified).sqrt() + 1e-9;
        let v = Verdict::new(format!("E[#Sur(S, {g})]"), observed, expected, band);
        pass &= v.pass;
        moment_verdicts.push(v);
    }

    Ok(ComparisonReport {
        settings: settings.clone(),
        primes,
        moment_verdicts,
        pass,
    })
}

/// Total-variation distance between the type tables of two records at one
/// prime, after tensor-truncating both to their common exponent.
pub fn tv_between_records(a: &ExperimentRecord, b: &ExperimentRecord, p: u64) -> Result<f64> {
    let e = effective_exponent(&a.config.model, p).min(effective_exponent(&b.config.model, p));
    let truncate = |t: BTreeMap<Partition, f64>| -> BTreeMap<Partition, f64> {
        let mut out = BTreeMap::new();
        for (lam, f) in t {
            *out.entry(lam.truncate(e)).or_insert(0.0) += f;
        }
        out
    };
    Ok(tv_distance(
        &truncate(a.marginal_table(p)?),
        &truncate(b.marginal_table(p)?),
    ))
}

/// One pass/fail line per verdict, for terminal output.
pub fn render_report(report: &ComparisonReport) -> String {
    let mut out = String::new();
    for pr in &report.primes {
        out.push_str(&format!(
            "[{}] p={} TV distance {:.5} (< {:.5}; theory tail {:.2e})\n",
            if pr.tv_pass { "pass" } else { "FAIL" },
            pr.p,
            pr.tv_distance,
            pr.tv_threshold,
            pr.theory_tail,
        ));
        for v in pr.rank_verdicts.iter().chain(pr.type_verdicts.iter()) {
            out.push_str(&render_verdict(v));
        }
    }
    for v in &report.moment_verdicts {
        out.push_str(&render_verdict(v));
    }
    out
}

fn render_verdict(v: &Verdict) -> String {
    format!(
        "[{}] {}: observed {:.6} expected {:.6} band {:.6}\n",
        if v.pass { "pass" } else { "FAIL" },
        v.name,
        v.observed,
        v.expected,
        v.band
    )
}
