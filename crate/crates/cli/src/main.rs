use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use num_bigint::BigUint;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use cokernel_cli::harness::{
    empirical_moments, run_experiment, ExperimentConfig, ExperimentRecord, ModelSpec, PrimeSpec,
};
use cokernel_cli::report::{compare_to_theory, render_report, ComparisonSettings};
use cokernel_core::abelian::{self, oracle, GroupSpec, Partition, SmallGroupTable};
use cokernel_core::linalg::{
    cokernel_sylow_type, det_bareiss, rank_mod_p, snf_integer, snf_mod_prime_power, ResidueMatrix,
    ZMatrix,
};
use cokernel_core::recover::{
    build_theoretical_moments, recover_distribution, MomentCaps, MomentVector,
};
use cokernel_core::theory::{
    cyclic_upper_bound, limit_prob_sylow, macwilliams_rank_count, normalizing_constant, prank_prob,
    squarefree_upper_bound, TruncationPolicy,
};

/// Sandpile groups of random graphs and cokernels of random symmetric
/// integer matrices: exact computation, limiting distributions, seeded
/// Monte Carlo verification, and moment-problem inversion.
#[derive(Parser)]
#[command(name = "cokernel", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print closed-form limiting tables and constants.
    Theory(TheoryArgs),
    /// Run a seeded sampling campaign and write its record.
    Simulate(SimulateArgs),
    /// Compute empirical Sur-moments from a record.
    Moments(MomentsArgs),
    /// Build theoretical moments and/or invert a moment vector.
    Recover(RecoverArgs),
    /// Brute-force verification helpers.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct TheoryArgs {
    /// Primes for the per-type tables.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    prime: Vec<u64>,
    /// Largest |λ| in the table.
    #[arg(long, default_value_t = 8)]
    max_size: u64,
    /// Largest part in the table.
    #[arg(long, default_value_t = 8)]
    max_part: u32,
    /// Relative tolerance for the infinite products.
    #[arg(long, default_value_t = 1e-15)]
    tolerance: f64,
    #[arg(long, default_value = "csv")]
    format: Format,
    /// Also print the global constants (cyclic/square-free bounds, ...).
    #[arg(long)]
    constants: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    model: Model,
    /// Vertex count (graph) or matrix dimension.
    #[arg(long)]
    n: usize,
    /// Edge probability for the graph model.
    #[arg(long)]
    q: Option<f64>,
    /// Modulus for the matrix-uniform model.
    #[arg(long)]
    mod_a: Option<u64>,
    /// Entry pmf for the matrix-iid model, e.g. "-1:0.5,1:0.5".
    #[arg(long)]
    pmf: Option<String>,
    /// Declared balance certificate for the matrix-iid model.
    #[arg(long)]
    alpha: Option<f64>,
    /// Primes whose Sylow types are extracted.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    prime: Vec<u64>,
    /// Working exponents, one per prime (repeated last if shorter).
    #[arg(long, value_delimiter = ',', default_value = "8")]
    exponent: Vec<u32>,
    #[arg(long)]
    samples: u64,
    #[arg(long)]
    seed: u64,
    /// Worker threads (0 = COKERNEL_WORKERS or all cores).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Groups whose empirical moments the record carries.
    #[arg(long = "moment-group")]
    moment_group: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    format: Format,
    /// Compare against theory; statistical mismatch exits with code 2.
    #[arg(long)]
    check: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Model {
    Graph,
    MatrixUniform,
    MatrixIid,
}

#[derive(Args)]
struct MomentsArgs {
    /// Record written by `simulate`.
    #[arg(long)]
    record: PathBuf,
    /// Target groups, e.g. `2:[1,1]`; defaults to the record's own list.
    #[arg(long = "group")]
    group: Vec<String>,
    /// Full comparison report against theory; mismatch exits with code 2.
    #[arg(long)]
    compare: bool,
}

#[derive(Args)]
struct RecoverArgs {
    /// Build exact theoretical moments instead of reading a file.
    #[arg(long)]
    theoretical: bool,
    #[arg(long, value_delimiter = ',', default_value = "2")]
    prime: Vec<u64>,
    /// Per-prime part caps for the transposed indices (exponent caps).
    #[arg(long, value_delimiter = ',', default_value = "3")]
    max_parts: Vec<u32>,
    #[arg(long, default_value_t = 6)]
    size_cap: u32,
    /// Head-coordinate cap; defaults to size_cap + 24.
    #[arg(long)]
    head_cap: Option<u32>,
    /// Moment vector JSON to invert.
    #[arg(long)]
    moments: Option<PathBuf>,
    /// Experiment record to take empirical moments from (single prime).
    #[arg(long)]
    record: Option<PathBuf>,
    /// With --theoretical: invert right away instead of exporting the
    /// moment vector.
    #[arg(long)]
    invert: bool,
    /// Where to write the output (moment vector or recovered distribution).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(subcommand)]
    what: OracleCommand,
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Smith normal form of a matrix from a text file
    /// (first line "n modulus" with 0 for the integers, then n rows).
    Snf {
        #[arg(long)]
        file: PathBuf,
    },
    /// Counting formulas for one group against exhaustive enumeration.
    Group {
        #[arg(long)]
        prime: u64,
        #[arg(long)]
        lambda: String,
        #[arg(long, default_value_t = abelian::DEFAULT_ORACLE_BOUND)]
        bound: u64,
        /// Work budget for the enumeration oracles.
        #[arg(long, default_value_t = 50_000_000)]
        max_ops: u64,
    },
    /// Symmetric rank census over F_p against the closed form.
    Macwilliams {
        #[arg(long)]
        prime: u64,
        #[arg(long)]
        n: u32,
    },
    /// Sample one graph and print its edge list.
    Graph {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Theory(args) => cmd_theory(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Moments(args) => cmd_moments(args),
        Command::Recover(args) => cmd_recover(args),
        Command::Oracle(args) => cmd_oracle(args),
    }
}

/// Writes to stdout, treating a broken pipe (e.g. `| head`) as a normal
/// early exit rather than an error.
fn emit(text: &str) -> Result<()> {
    use std::io::Write;
    match std::io::stdout().write_all(text.as_bytes()) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => std::process::exit(0),
        Err(e) => Err(e.into()),
    }
}

#[derive(Serialize)]
struct TheoryRow {
    p: u64,
    lambda: String,
    probability: f64,
    tail_bound: f64,
    roundoff: f64,
}

fn cmd_theory(args: TheoryArgs) -> Result<ExitCode> {
    let policy = TruncationPolicy {
        rel_tol: args.tolerance,
        ..TruncationPolicy::default()
    };
    policy.validate().map_err(|e| anyhow!("{e}"))?;
    let mut rows = Vec::new();
    for &p in &args.prime {
        Partition::for_each(
            args.max_size,
            args.max_part,
            args.max_size as usize,
            &mut |lam| {
                let b = limit_prob_sylow(p, lam, &policy).expect("dual formulas agree");
                rows.push(TheoryRow {
                    p,
                    lambda: lam.to_string(),
                    probability: b.value,
                    tail_bound: b.tail_bound,
                    roundoff: b.roundoff,
                });
            },
        );
    }
    match args.format {
        Format::Csv => {
            let mut text = String::from("p,lambda,probability,tail_bound,roundoff\n");
            for r in rows {
                text.push_str(&format!(
                    "{},\"{}\",{:.17e},{:.3e},{:.3e}\n",
                    r.p, r.lambda, r.probability, r.tail_bound, r.roundoff
                ));
            }
            emit(&text)?;
        }
        Format::Json => emit(&format!("{}\n", serde_json::to_string_pretty(&rows)?))?,
    }
    if args.constants {
        let cyc = cyclic_upper_bound(&policy);
        let sqf = squarefree_upper_bound(&policy);
        eprintln!(
            "cyclic upper bound:      {:.9} ± {:.2e}",
            cyc.value,
            cyc.total_bound()
        );
        eprintln!(
            "square-free upper bound: {:.9} ± {:.2e}",
            sqf.value,
            sqf.total_bound()
        );
        for &p in &args.prime {
            let norm = normalizing_constant(p, &policy);
            eprintln!(
                "normalizing constant p={p}: {:.12} (tail {:.2e})",
                norm.value, norm.tail_bound
            );
            for r in 0..=4 {
                let b = prank_prob(p, r, &policy);
                eprintln!("  P(rank = {r}) = {:.12}", b.value);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_pmf(s: &str) -> Result<Vec<(i64, f64)>> {
    s.split(',')
        .map(|tok| {
            let (v, w) = tok
                .split_once(':')
                .ok_or_else(|| anyhow!("pmf entries look like value:prob"))?;
            Ok((v.trim().parse()?, w.trim().parse()?))
        })
        .collect()
}

fn cmd_simulate(args: SimulateArgs) -> Result<ExitCode> {
    let model = match args.model {
        Model::Graph => ModelSpec::Graph {
            n: args.n,
            q: args.q.context("graph model needs --q")?,
        },
        Model::MatrixUniform => ModelSpec::MatrixUniform {
            n: args.n,
            modulus: args.mod_a.context("matrix-uniform needs --mod-a")?,
        },
        Model::MatrixIid => ModelSpec::MatrixIid {
            n: args.n,
            pmf: parse_pmf(args.pmf.as_deref().unwrap_or("-1:0.5,1:0.5"))?,
            alpha: args.alpha.unwrap_or(0.5),
        },
    };
    let primes = args
        .prime
        .iter()
        .enumerate()
        .map(|(i, &p)| PrimeSpec {
            p,
            e: args
                .exponent
                .get(i)
                .or(args.exponent.last())
                .copied()
                .unwrap_or(8),
        })
        .collect();
    let config = ExperimentConfig {
        model,
        primes,
        samples: args.samples,
        master_seed: args.seed,
        moment_groups: args.moment_group,
        workers: args.workers,
    };
    let record = run_experiment(&config)?;
    eprintln!(
        "{} samples in {} ms ({} disconnected, {} unsaturated)",
        record.config.samples, record.elapsed_ms, record.disconnected, record.unsaturated
    );
    let payload = match args.format {
        Format::Json => record.to_canonical_json()?,
        Format::Csv => record.counts_csv().into_bytes(),
    };
    match &args.out {
        Some(path) => fs::write(path, &payload).with_context(|| format!("writing {path:?}"))?,
        None => emit(&String::from_utf8_lossy(&payload))?,
    }
    if args.check {
        let report = compare_to_theory(&record, &ComparisonSettings::default())?;
        emit(&render_report(&report))?;
        if !report.pass {
            return Ok(ExitCode::from(2));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_moments(args: MomentsArgs) -> Result<ExitCode> {
    let bytes = fs::read(&args.record).with_context(|| format!("reading {:?}", args.record))?;
    let record: ExperimentRecord = serde_json::from_slice(&bytes)?;
    let groups: Vec<GroupSpec> = if args.group.is_empty() {
        record
            .config
            .moment_groups
            .iter()
            .map(|g| g.parse().map_err(|e| anyhow!("{e}")))
            .collect::<Result<_>>()?
    } else {
        args.group
            .iter()
            .map(|g| g.parse().map_err(|e| anyhow!("{e}")))
            .collect::<Result<_>>()?
    };
    if record.unsaturated > 0 {
        eprintln!(
            "warning: {} unsaturated samples dropped; moments are lower bounds only",
            record.unsaturated
        );
    }
    for (g, value) in empirical_moments(&record, &groups)? {
        let expect =
            cokernel_core::theory::ratio_to_f64(&abelian::moment_value(&g), &BigUint::from(1u32));
        emit(&format!(
            "E[#Sur(S, {g})] = {value:.6}   (limit {expect})\n"
        ))?;
    }
    if args.compare {
        let report = compare_to_theory(&record, &ComparisonSettings::default())?;
        print!("{}", render_report(&report));
        if !report.pass {
            return Ok(ExitCode::from(2));
        }
    }
    Ok(ExitCode::SUCCESS)
}

// --- moment vector / recovery JSON schemas -------------------------------

#[derive(Serialize, Deserialize)]
struct MomentVectorFile {
    primes: Vec<u64>,
    max_parts: Vec<u32>,
    size_cap: u32,
    head_cap: u32,
    /// Exact values as decimal strings "num" or "num/den".
    values: Vec<MomentEntry>,
}

#[derive(Serialize, Deserialize)]
struct MomentEntry {
    index: Vec<Vec<u32>>,
    c: String,
}

impl MomentVectorFile {
    fn from_vector(mv: &MomentVector) -> Self {
        MomentVectorFile {
            primes: mv.primes.clone(),
            max_parts: mv.caps.max_parts.clone(),
            size_cap: mv.caps.size_cap,
            head_cap: mv.caps.head_cap,
            values: mv
                .values
                .iter()
                .map(|(index, c)| MomentEntry {
                    index: index.clone(),
                    c: c.to_string(),
                })
                .collect(),
        }
    }

    fn into_vector(self) -> Result<MomentVector> {
        let caps = MomentCaps {
            max_parts: self.max_parts,
            size_cap: self.size_cap,
            head_cap: self.head_cap,
        };
        let mut values = BTreeMap::new();
        for entry in self.values {
            let c = BigRational::from_str(&entry.c)
                .map_err(|e| anyhow!("bad moment value {:?}: {e}", entry.c))?;
            values.insert(entry.index, c);
        }
        Ok(MomentVector {
            primes: self.primes,
            caps,
            values,
        })
    }
}

#[derive(Serialize)]
struct RecoveredFile {
    entries: Vec<RecoveredRow>,
    total_mass: f64,
    max_scaled_residual: f64,
    min_x: f64,
}

#[derive(Serialize)]
struct RecoveredRow {
    group: String,
    index: Vec<Vec<u32>>,
    x: f64,
    residual_raw: f64,
    residual_scaled: f64,
}

fn cmd_recover(args: RecoverArgs) -> Result<ExitCode> {
    let mv = if let Some(path) = &args.moments {
        let bytes = fs::read(path).with_context(|| format!("reading {path:?}"))?;
        let file: MomentVectorFile = serde_json::from_slice(&bytes)?;
        file.into_vector()?
    } else if let Some(path) = &args.record {
        let bytes = fs::read(path).with_context(|| format!("reading {path:?}"))?;
        let record: ExperimentRecord = serde_json::from_slice(&bytes)?;
        let p = *args.prime.first().context("--prime required")?;
        let caps = MomentCaps {
            max_parts: vec![*args.max_parts.first().context("--max-parts required")?],
            size_cap: args.size_cap,
            head_cap: args.head_cap.unwrap_or(args.size_cap + 8),
        };
        cokernel_cli::harness::empirical_moment_vector(&record, p, &caps)?
    } else if args.theoretical {
        let caps = MomentCaps {
            max_parts: args.max_parts.clone(),
            size_cap: args.size_cap,
            head_cap: args.head_cap.unwrap_or(args.size_cap + 24),
        };
        build_theoretical_moments(&args.prime, &caps).map_err(|e| anyhow!("{e}"))?
    } else {
        bail!("pass --moments FILE, --record FILE, or --theoretical");
    };

    if args.theoretical && args.moments.is_none() && !args.invert {
        // export the moment vector itself
        let file = MomentVectorFile::from_vector(&mv);
        let payload = serde_json::to_vec_pretty(&file)?;
        match &args.out {
            Some(path) => fs::write(path, &payload).with_context(|| format!("writing {path:?}"))?,
            None => emit(&format!("{}\n", String::from_utf8_lossy(&payload)))?,
        }
        eprintln!("built {} moment entries", file.values.len());
        return Ok(ExitCode::SUCCESS);
    }

    let rec = recover_distribution(&mv).map_err(|e| anyhow!("{e}"))?;
    let out = RecoveredFile {
        entries: rec
            .entries
            .iter()
            .map(|e| RecoveredRow {
                group: e.group.to_string(),
                index: e.index.clone(),
                x: e.x,
                residual_raw: e.residual_raw,
                residual_scaled: e.residual_scaled,
            })
            .collect(),
        total_mass: rec.total_mass,
        max_scaled_residual: rec.max_scaled_residual,
        min_x: rec.min_x,
    };
    let payload = serde_json::to_vec_pretty(&out)?;
    match &args.out {
        Some(path) => fs::write(path, &payload).with_context(|| format!("writing {path:?}"))?,
        None => emit(&format!("{}\n", String::from_utf8_lossy(&payload)))?,
    }
    eprintln!(
        "recovered {} entries; total mass {:.6}; max scaled residual {:.3e}",
        rec.entries.len(),
        rec.total_mass,
        rec.max_scaled_residual
    );
    Ok(ExitCode::SUCCESS)
}

fn parse_matrix_file(text: &str) -> Result<(u64, Vec<Vec<i64>>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().context("empty matrix file")?;
    let mut parts = header.split_whitespace();
    let n: usize = parts.next().context("header: n modulus")?.parse()?;
    let modulus: u64 = parts.next().context("header: n modulus")?.parse()?;
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let line = lines.next().context("missing matrix row")?;
        let row: Vec<i64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|e| anyhow!("bad entry {t:?}: {e}")))
            .collect::<Result<_>>()?;
        if row.len() != n {
            bail!("expected {n} entries per row");
        }
        rows.push(row);
    }
    Ok((modulus, rows))
}

fn prime_power_split(m: u64) -> Option<(u64, u32)> {
    (2..=m).find(|&p| m.is_multiple_of(p)).map(|p| {
        let mut e = 0;
        let mut x = m;
        while x.is_multiple_of(p) {
            x /= p;
            e += 1;
        }
        (p, if x == 1 { e } else { 0 })
    })
}

fn cmd_oracle(args: OracleArgs) -> Result<ExitCode> {
    use std::fmt::Write as _;
    let mut out = String::new();
    match args.what {
        OracleCommand::Snf { file } => {
            let text = fs::read_to_string(&file)?;
            let (modulus, rows) = parse_matrix_file(&text)?;
            if modulus == 0 {
                let m = ZMatrix::from_rows(&rows).map_err(|e| anyhow!("{e}"))?;
                let snf = snf_integer(&m);
                let diag: Vec<String> = snf.diag.iter().map(|d| d.to_string()).collect();
                writeln!(out, "diagonal: {}", diag.join(" "))?;
                writeln!(out, "rank: {}", snf.rank())?;
                writeln!(out, "det (Bareiss): {}", det_bareiss(&m))?;
                for p in [2u64, 3, 5] {
                    let t = cokernel_sylow_type(&m, p, 8, 64).map_err(|e| anyhow!("{e}"))?;
                    writeln!(
                        out,
                        "sylow {}: {} ({})",
                        p,
                        t.partition,
                        if t.saturated {
                            "saturated"
                        } else {
                            "unsaturated"
                        }
                    )?;
                }
            } else {
                let (p, e) = prime_power_split(modulus).context("modulus must be a prime power")?;
                if e == 0 {
                    bail!("modulus {modulus} is not a prime power");
                }
                let urows: Vec<Vec<u64>> = rows
                    .iter()
                    .map(|r| {
                        r.iter()
                            .map(|&x| (x as i128).rem_euclid(modulus as i128) as u64)
                            .collect()
                    })
                    .collect();
                let m = ResidueMatrix::from_rows(p, e, &urows).map_err(|e| anyhow!("{e}"))?;
                let snf = snf_mod_prime_power(&m).map_err(|e| anyhow!("{e}"))?;
                writeln!(out, "p-valuations: {:?}", snf.vals)?;
                writeln!(out, "rank mod {p}: {}", snf.rank_mod_p())?;
                let zint = ZMatrix::from_rows(&rows).map_err(|e| anyhow!("{e}"))?;
                writeln!(out, "rank mod {p} (Gauss): {}", rank_mod_p(&zint, p))?;
            }
        }
        OracleCommand::Group {
            prime,
            lambda,
            bound,
            max_ops,
        } => {
            let lam: Partition = lambda.parse().map_err(|e| anyhow!("{e}"))?;
            let table = SmallGroupTable::new(prime, &lam, bound).map_err(|e| anyhow!("{e}"))?;
            writeln!(out, "group {prime}:{lam} of order {}", table.order())?;
            writeln!(out, "|∧²G| = {}", abelian::wedge2_order(prime, &lam))?;
            writeln!(
                out,
                "|Hom(G,G)| = {} (oracle {})",
                abelian::hom_count(prime, &lam, &lam),
                oracle::hom_count(&table, &lam)
            )?;
            let aut = abelian::aut_order(prime, &lam);
            match oracle::aut_order(&table, max_ops) {
                Some(o) => writeln!(out, "|Aut(G)| = {aut} (oracle {o})")?,
                None => writeln!(out, "|Aut(G)| = {aut} (oracle skipped: over budget)")?,
            }
            let pairings = abelian::pairing_count(prime, &lam);
            match oracle::pairing_count(&table, max_ops) {
                Some(o) => writeln!(out, "perfect symmetric pairings = {pairings} (oracle {o})")?,
                None => writeln!(
                    out,
                    "perfect symmetric pairings = {pairings} (oracle skipped)"
                )?,
            }
            writeln!(
                out,
                "Σ subgroups |∧²| = {}",
                abelian::sum_wedge2_over_subgroups(prime, &lam)
            )?;
            writeln!(out, "subgroups by type (exhaustive walk):")?;
            for (mu, count) in
                abelian::enumerate_subgroups(prime, &lam, bound).map_err(|e| anyhow!("{e}"))?
            {
                writeln!(
                    out,
                    "  {mu}: {count} (formula {})",
                    abelian::subgroup_count_of_type(prime, &mu, &lam)
                )?;
            }
        }
        OracleCommand::Macwilliams { prime, n } => {
            let census = oracle::symmetric_matrices_by_rank(prime, n, 200_000_000)
                .context("census over budget; try smaller n")?;
            for r in 0..=n {
                let formula =
                    macwilliams_rank_count(prime, n, n - r).map_err(|e| anyhow!("{e}"))?;
                writeln!(out, "rank {r}: {} (formula {formula})", census[r as usize])?;
            }
        }
        OracleCommand::Graph { n, q, seed, index } => {
            let g = cokernel_core::models::sample_graph(n, q, seed, index)
                .map_err(|e| anyhow!("{e}"))?;
            out.push_str(&g.to_edge_list());
            eprintln!(
                "{} vertices, {} edges, {}",
                n,
                g.edge_count(),
                if g.is_connected() {
                    "connected"
                } else {
                    "disconnected"
                }
            );
        }
    }
    emit(&out)?;
    Ok(ExitCode::SUCCESS)
}
