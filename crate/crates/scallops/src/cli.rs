//! Command-line front end: signature generation, search, evaluation, and
//! benchmarks, with reproducible configuration.
//!
//! Exit codes are a stable scripting contract: 0 success, 2 usage or
//! input error, 3 execution failure. Every command writes a
//! `metadata.json` sidecar recording the resolved configuration, input
//! accounting, and the conventions in force (threshold `score >= T`,
//! residue stripping); two runs with the same configuration produce
//! byte-identical primary outputs.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::eval::{self, AlignParams, PidDenominator, SweepPoint};
use crate::fasta::{self, Role};
use crate::pipeline::{self, ExecConfig, ParamsFingerprint};
use crate::scoring::{SearchParams, SubstitutionMatrix};
use crate::synth;
use crate::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "scallops",
    version,
    about = "Protein-sequence similarity search via score-weighted SimHash signatures"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate signature shards from a FASTA file or shard directory
    Siggen(SiggenArgs),
    /// Match query signatures against reference signatures within Hamming distance d
    Search(SearchArgs),
    /// Align candidate pairs and report percent-identity quartiles
    Eval(EvalArgs),
    /// Run search + alignment over a (k, T, d) parameter grid
    Sweep(SweepArgs),
    /// Time signature generation and search on a seeded synthetic corpus
    Bench(BenchArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ExecArgs {
    /// Worker threads (default: available cores)
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output partitions per job
    #[arg(long, default_value_t = 4)]
    pub partitions: usize,
    /// In-memory shuffle bytes per map task before spilling to disk
    #[arg(long = "spill-budget", default_value_t = 256 * 1024 * 1024)]
    pub spill_budget: usize,
}

impl ExecArgs {
    fn resolve(&self) -> Result<ExecConfig> {
        if self.workers == Some(0) {
            return Err(Error::Params("workers must be >= 1".into()));
        }
        if self.partitions == 0 {
            return Err(Error::Params("partitions must be >= 1".into()));
        }
        Ok(ExecConfig {
            workers: self
                .workers
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
            partitions: self.partitions,
            spill_budget: self.spill_budget,
        })
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum Preset {
    /// k=4, T=22, d=0 — the operating point with the best precision
    ScallopsBest,
}

#[derive(Args, Debug, Clone)]
pub struct ParamArgs {
    /// Shingle length (default 3)
    #[arg(long)]
    pub k: Option<usize>,
    /// Neighbor score threshold, inclusive (default 11)
    #[arg(long = "T")]
    pub t: Option<i32>,
    /// Hamming distance threshold (default 0)
    #[arg(long)]
    pub d: Option<u32>,
    /// Named parameter preset; explicit flags override its values
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Substitution matrix override file (NCBI text layout, 20x20 canonical)
    #[arg(long)]
    pub matrix: Option<PathBuf>,
}

impl ParamArgs {
    /// Defaults mirror the classic seeding parameters k=3, T=11; the
    /// `scallops-best` preset selects k=4, T=22, d=0.
    fn resolve(&self) -> Result<SearchParams> {
        let (preset_k, preset_t, preset_d) = match self.preset {
            Some(Preset::ScallopsBest) => (Some(4), Some(22), Some(0)),
            None => (None, None, None),
        };
        SearchParams::new(
            self.k.or(preset_k).unwrap_or(3),
            self.t.or(preset_t).unwrap_or(11),
            self.d.or(preset_d).unwrap_or(0),
        )
    }

    fn load_matrix(&self) -> Result<SubstitutionMatrix> {
        load_matrix(self.matrix.as_deref())
    }
}

fn load_matrix(path: Option<&Path>) -> Result<SubstitutionMatrix> {
    match path {
        None => Ok(SubstitutionMatrix::blosum62()),
        Some(path) => {
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or_else(|| "custom".to_string());
            let text = std::fs::read_to_string(path).map_err(|e| Error::IoPath {
                path: path.to_path_buf(),
                source: e,
            })?;
            SubstitutionMatrix::from_ncbi_text(name, &text)
        }
    }
}

#[derive(Args, Debug)]
pub struct SiggenArgs {
    /// FASTA file or directory of `part-*.fasta` shards
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory for signature shards
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub exec: ExecArgs,
}

#[derive(Args, Debug)]
pub struct SearchArgs {
    /// Query signature file or shard directory
    #[arg(long = "query-sigs")]
    pub query_sigs: PathBuf,
    /// Reference signature file or shard directory
    #[arg(long = "ref-sigs")]
    pub ref_sigs: PathBuf,
    /// Hamming distance threshold
    #[arg(long, default_value_t = 0)]
    pub d: u32,
    /// Output directory for pairs shards
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub exec: ExecArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum PidDenominatorArg {
    /// identities / all alignment columns (gaps included)
    Columns,
    /// identities / residue-residue columns
    Residues,
}

impl From<PidDenominatorArg> for PidDenominator {
    fn from(value: PidDenominatorArg) -> Self {
        match value {
            PidDenominatorArg::Columns => PidDenominator::Columns,
            PidDenominatorArg::Residues => PidDenominator::ResiduePairs,
        }
    }
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Pairs TSV file or shard directory (tool output or an external list)
    #[arg(long)]
    pub pairs: PathBuf,
    /// FASTA with the query sequences
    #[arg(long = "query-fasta")]
    pub query_fasta: PathBuf,
    /// FASTA with the reference sequences
    #[arg(long = "ref-fasta")]
    pub ref_fasta: PathBuf,
    /// Optional second pair list; evaluation is restricted to pairs in both
    #[arg(long)]
    pub intersect: Option<PathBuf>,
    /// Output directory for the PID report
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long = "gap-open", default_value_t = 11)]
    pub gap_open: i32,
    #[arg(long = "gap-extend", default_value_t = 1)]
    pub gap_extend: i32,
    #[arg(long = "pid-denominator", value_enum, default_value = "columns")]
    pub pid_denominator: PidDenominatorArg,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long = "query-fasta")]
    pub query_fasta: PathBuf,
    #[arg(long = "ref-fasta")]
    pub ref_fasta: PathBuf,
    /// Shingle lengths, comma separated
    #[arg(long, value_delimiter = ',', default_value = "3")]
    pub k: Vec<usize>,
    /// Score thresholds, comma separated
    #[arg(long = "T", value_delimiter = ',', default_value = "11")]
    pub t: Vec<i32>,
    /// Hamming distances, comma separated
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub d: Vec<u32>,
    /// Output directory (report.jsonl plus per-point work files)
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    #[arg(long = "gap-open", default_value_t = 11)]
    pub gap_open: i32,
    #[arg(long = "gap-extend", default_value_t = 1)]
    pub gap_extend: i32,
    #[command(flatten)]
    pub exec: ExecArgs,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Synthetic corpus size (number of sequences)
    #[arg(long, default_value_t = 50_000)]
    pub size: usize,
    /// Sequence length range
    #[arg(long = "min-len", default_value_t = 20)]
    pub min_len: usize,
    #[arg(long = "max-len", default_value_t = 60)]
    pub max_len: usize,
    /// Worker counts to time, comma separated
    #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
    pub workers: Vec<usize>,
    /// Corpus seed
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output directory (bench.csv plus job outputs)
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value_t = 4)]
    pub partitions: usize,
    #[arg(long = "spill-budget", default_value_t = 256 * 1024 * 1024)]
    pub spill_budget: usize,
}

/// A command failure carrying its exit code: 2 for usage/input problems,
/// 3 for execution failures.
#[derive(Debug)]
pub struct CliFailure {
    pub code: i32,
    pub error: Error,
}

impl CliFailure {
    fn input(error: Error) -> Self {
        Self { code: 2, error }
    }

    fn exec(error: Error) -> Self {
        Self { code: 3, error }
    }
}

type CmdResult = std::result::Result<(), CliFailure>;

/// Parses arguments and runs the selected command, returning the process
/// exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(failure) => {
            eprintln!("error: {}", failure.error);
            failure.code
        }
    }
}

fn dispatch(command: Command) -> CmdResult {
    match command {
        Command::Siggen(args) => cmd_siggen(args),
        Command::Search(args) => cmd_search(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Bench(args) => cmd_bench(args),
    }
}

/// The resolved configuration of a run, serialized into the metadata
/// sidecar so the run can be reproduced exactly.
#[derive(Debug, serde::Serialize)]
struct RunConfig {
    command: &'static str,
    inputs: Vec<PathBuf>,
    out: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    params: Option<SearchParams>,
    matrix: String,
    workers: usize,
    partitions: usize,
    spill_budget: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    align: Option<AlignParams>,
}

fn conventions() -> serde_json::Value {
    serde_json::json!({
        "threshold_convention": "neighbor words kept when score >= T (inclusive)",
        "normalization": "residues uppercased; X, B, Z, U, O, J, '*', '-' stripped and counted",
        "bit_order": "bit i of hashes and signatures is the i-th least significant bit",
        "zero_signature": "featureless sequences get signature 0 and are skipped by search",
    })
}

fn write_metadata(out_dir: &Path, value: &serde_json::Value) -> Result<()> {
    let file = File::create(out_dir.join("metadata.json"))?;
    serde_json::to_writer_pretty(BufWriter::new(file), value)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    Ok(())
}

fn prepare_out_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::IoPath {
        path: out.to_path_buf(),
        source: e,
    })
}

fn cmd_siggen(args: SiggenArgs) -> CmdResult {
    let params = args.params.resolve().map_err(CliFailure::input)?;
    let matrix = args.params.load_matrix().map_err(CliFailure::input)?;
    let (set, warnings) =
        fasta::read_input(&args.input, Role::Query).map_err(CliFailure::input)?;
    let exec = args.exec.resolve().map_err(CliFailure::input)?;
    prepare_out_dir(&args.out).map_err(CliFailure::input)?;

    let report = pipeline::signature_generator_job(&set, &params, &matrix, &exec, &args.out)
        .map_err(CliFailure::exec)?;

    let config = RunConfig {
        command: "siggen",
        inputs: set.sources.clone(),
        out: args.out.clone(),
        params: Some(params),
        matrix: matrix.name().to_string(),
        workers: exec.workers,
        partitions: exec.partitions,
        spill_budget: exec.spill_budget,
        seed: None,
        align: None,
    };
    let metadata = serde_json::json!({
        "tool": "scallops",
        "config": config,
        "input": {
            "records": set.len(),
            "total_residues": set.total_residues(),
            "stripped_residues": warnings.stripped_residues,
            "rejected_empty_records": warnings.rejected_empty_records,
        },
        "params_fingerprint": ParamsFingerprint::new(&params, &matrix).to_string(),
        "job": report.stats,
        "zero_signatures": report.zero_signatures,
        "conventions": conventions(),
    });
    write_metadata(&args.out, &metadata).map_err(CliFailure::exec)?;

    println!(
        "siggen: {} records ({} zero signatures, {} stripped residues) -> {}",
        report.records,
        report.zero_signatures,
        warnings.stripped_residues,
        args.out.display()
    );
    Ok(())
}

fn cmd_search(args: SearchArgs) -> CmdResult {
    let query = pipeline::load_signature_set(&args.query_sigs, Role::Query)
        .map_err(CliFailure::input)?;
    let reference = pipeline::load_signature_set(&args.ref_sigs, Role::Reference)
        .map_err(CliFailure::input)?;
    pipeline::ensure_compatible(&query.params, &reference.params).map_err(CliFailure::input)?;
    if args.d > 32 {
        return Err(CliFailure::input(Error::Params(format!(
            "d must be within 0..=32, got {}",
            args.d
        ))));
    }
    let exec = args.exec.resolve().map_err(CliFailure::input)?;
    prepare_out_dir(&args.out).map_err(CliFailure::input)?;

    let report = pipeline::search_job(&query, &reference, args.d, &exec, &args.out)
        .map_err(CliFailure::exec)?;

    let config = RunConfig {
        command: "search",
        inputs: vec![args.query_sigs.clone(), args.ref_sigs.clone()],
        out: args.out.clone(),
        params: None,
        matrix: query.params.matrix.clone(),
        workers: exec.workers,
        partitions: exec.partitions,
        spill_budget: exec.spill_budget,
        seed: None,
        align: None,
    };
    let metadata = serde_json::json!({
        "tool": "scallops",
        "config": config,
        "d": args.d,
        "params_fingerprint": query.params.to_string(),
        "input": {
            "query_records": report.query_records,
            "reference_records": report.reference_records,
            "zero_query_skipped": report.zero_query_skipped,
            "zero_reference_skipped": report.zero_reference_skipped,
        },
        "job": report.stats,
        "pairs": report.pairs,
        "conventions": conventions(),
    });
    write_metadata(&args.out, &metadata).map_err(CliFailure::exec)?;

    println!(
        "search: {} pairs at d={} ({}+{} zero signatures skipped) -> {}",
        report.pairs,
        args.d,
        report.zero_query_skipped,
        report.zero_reference_skipped,
        args.out.display()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> CmdResult {
    let mut pairs = pipeline::load_pairs(&args.pairs).map_err(CliFailure::input)?;
    let mut intersected: Option<usize> = None;
    if let Some(other_path) = &args.intersect {
        let other = pipeline::load_pairs(other_path).map_err(CliFailure::input)?;
        let ours: std::collections::BTreeSet<_> = pairs.into_iter().collect();
        let theirs: std::collections::BTreeSet<_> = other.into_iter().collect();
        pairs = eval::intersection_pairs(&ours, &theirs).into_iter().collect();
        intersected = Some(pairs.len());
    }
    let (query, q_warn) =
        fasta::read_input(&args.query_fasta, Role::Query).map_err(CliFailure::input)?;
    let (reference, r_warn) =
        fasta::read_input(&args.ref_fasta, Role::Reference).map_err(CliFailure::input)?;
    let matrix = SubstitutionMatrix::blosum62();
    let align_params = AlignParams {
        gap_open: args.gap_open,
        gap_extend: args.gap_extend,
        pid_denominator: args.pid_denominator.into(),
        ..AlignParams::default()
    };
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    prepare_out_dir(&args.out).map_err(CliFailure::input)?;

    let pids = eval::align_pairs(&pairs, &query, &reference, &matrix, &align_params, workers);
    let reliable: Vec<f64> = pids.iter().filter(|p| p.reliable).map(|p| p.pid).collect();
    let summary = eval::quartiles(&reliable);

    (|| -> Result<()> {
        let mut tsv = BufWriter::new(File::create(args.out.join("pids.tsv"))?);
        writeln!(tsv, "#query_id\treference_id\tscore\tpid\tcolumns\treliable")?;
        for p in &pids {
            writeln!(
                tsv,
                "{}\t{}\t{}\t{:.4}\t{}\t{}",
                p.query_id, p.reference_id, p.score, p.pid, p.columns, p.reliable
            )?;
        }
        tsv.flush()?;

        let report = serde_json::json!({
            "pairs_input": pairs.len(),
            "intersection_pairs": intersected,
            "aligned": pids.len(),
            "unreliable": pids.iter().filter(|p| !p.reliable).count(),
            "quartiles": summary,
            "gap_open": args.gap_open,
            "gap_extend": args.gap_extend,
            "pid_denominator": align_params.pid_denominator,
        });
        let mut jsonl = BufWriter::new(File::create(args.out.join("report.jsonl"))?);
        serde_json::to_writer(&mut jsonl, &report)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        writeln!(jsonl)?;
        jsonl.flush()?;
        Ok(())
    })()
    .map_err(CliFailure::exec)?;

    let config = RunConfig {
        command: "eval",
        inputs: vec![
            args.pairs.clone(),
            args.query_fasta.clone(),
            args.ref_fasta.clone(),
        ],
        out: args.out.clone(),
        params: None,
        matrix: matrix.name().to_string(),
        workers,
        partitions: 1,
        spill_budget: 0,
        seed: None,
        align: Some(align_params),
    };
    let metadata = serde_json::json!({
        "tool": "scallops",
        "config": config,
        "input": {
            "pairs": pairs.len(),
            "query_warnings": q_warn,
            "reference_warnings": r_warn,
        },
        "conventions": conventions(),
    });
    write_metadata(&args.out, &metadata).map_err(CliFailure::exec)?;

    match summary {
        Some(s) => println!(
            "eval: {} pairs aligned, median PID {:.2} (q1 {:.2}, q3 {:.2}) -> {}",
            pids.len(),
            s.q2,
            s.q1,
            s.q3,
            args.out.display()
        ),
        None => println!(
            "eval: {} pairs aligned, no reliable alignments -> {}",
            pids.len(),
            args.out.display()
        ),
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> CmdResult {
    let matrix = load_matrix(args.matrix.as_deref()).map_err(CliFailure::input)?;
    let (query, _) =
        fasta::read_input(&args.query_fasta, Role::Query).map_err(CliFailure::input)?;
    let (reference, _) =
        fasta::read_input(&args.ref_fasta, Role::Reference).map_err(CliFailure::input)?;

    let mut grid = Vec::new();
    for &k in &args.k {
        for &t in &args.t {
            for &d in &args.d {
                // validate every point up front
                SearchParams::new(k, t, d).map_err(CliFailure::input)?;
                grid.push(SweepPoint { k, t, d });
            }
        }
    }
    if grid.is_empty() {
        return Err(CliFailure::input(Error::Params(
            "sweep grid is empty".into(),
        )));
    }

    let align_params = AlignParams {
        gap_open: args.gap_open,
        gap_extend: args.gap_extend,
        ..AlignParams::default()
    };
    let exec = args.exec.resolve().map_err(CliFailure::input)?;
    prepare_out_dir(&args.out).map_err(CliFailure::input)?;

    let rows = eval::sweep(
        &query,
        &reference,
        &grid,
        &matrix,
        &align_params,
        &exec,
        &args.out.join("work"),
    )
    .map_err(CliFailure::exec)?;

    (|| -> Result<()> {
        let mut jsonl = BufWriter::new(File::create(args.out.join("report.jsonl"))?);
        for row in &rows {
            serde_json::to_writer(&mut jsonl, row)
                .map_err(|e| Error::Io(std::io::Error::other(e)))?;
            writeln!(jsonl)?;
        }
        jsonl.flush()?;
        Ok(())
    })()
    .map_err(CliFailure::exec)?;

    let config = RunConfig {
        command: "sweep",
        inputs: vec![args.query_fasta.clone(), args.ref_fasta.clone()],
        out: args.out.clone(),
        params: None,
        matrix: matrix.name().to_string(),
        workers: exec.workers,
        partitions: exec.partitions,
        spill_budget: exec.spill_budget,
        seed: None,
        align: Some(align_params),
    };
    let metadata = serde_json::json!({
        "tool": "scallops",
        "config": config,
        "grid": grid,
        "rows": rows.len(),
        "failed_points": rows.iter().filter(|r| r.error.is_some()).count(),
        "conventions": conventions(),
    });
    write_metadata(&args.out, &metadata).map_err(CliFailure::exec)?;

    println!(
        "sweep: {} grid points -> {}",
        rows.len(),
        args.out.join("report.jsonl").display()
    );
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> CmdResult {
    if args.min_len == 0 || args.min_len > args.max_len {
        return Err(CliFailure::input(Error::Params(format!(
            "invalid length range {}..={}",
            args.min_len, args.max_len
        ))));
    }
    if args.workers.is_empty() {
        return Err(CliFailure::input(Error::Params(
            "at least one worker count is required".into(),
        )));
    }
    let params = args.params.resolve().map_err(CliFailure::input)?;
    let matrix = args.params.load_matrix().map_err(CliFailure::input)?;
    prepare_out_dir(&args.out).map_err(CliFailure::input)?;

    let mut rng = synth::rng_from_seed(args.seed);
    let records = synth::uniform_corpus(args.size, args.min_len..=args.max_len, &mut rng);
    let checksum = synth::corpus_checksum(&records);
    let set = fasta::SequenceSet::new(Role::Query, records);

    let mut csv_rows: Vec<(String, usize, f64, u64)> = Vec::new();
    for &workers in &args.workers {
        if workers == 0 {
            return Err(CliFailure::input(Error::Params(
                "workers must be >= 1".into(),
            )));
        }
        let exec = ExecConfig {
            workers,
            partitions: args.partitions,
            spill_budget: args.spill_budget,
        };
        let run_dir = args.out.join(format!("w{workers}"));
        let sigs_dir = run_dir.join("sigs");
        let started = Instant::now();
        let report = pipeline::signature_generator_job(&set, &params, &matrix, &exec, &sigs_dir)
            .map_err(CliFailure::exec)?;
        let siggen_secs = started.elapsed().as_secs_f64();
        println!(
            "bench siggen: workers={workers} {siggen_secs:.3}s ({} records)",
            report.records
        );
        csv_rows.push(("siggen".into(), workers, siggen_secs, report.records));

        let query =
            pipeline::load_signature_set(&sigs_dir, Role::Query).map_err(CliFailure::exec)?;
        let mut reference = query.clone();
        reference.role = Role::Reference;
        for record in &mut reference.records {
            record.role = Role::Reference;
        }
        let pairs_dir = run_dir.join("pairs");
        let started = Instant::now();
        let search = pipeline::search_job(&query, &reference, params.d, &exec, &pairs_dir)
            .map_err(CliFailure::exec)?;
        let search_secs = started.elapsed().as_secs_f64();
        println!(
            "bench search: workers={workers} {search_secs:.3}s ({} pairs at d={})",
            search.pairs, params.d
        );
        csv_rows.push(("search".into(), workers, search_secs, search.pairs));
    }

    (|| -> Result<()> {
        let mut csv = BufWriter::new(File::create(args.out.join("bench.csv"))?);
        writeln!(csv, "job,workers,seconds,records")?;
        for (job, workers, seconds, n) in &csv_rows {
            writeln!(csv, "{job},{workers},{seconds:.6},{n}")?;
        }
        csv.flush()?;
        Ok(())
    })()
    .map_err(CliFailure::exec)?;

    let config = RunConfig {
        command: "bench",
        inputs: vec![],
        out: args.out.clone(),
        params: Some(params),
        matrix: matrix.name().to_string(),
        workers: *args.workers.iter().max().expect("non-empty"),
        partitions: args.partitions,
        spill_budget: args.spill_budget,
        seed: Some(args.seed),
        align: None,
    };
    let metadata = serde_json::json!({
        "tool": "scallops",
        "config": config,
        "corpus": {
            "size": args.size,
            "min_len": args.min_len,
            "max_len": args.max_len,
            "seed": args.seed,
            "checksum": format!("{checksum:016x}"),
        },
        "worker_counts": args.workers,
        "conventions": conventions(),
    });
    write_metadata(&args.out, &metadata).map_err(CliFailure::exec)?;

    println!(
        "bench: corpus checksum {checksum:016x} -> {}",
        args.out.join("bench.csv").display()
    );
    Ok(())
}
