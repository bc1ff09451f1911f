//! The two search jobs wired onto the engine: a map-only signature
//! generator (identity reduce) and the flip-join signature processor.
//!
//! References publish their signature plus every flip within Hamming
//! distance `d`; queries publish only their own signature. Equal keys meet
//! in one reduce call, which emits the query x reference cross product.
//! A reference emits each distinct key at most once and queries emit only
//! their own signature, so no candidate pair can be produced twice.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::engine::{self, identity_reducer, JobSpec, JobStats, KeyValue};
use crate::fasta::{Role, SequenceSet};
use crate::lsh::{flip_set, gen_signature, Signature};
use crate::scoring::{SearchParams, SubstitutionMatrix};
use crate::{Error, Result};

pub const SIGNATURE_FORMAT_VERSION: u32 = 1;

/// The (k, T, matrix) triple a signature file was produced under, plus a
/// format version. Signature sets may only be joined when their
/// fingerprints agree; mixing incompatible sets is refused up front.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ParamsFingerprint {
    pub k: usize,
    pub t: i32,
    pub matrix: String,
    pub version: u32,
}

impl ParamsFingerprint {
    pub fn new(params: &SearchParams, matrix: &SubstitutionMatrix) -> Self {
        Self {
            k: params.k,
            t: params.t,
            matrix: matrix.name().to_string(),
            version: SIGNATURE_FORMAT_VERSION,
        }
    }

    /// The comment line carried at the top of every signature shard.
    pub fn header_line(&self) -> String {
        format!(
            "#params k={} T={} matrix={} v={}",
            self.k, self.t, self.matrix, self.version
        )
    }

    pub fn parse_header(line: &str) -> Option<Self> {
        let rest = line.strip_prefix("#params ")?;
        let mut k = None;
        let mut t = None;
        let mut matrix = None;
        let mut version = None;
        for token in rest.split_whitespace() {
            let (name, value) = token.split_once('=')?;
            match name {
                "k" => k = value.parse().ok(),
                "T" => t = value.parse().ok(),
                "matrix" => matrix = Some(value.to_string()),
                "v" => version = value.parse().ok(),
                _ => return None,
            }
        }
        Some(Self {
            k: k?,
            t: t?,
            matrix: matrix?,
            version: version?,
        })
    }
}

impl std::fmt::Display for ParamsFingerprint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "k={} T={} matrix={} v={}",
            self.k, self.t, self.matrix, self.version
        )
    }
}

pub fn ensure_compatible(a: &ParamsFingerprint, b: &ParamsFingerprint) -> Result<()> {
    if a != b {
        return Err(Error::ParamsMismatch {
            left: a.to_string(),
            right: b.to_string(),
        });
    }
    Ok(())
}

/// One line of a signature file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignatureRecord {
    pub id: String,
    pub sig: Signature,
    pub role: Role,
}

/// A loaded signature file set with its parameter fingerprint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignatureSet {
    pub role: Role,
    pub params: ParamsFingerprint,
    pub records: Vec<SignatureRecord>,
}

impl SignatureSet {
    pub fn zero_count(&self) -> u64 {
        self.records.iter().filter(|r| r.sig.is_zero()).count() as u64
    }
}

/// Engine execution shape shared by both jobs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ExecConfig {
    pub workers: usize,
    pub partitions: usize,
    pub spill_budget: usize,
}

impl Default for ExecConfig {
    fn default() -> Self {
        Self {
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            partitions: 4,
            spill_budget: 256 * 1024 * 1024,
        }
    }
}

/// Wraps a sequence ID with the query/reference marker that steers the
/// processor reduce.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedId {
    pub id: String,
    pub is_query: bool,
}

impl TaggedId {
    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(1 + self.id.len());
        out.push(if self.is_query { b'q' } else { b'r' });
        out.extend_from_slice(self.id.as_bytes());
        out
    }

    fn decode(bytes: &[u8]) -> std::result::Result<Self, String> {
        let (tag, id) = bytes
            .split_first()
            .ok_or_else(|| "empty tagged id".to_string())?;
        let is_query = match tag {
            b'q' => true,
            b'r' => false,
            other => return Err(format!("bad role tag {other:#x}")),
        };
        Ok(Self {
            id: String::from_utf8(id.to_vec()).map_err(|e| e.to_string())?,
            is_query,
        })
    }
}

/// A (query, reference) candidate whose signatures matched within `d`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CandidatePair {
    pub query_id: String,
    pub reference_id: String,
}

impl CandidatePair {
    pub fn new(query_id: impl Into<String>, reference_id: impl Into<String>) -> Self {
        Self {
            query_id: query_id.into(),
            reference_id: reference_id.into(),
        }
    }
}

/// Signatures go onto the wire as 4-byte big-endian keys so bytewise key
/// comparison preserves numeric order.
fn signature_key(sig: Signature) -> Vec<u8> {
    sig.0.to_be_bytes().to_vec()
}

/// The processor map function. Queries emit their signature key only;
/// references additionally emit every flip within distance 1..=d, so a
/// query key collides with a reference key exactly when the two
/// signatures lie within Hamming distance d.
///
/// Zero signatures are filtered (with a counted warning) before mapping;
/// feeding one here is a programming error.
pub fn processor_map(record: &SignatureRecord, d: u32) -> Vec<KeyValue> {
    debug_assert!(!record.sig.is_zero(), "zero signatures are filtered upstream");
    let tagged = TaggedId {
        id: record.id.clone(),
        is_query: record.role == Role::Query,
    }
    .encode();
    match record.role {
        Role::Query => vec![KeyValue::new(signature_key(record.sig), tagged)],
        Role::Reference => {
            let flips = flip_set(record.sig, d);
            let mut out = Vec::with_capacity(1 + flips.len());
            out.push(KeyValue::new(signature_key(record.sig), tagged.clone()));
            for flip in flips {
                out.push(KeyValue::new(signature_key(flip), tagged.clone()));
            }
            out
        }
    }
}

/// The processor reduce function: splits the group into queries and
/// references and emits the full cross product, empty when either side is.
pub fn processor_reduce(values: &[TaggedId]) -> Vec<CandidatePair> {
    let queries: Vec<&TaggedId> = values.iter().filter(|v| v.is_query).collect();
    let references: Vec<&TaggedId> = values.iter().filter(|v| !v.is_query).collect();
    let mut out = Vec::with_capacity(queries.len() * references.len());
    for q in &queries {
        for r in &references {
            out.push(CandidatePair::new(q.id.clone(), r.id.clone()));
        }
    }
    out
}

/// Report from a signature-generation run.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SigGenReport {
    pub stats: JobStats,
    pub records: u64,
    /// Sequences that produced the all-zero degenerate signature.
    pub zero_signatures: u64,
}

fn split_evenly(records: Vec<KeyValue>, n: usize) -> Vec<Vec<KeyValue>> {
    let n = n.max(1);
    let total = records.len();
    let base = total / n;
    let remainder = total % n;
    let mut shards = Vec::with_capacity(n);
    let mut iter = records.into_iter();
    for i in 0..n {
        let size = base + usize::from(i < remainder);
        shards.push(iter.by_ref().take(size).collect());
    }
    shards
}

/// Map-only job computing one signature per record (identity reduce).
/// Output shards follow the signature TSV format, each headed by the
/// params fingerprint line and sorted by id; the record count is
/// preserved — zero signatures are written too, and only skipped later by
/// the processor.
pub fn signature_generator_job(
    set: &SequenceSet,
    params: &SearchParams,
    matrix: &SubstitutionMatrix,
    exec: &ExecConfig,
    out_dir: &Path,
) -> Result<SigGenReport> {
    let fingerprint = ParamsFingerprint::new(params, matrix);
    let input: Vec<KeyValue> = set
        .records
        .iter()
        .map(|r| KeyValue::new(r.id.as_bytes().to_vec(), r.residues.as_bytes().to_vec()))
        .collect();
    let shards = split_evenly(input, exec.workers * 2);

    let zero_signatures = Arc::new(AtomicU64::new(0));
    let mapper = {
        let params = *params;
        let matrix = matrix.clone();
        let zero_signatures = Arc::clone(&zero_signatures);
        move |kv: &KeyValue| -> std::result::Result<Vec<KeyValue>, String> {
            let residues = std::str::from_utf8(&kv.value).map_err(|e| e.to_string())?;
            let sig = gen_signature(residues, &params, &matrix);
            if sig.is_zero() {
                zero_signatures.fetch_add(1, Ordering::Relaxed);
            }
            Ok(vec![KeyValue::new(
                kv.key.clone(),
                sig.to_string().into_bytes(),
            )])
        }
    };

    let spec = JobSpec {
        mapper: Arc::new(mapper),
        reducer: identity_reducer(),
        partitions: exec.partitions,
        workers: exec.workers,
        spill_budget: exec.spill_budget,
        output_header: Some(fingerprint.header_line()),
    };
    let stats = engine::run_job(&spec, &shards, out_dir)?;
    Ok(SigGenReport {
        stats,
        records: stats.map_records_in,
        zero_signatures: zero_signatures.load(Ordering::Relaxed),
    })
}

fn tsv_shard_files(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_dir() {
        let mut files = Vec::new();
        for entry in std::fs::read_dir(path)? {
            let p = entry?.path();
            let name = p.file_name().map(|n| n.to_string_lossy().to_string());
            let Some(name) = name else { continue };
            if p.is_file() && name.starts_with("part-") && name.ends_with(".tsv") {
                files.push(p);
            }
        }
        files.sort();
        if files.is_empty() {
            return Err(Error::SignatureFile {
                path: path.to_path_buf(),
                message: "directory holds no part-*.tsv shards".into(),
            });
        }
        Ok(files)
    } else {
        Ok(vec![path.to_path_buf()])
    }
}

/// Loads a signature file or a directory of shards, checking that every
/// shard carries the same params fingerprint and that ids are unique.
pub fn load_signature_set(path: &Path, role: Role) -> Result<SignatureSet> {
    let files = tsv_shard_files(path)?;
    let mut params: Option<ParamsFingerprint> = None;
    let mut records = Vec::new();
    let mut seen = std::collections::HashSet::new();

    for file in &files {
        let bad = |message: String| Error::SignatureFile {
            path: file.clone(),
            message,
        };
        let handle = File::open(file).map_err(|e| bad(e.to_string()))?;
        let mut saw_header = false;
        for line in BufReader::new(handle).lines() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(fp) = ParamsFingerprint::parse_header(&line) {
                    saw_header = true;
                    match &params {
                        None => params = Some(fp),
                        Some(existing) => ensure_compatible(existing, &fp)?,
                    }
                } else if rest.starts_with("params") {
                    return Err(bad(format!("unparseable params header {line:?}")));
                }
                continue;
            }
            let (id, sig) = line
                .split_once('\t')
                .ok_or_else(|| bad(format!("expected <id>\\t<signature>, got {line:?}")))?;
            let sig: u32 = sig
                .parse()
                .map_err(|_| bad(format!("bad signature value {sig:?}")))?;
            if id.is_empty() {
                return Err(bad("empty id".into()));
            }
            if !seen.insert(id.to_string()) {
                return Err(Error::DuplicateId(id.to_string()));
            }
            records.push(SignatureRecord {
                id: id.to_string(),
                sig: Signature(sig),
                role,
            });
        }
        if !saw_header {
            return Err(bad("missing #params header line".into()));
        }
    }

    Ok(SignatureSet {
        role,
        params: params.expect("at least one shard with a header"),
        records,
    })
}

/// Report from a signature-processor (search) run.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SearchReport {
    pub stats: JobStats,
    pub query_records: u64,
    pub reference_records: u64,
    /// Zero-signature records dropped before mapping, per side.
    pub zero_query_skipped: u64,
    pub zero_reference_skipped: u64,
    pub pairs: u64,
}

/// Runs the flip-join over two signature sets, producing sorted pairs
/// shards (`<query_id>\t<reference_id>`). Output pairs are exactly
/// `{(q, r) : sig_q != 0, sig_r != 0, hamming(sig_q, sig_r) <= d}`,
/// deduplicated, each part file sorted by (query_id, reference_id).
pub fn search_job(
    query: &SignatureSet,
    reference: &SignatureSet,
    d: u32,
    exec: &ExecConfig,
    out_dir: &Path,
) -> Result<SearchReport> {
    ensure_compatible(&query.params, &reference.params)?;
    if d > 32 {
        return Err(Error::Params(format!("d must be within 0..=32, got {d}")));
    }

    // input encoding: key = id, value = role byte + 4-byte BE signature
    let encode = |r: &SignatureRecord| {
        let mut value = Vec::with_capacity(5);
        value.push(if r.role == Role::Query { b'q' } else { b'r' });
        value.extend_from_slice(&r.sig.0.to_be_bytes());
        KeyValue::new(r.id.as_bytes().to_vec(), value)
    };
    let zero_query = query.zero_count();
    let zero_reference = reference.zero_count();
    let records: Vec<KeyValue> = query
        .records
        .iter()
        .filter(|r| !r.sig.is_zero())
        .chain(reference.records.iter().filter(|r| !r.sig.is_zero()))
        .map(encode)
        .collect();
    let shards = split_evenly(records, exec.workers * 2);

    let mapper = move |kv: &KeyValue| -> std::result::Result<Vec<KeyValue>, String> {
        let (tag, sig) = kv.value.split_first().ok_or("empty record")?;
        let sig = Signature(u32::from_be_bytes(
            sig.try_into().map_err(|_| "bad signature bytes")?,
        ));
        let record = SignatureRecord {
            id: String::from_utf8(kv.key.clone()).map_err(|e| e.to_string())?,
            sig,
            role: if *tag == b'q' {
                Role::Query
            } else {
                Role::Reference
            },
        };
        Ok(processor_map(&record, d))
    };

    let reducer = |_key: &[u8], values: &[Vec<u8>]| -> std::result::Result<Vec<KeyValue>, String> {
        let tagged: Vec<TaggedId> = values
            .iter()
            .map(|v| TaggedId::decode(v))
            .collect::<std::result::Result<_, String>>()?;
        Ok(processor_reduce(&tagged)
            .into_iter()
            .map(|pair| {
                KeyValue::new(
                    pair.query_id.into_bytes(),
                    pair.reference_id.into_bytes(),
                )
            })
            .collect())
    };

    let spec = JobSpec {
        mapper: Arc::new(mapper),
        reducer: Arc::new(reducer),
        partitions: exec.partitions,
        workers: exec.workers,
        spill_budget: exec.spill_budget,
        output_header: None,
    };
    let stats = engine::run_job(&spec, &shards, out_dir)?;

    Ok(SearchReport {
        stats,
        query_records: query.records.len() as u64,
        reference_records: reference.records.len() as u64,
        zero_query_skipped: zero_query,
        zero_reference_skipped: zero_reference,
        pairs: stats.output_records,
    })
}

/// Loads a pairs file or shard directory into a sorted, deduplicated list.
pub fn load_pairs(path: &Path) -> Result<Vec<CandidatePair>> {
    let files = tsv_shard_files(path).map_err(|e| match e {
        Error::SignatureFile { path, message } => Error::PairsFile { path, message },
        other => other,
    })?;
    let mut pairs = Vec::new();
    for file in &files {
        let handle = File::open(file).map_err(|e| Error::PairsFile {
            path: file.clone(),
            message: e.to_string(),
        })?;
        for line in BufReader::new(handle).lines() {
            let line = line?;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (q, r) = line.split_once('\t').ok_or_else(|| Error::PairsFile {
                path: file.clone(),
                message: format!("expected <query_id>\\t<reference_id>, got {line:?}"),
            })?;
            pairs.push(CandidatePair::new(q, r));
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    Ok(pairs)
}
