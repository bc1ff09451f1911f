//! Embedded, scale-agnostic map-shuffle-reduce executor.
//!
//! Input shards are mapped in parallel worker threads; intermediate pairs
//! are routed to `stable_hash(key) % partitions`, grouped by an external
//! sort (sorted runs spilled to disk past the budget, k-way merged), and
//! reduced once per distinct key. Each partition's output records are
//! sorted by (key, value) bytes before writing, so result files are
//! byte-identical for any worker count, scheduling order, or spill
//! pattern. "Nodes" are modeled as worker threads in one process.

mod group;

pub use group::{external_group, ExternalGroups, GroupStats};

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use crate::{Error, Result};

/// A keyed record. Keys compare bytewise; equal keys meet in one reduce
/// call. Output keys and values must be tab- and newline-free since the
/// sink format is TSV.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct KeyValue {
    pub key: Vec<u8>,
    pub value: Vec<u8>,
}

impl KeyValue {
    pub fn new(key: impl Into<Vec<u8>>, value: impl Into<Vec<u8>>) -> Self {
        Self {
            key: key.into(),
            value: value.into(),
        }
    }
}

pub type MapFn = Arc<dyn Fn(&KeyValue) -> std::result::Result<Vec<KeyValue>, String> + Send + Sync>;
pub type ReduceFn =
    Arc<dyn Fn(&[u8], &[Vec<u8>]) -> std::result::Result<Vec<KeyValue>, String> + Send + Sync>;

/// Pass-through reduce: emits (key, value) for every grouped value.
pub fn identity_reducer() -> ReduceFn {
    Arc::new(|key, values| {
        Ok(values
            .iter()
            .map(|v| KeyValue::new(key.to_vec(), v.clone()))
            .collect())
    })
}

/// A job description: pure map and reduce functions plus execution shape.
#[derive(Clone)]
pub struct JobSpec {
    pub mapper: MapFn,
    pub reducer: ReduceFn,
    /// Number of output partitions (one `part-NNNNN.tsv` each).
    pub partitions: usize,
    /// Worker threads for the map and reduce phases.
    pub workers: usize,
    /// Max in-memory intermediate bytes per map task before spilling.
    pub spill_budget: usize,
    /// Optional comment line written at the top of every part file.
    pub output_header: Option<String>,
}

/// Counters and timings for one job run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct JobStats {
    pub map_records_in: u64,
    pub map_records_out: u64,
    /// Records entering reduce across all partitions; the shuffle conserves
    /// records, so this always equals `map_records_out`.
    pub reduce_records_in: u64,
    pub reduce_groups: u64,
    pub output_records: u64,
    pub spill_files: u64,
    pub map_wall_ms: u64,
    pub reduce_wall_ms: u64,
}

/// FNV-1a/64 — the fixed, process-independent byte hash used for
/// partition routing (no per-run randomization, so partition files are
/// reproducible).
pub fn stable_hash64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Spill directory root: `SCALLOPS_TMPDIR` if set, else the system temp dir.
pub fn resolve_tmp_dir() -> PathBuf {
    match std::env::var_os("SCALLOPS_TMPDIR") {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => std::env::temp_dir(),
    }
}

pub fn part_file_name(partition: usize) -> String {
    format!("part-{partition:05}.tsv")
}

pub const SUCCESS_MARKER: &str = "_SUCCESS";

/// Runs a job over in-memory input shards, writing one sorted TSV per
/// partition plus a `_SUCCESS` marker. Every input record is mapped
/// exactly once; reduce sees each distinct key once with its values in
/// (map-shard, record) order; outputs are bit-identical for any
/// `workers >= 1`. On failure no `_SUCCESS` marker remains.
pub fn run_job(spec: &JobSpec, input: &[Vec<KeyValue>], out_dir: &Path) -> Result<JobStats> {
    if spec.partitions == 0 {
        return Err(Error::Params("partitions must be >= 1".into()));
    }
    if spec.workers == 0 {
        return Err(Error::Params("workers must be >= 1".into()));
    }

    std::fs::create_dir_all(out_dir)?;
    let marker = out_dir.join(SUCCESS_MARKER);
    if marker.exists() {
        std::fs::remove_file(&marker)?;
    }
    for p in 0..spec.partitions {
        let stale = out_dir.join(part_file_name(p));
        if stale.exists() {
            std::fs::remove_file(&stale)?;
        }
    }

    let spill_dir = tempfile::Builder::new()
        .prefix("scallops-job-")
        .tempdir_in(resolve_tmp_dir())?;

    let map_records_in = AtomicU64::new(0);
    let map_records_out = AtomicU64::new(0);
    let spill_files = AtomicU64::new(0);

    let partition_runs: Vec<Mutex<Vec<group::RunSource>>> =
        (0..spec.partitions).map(|_| Mutex::new(Vec::new())).collect();

    let map_started = Instant::now();
    parallel_tasks(spec.workers, input.len(), |shard_idx| {
        let shard = &input[shard_idx];
        let mut collectors: Vec<group::RunCollector> = (0..spec.partitions)
            .map(|p| {
                group::RunCollector::new(
                    usize::MAX, // budget tracked across all partitions of the task
                    spill_dir.path(),
                    format!("shard{shard_idx:05}-part{p:05}"),
                )
            })
            .collect();
        let mut seq = 0u64;
        let mut task_mem = 0usize;
        for (record_idx, kv) in shard.iter().enumerate() {
            map_records_in.fetch_add(1, Ordering::Relaxed);
            let outs = (spec.mapper)(kv).map_err(|message| Error::MapFailed {
                shard: shard_idx,
                record: record_idx as u64,
                message,
            })?;
            for out in outs {
                map_records_out.fetch_add(1, Ordering::Relaxed);
                let partition = (stable_hash64(&out.key) % spec.partitions as u64) as usize;
                let rec = group::Rec {
                    key: out.key,
                    value: out.value,
                    shard: shard_idx as u32,
                    seq,
                };
                seq += 1;
                task_mem += rec.mem_cost();
                collectors[partition].push(rec)?;
                if task_mem > spec.spill_budget {
                    for collector in &mut collectors {
                        collector.spill()?;
                    }
                    task_mem = 0;
                }
            }
        }
        for (p, collector) in collectors.into_iter().enumerate() {
            let (runs, spilled) = collector.finish();
            spill_files.fetch_add(spilled as u64, Ordering::Relaxed);
            if !runs.is_empty() {
                partition_runs[p].lock().expect("not poisoned").extend(runs);
            }
        }
        Ok(())
    })?;
    let map_wall_ms = map_started.elapsed().as_millis() as u64;

    let reduce_records_in = AtomicU64::new(0);
    let reduce_groups = AtomicU64::new(0);
    let output_records = AtomicU64::new(0);

    let reduce_started = Instant::now();
    parallel_tasks(spec.workers, spec.partitions, |partition| {
        let runs = std::mem::take(
            &mut *partition_runs[partition].lock().expect("not poisoned"),
        );
        let mut groups = group::GroupIter::new(runs)?;
        let mut outputs: Vec<KeyValue> = Vec::new();
        while let Some((key, values)) = groups.next_group()? {
            reduce_records_in.fetch_add(values.len() as u64, Ordering::Relaxed);
            reduce_groups.fetch_add(1, Ordering::Relaxed);
            let outs = (spec.reducer)(&key, &values).map_err(|message| Error::ReduceFailed {
                partition,
                message,
            })?;
            outputs.extend(outs);
        }
        outputs.sort_unstable();
        output_records.fetch_add(outputs.len() as u64, Ordering::Relaxed);

        let path = out_dir.join(part_file_name(partition));
        let mut out = BufWriter::new(File::create(&path)?);
        if let Some(header) = &spec.output_header {
            writeln!(out, "{header}")?;
        }
        for kv in &outputs {
            if kv.key.iter().chain(&kv.value).any(|b| *b == b'\t' || *b == b'\n') {
                return Err(Error::ReduceFailed {
                    partition,
                    message: "output record contains tab or newline".into(),
                });
            }
            out.write_all(&kv.key)?;
            out.write_all(b"\t")?;
            out.write_all(&kv.value)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    })?;
    let reduce_wall_ms = reduce_started.elapsed().as_millis() as u64;

    File::create(&marker)?;

    Ok(JobStats {
        map_records_in: map_records_in.into_inner(),
        map_records_out: map_records_out.into_inner(),
        reduce_records_in: reduce_records_in.into_inner(),
        reduce_groups: reduce_groups.into_inner(),
        output_records: output_records.into_inner(),
        spill_files: spill_files.into_inner(),
        map_wall_ms,
        reduce_wall_ms,
    })
}

/// Pulls task indices off a shared counter with `workers` threads. On
/// failure the error with the lowest task index wins and remaining tasks
/// are abandoned.
fn parallel_tasks<F>(workers: usize, tasks: usize, f: F) -> Result<()>
where
    F: Fn(usize) -> Result<()> + Sync,
{
    if tasks == 0 {
        return Ok(());
    }
    let workers = workers.min(tasks).max(1);
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let failure: Mutex<Option<(usize, Error)>> = Mutex::new(None);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                let task = next.fetch_add(1, Ordering::Relaxed);
                if task >= tasks {
                    break;
                }
                if let Err(e) = f(task) {
                    let mut slot = failure.lock().expect("not poisoned");
                    let replace = match &*slot {
                        Some((prev, _)) => task < *prev,
                        None => true,
                    };
                    if replace {
                        *slot = Some((task, e));
                    }
                    stop.store(true, Ordering::Relaxed);
                    break;
                }
            });
        }
    });

    match failure.into_inner().expect("not poisoned") {
        Some((_, e)) => Err(e),
        None => Ok(()),
    }
}
