//! External grouping: sorted in-memory runs, spill files, and a k-way merge.
//!
//! Records carry their provenance (map-shard index, emission sequence) so
//! that values inside a group always come back in (shard, seq) order no
//! matter how runs were cut or which worker produced them.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::engine::KeyValue;

/// Approximate per-record bookkeeping cost charged against the spill budget.
pub(crate) const REC_OVERHEAD: usize = 48;

/// An intermediate record with provenance used as the sort tiebreaker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Rec {
    pub key: Vec<u8>,
    pub value: Vec<u8>,
    pub shard: u32,
    pub seq: u64,
}

impl Rec {
    pub fn mem_cost(&self) -> usize {
        self.key.len() + self.value.len() + REC_OVERHEAD
    }
}

impl Ord for Rec {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key
            .cmp(&other.key)
            .then(self.shard.cmp(&other.shard))
            .then(self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for Rec {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Writes a sorted run: length-prefixed key/value records plus provenance,
/// little-endian fixed-width header per record.
pub(crate) fn write_run(path: &Path, recs: &[Rec]) -> io::Result<()> {
    debug_assert!(recs.windows(2).all(|w| w[0] <= w[1]), "runs must be sorted");
    let mut out = BufWriter::new(File::create(path)?);
    for rec in recs {
        out.write_all(&(rec.key.len() as u32).to_le_bytes())?;
        out.write_all(&(rec.value.len() as u32).to_le_bytes())?;
        out.write_all(&rec.shard.to_le_bytes())?;
        out.write_all(&rec.seq.to_le_bytes())?;
        out.write_all(&rec.key)?;
        out.write_all(&rec.value)?;
    }
    out.flush()
}

pub(crate) struct DiskRun {
    input: BufReader<File>,
}

impl DiskRun {
    pub fn open(path: &Path) -> io::Result<Self> {
        Ok(Self {
            input: BufReader::new(File::open(path)?),
        })
    }

    fn next_rec(&mut self) -> io::Result<Option<Rec>> {
        let mut header = [0u8; 20];
        match self.input.read_exact(&mut header) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
            Err(e) => return Err(e),
        }
        let key_len = u32::from_le_bytes(header[0..4].try_into().unwrap()) as usize;
        let value_len = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
        let shard = u32::from_le_bytes(header[8..12].try_into().unwrap());
        let seq = u64::from_le_bytes(header[12..20].try_into().unwrap());
        let mut key = vec![0u8; key_len];
        self.input.read_exact(&mut key)?;
        let mut value = vec![0u8; value_len];
        self.input.read_exact(&mut value)?;
        Ok(Some(Rec {
            key,
            value,
            shard,
            seq,
        }))
    }
}

/// One sorted source for the merge: an in-memory run or a spill file.
pub(crate) enum RunSource {
    Mem(Vec<Rec>),
    Disk(PathBuf),
}

enum RunReader {
    Mem(std::vec::IntoIter<Rec>),
    Disk(DiskRun),
}

impl RunReader {
    fn next_rec(&mut self) -> io::Result<Option<Rec>> {
        match self {
            RunReader::Mem(iter) => Ok(iter.next()),
            RunReader::Disk(run) => run.next_rec(),
        }
    }
}

struct HeapItem {
    rec: Rec,
    source: usize,
}

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.rec == other.rec
    }
}
impl Eq for HeapItem {}
impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap, we need the smallest record
        other.rec.cmp(&self.rec)
    }
}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// K-way merge over sorted runs, yielding records in (key, shard, seq) order.
pub(crate) struct MergeIter {
    readers: Vec<RunReader>,
    heap: BinaryHeap<HeapItem>,
}

impl MergeIter {
    pub fn new(sources: Vec<RunSource>) -> io::Result<Self> {
        let mut readers = Vec::with_capacity(sources.len());
        for source in sources {
            readers.push(match source {
                RunSource::Mem(recs) => RunReader::Mem(recs.into_iter()),
                RunSource::Disk(path) => RunReader::Disk(DiskRun::open(&path)?),
            });
        }
        let mut heap = BinaryHeap::with_capacity(readers.len());
        for (source, reader) in readers.iter_mut().enumerate() {
            if let Some(rec) = reader.next_rec()? {
                heap.push(HeapItem { rec, source });
            }
        }
        Ok(Self { readers, heap })
    }

    pub fn next_rec(&mut self) -> io::Result<Option<Rec>> {
        let Some(HeapItem { rec, source }) = self.heap.pop() else {
            return Ok(None);
        };
        if let Some(next) = self.readers[source].next_rec()? {
            self.heap.push(HeapItem { rec: next, source });
        }
        Ok(Some(rec))
    }
}

/// A reduce-side group: the key and its values in provenance order.
pub(crate) type Group = (Vec<u8>, Vec<Vec<u8>>);

/// Streams (key, values) groups off a merge, one group per distinct key.
pub(crate) struct GroupIter {
    merge: MergeIter,
    lookahead: Option<Rec>,
}

impl GroupIter {
    pub fn new(sources: Vec<RunSource>) -> io::Result<Self> {
        let mut merge = MergeIter::new(sources)?;
        let lookahead = merge.next_rec()?;
        Ok(Self { merge, lookahead })
    }

    pub fn next_group(&mut self) -> io::Result<Option<Group>> {
        let Some(first) = self.lookahead.take() else {
            return Ok(None);
        };
        let key = first.key;
        let mut values = vec![first.value];
        loop {
            match self.merge.next_rec()? {
                None => break,
                Some(rec) if rec.key == key => values.push(rec.value),
                Some(rec) => {
                    self.lookahead = Some(rec);
                    break;
                }
            }
        }
        Ok(Some((key, values)))
    }
}

/// Budget-tracked collector that cuts sorted runs, spilling to disk when the
/// in-memory bytes exceed the budget. Used standalone by [`external_group`]
/// and per map task by the job runner.
pub(crate) struct RunCollector {
    buffer: Vec<Rec>,
    mem_bytes: usize,
    budget: usize,
    spill_dir: PathBuf,
    label: String,
    runs: Vec<RunSource>,
    spill_files: usize,
}

impl RunCollector {
    pub fn new(budget: usize, spill_dir: &Path, label: impl Into<String>) -> Self {
        Self {
            buffer: Vec::new(),
            mem_bytes: 0,
            budget,
            spill_dir: spill_dir.to_path_buf(),
            label: label.into(),
            runs: Vec::new(),
            spill_files: 0,
        }
    }

    pub fn push(&mut self, rec: Rec) -> io::Result<()> {
        self.mem_bytes += rec.mem_cost();
        self.buffer.push(rec);
        if self.mem_bytes > self.budget {
            self.spill()?;
        }
        Ok(())
    }

    pub fn spill(&mut self) -> io::Result<()> {
        if self.buffer.is_empty() {
            return Ok(());
        }
        self.buffer.sort_unstable();
        let path = self
            .spill_dir
            .join(format!("{}-run-{:05}.bin", self.label, self.spill_files));
        write_run(&path, &self.buffer)?;
        self.buffer.clear();
        self.mem_bytes = 0;
        self.spill_files += 1;
        self.runs.push(RunSource::Disk(path));
        Ok(())
    }

    /// Seals the collector: the remaining in-memory buffer becomes a sorted run.
    pub fn finish(mut self) -> (Vec<RunSource>, usize) {
        if !self.buffer.is_empty() {
            self.buffer.sort_unstable();
            self.runs.push(RunSource::Mem(std::mem::take(&mut self.buffer)));
        }
        (self.runs, self.spill_files)
    }
}

/// Grouping statistics for [`external_group`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupStats {
    pub spill_files: usize,
    pub records: u64,
}

/// Streaming iterator over grouped pairs; keeps its spill directory alive
/// until dropped.
pub struct ExternalGroups {
    iter: GroupIter,
    stats: GroupStats,
    _spill_dir: Option<tempfile::TempDir>,
}

impl ExternalGroups {
    pub fn stats(&self) -> GroupStats {
        self.stats
    }
}

impl Iterator for ExternalGroups {
    type Item = io::Result<Group>;

    fn next(&mut self) -> Option<Self::Item> {
        self.iter.next_group().transpose()
    }
}

/// Groups equal keys from a record stream using sorted runs and a k-way
/// merge, spilling to temporary files whenever in-memory bytes exceed
/// `spill_budget`. Values within a group keep their arrival order.
pub fn external_group<I>(pairs: I, spill_budget: usize) -> io::Result<ExternalGroups>
where
    I: IntoIterator<Item = KeyValue>,
{
    let spill_dir = tempfile::Builder::new()
        .prefix("scallops-group-")
        .tempdir_in(crate::engine::resolve_tmp_dir())?;
    let mut collector = RunCollector::new(spill_budget, spill_dir.path(), "group");
    let mut records = 0u64;
    for kv in pairs {
        collector.push(Rec {
            key: kv.key,
            value: kv.value,
            shard: 0,
            seq: records,
        })?;
        records += 1;
    }
    let (runs, spill_files) = collector.finish();
    Ok(ExternalGroups {
        iter: GroupIter::new(runs)?,
        stats: GroupStats {
            spill_files,
            records,
        },
        _spill_dir: Some(spill_dir),
    })
}
