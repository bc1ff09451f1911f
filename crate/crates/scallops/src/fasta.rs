//! FASTA parsing, normalization, and sharded record sets.
//!
//! Residues are uppercased and restricted to the 20 canonical amino-acid
//! letters. The ambiguity/rare codes `X B Z U O J * -` are stripped with a
//! per-file warning counter (stripping keeps shingle scoring total; mapping
//! them to score 0 would change signatures silently). Anything else in a
//! record body is an error.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::{Error, Result};

/// Which side of a search a set of sequences belongs to. The distinction
/// drives the pair-matching map function: references publish flipped keys,
/// queries do not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Query,
    Reference,
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Role::Query => write!(f, "query"),
            Role::Reference => write!(f, "reference"),
        }
    }
}

/// One protein record: the first whitespace-delimited header token is the
/// id, the rest of the header is kept as an opaque description.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProteinSequence {
    pub id: String,
    pub description: Option<String>,
    pub residues: String,
}

impl ProteinSequence {
    pub fn new(id: impl Into<String>, residues: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            description: None,
            residues: residues.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.residues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residues.is_empty()
    }
}

/// An ordered, immutable collection of records with a fixed role.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceSet {
    pub role: Role,
    pub records: Vec<ProteinSequence>,
    pub sources: Vec<PathBuf>,
}

impl SequenceSet {
    pub fn new(role: Role, records: Vec<ProteinSequence>) -> Self {
        Self {
            role,
            records,
            sources: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn total_residues(&self) -> u64 {
        self.records.iter().map(|r| r.len() as u64).sum()
    }
}

/// Per-parse warning counters, surfaced in run metadata.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct ParseWarnings {
    /// Non-canonical residues stripped during normalization.
    pub stripped_residues: u64,
    /// Records dropped because their body was empty (possibly after stripping).
    pub rejected_empty_records: u64,
}

impl ParseWarnings {
    fn absorb(&mut self, other: ParseWarnings) {
        self.stripped_residues += other.stripped_residues;
        self.rejected_empty_records += other.rejected_empty_records;
    }
}

const STRIPPABLE: &[u8] = b"XBZUOJ*-";

enum ResidueClass {
    Canonical(u8),
    Strippable,
    Whitespace,
    Invalid,
}

fn classify(byte: u8) -> ResidueClass {
    let upper = byte.to_ascii_uppercase();
    if crate::scoring::is_canonical(upper) {
        ResidueClass::Canonical(upper)
    } else if STRIPPABLE.contains(&upper) {
        ResidueClass::Strippable
    } else if byte.is_ascii_whitespace() {
        ResidueClass::Whitespace
    } else {
        ResidueClass::Invalid
    }
}

/// Streaming FASTA record reader over any buffered input.
///
/// Yields records in file order; warning counters accumulate as records
/// are consumed. Duplicate-id detection is the caller's concern (the
/// uniqueness scope is a whole input set, which may span several shards).
pub struct FastaReader<R: BufRead> {
    input: R,
    pending_header: Option<String>,
    line_buf: String,
    saw_any_line: bool,
    done: bool,
    warnings: ParseWarnings,
}

impl<R: BufRead> FastaReader<R> {
    pub fn new(input: R) -> Self {
        Self {
            input,
            pending_header: None,
            line_buf: String::new(),
            saw_any_line: false,
            done: false,
            warnings: ParseWarnings::default(),
        }
    }

    pub fn warnings(&self) -> ParseWarnings {
        self.warnings
    }

    fn read_record(&mut self) -> Result<Option<ProteinSequence>> {
        loop {
            let header = match self.pending_header.take() {
                Some(h) => h,
                None => match self.next_line()? {
                    None => return Ok(None),
                    Some(line) => {
                        if !line.starts_with('>') {
                            return Err(Error::Fasta(format!(
                                "expected '>' header, got {:?}",
                                truncate_for_msg(&line)
                            )));
                        }
                        line
                    }
                },
            };

            let (id, description) = split_header(&header)?;
            let mut residues = String::new();
            loop {
                match self.next_line()? {
                    None => break,
                    Some(line) => {
                        if line.starts_with('>') {
                            self.pending_header = Some(line);
                            break;
                        }
                        for byte in line.bytes() {
                            match classify(byte) {
                                ResidueClass::Canonical(b) => residues.push(b as char),
                                ResidueClass::Strippable => self.warnings.stripped_residues += 1,
                                ResidueClass::Whitespace => {}
                                ResidueClass::Invalid => {
                                    return Err(Error::InvalidResidue {
                                        id: id.clone(),
                                        ch: byte as char,
                                    })
                                }
                            }
                        }
                    }
                }
            }

            if residues.is_empty() {
                self.warnings.rejected_empty_records += 1;
                continue; // rejected with a warning, move on to the next record
            }
            return Ok(Some(ProteinSequence {
                id,
                description,
                residues,
            }));
        }
    }

    /// Next non-empty line with the terminator (LF or CRLF) removed.
    fn next_line(&mut self) -> Result<Option<String>> {
        loop {
            if self.done {
                return Ok(None);
            }
            self.line_buf.clear();
            let n = self.input.read_line(&mut self.line_buf)?;
            if n == 0 {
                self.done = true;
                return Ok(None);
            }
            let line = self.line_buf.trim_end_matches(['\n', '\r']);
            if line.is_empty() {
                continue;
            }
            if !self.saw_any_line {
                self.saw_any_line = true;
                if !line.starts_with('>') {
                    return Err(Error::Fasta(format!(
                        "first line must start with '>', got {:?}",
                        truncate_for_msg(line)
                    )));
                }
            }
            return Ok(Some(line.to_string()));
        }
    }
}

impl<R: BufRead> Iterator for FastaReader<R> {
    type Item = Result<ProteinSequence>;

    fn next(&mut self) -> Option<Self::Item> {
        self.read_record().transpose()
    }
}

fn split_header(header: &str) -> Result<(String, Option<String>)> {
    let body = header[1..].trim_start();
    let mut parts = body.splitn(2, char::is_whitespace);
    let id = parts.next().unwrap_or("").to_string();
    if id.is_empty() {
        return Err(Error::Fasta("header with empty id".into()));
    }
    let description = parts
        .next()
        .map(str::trim)
        .filter(|d| !d.is_empty())
        .map(str::to_string);
    Ok((id, description))
}

fn truncate_for_msg(line: &str) -> String {
    line.chars().take(40).collect()
}

/// Parses one FASTA stream into a set, enforcing id uniqueness.
pub fn parse_fasta(input: impl BufRead, role: Role) -> Result<(SequenceSet, ParseWarnings)> {
    let mut reader = FastaReader::new(input);
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.by_ref() {
        let record = record?;
        if !seen.insert(record.id.clone()) {
            return Err(Error::DuplicateId(record.id));
        }
        records.push(record);
    }
    let warnings = reader.warnings();
    Ok((SequenceSet::new(role, records), warnings))
}

/// Reads a FASTA file, or a directory of shards processed in lexicographic
/// filename order. Hidden files and `_`-prefixed markers are skipped.
pub fn read_input(path: &Path, role: Role) -> Result<(SequenceSet, ParseWarnings)> {
    let mut files = Vec::new();
    if path.is_dir() {
        for entry in std::fs::read_dir(path).map_err(|e| io_path(path, e))? {
            let entry = entry.map_err(|e| io_path(path, e))?;
            let p = entry.path();
            let name = entry.file_name();
            let name = name.to_string_lossy();
            if p.is_file() && !name.starts_with('.') && !name.starts_with('_') {
                files.push(p);
            }
        }
        files.sort();
        if files.is_empty() {
            return Err(Error::Fasta(format!(
                "no input files in directory {}",
                path.display()
            )));
        }
    } else {
        files.push(path.to_path_buf());
    }

    let mut records = Vec::new();
    let mut warnings = ParseWarnings::default();
    let mut seen = HashSet::new();
    for file in &files {
        let handle = File::open(file).map_err(|e| io_path(file, e))?;
        let (set, w) = parse_fasta(BufReader::new(handle), role)?;
        warnings.absorb(w);
        for record in set.records {
            if !seen.insert(record.id.clone()) {
                return Err(Error::DuplicateId(record.id));
            }
            records.push(record);
        }
    }
    let mut set = SequenceSet::new(role, records);
    set.sources = files;
    Ok((set, warnings))
}

const FASTA_WRAP: usize = 60;

/// Writes a set back out as FASTA, wrapping residue lines at 60 columns.
/// `parse(serialize(set))` reproduces the set exactly.
pub fn write_fasta(set: &SequenceSet, mut out: impl Write) -> Result<()> {
    for record in &set.records {
        match &record.description {
            Some(d) => writeln!(out, ">{} {}", record.id, d)?,
            None => writeln!(out, ">{}", record.id)?,
        }
        let bytes = record.residues.as_bytes();
        for chunk in bytes.chunks(FASTA_WRAP) {
            out.write_all(chunk)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// Splits a set into `n` contiguous shards: disjoint, covering, sizes
/// differing by at most one record, concatenation preserving order.
/// Shards may be empty when `n` exceeds the record count.
pub fn shard(set: &SequenceSet, n: usize) -> Vec<SequenceSet> {
    assert!(n >= 1, "shard count must be positive");
    let total = set.records.len();
    let base = total / n;
    let remainder = total % n;
    let mut shards = Vec::with_capacity(n);
    let mut offset = 0;
    for i in 0..n {
        let size = base + usize::from(i < remainder);
        let records = set.records[offset..offset + size].to_vec();
        offset += size;
        shards.push(SequenceSet::new(set.role, records));
    }
    debug_assert_eq!(offset, total);
    shards
}

fn io_path(path: &Path, source: std::io::Error) -> Error {
    Error::IoPath {
        path: path.to_path_buf(),
        source,
    }
}
