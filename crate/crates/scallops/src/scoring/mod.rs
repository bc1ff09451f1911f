//! Substitution scoring, k-shingle tokenization, and neighboring-word
//! generation — the feature extractor feeding the signature stage.
//!
//! A *neighboring word* of a shingle is any k-letter word whose summed
//! substitution score against the shingle meets the threshold `T`
//! (inclusive, `score >= T`). The word's score doubles as its feature
//! weight downstream.

mod blosum62;

pub use blosum62::{ALPHABET, BLOSUM62_CHECKSUM};

use crate::{Error, Result};

const ALPHABET_LEN: usize = 20;

/// Maps an ASCII byte to its index in [`ALPHABET`], or 0xFF.
const fn build_index_table() -> [u8; 256] {
    let mut table = [0xFFu8; 256];
    let mut i = 0;
    while i < ALPHABET_LEN {
        table[ALPHABET[i] as usize] = i as u8;
        i += 1;
    }
    table
}

static LETTER_INDEX: [u8; 256] = build_index_table();

/// Index of a canonical residue letter, if it is one.
pub fn residue_index(letter: u8) -> Option<usize> {
    match LETTER_INDEX[letter as usize] {
        0xFF => None,
        i => Some(i as usize),
    }
}

pub fn is_canonical(letter: u8) -> bool {
    residue_index(letter).is_some()
}

/// A 20x20 integer substitution score table over the canonical alphabet.
///
/// The table must be symmetric; `row_max` caches the per-row maximum used
/// for branch-and-bound pruning during neighbor enumeration (for BLOSUM62
/// the maximum of every row sits on the diagonal).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubstitutionMatrix {
    name: String,
    scores: [[i32; 20]; 20],
    row_max: [i32; 20],
}

impl SubstitutionMatrix {
    pub fn new(name: impl Into<String>, scores: [[i32; 20]; 20]) -> Result<Self> {
        for i in 0..ALPHABET_LEN {
            for j in 0..i {
                if scores[i][j] != scores[j][i] {
                    return Err(Error::Matrix(format!(
                        "not symmetric at {}{}: {} vs {}",
                        ALPHABET[i] as char, ALPHABET[j] as char, scores[i][j], scores[j][i]
                    )));
                }
            }
        }
        let mut row_max = [i32::MIN; 20];
        for i in 0..ALPHABET_LEN {
            row_max[i] = *scores[i].iter().max().expect("20 entries");
        }
        Ok(Self {
            name: name.into(),
            scores,
            row_max,
        })
    }

    /// The embedded BLOSUM62 table.
    pub fn blosum62() -> Self {
        Self::new("BLOSUM62", blosum62::BLOSUM62).expect("embedded table is symmetric")
    }

    /// Parses an NCBI-layout matrix text: optional `#` comment lines, a
    /// header row of residue letters, then one row per residue starting
    /// with its letter. Columns beyond the 20 canonical letters (B, Z, X,
    /// `*`) are ignored; all 20 canonical letters must be present.
    pub fn from_ncbi_text(name: impl Into<String>, text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::Matrix("empty matrix file".into()))?;
        let columns: Vec<Option<usize>> = header
            .split_whitespace()
            .map(|tok| {
                if tok.len() == 1 {
                    residue_index(tok.as_bytes()[0])
                } else {
                    None
                }
            })
            .collect();
        let mut scores = [[i32::MIN; 20]; 20];
        let mut seen_rows = [false; 20];
        for line in lines {
            let mut toks = line.split_whitespace();
            let row_letter = toks
                .next()
                .ok_or_else(|| Error::Matrix("blank data row".into()))?;
            if row_letter.len() != 1 {
                return Err(Error::Matrix(format!("bad row label {row_letter:?}")));
            }
            let Some(row) = residue_index(row_letter.as_bytes()[0]) else {
                continue; // B/Z/X/* rows in full-size NCBI files
            };
            seen_rows[row] = true;
            for (col, tok) in columns.iter().zip(toks) {
                if let Some(col) = col {
                    scores[row][*col] = tok
                        .parse()
                        .map_err(|_| Error::Matrix(format!("bad score {tok:?}")))?;
                }
            }
        }
        for (i, seen) in seen_rows.iter().enumerate() {
            if !seen {
                return Err(Error::Matrix(format!(
                    "missing row for residue {}",
                    ALPHABET[i] as char
                )));
            }
        }
        for row in &scores {
            for v in row {
                if *v == i32::MIN {
                    return Err(Error::Matrix("incomplete 20x20 table".into()));
                }
            }
        }
        Self::new(name, scores)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Substitution score of two canonical residue letters.
    ///
    /// Inputs are pre-normalized upstream; a non-canonical letter here is a
    /// programming error.
    pub fn score(&self, a: u8, b: u8) -> i32 {
        let ia = residue_index(a).unwrap_or_else(|| panic!("non-canonical residue {:?}", a as char));
        let ib = residue_index(b).unwrap_or_else(|| panic!("non-canonical residue {:?}", b as char));
        self.scores[ia][ib]
    }

    pub fn score_by_index(&self, a: usize, b: usize) -> i32 {
        self.scores[a][b]
    }

    fn row_max_by_index(&self, a: usize) -> i32 {
        self.row_max[a]
    }

    /// Sum of position-wise substitution scores of two equal-length words.
    pub fn word_score(&self, a: &str, b: &str) -> i32 {
        debug_assert_eq!(a.len(), b.len());
        a.bytes()
            .zip(b.bytes())
            .map(|(x, y)| self.score(x, y))
            .sum()
    }

    pub fn self_score(&self, word: &str) -> i32 {
        self.word_score(word, word)
    }

    /// FNV-1a/64 over the entries in row-major order, one signed byte each.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for row in &self.scores {
            for v in row {
                h ^= (*v as i8) as u8 as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

/// Search parameters: shingle length `k`, neighbor score threshold `T`,
/// and Hamming distance threshold `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SearchParams {
    pub k: usize,
    pub t: i32,
    pub d: u32,
}

impl SearchParams {
    pub fn new(k: usize, t: i32, d: u32) -> Result<Self> {
        if !(1..=8).contains(&k) {
            return Err(Error::Params(format!("k must be within 1..=8, got {k}")));
        }
        if d > 32 {
            return Err(Error::Params(format!("d must be within 0..=32, got {d}")));
        }
        Ok(Self { k, t, d })
    }
}

/// A length-k window of a sequence at a 0-based offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shingle<'a> {
    pub letters: &'a str,
    pub position: usize,
}

/// All overlapping k-shingles of `residues` in sequence order; empty when
/// the sequence is shorter than `k`.
pub fn tokenize(residues: &str, k: usize) -> Vec<Shingle<'_>> {
    assert!(k >= 1, "k must be positive");
    if residues.len() < k {
        return Vec::new();
    }
    (0..=residues.len() - k)
        .map(|position| Shingle {
            letters: &residues[position..position + k],
            position,
        })
        .collect()
}

/// A neighboring word with its summed substitution score against the
/// originating shingle.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct NeighborWord {
    pub word: String,
    pub score: i32,
}

/// Calls `f(word, score)` for every word over the canonical alphabet with
/// `word_score(shingle, word) >= t`.
///
/// Depth-first over positions with branch-and-bound pruning: a prefix is
/// cut as soon as its score plus the best achievable suffix falls below
/// `t`. Output order is lexicographic in matrix alphabet order and the
/// result equals an exhaustive 20^k scan.
pub fn for_each_neighbor<F>(shingle: &str, t: i32, matrix: &SubstitutionMatrix, mut f: F)
where
    F: FnMut(&[u8], i32),
{
    let k = shingle.len();
    assert!(k >= 1, "empty shingle");
    let source: Vec<usize> = shingle
        .bytes()
        .map(|b| residue_index(b).unwrap_or_else(|| panic!("non-canonical residue {:?}", b as char)))
        .collect();

    // suffix_max[i] = best achievable score for positions i..k
    let mut suffix_max = vec![0i32; k + 1];
    for i in (0..k).rev() {
        suffix_max[i] = suffix_max[i + 1] + matrix.row_max_by_index(source[i]);
    }
    if suffix_max[0] < t {
        return;
    }

    let mut word = vec![0u8; k];
    descend(&source, &suffix_max, t, matrix, &mut word, 0, 0, &mut f);
}

#[allow(clippy::too_many_arguments)]
fn descend<F>(
    source: &[usize],
    suffix_max: &[i32],
    t: i32,
    matrix: &SubstitutionMatrix,
    word: &mut [u8],
    pos: usize,
    prefix_score: i32,
    f: &mut F,
) where
    F: FnMut(&[u8], i32),
{
    if pos == source.len() {
        f(word, prefix_score);
        return;
    }
    for (idx, letter) in ALPHABET.iter().enumerate() {
        let score = prefix_score + matrix.score_by_index(source[pos], idx);
        if score + suffix_max[pos + 1] < t {
            continue;
        }
        word[pos] = *letter;
        descend(source, suffix_max, t, matrix, word, pos + 1, score, f);
    }
}

/// The full neighboring-word set of a shingle at threshold `t`, including
/// the shingle itself whenever its self-score meets `t`.
pub fn neighbor_words(shingle: &str, t: i32, matrix: &SubstitutionMatrix) -> Vec<NeighborWord> {
    let mut out = Vec::new();
    for_each_neighbor(shingle, t, matrix, |word, score| {
        out.push(NeighborWord {
            word: String::from_utf8(word.to_vec()).expect("alphabet is ASCII"),
            score,
        });
    });
    out
}
