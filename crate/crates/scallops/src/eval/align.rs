//! Smith-Waterman local alignment with affine gaps, the percent-identity
//! instrument of the quality harness.
//!
//! Gap cost convention: a gap of length L costs `gap_open + L * gap_extend`
//! (the usual pairing with BLOSUM62 is open 11, extend 1). Traceback is
//! deterministic: the start cell is the first maximum in row-major scan
//! order, ties during traceback prefer diagonal, then up (gap in the
//! reference), then left (gap in the query), and a gap closes as early as
//! possible when open and extend tie.

use crate::scoring::SubstitutionMatrix;

/// What the PID denominator counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PidDenominator {
    /// All alignment columns, gap columns included (the default).
    Columns,
    /// Only columns pairing two residues.
    ResiduePairs,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct AlignParams {
    pub gap_open: i32,
    pub gap_extend: i32,
    pub pid_denominator: PidDenominator,
    /// Alignments shorter than this many columns are flagged unreliable.
    pub min_reportable_columns: usize,
}

impl Default for AlignParams {
    fn default() -> Self {
        Self {
            gap_open: 11,
            gap_extend: 1,
            pid_denominator: PidDenominator::Columns,
            min_reportable_columns: 10,
        }
    }
}

/// An optimal local alignment. The aligned strings have equal length
/// (`columns`); `pid` is `identities / denominator * 100`, and 0 for an
/// empty alignment. `reliable` is false below the minimum reportable
/// length, marking the PID as not meaningful rather than dropping it
/// silently.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub query_id: String,
    pub reference_id: String,
    pub aligned_query: String,
    pub aligned_reference: String,
    pub score: i32,
    pub identities: usize,
    pub columns: usize,
    pub pid: f64,
    pub reliable: bool,
}

const NEG: i32 = i32::MIN / 4;

struct Matrices {
    cols: usize,
    h: Vec<i32>,
    e: Vec<i32>,
    f: Vec<i32>,
}

impl Matrices {
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.cols + j
    }
}

fn fill(query: &[u8], reference: &[u8], m: &SubstitutionMatrix, p: &AlignParams) -> Matrices {
    let rows = query.len() + 1;
    let cols = reference.len() + 1;
    let mut dp = Matrices {
        cols,
        h: vec![0; rows * cols],
        e: vec![NEG; rows * cols],
        f: vec![NEG; rows * cols],
    };
    let open_cost = p.gap_open + p.gap_extend;
    for i in 1..rows {
        for j in 1..cols {
            let at = dp.idx(i, j);
            let up = dp.idx(i - 1, j);
            let left = dp.idx(i, j - 1);
            let diag = dp.idx(i - 1, j - 1);
            dp.e[at] = (dp.h[up] - open_cost).max(dp.e[up] - p.gap_extend);
            dp.f[at] = (dp.h[left] - open_cost).max(dp.f[left] - p.gap_extend);
            let sub = dp.h[diag] + m.score(query[i - 1], reference[j - 1]);
            dp.h[at] = 0.max(sub).max(dp.e[at]).max(dp.f[at]);
        }
    }
    dp
}

/// Optimal local alignment of two sequences under affine gap penalties.
pub fn smith_waterman(
    query_id: &str,
    query: &str,
    reference_id: &str,
    reference: &str,
    m: &SubstitutionMatrix,
    p: &AlignParams,
) -> Alignment {
    let q = query.as_bytes();
    let r = reference.as_bytes();
    let dp = fill(q, r, m, p);

    // first maximum in row-major order
    let mut best = 0;
    let (mut bi, mut bj) = (0usize, 0usize);
    for i in 1..=q.len() {
        for j in 1..=r.len() {
            let v = dp.h[dp.idx(i, j)];
            if v > best {
                best = v;
                bi = i;
                bj = j;
            }
        }
    }

    let mut aligned_query = Vec::new();
    let mut aligned_reference = Vec::new();
    if best > 0 {
        traceback(&dp, q, r, m, p, bi, bj, &mut aligned_query, &mut aligned_reference);
        aligned_query.reverse();
        aligned_reference.reverse();
    }

    let columns = aligned_query.len();
    let identities = aligned_query
        .iter()
        .zip(&aligned_reference)
        .filter(|(a, b)| a == b && **a != b'-')
        .count();
    let denominator = match p.pid_denominator {
        PidDenominator::Columns => columns,
        PidDenominator::ResiduePairs => aligned_query
            .iter()
            .zip(&aligned_reference)
            .filter(|(a, b)| **a != b'-' && **b != b'-')
            .count(),
    };
    let pid = if denominator == 0 {
        0.0
    } else {
        identities as f64 / denominator as f64 * 100.0
    };

    Alignment {
        query_id: query_id.to_string(),
        reference_id: reference_id.to_string(),
        aligned_query: String::from_utf8(aligned_query).expect("residues are ASCII"),
        aligned_reference: String::from_utf8(aligned_reference).expect("residues are ASCII"),
        score: best,
        identities,
        columns,
        pid,
        reliable: columns >= p.min_reportable_columns,
    }
}

#[derive(Clone, Copy, PartialEq)]
enum State {
    H,
    E,
    F,
}

#[allow(clippy::too_many_arguments)]
fn traceback(
    dp: &Matrices,
    q: &[u8],
    r: &[u8],
    m: &SubstitutionMatrix,
    p: &AlignParams,
    mut i: usize,
    mut j: usize,
    out_q: &mut Vec<u8>,
    out_r: &mut Vec<u8>,
) {
    let open_cost = p.gap_open + p.gap_extend;
    let mut state = State::H;
    loop {
        let at = dp.idx(i, j);
        match state {
            State::H => {
                let h = dp.h[at];
                if h == 0 {
                    return;
                }
                let diag = dp.idx(i - 1, j - 1);
                if i > 0 && j > 0 && h == dp.h[diag] + m.score(q[i - 1], r[j - 1]) {
                    out_q.push(q[i - 1]);
                    out_r.push(r[j - 1]);
                    i -= 1;
                    j -= 1;
                } else if h == dp.e[at] {
                    state = State::E;
                } else {
                    debug_assert_eq!(h, dp.f[at]);
                    state = State::F;
                }
            }
            State::E => {
                // gap in the reference: consume a query residue
                out_q.push(q[i - 1]);
                out_r.push(b'-');
                let up = dp.idx(i - 1, j);
                let from_h = dp.h[up] - open_cost;
                state = if dp.e[at] == from_h { State::H } else { State::E };
                i -= 1;
            }
            State::F => {
                // gap in the query: consume a reference residue
                out_q.push(b'-');
                out_r.push(r[j - 1]);
                let left = dp.idx(i, j - 1);
                let from_h = dp.h[left] - open_cost;
                state = if dp.f[at] == from_h { State::H } else { State::F };
                j -= 1;
            }
        }
    }
}
