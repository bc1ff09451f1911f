//! Quality harness: brute-force candidate oracle, percent-identity
//! alignment of emitted pairs, intersection with external pair lists, and
//! quartile statistics for box-plot style reporting.

mod align;

pub use align::{smith_waterman, AlignParams, Alignment, PidDenominator};

use std::collections::BTreeSet;
use std::collections::HashMap;
use std::path::Path;

use crate::fasta::SequenceSet;
use crate::lsh::hamming;
use crate::pipeline::{
    load_pairs, load_signature_set, search_job, signature_generator_job, CandidatePair,
    ExecConfig, SignatureRecord,
};
use crate::scoring::{SearchParams, SubstitutionMatrix};
use crate::Result;

/// Exhaustive |Q| x |R| scan: pairs of nonzero signatures within Hamming
/// distance `d`. The ground truth the pipeline output is checked against.
pub fn brute_force_pairs(
    query_sigs: &[SignatureRecord],
    reference_sigs: &[SignatureRecord],
    d: u32,
) -> BTreeSet<CandidatePair> {
    let mut out = BTreeSet::new();
    for q in query_sigs.iter().filter(|q| !q.sig.is_zero()) {
        for r in reference_sigs.iter().filter(|r| !r.sig.is_zero()) {
            if hamming(q.sig, r.sig) <= d {
                out.insert(CandidatePair::new(q.id.clone(), r.id.clone()));
            }
        }
    }
    out
}

/// Exact set intersection keyed on (query_id, reference_id).
pub fn intersection_pairs(
    a: &BTreeSet<CandidatePair>,
    b: &BTreeSet<CandidatePair>,
) -> BTreeSet<CandidatePair> {
    a.intersection(b).cloned().collect()
}

/// Five-number summary of a PID distribution.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct QuartileSummary {
    pub q0: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub q4: f64,
    pub n: usize,
}

/// Quartiles by linear interpolation between order statistics (the value
/// at rank `(n-1) * p` with fractional ranks interpolated). Returns None
/// for an empty input — the explicit empty-summary sentinel.
pub fn quartiles(values: &[f64]) -> Option<QuartileSummary> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("PIDs are finite"));
    let at = |p: f64| -> f64 {
        let rank = (sorted.len() - 1) as f64 * p;
        let lo = rank.floor() as usize;
        let hi = rank.ceil() as usize;
        if lo == hi {
            sorted[lo]
        } else {
            let frac = rank - lo as f64;
            sorted[lo] + frac * (sorted[hi] - sorted[lo])
        }
    };
    Some(QuartileSummary {
        q0: at(0.0),
        q1: at(0.25),
        q2: at(0.5),
        q3: at(0.75),
        q4: at(1.0),
        n: sorted.len(),
    })
}

/// PID record for one aligned candidate pair.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PairPid {
    pub query_id: String,
    pub reference_id: String,
    pub score: i32,
    pub pid: f64,
    pub columns: usize,
    pub reliable: bool,
}

/// Aligns every candidate pair and reports its PID. Pairs whose ids are
/// missing from the sets are skipped (external pair lists may cover more
/// than the bundled corpus). Alignment of distinct pairs runs data-parallel.
pub fn align_pairs(
    pairs: &[CandidatePair],
    query: &SequenceSet,
    reference: &SequenceSet,
    matrix: &SubstitutionMatrix,
    params: &AlignParams,
    workers: usize,
) -> Vec<PairPid> {
    let query_by_id: HashMap<&str, &str> = query
        .records
        .iter()
        .map(|r| (r.id.as_str(), r.residues.as_str()))
        .collect();
    let reference_by_id: HashMap<&str, &str> = reference
        .records
        .iter()
        .map(|r| (r.id.as_str(), r.residues.as_str()))
        .collect();

    let resolved: Vec<(&CandidatePair, &str, &str)> = pairs
        .iter()
        .filter_map(|pair| {
            let q = query_by_id.get(pair.query_id.as_str())?;
            let r = reference_by_id.get(pair.reference_id.as_str())?;
            Some((pair, *q, *r))
        })
        .collect();

    let workers = workers.max(1).min(resolved.len().max(1));
    let chunk = resolved.len().div_ceil(workers);
    let mut out: Vec<PairPid> = Vec::with_capacity(resolved.len());
    std::thread::scope(|scope| {
        let handles: Vec<_> = resolved
            .chunks(chunk.max(1))
            .map(|slice| {
                scope.spawn(move || {
                    slice
                        .iter()
                        .map(|(pair, q, r)| {
                            let a = smith_waterman(
                                &pair.query_id,
                                q,
                                &pair.reference_id,
                                r,
                                matrix,
                                params,
                            );
                            PairPid {
                                query_id: a.query_id,
                                reference_id: a.reference_id,
                                score: a.score,
                                pid: a.pid,
                                columns: a.columns,
                                reliable: a.reliable,
                            }
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for handle in handles {
            out.extend(handle.join().expect("alignment worker panicked"));
        }
    });
    out
}

/// One grid point of a parameter sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct SweepPoint {
    pub k: usize,
    pub t: i32,
    pub d: u32,
}

/// One report row: parameters, pair counts, and the PID quartiles over
/// reliable alignments. Failed points carry an error and the sweep
/// continues.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepRow {
    pub k: usize,
    pub t: i32,
    pub d: u32,
    pub pairs: u64,
    pub aligned: usize,
    pub unreliable: usize,
    pub zero_query_signatures: u64,
    pub zero_reference_signatures: u64,
    pub quartiles: Option<QuartileSummary>,
    pub error: Option<String>,
}

/// Runs search + alignment + quartiles for every grid point. Signatures
/// are generated once per distinct (k, T) and reused across the d values
/// of that pair.
pub fn sweep(
    query: &SequenceSet,
    reference: &SequenceSet,
    grid: &[SweepPoint],
    matrix: &SubstitutionMatrix,
    align_params: &AlignParams,
    exec: &ExecConfig,
    work_dir: &Path,
) -> Result<Vec<SweepRow>> {
    std::fs::create_dir_all(work_dir)?;
    let mut rows = Vec::with_capacity(grid.len());
    let mut by_kt: Vec<(usize, i32)> = grid.iter().map(|p| (p.k, p.t)).collect();
    by_kt.sort_unstable();
    by_kt.dedup();

    for (k, t) in by_kt {
        let kt_dir = work_dir.join(format!("k{k}-T{t}"));
        let points: Vec<&SweepPoint> = grid.iter().filter(|p| p.k == k && p.t == t).collect();
        let prepared = prepare_signatures(query, reference, k, t, matrix, exec, &kt_dir);
        match prepared {
            Err(e) => {
                for point in points {
                    rows.push(error_row(point, &e.to_string()));
                }
            }
            Ok((query_sigs, reference_sigs, zero_q, zero_r)) => {
                for point in points {
                    let out_dir = kt_dir.join(format!("pairs-d{}", point.d));
                    let row = (|| -> Result<SweepRow> {
                        let report =
                            search_job(&query_sigs, &reference_sigs, point.d, exec, &out_dir)?;
                        let pairs = load_pairs(&out_dir)?;
                        let pids = align_pairs(
                            &pairs,
                            query,
                            reference,
                            matrix,
                            align_params,
                            exec.workers,
                        );
                        let reliable: Vec<f64> =
                            pids.iter().filter(|p| p.reliable).map(|p| p.pid).collect();
                        Ok(SweepRow {
                            k,
                            t,
                            d: point.d,
                            pairs: report.pairs,
                            aligned: pids.len(),
                            unreliable: pids.len() - reliable.len(),
                            zero_query_signatures: zero_q,
                            zero_reference_signatures: zero_r,
                            quartiles: quartiles(&reliable),
                            error: None,
                        })
                    })();
                    rows.push(row.unwrap_or_else(|e| error_row(point, &e.to_string())));
                }
            }
        }
    }
    Ok(rows)
}

fn error_row(point: &SweepPoint, message: &str) -> SweepRow {
    SweepRow {
        k: point.k,
        t: point.t,
        d: point.d,
        pairs: 0,
        aligned: 0,
        unreliable: 0,
        zero_query_signatures: 0,
        zero_reference_signatures: 0,
        quartiles: None,
        error: Some(message.to_string()),
    }
}

type PreparedSignatures = (
    crate::pipeline::SignatureSet,
    crate::pipeline::SignatureSet,
    u64,
    u64,
);

fn prepare_signatures(
    query: &SequenceSet,
    reference: &SequenceSet,
    k: usize,
    t: i32,
    matrix: &SubstitutionMatrix,
    exec: &ExecConfig,
    kt_dir: &Path,
) -> Result<PreparedSignatures> {
    let params = SearchParams::new(k, t, 0)?;
    let query_dir = kt_dir.join("query-sigs");
    let reference_dir = kt_dir.join("reference-sigs");
    let q_report = signature_generator_job(query, &params, matrix, exec, &query_dir)?;
    let r_report = signature_generator_job(reference, &params, matrix, exec, &reference_dir)?;
    let query_sigs = load_signature_set(&query_dir, crate::fasta::Role::Query)?;
    let reference_sigs = load_signature_set(&reference_dir, crate::fasta::Role::Reference)?;
    Ok((
        query_sigs,
        reference_sigs,
        q_report.zero_signatures,
        r_report.zero_signatures,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fasta::{ProteinSequence, Role};
    use crate::lsh::Signature;
    use crate::synth;
    use proptest::prelude::*;
    use rand::Rng;

    fn sig(id: &str, value: u32, role: Role) -> SignatureRecord {
        SignatureRecord {
            id: id.into(),
            sig: Signature(value),
            role,
        }
    }

    #[test]
    fn brute_force_examples() {
        let q = [sig("q", 42, Role::Query)];
        let r = [sig("r", 42, Role::Reference)];
        let pairs = brute_force_pairs(&q, &r, 0);
        assert_eq!(pairs.len(), 1);

        // worked-example values: distance exactly 2
        let q = [sig("q", 67585, Role::Query)];
        let r = [sig("r", 65536, Role::Reference)];
        assert_eq!(brute_force_pairs(&q, &r, 2).len(), 1);
        assert!(brute_force_pairs(&q, &r, 1).is_empty());

        // zero signatures never pair, even at full distance
        let q = [sig("q", 0, Role::Query)];
        let r = [sig("r", 1, Role::Reference)];
        assert!(brute_force_pairs(&q, &r, 32).is_empty());
    }

    #[test]
    fn pipeline_matches_brute_force_on_random_sets() {
        let mut rng = synth::rng_from_seed(2024);
        let matrix = SubstitutionMatrix::blosum62();
        let exec = ExecConfig {
            workers: 2,
            partitions: 3,
            spill_budget: usize::MAX,
        };
        let query = SequenceSet::new(Role::Query, synth::uniform_corpus(30, 20..=60, &mut rng));
        let mut reference_records = synth::uniform_corpus(60, 20..=60, &mut rng);
        for r in &mut reference_records {
            r.id = format!("ref_{}", r.id);
        }
        let reference = SequenceSet::new(Role::Reference, reference_records);

        let dir = tempfile::tempdir().unwrap();
        let (q_sigs, r_sigs, _, _) =
            prepare_signatures(&query, &reference, 3, 11, &matrix, &exec, dir.path()).unwrap();

        for d in [0, 1, 2] {
            let out = dir.path().join(format!("pairs-{d}"));
            search_job(&q_sigs, &r_sigs, d, &exec, &out).unwrap();
            let got: BTreeSet<CandidatePair> = load_pairs(&out).unwrap().into_iter().collect();
            let expected = brute_force_pairs(&q_sigs.records, &r_sigs.records, d);
            assert_eq!(got, expected, "d = {d}");
        }
    }

    #[test]
    fn intersection_examples() {
        let a: BTreeSet<CandidatePair> = [
            CandidatePair::new("q1", "r1"),
            CandidatePair::new("q2", "r2"),
        ]
        .into_iter()
        .collect();
        assert_eq!(intersection_pairs(&a, &a), a);

        let b: BTreeSet<CandidatePair> = [CandidatePair::new("q3", "r3")].into_iter().collect();
        assert!(intersection_pairs(&a, &b).is_empty());

        let c: BTreeSet<CandidatePair> = [
            CandidatePair::new("q2", "r2"),
            CandidatePair::new("q4", "r4"),
        ]
        .into_iter()
        .collect();
        let both = intersection_pairs(&a, &c);
        assert_eq!(both.len(), 1);
        assert!(both.contains(&CandidatePair::new("q2", "r2")));
    }

    #[test]
    fn quartile_examples() {
        let q = quartiles(&[10.0, 20.0, 30.0, 40.0, 50.0]).unwrap();
        assert_eq!(q.q0, 10.0);
        assert_eq!(q.q1, 20.0);
        assert_eq!(q.q2, 30.0);
        assert_eq!(q.q3, 40.0);
        assert_eq!(q.q4, 50.0);
        assert_eq!(q.n, 5);

        let single = quartiles(&[42.0]).unwrap();
        assert_eq!(
            (single.q0, single.q1, single.q2, single.q3, single.q4),
            (42.0, 42.0, 42.0, 42.0, 42.0)
        );

        assert!(quartiles(&[]).is_none());

        // interpolation on an even count
        let q = quartiles(&[0.0, 10.0]).unwrap();
        assert_eq!(q.q2, 5.0);
    }

    #[test]
    fn uniform_sample_median_is_centered() {
        let mut rng = synth::rng_from_seed(5);
        let values: Vec<f64> = (0..1000).map(|_| rng.gen_range(0.0..100.0)).collect();
        let q = quartiles(&values).unwrap();
        assert!((q.q2 - 50.0).abs() < 5.0, "median {}", q.q2);
    }

    #[test]
    fn align_pairs_skips_unknown_ids_and_parallelizes() {
        let matrix = SubstitutionMatrix::blosum62();
        let query = SequenceSet::new(
            Role::Query,
            vec![
                ProteinSequence::new("q1", "MDESFGLLWDERKQYT"),
                ProteinSequence::new("q2", "WDERKQYTWDERKQYT"),
            ],
        );
        let reference = SequenceSet::new(
            Role::Reference,
            vec![ProteinSequence::new("r1", "MDESFGLLWDERKQYT")],
        );
        let pairs = vec![
            CandidatePair::new("q1", "r1"),
            CandidatePair::new("q2", "r1"),
            CandidatePair::new("ghost", "r1"),
        ];
        for workers in [1, 4] {
            let pids = align_pairs(
                &pairs,
                &query,
                &reference,
                &matrix,
                &AlignParams::default(),
                workers,
            );
            assert_eq!(pids.len(), 2);
            assert_eq!(pids[0].pid, 100.0);
            assert!(pids[0].reliable);
        }
    }

    #[test]
    fn sweep_reports_one_row_per_point() {
        let mut rng = synth::rng_from_seed(8);
        let bases = synth::uniform_corpus(10, 30..=40, &mut rng);
        let mutated = synth::mutation_series(&bases, &[1], &mut rng);
        let reference = SequenceSet::new(Role::Reference, bases);
        let query = SequenceSet::new(Role::Query, mutated);
        let matrix = SubstitutionMatrix::blosum62();
        let exec = ExecConfig {
            workers: 2,
            partitions: 2,
            spill_budget: usize::MAX,
        };
        let grid = [
            SweepPoint { k: 3, t: 13, d: 0 },
            SweepPoint { k: 3, t: 13, d: 2 },
        ];
        let dir = tempfile::tempdir().unwrap();
        let rows = sweep(
            &query,
            &reference,
            &grid,
            &matrix,
            &AlignParams::default(),
            &exec,
            dir.path(),
        )
        .unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.error.is_none()));
        // candidate sets nest, so counts are monotone in d
        assert!(rows[0].pairs <= rows[1].pairs);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Quartiles are permutation-invariant and ordered.
        #[test]
        fn quartiles_permutation_invariant(mut values in proptest::collection::vec(0.0f64..100.0, 1..40)) {
            let before = quartiles(&values).unwrap();
            values.reverse();
            let after = quartiles(&values).unwrap();
            prop_assert_eq!(before, after);
            prop_assert!(before.q0 <= before.q1);
            prop_assert!(before.q1 <= before.q2);
            prop_assert!(before.q2 <= before.q3);
            prop_assert!(before.q3 <= before.q4);
        }
    }
}
