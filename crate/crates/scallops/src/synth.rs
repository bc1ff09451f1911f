//! Seeded synthetic corpora: uniform random sequences and mutation series.
//!
//! Real metagenomic inputs are far beyond desk scale; benchmarks and the
//! quality harness run on reproducible synthetic sets instead. All
//! generation is driven by an explicit seed so two runs with the same
//! configuration produce byte-identical corpora.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fasta::ProteinSequence;
use crate::scoring::ALPHABET;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_residues(len: usize, rng: &mut impl Rng) -> String {
    (0..len).map(|_| ALPHABET[rng.gen_range(0..20)] as char).collect()
}

/// `n` iid-uniform sequences with lengths drawn from `len_range`.
pub fn uniform_corpus(
    n: usize,
    len_range: std::ops::RangeInclusive<usize>,
    rng: &mut impl Rng,
) -> Vec<ProteinSequence> {
    (0..n)
        .map(|i| {
            let len = rng.gen_range(len_range.clone());
            ProteinSequence::new(format!("s{i:06}"), random_residues(len, rng))
        })
        .collect()
}

/// Applies exactly `m` point mutations at distinct positions, each to a
/// different residue than the one it replaces. `m` is capped at the
/// sequence length.
pub fn mutate(residues: &str, m: usize, rng: &mut impl Rng) -> String {
    let mut bytes = residues.as_bytes().to_vec();
    let m = m.min(bytes.len());
    if m == 0 {
        return residues.to_string();
    }
    for pos in sample(rng, bytes.len(), m) {
        let old = bytes[pos];
        loop {
            let candidate = ALPHABET[rng.gen_range(0..20)];
            if candidate != old {
                bytes[pos] = candidate;
                break;
            }
        }
    }
    String::from_utf8(bytes).expect("alphabet is ASCII")
}

/// A mutation series: for every base sequence, one copy per entry of `ms`
/// carrying that many point mutations. Copy ids are `<base>_m<count>`.
pub fn mutation_series(
    bases: &[ProteinSequence],
    ms: &[usize],
    rng: &mut impl Rng,
) -> Vec<ProteinSequence> {
    let mut out = Vec::with_capacity(bases.len() * ms.len());
    for base in bases {
        for m in ms {
            out.push(ProteinSequence::new(
                format!("{}_m{m}", base.id),
                mutate(&base.residues, *m, rng),
            ));
        }
    }
    out
}

/// FNV-1a/64 digest of a corpus (ids and residues), for metadata and the
/// fixed-seed reproducibility check in benchmark output.
pub fn corpus_checksum(records: &[ProteinSequence]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for b in bytes {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    for r in records {
        eat(r.id.as_bytes());
        eat(b"\0");
        eat(r.residues.as_bytes());
        eat(b"\n");
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_corpus() {
        let a = uniform_corpus(50, 20..=60, &mut rng_from_seed(9));
        let b = uniform_corpus(50, 20..=60, &mut rng_from_seed(9));
        assert_eq!(a, b);
        assert_eq!(corpus_checksum(&a), corpus_checksum(&b));
        let c = uniform_corpus(50, 20..=60, &mut rng_from_seed(10));
        assert_ne!(corpus_checksum(&a), corpus_checksum(&c));
    }

    #[test]
    fn mutate_changes_exactly_m_positions() {
        let mut rng = rng_from_seed(3);
        let base = random_residues(100, &mut rng);
        for m in [0, 1, 5, 20] {
            let mutated = mutate(&base, m, &mut rng);
            let diffs = base
                .bytes()
                .zip(mutated.bytes())
                .filter(|(a, b)| a != b)
                .count();
            assert_eq!(diffs, m);
        }
        // m larger than the sequence is capped
        let mutated = mutate("MDE", 10, &mut rng);
        assert_eq!(mutated.len(), 3);
        assert_ne!(mutated, "MDE");
    }

    #[test]
    fn mutation_series_ids_and_counts() {
        let mut rng = rng_from_seed(4);
        let bases = uniform_corpus(3, 30..=30, &mut rng);
        let series = mutation_series(&bases, &[1, 5], &mut rng);
        assert_eq!(series.len(), 6);
        assert_eq!(series[0].id, format!("{}_m1", bases[0].id));
        assert_eq!(series[1].id, format!("{}_m5", bases[0].id));
    }
}
