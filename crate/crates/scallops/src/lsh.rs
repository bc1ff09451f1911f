//! 32-bit SimHash signatures from score-weighted neighbor-word features,
//! plus the Hamming-distance and bit-flip primitives used for key matching.
//!
//! Each neighboring word is hashed with the classic Java string hash; the
//! 32 hash bits act as a fixed hyperplane sign pattern. Bit `i` of a
//! signature means the i-th least significant bit throughout — this choice
//! is load-bearing for golden files and must not change.

use crate::scoring::{for_each_neighbor, tokenize, SearchParams, SubstitutionMatrix};

/// A 32-bit sequence fingerprint. The all-zero value is the designated
/// degenerate signature for featureless sequences and is skipped by the
/// pair-matching stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Signature(pub u32);

impl Signature {
    pub const ZERO: Signature = Signature(0);

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl std::fmt::Display for Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Polynomial string hash with multiplier 31 evaluated in wrapping 32-bit
/// two's-complement arithmetic (`s[0]*31^(n-1) + ... + s[n-1]`), the JVM
/// `String.hashCode` rule. Characters contribute their code-point values;
/// residue words are ASCII so bytes and code points coincide.
pub fn java_string_hash(word: &[u8]) -> u32 {
    let mut h: i32 = 0;
    for &b in word {
        h = h.wrapping_mul(31).wrapping_add(b as i32);
    }
    h as u32
}

/// The 32 signed vote accumulators behind a signature.
///
/// For every feature, component `i` gains the feature's weight when bit
/// `i` of the feature hash is set and loses it otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureVote {
    components: [i64; 32],
}

impl Default for FeatureVote {
    fn default() -> Self {
        Self::new()
    }
}

impl FeatureVote {
    pub fn new() -> Self {
        Self {
            components: [0; 32],
        }
    }

    pub fn add_feature(&mut self, hash: u32, weight: i32) {
        for (i, component) in self.components.iter_mut().enumerate() {
            if (hash >> i) & 1 == 1 {
                *component += weight as i64;
            } else {
                *component -= weight as i64;
            }
        }
    }

    pub fn components(&self) -> &[i64; 32] {
        &self.components
    }

    /// Rounds the votes to a signature: bit `i` set iff component `i >= 0`.
    ///
    /// An all-zero vote vector (in particular, zero features) would set
    /// every bit under that rule and make all featureless sequences collide
    /// with anything near `0xFFFFFFFF`; it finalizes to the all-zero
    /// sentinel instead, which the pair-matching stage skips.
    pub fn finalize(&self) -> Signature {
        if self.components.iter().all(|c| *c == 0) {
            return Signature::ZERO;
        }
        let mut bits = 0u32;
        for (i, component) in self.components.iter().enumerate() {
            if *component >= 0 {
                bits |= 1 << i;
            }
        }
        Signature(bits)
    }
}

/// Signature of a normalized residue string: every shingle's neighbor set
/// is processed exactly once, each word voting with its score as weight.
///
/// Pure in (residues, k, T, matrix) — worker counts and repeated runs
/// cannot change the result.
pub fn gen_signature(residues: &str, params: &SearchParams, matrix: &SubstitutionMatrix) -> Signature {
    let mut vote = FeatureVote::new();
    for shingle in tokenize(residues, params.k) {
        for_each_neighbor(shingle.letters, params.t, matrix, |word, score| {
            vote.add_feature(java_string_hash(word), score);
        });
    }
    vote.finalize()
}

/// Number of differing bits between two signatures.
pub fn hamming(a: Signature, b: Signature) -> u32 {
    (a.0 ^ b.0).count_ones()
}

/// All signatures at Hamming distance 1..=d from `sig`, without `sig`
/// itself (the pair-matching mapper emits the original separately).
/// Contains `sum_{i=1..d} C(32, i)` distinct values; empty for d = 0.
pub fn flip_set(sig: Signature, d: u32) -> Vec<Signature> {
    debug_assert!(d <= 32);
    let mut capacity = 0usize;
    for r in 1..=d {
        capacity += n_choose_r(32, r);
    }
    let mut out = Vec::with_capacity(capacity);
    let mut positions = Vec::new();
    for r in 1..=d {
        positions.clear();
        positions.extend(0..r);
        loop {
            let mask: u32 = positions.iter().fold(0, |acc, p| acc | (1 << p));
            out.push(Signature(sig.0 ^ mask));
            if !advance_combination(&mut positions, 32) {
                break;
            }
        }
    }
    out
}

fn n_choose_r(n: u64, r: u32) -> usize {
    let mut v: u64 = 1;
    for i in 0..r as u64 {
        v = v * (n - i) / (i + 1);
    }
    v as usize
}

/// Steps `positions` to the next r-combination of 0..n; false when done.
fn advance_combination(positions: &mut [u32], n: u32) -> bool {
    let r = positions.len();
    let mut i = r;
    loop {
        if i == 0 {
            return false;
        }
        i -= 1;
        if positions[i] < n - (r - i) as u32 {
            positions[i] += 1;
            for j in i + 1..r {
                positions[j] = positions[j - 1] + 1;
            }
            return true;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::ALPHABET;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn params(k: usize, t: i32) -> SearchParams {
        SearchParams::new(k, t, 0).unwrap()
    }

    /// Independent hash oracle: u64 accumulation reduced mod 2^32 at the end
    /// of each step, no two's-complement types involved.
    fn hash_oracle(word: &[u8]) -> u32 {
        let mut h: u64 = 0;
        for &b in word {
            h = (h.wrapping_mul(31) + b as u64) & 0xFFFF_FFFF;
        }
        h as u32
    }

    #[test]
    fn hash_golden_values() {
        assert_eq!(java_string_hash(b"MDE"), 76174);
        assert_eq!(java_string_hash(b"A"), 65);
        // direct evaluation of the polynomial: (77*31 + 68)*31 + 69
        assert_eq!((77i32 * 31 + 68) * 31 + 69, 76174);
    }

    #[test]
    fn hash_matches_independent_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let k = rng.gen_range(1..=8);
            let word: Vec<u8> = (0..k).map(|_| ALPHABET[rng.gen_range(0..20)]).collect();
            assert_eq!(java_string_hash(&word), hash_oracle(&word));
        }
    }

    #[test]
    fn hamming_examples() {
        assert_eq!(hamming(Signature(67585), Signature(65536)), 2);
        assert_eq!(hamming(Signature(12345), Signature(12345)), 0);
        assert_eq!(hamming(Signature(0), Signature(0xFFFF_FFFF)), 32);
    }

    #[test]
    fn flip_set_sizes() {
        let s = Signature(0xDEAD_BEEF);
        assert!(flip_set(s, 0).is_empty());
        let d1 = flip_set(s, 1);
        assert_eq!(d1.len(), 32);
        for f in &d1 {
            assert_eq!(hamming(s, *f), 1);
        }
        let d2 = flip_set(s, 2);
        assert_eq!(d2.len(), 528); // C(32,1) + C(32,2)
        let unique: std::collections::HashSet<u32> = d2.iter().map(|f| f.0).collect();
        assert_eq!(unique.len(), 528);
        for f in &d2 {
            let hd = hamming(s, *f);
            assert!((1..=2).contains(&hd));
        }
    }

    #[test]
    fn flip_set_is_exact_ball_boundary() {
        // exhaustive cross-check against popcount for a low-weight prefix
        let s = Signature(67585);
        let d2: std::collections::HashSet<u32> = flip_set(s, 2).iter().map(|f| f.0).collect();
        assert!(d2.contains(&65536)); // the worked-example flip
        for x in 0..200_000u32 {
            let expected = (1..=2).contains(&hamming(s, Signature(x)));
            assert_eq!(d2.contains(&x), expected, "x = {x}");
        }
    }

    #[test]
    fn degenerate_signatures_are_zero() {
        let m = SubstitutionMatrix::blosum62();
        // shorter than k: no shingles, no features
        assert_eq!(gen_signature("MD", &params(3, 11), &m), Signature::ZERO);
        // threshold above every self-score: no neighbor words at all
        assert_eq!(gen_signature("MDESFGLL", &params(3, 1000), &m), Signature::ZERO);
        assert_eq!(gen_signature("", &params(3, 11), &m), Signature::ZERO);
    }

    #[test]
    fn signatures_are_deterministic() {
        let m = SubstitutionMatrix::blosum62();
        let p = params(3, 13);
        let a = gen_signature("MDESFGLLWDERKQYT", &p, &m);
        let b = gen_signature("MDESFGLLWDERKQYT", &p, &m);
        assert_eq!(a, b);
        assert_ne!(a, Signature::ZERO);
    }

    #[test]
    fn worked_example_feature_fixture() {
        // Hand-worked fixture for MDESFGLL at k=3/T=13: the displayed
        // feature subset {MDE:16, MDQ:13, MDD:13, LDE:13, DES:15, ESF:15}
        // and its hash-bit rows for positions 16..=9, reproduced exactly
        // by java_string_hash:
        let feats: [(&[u8], i32); 6] = [
            (b"MDE", 16),
            (b"MDQ", 13),
            (b"MDD", 13),
            (b"LDE", 13),
            (b"DES", 15),
            (b"ESF", 15),
        ];
        let expected_rows: [(u32, [u32; 6]); 8] = [
            (16, [1, 1, 1, 1, 1, 1]),
            (15, [0, 0, 0, 0, 0, 0]),
            (14, [0, 0, 0, 0, 0, 0]),
            (13, [1, 1, 1, 1, 0, 0]),
            (12, [0, 0, 0, 0, 0, 0]),
            (11, [1, 1, 1, 0, 0, 1]),
            (10, [0, 0, 0, 1, 1, 1]),
            (9, [0, 0, 0, 0, 1, 0]),
        ];
        for (pos, row) in expected_rows {
            for (f, expected_bit) in feats.iter().zip(row) {
                let h = java_string_hash(f.0);
                assert_eq!((h >> pos) & 1, expected_bit, "word {:?} bit {pos}", f.0);
            }
        }

        // Vote-and-round over exactly these six features. The walkthrough's
        // final rendering (76890) reflects its full, un-shown feature list;
        // the displayed subset lands at Hamming distance 2 from it,
        // differing only at bits 7 and 8 which the shown rows do not pin
        // down.
        let mut vote = FeatureVote::new();
        for (w, score) in feats {
            vote.add_feature(java_string_hash(w), score);
        }
        let sig = vote.finalize();
        assert_eq!(sig, Signature(77274));
        assert_eq!(hamming(sig, Signature(76890)), 2);
        assert_eq!((sig.0 ^ 76890) & !(1 << 7 | 1 << 8), 0);
    }

    #[test]
    fn sign_flip_produces_complement_on_nonzero_votes() {
        let mut vote = FeatureVote::new();
        vote.add_feature(java_string_hash(b"MDE"), 16);
        vote.add_feature(java_string_hash(b"DES"), 15);
        vote.add_feature(java_string_hash(b"WWW"), 3);
        let components = vote.components();
        assert!(components.iter().all(|c| *c != 0), "fixture must be all-nonzero");
        let sig = vote.finalize();
        // flipping the convention (set on < 0) over the same votes
        let mut flipped = 0u32;
        for (i, c) in components.iter().enumerate() {
            if *c < 0 {
                flipped |= 1 << i;
            }
        }
        assert_eq!(flipped, !sig.0);
    }

    #[test]
    fn mean_distance_grows_with_mutation_load() {
        // Statistical shape check: more point mutations should not make
        // signatures closer on average. One adjacent-pair violation is
        // tolerated when the two means sit within one standard error.
        let m = SubstitutionMatrix::blosum62();
        let p = params(3, 13);
        let ms = [1usize, 5, 10, 20];
        let n = 1000;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1234);
        let mut sums = [0f64; 4];
        let mut sq_sums = [0f64; 4];
        for _ in 0..n {
            let base: String = (0..100)
                .map(|_| ALPHABET[rng.gen_range(0..20)] as char)
                .collect();
            let base_sig = gen_signature(&base, &p, &m);
            for (slot, m_count) in ms.iter().enumerate() {
                let mutated = crate::synth::mutate(&base, *m_count, &mut rng);
                let d = hamming(base_sig, gen_signature(&mutated, &p, &m)) as f64;
                sums[slot] += d;
                sq_sums[slot] += d * d;
            }
        }
        let means: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
        let ses: Vec<f64> = (0..4)
            .map(|i| {
                let var = (sq_sums[i] - sums[i] * sums[i] / n as f64) / (n as f64 - 1.0);
                (var / n as f64).sqrt()
            })
            .collect();
        let mut violations = 0;
        for i in 0..3 {
            if means[i + 1] < means[i] {
                violations += 1;
                let tolerance = (ses[i].powi(2) + ses[i + 1].powi(2)).sqrt();
                assert!(
                    means[i] - means[i + 1] <= tolerance,
                    "means {means:?} violate monotonicity beyond 1 SE"
                );
            }
        }
        assert!(violations <= 1, "means {means:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// s' is in flip_set(s, d) iff 1 <= hamming(s, s') <= d (d <= 2).
        #[test]
        fn flip_membership_matches_popcount(sig in any::<u32>(), probe in any::<u32>(), d in 0u32..=2) {
            let s = Signature(sig);
            let set: std::collections::HashSet<u32> =
                flip_set(s, d).iter().map(|f| f.0).collect();
            let hd = hamming(s, Signature(probe));
            prop_assert_eq!(set.contains(&probe), hd >= 1 && hd <= d);
        }

        /// {s} ∪ flip_set(s, d1) ⊆ {s} ∪ flip_set(s, d2) for d1 <= d2.
        #[test]
        fn flip_neighborhood_containment(sig in any::<u32>(), d1 in 0u32..=2, extra in 0u32..=1) {
            let s = Signature(sig);
            let d2 = d1 + extra;
            let small: std::collections::HashSet<u32> =
                flip_set(s, d1).iter().map(|f| f.0).chain([s.0]).collect();
            let large: std::collections::HashSet<u32> =
                flip_set(s, d2).iter().map(|f| f.0).chain([s.0]).collect();
            prop_assert!(small.is_subset(&large));
        }

        #[test]
        fn hamming_is_symmetric_metriclike(a in any::<u32>(), b in any::<u32>()) {
            prop_assert_eq!(hamming(Signature(a), Signature(b)), hamming(Signature(b), Signature(a)));
            prop_assert_eq!(hamming(Signature(a), Signature(a)), 0);
        }
    }
}
