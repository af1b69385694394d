//! Applying trained models: real-valued projections, packed binary codes,
//! Hamming distance, and k-nearest-neighbor matching.

use std::fs;
use std::path::Path;

use crate::dataset::{DescriptorSet, PairSet};
use crate::error::{Error, Result};
use crate::kernels;
use crate::model::HashModel;

/// Packed m-bit binary code. Bit `j` lives at bit `j % 64` of word
/// `j / 64`; a set bit is hash coordinate +1. Unused high bits of the last
/// word are zero, so whole-word XOR and equality are meaningful.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitHash {
    m: usize,
    words: Vec<u64>,
}

impl BitHash {
    pub fn from_bits(bits: &[bool]) -> BitHash {
        let m = bits.len();
        let mut words = vec![0u64; m.div_ceil(64)];
        for (j, &b) in bits.iter().enumerate() {
            if b {
                words[j / 64] |= 1u64 << (j % 64);
            }
        }
        BitHash { m, words }
    }

    pub fn from_words(m: usize, words: Vec<u64>) -> Result<BitHash> {
        if m == 0 {
            return Err(Error::invalid("bit count must be >= 1"));
        }
        if words.len() != m.div_ceil(64) {
            return Err(Error::invalid(format!(
                "{} words cannot hold {m} bits",
                words.len()
            )));
        }
        if !m.is_multiple_of(64) {
            let mask = !0u64 << (m % 64);
            if words[words.len() - 1] & mask != 0 {
                return Err(Error::invalid("unused high bits must be zero"));
            }
        }
        Ok(BitHash { m, words })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn bit(&self, j: usize) -> bool {
        assert!(j < self.m, "bit index out of range");
        self.words[j / 64] >> (j % 64) & 1 == 1
    }
}

/// Real-valued projections of a descriptor before thresholding: `P·x` for
/// the linear model, `B·(k(x₁,x) … k(x_l,x))ᵀ` for the kernel model.
pub fn project(model: &HashModel, x: &[f32]) -> Result<Vec<f64>> {
    if x.len() != model.input_dim() {
        return Err(Error::invalid(format!(
            "descriptor dimension {} does not match model dimension {}",
            x.len(),
            model.input_dim()
        )));
    }
    let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    match model {
        HashModel::Linear(m) => Ok(m.projection.mul_vec(&xf)),
        HashModel::Kernel(m) => {
            let mut kappa = vec![0.0f64; m.l];
            for (i, k) in kappa.iter_mut().enumerate() {
                *k = kernels::kernel_eval(&m.kernel, m.basis.row(i), &xf)?;
            }
            Ok(m.coefficients.mul_vec(&kappa))
        }
    }
}

/// Encodes one descriptor: bit `i` is set iff `project(x)ᵢ + aᵢ >= 0`.
pub fn encode(model: &HashModel, x: &[f32]) -> Result<BitHash> {
    let proj = project(model, x)?;
    let bits: Vec<bool> = proj
        .iter()
        .zip(model.thresholds())
        .map(|(p, a)| p + a >= 0.0)
        .collect();
    Ok(BitHash::from_bits(&bits))
}

/// Encodes every descriptor in input order.
pub fn encode_set(model: &HashModel, set: &DescriptorSet) -> Result<Vec<BitHash>> {
    (0..set.count()).map(|i| encode(model, set.row(i))).collect()
}

/// Hamming distance: popcount of XOR, word by word.
pub fn hamming(a: &BitHash, b: &BitHash) -> Result<u32> {
    if a.m != b.m {
        return Err(Error::invalid(format!(
            "hash lengths differ: {} vs {}",
            a.m, b.m
        )));
    }
    Ok(xor_popcount(&a.words, &b.words))
}

#[inline]
fn xor_popcount(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

/// The `k` nearest codes, ascending by distance with ties broken by
/// ascending index.
pub fn knn(query: &BitHash, db: &[BitHash], k: usize) -> Result<Vec<(usize, u32)>> {
    if k > db.len() {
        return Err(Error::invalid(format!(
            "k={k} exceeds database size {}",
            db.len()
        )));
    }
    for code in db {
        if code.m != query.m {
            return Err(Error::invalid("mixed hash lengths in database"));
        }
    }
    let mut ranked: Vec<(u32, usize)> = db
        .iter()
        .enumerate()
        .map(|(i, code)| (xor_popcount(&query.words, &code.words), i))
        .collect();
    ranked.sort_unstable();
    ranked.truncate(k);
    Ok(ranked.into_iter().map(|(d, i)| (i, d)).collect())
}

/// Hamming distance per pair, with pair indices resolved against `codes`.
pub fn pair_distances(codes: &[BitHash], pairs: &PairSet) -> Result<Vec<u32>> {
    pairs
        .pairs()
        .iter()
        .map(|&(i, j)| {
            if i >= codes.len() || j >= codes.len() {
                return Err(Error::invalid(format!(
                    "pair ({i}, {j}) out of range for {} codes",
                    codes.len()
                )));
            }
            hamming(&codes[i], &codes[j])
        })
        .collect()
}

const DHB1_MAGIC: &[u8; 4] = b"DHB1";

/// Writes packed codes: magic `DHB1`, little-endian `u32` m and `u64` N,
/// then `N·⌈m/64⌉` little-endian `u64` words.
pub fn save_hashes(path: impl AsRef<Path>, codes: &[BitHash]) -> Result<()> {
    let path = path.as_ref();
    let first = codes
        .first()
        .ok_or_else(|| Error::invalid("refusing to write an empty hash file"))?;
    let m = first.m;
    if codes.iter().any(|c| c.m != m) {
        return Err(Error::invalid("mixed hash lengths"));
    }
    let words_per = m.div_ceil(64);
    let mut bytes = Vec::with_capacity(16 + 8 * words_per * codes.len());
    bytes.extend_from_slice(DHB1_MAGIC);
    bytes.extend_from_slice(&(m as u32).to_le_bytes());
    bytes.extend_from_slice(&(codes.len() as u64).to_le_bytes());
    for code in codes {
        for w in &code.words {
            bytes.extend_from_slice(&w.to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_hashes(path: impl AsRef<Path>) -> Result<Vec<BitHash>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 || &bytes[0..4] != DHB1_MAGIC {
        return Err(Error::malformed(path, "missing DHB1 header"));
    }
    let m = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    if m == 0 || count == 0 {
        return Err(Error::malformed(path, "DHB1 header declares an empty set"));
    }
    let words_per = m.div_ceil(64);
    let expected = 16 + 8 * words_per * count;
    if bytes.len() != expected {
        return Err(Error::malformed(
            path,
            format!("expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    let mut codes = Vec::with_capacity(count);
    let mut offset = 16;
    for _ in 0..count {
        let words: Vec<u64> = (0..words_per)
            .map(|w| {
                let at = offset + 8 * w;
                u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap())
            })
            .collect();
        offset += 8 * words_per;
        codes.push(
            BitHash::from_words(m, words).map_err(|e| Error::malformed(path, e.to_string()))?,
        );
    }
    Ok(codes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use crate::linalg::Matrix;
    use crate::train_kernel::KernelHashModel;
    use crate::train_linear::LinearHashModel;
    use rand::{Rng, SeedableRng};

    fn identity_model(n: usize) -> HashModel {
        HashModel::Linear(LinearHashModel {
            m: n,
            n,
            alpha: 25.0,
            projection: Matrix::identity(n),
            thresholds: vec![0.0; n],
        })
    }

    fn rand_code(m: usize, rng: &mut rand_chacha::ChaCha8Rng) -> BitHash {
        let bits: Vec<bool> = (0..m).map(|_| rng.gen_bool(0.5)).collect();
        BitHash::from_bits(&bits)
    }

    #[test]
    fn identity_projection_passes_through() {
        let model = identity_model(2);
        let p = project(&model, &[3.0, -4.0]).unwrap();
        assert_eq!(p, vec![3.0, -4.0]);
    }

    #[test]
    fn kernel_projection_hand_computed() {
        let model = HashModel::Kernel(KernelHashModel {
            m: 2,
            l: 2,
            n: 2,
            alpha: 25.0,
            seed: 0,
            kernel: KernelSpec::Linear,
            basis: Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
            coefficients: Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap(),
            thresholds: vec![0.0, 0.0],
        });
        // κ(x) = (5, 7), so B·κ = (19, 43).
        let p = project(&model, &[5.0, 7.0]).unwrap();
        assert_eq!(p, vec![19.0, 43.0]);
    }

    #[test]
    fn projection_is_linear_in_coefficient_rows() {
        let mut km = KernelHashModel {
            m: 2,
            l: 3,
            n: 2,
            alpha: 25.0,
            seed: 0,
            kernel: KernelSpec::Linear,
            basis: Matrix::from_rows(&[vec![1.0, 0.5], vec![-0.5, 1.0], vec![0.25, 0.25]])
                .unwrap(),
            coefficients: Matrix::from_rows(&[vec![1.0, 0.0, 0.5], vec![0.5, -1.0, 0.2]])
                .unwrap(),
            thresholds: vec![0.0, 0.0],
        };
        let x = [0.3f32, -1.2];
        let before = project(&HashModel::Kernel(km.clone()), &x).unwrap();
        for v in km.coefficients.row_mut(1) {
            *v *= 2.0;
        }
        let after = project(&HashModel::Kernel(km), &x).unwrap();
        assert_eq!(after[0], before[0]);
        assert_eq!(after[1], 2.0 * before[1]);
    }

    #[test]
    fn sign_convention_maps_zero_to_one() {
        let model = identity_model(3);
        let code = encode(&model, &[1.0, -1.0, 0.0]).unwrap();
        assert!(code.bit(0));
        assert!(!code.bit(1));
        assert!(code.bit(2));
    }

    #[test]
    fn thresholds_matching_negated_projection_set_all_bits() {
        let HashModel::Linear(mut lm) = identity_model(3) else {
            panic!()
        };
        let x = [0.7f32, -2.5, 31.0];
        lm.thresholds = x.iter().map(|&v| -(v as f64)).collect();
        let code = encode(&HashModel::Linear(lm), &x).unwrap();
        assert!((0..3).all(|j| code.bit(j)));
    }

    #[test]
    fn encode_matches_unpacked_reference() {
        let model = identity_model(5);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x: Vec<f32> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let code = encode(&model, &x).unwrap();
            let proj = project(&model, &x).unwrap();
            for (j, &p) in proj.iter().enumerate() {
                assert_eq!(code.bit(j), p >= 0.0);
            }
        }
    }

    #[test]
    fn hamming_identities() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let h = rand_code(130, &mut rng);
        assert_eq!(hamming(&h, &h).unwrap(), 0);
        let complement_bits: Vec<bool> = (0..130).map(|j| !h.bit(j)).collect();
        let c = BitHash::from_bits(&complement_bits);
        assert_eq!(hamming(&h, &c).unwrap(), 130);
    }

    #[test]
    fn hamming_hand_example() {
        let to_bits = |byte: u8| (0..8).map(|j| byte >> j & 1 == 1).collect::<Vec<bool>>();
        let a = BitHash::from_bits(&to_bits(0b1011_0010));
        let b = BitHash::from_bits(&to_bits(0b0011_1010));
        assert_eq!(hamming(&a, &b).unwrap(), 2);
    }

    #[test]
    fn hamming_equals_sign_correlation_formula() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for m in [1usize, 63, 64, 65, 512] {
            for _ in 0..20 {
                let a: Vec<i64> = (0..m).map(|_| if rng.gen_bool(0.5) { 1 } else { -1 }).collect();
                let b: Vec<i64> = (0..m).map(|_| if rng.gen_bool(0.5) { 1 } else { -1 }).collect();
                let ha = BitHash::from_bits(&a.iter().map(|&v| v > 0).collect::<Vec<_>>());
                let hb = BitHash::from_bits(&b.iter().map(|&v| v > 0).collect::<Vec<_>>());
                let corr: i64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
                let want = (m as i64 - corr) / 2; // m/2 - corr/2, exactly
                assert_eq!(hamming(&ha, &hb).unwrap() as i64, want);
            }
        }
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let a = BitHash::from_bits(&[true; 8]);
        let b = BitHash::from_bits(&[true; 9]);
        assert!(hamming(&a, &b).is_err());
        assert!(knn(&a, &[b], 1).is_err());
    }

    #[test]
    fn knn_finds_self_and_ranks_fully() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let db: Vec<BitHash> = (0..50).map(|_| rand_code(64, &mut rng)).collect();
        let hits = knn(&db[17], &db, 1).unwrap();
        assert_eq!(hits[0], (17, 0));

        let full = knn(&db[0], &db, db.len()).unwrap();
        let mut indices: Vec<usize> = full.iter().map(|&(i, _)| i).collect();
        indices.sort_unstable();
        assert_eq!(indices, (0..50).collect::<Vec<_>>());
        assert!(knn(&db[0], &db, 51).is_err());
    }

    #[test]
    fn knn_matches_naive_sort_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let db: Vec<BitHash> = (0..1000).map(|_| rand_code(96, &mut rng)).collect();
        let query = rand_code(96, &mut rng);
        let got = knn(&query, &db, 25).unwrap();

        let mut oracle: Vec<(u32, usize)> = db
            .iter()
            .enumerate()
            .map(|(i, c)| (hamming(&query, c).unwrap(), i))
            .collect();
        oracle.sort();
        let want: Vec<(usize, u32)> = oracle.into_iter().take(25).map(|(d, i)| (i, d)).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn dhb1_round_trip_bit_identical() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let codes: Vec<BitHash> = (0..10).map(|_| rand_code(100, &mut rng)).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("codes.dhb");
        save_hashes(&path, &codes).unwrap();
        let loaded = load_hashes(&path).unwrap();
        assert_eq!(codes, loaded);
        let on_disk = std::fs::read(&path).unwrap();
        assert_eq!(on_disk.len(), 16 + 10 * 8 * 100usize.div_ceil(64));
        let path2 = dir.path().join("codes2.dhb");
        save_hashes(&path2, &loaded).unwrap();
        assert_eq!(on_disk, std::fs::read(&path2).unwrap());
    }

    #[test]
    fn dirty_high_bits_rejected() {
        assert!(BitHash::from_words(4, vec![0b10000]).is_err());
        assert!(BitHash::from_words(4, vec![0b1111]).is_ok());
    }
}
