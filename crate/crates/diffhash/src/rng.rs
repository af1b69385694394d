//! Seeded randomness. All randomness in this crate flows through ChaCha8
//! seeded from an explicit `u64`, which is documented-deterministic across
//! platforms and releases of the `rand_chacha` crate.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub(crate) fn seeded(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// Deterministic partial Fisher-Yates: shuffles the first `take` slots and
/// truncates. `take == items.len()` yields a full shuffle.
pub(crate) fn shuffle_take<T>(items: &mut Vec<T>, take: usize, rng: &mut ChaCha8Rng) {
    let len = items.len();
    assert!(take <= len);
    for i in 0..take {
        let j = rng.gen_range(i..len);
        items.swap(i, j);
    }
    items.truncate(take);
}
