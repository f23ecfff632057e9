//! Seed derivation.
//!
//! Every random stream in an experiment is a ChaCha8 generator seeded with
//! `derive_seed(root, tag, index)`, where `tag` names the purpose of the
//! stream and `index` distinguishes its instances (candidate number,
//! replication number). Streams never share state, so the order in which
//! candidates are trained does not affect any result.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TAG_CANDIDATE_COUNT: u64 = 1;
pub const TAG_CANDIDATE_PICK: u64 = 2;
pub const TAG_SUBSET: u64 = 3;
pub const TAG_TRAIN: u64 = 4;
pub const TAG_FINAL: u64 = 5;
pub const TAG_REPLICATION: u64 = 6;
pub const TAG_TASK: u64 = 7;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(root: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(root) ^ tag) ^ index)
}

pub fn stream(root: u64, tag: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, tag, index))
}
