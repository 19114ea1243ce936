//! Random streams keyed by (master seed, replicate, subject).
//!
//! Each replicate gets its own ChaCha8 key derived from the master seed and
//! the replicate index; each subject reads from its own stream of that key.
//! Results therefore do not depend on which thread simulates which replicate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SubjectRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn replicate_key(master_seed: u64, replicate: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(replicate.wrapping_add(0x632b_e59b_d9b4_e019)))
}

pub fn subject_rng(master_seed: u64, replicate: u64, subject: u64) -> SubjectRng {
    let mut rng = ChaCha8Rng::seed_from_u64(replicate_key(master_seed, replicate));
    rng.set_stream(subject);
    rng
}
