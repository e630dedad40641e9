//! Deterministic seed derivation.
//!
//! Every random decision in the workspace flows from an explicit base seed.
//! Sub-seeds (per instance, per stage, per retry) are derived with a
//! splitmix64 finalizer so that streams are decorrelated but reproducible.

/// splitmix64 finalization step.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a sub-seed from a base seed and two salts.
///
/// Used for per-instance seeds (`salt_a` = instance index), per-stage seeds
/// (`salt_a` = checkpoint index) and retry seeds (`salt_b` = attempt number).
pub fn mix_seed(base: u64, salt_a: u64, salt_b: u64) -> u64 {
    splitmix(splitmix(base ^ splitmix(salt_a)) ^ splitmix(salt_b.wrapping_add(1)))
}
