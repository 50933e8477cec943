//! Named, splittable random streams derived statelessly from a master seed.
//!
//! Every random mechanism draws from its own `(kind, id, step)` stream, so
//! toggling one mechanism never perturbs another's draws, a session replays
//! bit-identically from its seed, and paired runs that share a seed see
//! identical arrival and fluctuation randomness regardless of how their
//! populations diverge.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The independent randomness consumers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    /// Per-step arrival counts.
    Arrivals,
    /// Per-spectator, per-step quit draws.
    Quits,
    /// Per-spectator, per-step bandwidth/processing fluctuations.
    Fluctuations,
    /// Per-spectator device class draw at spawn time.
    ClassDraw,
    /// Synthetic instance generation for solver checks.
    Instances,
}

impl StreamKind {
    fn tag(self) -> u64 {
        match self {
            StreamKind::Arrivals => 0x41,
            StreamKind::Quits => 0x51,
            StreamKind::Fluctuations => 0x46,
            StreamKind::ClassDraw => 0x43,
            StreamKind::Instances => 0x49,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix `(master, tag, a, b)` into one well-distributed 64-bit seed.
pub fn derive_seed(master: u64, tag: u64, a: u64, b: u64) -> u64 {
    let mut state = master;
    let mut out = splitmix64(&mut state);
    state ^= tag.wrapping_mul(0xD6E8_FEB8_6659_FD93);
    out ^= splitmix64(&mut state);
    state ^= a.wrapping_mul(0xCA5A_8263_9512_1157);
    out ^= splitmix64(&mut state);
    state ^= b.wrapping_mul(0x9FB2_1C65_1E98_DF25);
    out ^ splitmix64(&mut state)
}

/// The random stream for one `(kind, id, step)` cell of a session.
pub fn stream(master_seed: u64, kind: StreamKind, id: u64, step: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master_seed, kind.tag(), id, step))
}
