//! Quality-of-experience model: a second-degree function of view PSNR and
//! delivered frame rate, plus the bandwidth/decode arithmetic that decides
//! which frame rate a spectator actually sees.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::profiles::ProfileSpec;
use crate::scalar::Scalar;
use crate::spectator::Spectator;

/// Fraction of the screen covered by the textured reconstructions; the
/// rest is rendered losslessly, so texture error is diluted by this factor.
pub fn default_screen_fraction<S: Scalar>() -> S {
    S::from_f64_c(0.03)
}

/// One stream as actually delivered to a spectator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DeliveredStream<S: Scalar> {
    pub profile: usize,
    pub fps: S,
    /// Fraction of the nominal bandwidth shed: 1 - fps / production_fps.
    pub reduction: S,
}

/// PSNR of the rendered view when only `screen_fraction` of the pixels
/// carry texture error: an offset of -10*log10(fraction) dB.
pub fn view_psnr<S: Scalar>(texture_psnr: S, screen_fraction: S) -> Result<S, Error> {
    if screen_fraction <= S::zero() || screen_fraction > S::one() {
        return Err(Error::config(format!(
            "screen fraction must lie in (0, 1], got {screen_fraction}"
        )));
    }
    let ten = S::from_f64_c(10.0);
    Ok(texture_psnr - ten * screen_fraction.log10())
}

/// The QoE score for a single stream at the given view PSNR and frame rate.
pub fn qoe_single<S: Scalar>(psnr: S, fr: S) -> S {
    let c0 = S::from_f64_c(-8.97);
    let c_fr = S::from_f64_c(0.056);
    let c_psnr = S::from_f64_c(0.41);
    let c_psnr2 = S::from_f64_c(0.0038);
    let c_fr2 = S::from_f64_c(0.001);
    let c_cross = S::from_f64_c(0.00079);
    c0 + c_fr * fr + c_psnr * psnr - c_psnr2 * psnr * psnr - c_fr2 * fr * fr + c_cross * fr * psnr
}

/// Frame rate at which a set of per-player profiles can be delivered to a
/// receiver with the given bandwidth and decode caps. All streams share one
/// rate: the minimum of the production rate, the bandwidth split across the
/// combined frame sizes, and the slowest decode cap.
fn shared_fps<S: Scalar>(
    bandwidth: S,
    decode_cap: impl Fn(usize) -> S,
    combo: &[usize],
    profiles: &[ProfileSpec<S>],
    production_fps: S,
) -> S {
    let mut total_frame = S::zero();
    let mut cap = production_fps;
    for &n in combo {
        total_frame += profiles[n].frame_size;
        let c = decode_cap(n);
        if c < cap {
            cap = c;
        }
    }
    let bw_rate = bandwidth / total_frame;
    if bw_rate < cap {
        cap = bw_rate;
    }
    cap
}

/// Delivered streams for a per-player profile choice, or `None` when the
/// choice is infeasible (a non-skippable profile cannot run below the
/// production rate).
pub fn effective_framerate<S: Scalar>(
    spectator: &Spectator<S>,
    combo: &[usize],
    profiles: &[ProfileSpec<S>],
    production_fps: S,
) -> Option<Vec<DeliveredStream<S>>> {
    let fps = shared_fps(
        spectator.bandwidth_now,
        |n| spectator.decode_cap(n),
        combo,
        profiles,
        production_fps,
    );
    if fps < production_fps && combo.iter().any(|&n| !profiles[n].skippable) {
        return None;
    }
    let reduction = S::one() - fps / production_fps;
    Some(
        combo
            .iter()
            .map(|&n| DeliveredStream { profile: n, fps, reduction })
            .collect(),
    )
}

/// Mean QoE over the delivered per-player streams.
pub fn spectator_qoe<S: Scalar>(
    delivered: &[DeliveredStream<S>],
    profiles: &[ProfileSpec<S>],
    screen_fraction: S,
) -> S {
    let sum: S = delivered
        .iter()
        .map(|d| {
            let psnr = view_psnr(profiles[d.profile].texture_psnr, screen_fraction)
                .expect("screen fraction validated at construction");
            qoe_single(psnr, d.fps)
        })
        .sum();
    sum / S::from_f64_c(delivered.len() as f64)
}

/// Iterate every per-player profile combination (profiles^players), in
/// lexicographic order.
pub fn profile_combos(n_profiles: usize, players: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = n_profiles.checked_pow(players as u32).expect("combo count overflow");
    (0..total).map(move |mut idx| {
        let mut combo = vec![0usize; players];
        for slot in combo.iter_mut().rev() {
            *slot = idx % n_profiles;
            idx /= n_profiles;
        }
        combo
    })
}

/// Best QoE this spectator could get from any feasible profile choice,
/// ignoring costs and GPU limits. Skippable profiles keep this well-defined
/// for any positive bandwidth.
pub fn max_feasible_qoe<S: Scalar>(
    spectator: &Spectator<S>,
    profiles: &[ProfileSpec<S>],
    players: usize,
    production_fps: S,
    screen_fraction: S,
) -> S {
    let mut best = S::neg_infinity();
    for combo in profile_combos(profiles.len(), players) {
        if let Some(delivered) = effective_framerate(spectator, &combo, profiles, production_fps) {
            let q = spectator_qoe(&delivered, profiles, screen_fraction);
            if q > best {
                best = q;
            }
        }
    }
    best
}
