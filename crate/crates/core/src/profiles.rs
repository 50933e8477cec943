//! Transcoding profile definitions and the built-in profile set.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::scalar::Scalar;

/// Compute node a transcoder of this profile runs on. The production stream
/// needs no transcoder at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    None,
    Cpu,
    Gpu,
}

/// One transcoding profile: an output variant of a player's stream.
///
/// `frame_size` is kilobytes per frame, `texture_psnr` is the texture
/// quality in decibels. Still-image coded profiles (and the production
/// stream) tolerate frame dropping; video profiles do not and must be
/// consumed at the full production frame rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound = "")]
pub struct ProfileSpec<S: Scalar> {
    pub name: String,
    pub node_kind: NodeKind,
    /// Average frame size in KB.
    pub frame_size: S,
    /// Average texture PSNR in dB.
    pub texture_psnr: S,
    /// Texture resolution in pixels.
    pub resolution: (u32, u32),
    /// Mesh geometry bit depth (metadata, no behavioral effect).
    pub geometry_bits: u32,
    /// Mesh blend-weight bit depth (metadata, no behavioral effect).
    pub blend_bits: u32,
    pub skippable: bool,
}

impl<S: Scalar> ProfileSpec<S> {
    /// Outbound bandwidth in KB/s when the stream is consumed at the full
    /// production frame rate.
    pub fn nominal_bandwidth(&self, production_fps: S) -> S {
        self.frame_size * production_fps
    }

    pub fn is_production(&self) -> bool {
        self.node_kind == NodeKind::None
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.frame_size <= S::zero() {
            return Err(Error::config(format!(
                "profile {}: frame_size must be positive",
                self.name
            )));
        }
        if self.texture_psnr <= S::zero() {
            return Err(Error::config(format!(
                "profile {}: texture_psnr must be positive",
                self.name
            )));
        }
        if !self.skippable && self.node_kind != NodeKind::Gpu {
            return Err(Error::config(format!(
                "profile {}: non-skippable profiles require a GPU node",
                self.name
            )));
        }
        Ok(())
    }
}

fn profile<S: Scalar>(
    name: &str,
    node_kind: NodeKind,
    frame_kb: f64,
    psnr_db: f64,
    resolution: (u32, u32),
    geometry_bits: u32,
    blend_bits: u32,
    skippable: bool,
) -> ProfileSpec<S> {
    ProfileSpec {
        name: name.to_string(),
        node_kind,
        frame_size: S::from_f64_c(frame_kb),
        texture_psnr: S::from_f64_c(psnr_db),
        resolution,
        geometry_bits,
        blend_bits,
        skippable,
    }
}

/// The built-in six-profile set: the untranscoded production stream, two
/// still-image profiles transcoded on CPU, and three video profiles that
/// need a GPU. Reference data; simulations never mutate it.
pub fn build_default_profiles<S: Scalar>() -> Vec<ProfileSpec<S>> {
    vec![
        profile("Production", NodeKind::None, 200.0, 32.02, (960, 540), 10, 6, true),
        profile("Images Mid", NodeKind::Cpu, 170.0, 28.78, (864, 486), 9, 5, true),
        profile("Images Low", NodeKind::Cpu, 135.0, 28.02, (768, 432), 8, 4, true),
        profile("Video Low", NodeKind::Gpu, 55.0, 28.66, (960, 540), 8, 4, false),
        profile("Video Mid", NodeKind::Gpu, 70.0, 30.00, (960, 540), 9, 5, false),
        profile("Video High", NodeKind::Gpu, 85.0, 31.59, (960, 540), 10, 6, false),
    ]
}

/// Index of the production profile in a profile list.
pub fn production_index<S: Scalar>(profiles: &[ProfileSpec<S>]) -> Result<usize, Error> {
    let mut found = None;
    for (i, p) in profiles.iter().enumerate() {
        if p.is_production() {
            if found.is_some() {
                return Err(Error::config("multiple production profiles defined"));
            }
            found = Some(i);
        }
    }
    found.ok_or_else(|| Error::config("no production profile (node_kind = none) defined"))
}
