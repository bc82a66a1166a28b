//! Offset-corrected RGB.
//!
//! Pixels of one matte material trace a straight line in linear RGB as the
//! direct illumination on them varies. Ambient (environment) light shifts
//! that line away from the origin, so brightness-normalizing color spaces
//! (chromaticity, hue, saturation) stop being shadow invariant. This crate
//! estimates the offset from a user-selected region, removes it with
//! `(ρ - ε) / (1 - ε)`, and provides the tooling around that step: a
//! spectral bi-illuminant scene simulator, color-line geometry, color-space
//! conversion, and downstream segmentation / edge demos.

pub mod color;
pub mod demos;
pub mod error;
pub mod image;
pub mod offset;
pub mod spectral;
mod vec3;

pub use error::{Error, Result};
pub use image::{make_mask_rect, ChannelImage, LinearImage, Rect, RegionMask};
pub use offset::{correct, estimate_epsilon, uncorrect, ColorLine, Epsilon, Offset};
