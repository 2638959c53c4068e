//! Binaural room-acoustics simulation and learned sound-source
//! localization.
//!
//! The crate covers the full pipeline:
//!
//! 1. **Room simulation** — specular reflections via image sources
//!    ([`image_source`]), frequency-dependent wall materials ([`room`]),
//!    a stochastic diffuse-energy pass ([`rain`]), and assembly into
//!    binaural impulse responses through a spherical head model
//!    ([`head`], [`render`]).
//! 2. **Feature extraction** — interaural level and phase difference
//!    vectors from probe-noise spectrograms ([`stft`], [`features`]).
//! 3. **Learning** — a mixture of local affine maps fit with EM, inverted
//!    probabilistically to predict source direction, range, and wall
//!    absorption from features ([`gllim`]).
//! 4. **Datasets and experiments** — scene grids, material registries,
//!    parallel dataset generation, and an on-disk container ([`dataset`]).

pub mod config;
pub mod dataset;
pub mod decay;
pub mod dsp;
pub mod error;
pub mod experiment;
pub mod features;
pub mod gllim;
pub mod head;
pub mod image_source;
pub mod io;
pub mod math;
pub mod rain;
pub mod render;
pub mod room;
pub mod stft;

pub use error::{Error, Result};
