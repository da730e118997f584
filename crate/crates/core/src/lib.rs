//! Acoustic feature extraction and linear classification of sustained vowel
//! recordings.

pub mod contour;
pub mod dataset;
pub mod dsp;
pub mod error;
pub mod extract;
pub mod featureset;
pub mod harmonics;
pub mod model;
pub mod noise;
pub mod perturb;
pub mod pitch;
pub mod select;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
