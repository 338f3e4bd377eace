//! Implicit neural representations of time-varying volumes built on a
//! feature-restricted, collision-free multi-resolution 4D (Tesseract) hash
//! encoding.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`volume`] loads raw `f32` datasets, normalizes them and picks key frames.
//! 2. [`feature`] extracts a feature of interest per key frame, dilates it,
//!    builds Morton-ordered occupancy grids and the feature bounding box (FBB),
//!    and emits the training coreset.
//! 3. [`encoding`] + [`inr`] fit a shallow MLP on top of the Tesseract encoder
//!    (or one of the baseline encoders) with sparse Adam.
//! 4. [`render`] ray-marches the trained field with adaptive pacing and
//!    occupancy-based empty-space skipping.
//!
//! All numerics that touch trainable parameters are generic over [`Scalar`]
//! (`f32` or `f64`); the aliases below pin the common instantiations.

// `!(a < b)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod encoding;
pub mod error;
pub mod feature;
pub mod inr;
pub mod render;
pub mod scalar;
pub mod volume;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Tesseract encoder with single-precision tables (the checkpoint precision).
pub type TesseractEncoderF32 = encoding::TesseractEncoder<f32>;
/// Tesseract encoder with double-precision tables (gradient checking).
pub type TesseractEncoderF64 = encoding::TesseractEncoder<f64>;
pub type BaselineEncoderF32 = encoding::BaselineEncoder<f32>;
pub type BaselineEncoderF64 = encoding::BaselineEncoder<f64>;
pub type InrModelF32 = inr::InrModel<f32>;
pub type InrModelF64 = inr::InrModel<f64>;
pub type MlpF32 = inr::Mlp<f32>;
pub type MlpF64 = inr::Mlp<f64>;
