//! Trainable nonlinear reaction-diffusion (TRD) for image restoration.
//!
//! A TRD model is a short cascade of diffusion stages. Each stage filters the
//! current estimate with a bank of zero-mean linear filters, passes the
//! responses through per-filter influence functions parameterized by radial
//! basis functions, and feeds the result back through the 180° rotated
//! filters. A reaction term pulls the estimate towards the observation
//! (Gaussian denoising) or a projection onto the JPEG quantization box keeps
//! it consistent with the compressed data (deblocking).
//!
//! Module map:
//!
//! - [`imgproc`]: images, boundary-aware correlation, block DCT, PSNR
//! - [`influence`]: RBF influence functions and their penalties
//! - [`model`]: DCT filter basis, stage parameters, plain initialization
//! - [`diffusion`]: Perona-Malik baseline and TRD stages, inference
//! - [`jpegsim`]: quantization tables, JPEG degradation and the box `Q`
//! - [`training`]: loss, gradients, L-BFGS, gradient checking, drivers
//!
//! The crate is `no_std` (with `alloc`) when built without the default
//! `std` feature. The `parallel` feature evaluates training samples and
//! per-filter terms on the rayon thread pool; reductions always run in a
//! fixed order so results do not depend on the thread count.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod diffusion;
mod error;
pub mod imgproc;
pub mod influence;
pub mod jpegsim;
pub mod model;
mod par;
pub mod training;

pub use error::{Error, Result};
pub use imgproc::{BoundaryMode, Image, Kernel};
