//! SCET: a lightweight single-image super-resolution network built on a
//! small CPU tensor library with reverse-mode autodiff.
//!
//! - [`tensor`]: tensors, kernels and the autodiff tape
//! - [`arch`]: network blocks, the full model, parameter registry, checkpoints
//! - [`audit`]: parameter and Multi-Adds accounting
//! - [`imaging`]: PNG I/O, bicubic degradation, Y-channel PSNR/SSIM
//! - [`training`]: L1 objective, Adam, cosine schedule, patch sampling, training loop
//! - [`pipeline`]: degrade, super-resolve and score one image

pub mod tensor;
pub mod arch;
pub mod audit;
pub mod imaging;
pub mod training;
pub mod pipeline;
