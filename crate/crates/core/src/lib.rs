#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod audio;
pub mod classifier;
pub mod data;
pub mod error;
pub mod fft;
pub mod generator;
pub mod graph;
pub mod inversion;
pub mod kernels;
pub mod lbfgs;
pub mod math;
pub mod metrics;
pub mod nn;
pub mod profile;
pub mod resnet;
pub mod tensor;
