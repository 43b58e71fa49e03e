pub mod dynamics;
pub mod error;
pub mod kernels;
pub mod svm;
pub mod ecosvm;
pub mod svdd;
pub mod data;
pub mod cli;
