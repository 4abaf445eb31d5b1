//! Core numerics for a desk-scale study of detecting generated images by
//! passing real images through a generator's final component.
//!
//! Everything here is `no_std` + `alloc`: synthetic corpora, the three
//! reconstruction channels, the fixed embedder, k-medoids selection, the
//! detector head with its training loop and metrics, and the generator
//! taxonomy. File formats, parallelism and the CLI live in the `tracelab`
//! crate.

#![no_std]
extern crate alloc;

use alloc::string::String;

pub mod channels;
pub mod corpus;
pub mod dct;
pub mod detector;
pub mod embedder;
pub mod error;
pub mod image;
pub mod linalg;
pub mod property1;
pub mod rng;
pub mod selection;
pub mod taxonomy;

pub use error::{Error, Result};
pub use image::Image;

/// Lowercase hexadecimal encoding.
pub fn hex(bytes: &[u8]) -> String {
    use core::fmt::Write;
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}
