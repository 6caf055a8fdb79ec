//! Link-level simulation and alternating optimization for a point-to-point
//! MIMO link assisted by a dual-polarized intelligent reflecting surface.

pub mod channel;
pub mod ao;
pub mod bench;
pub mod error;
pub mod mimo;
pub mod lowsnr;
pub mod numkit;
pub mod sdr;

pub use error::{Error, Result};
