//! Train tracks on punctured disks and the maps they carry.

pub mod arith;
pub mod census;
pub mod cli;
pub mod cover;
pub mod maps;
pub mod matrix;
pub mod poly;
pub mod splitting;
pub mod tracks;
