//! Input encodings: multiresolution 2-D hash grids composed into a
//! triplane encoder, and sinusoidal frequency lifting for directions and
//! scalar condition signals.

pub mod freq;
pub mod hash;

pub use freq::{freq_dim, frequency_encode, frequency_encode_scalar};
pub use hash::{
    hash_index, HashGridConfig, PlaneHashTable, PlaneId, PlaneQuery, TriplaneEncoder,
};
