//! Phantoms, noise simulation and file formats.

mod history;
mod io;
mod noise;
mod phantom;

pub use history::{read_history, read_history_meta, write_history, write_history_meta, HISTORY_HEADER};
pub use io::{
    read_sinogram, read_volume, read_volume_with_meta, write_sinogram, write_volume,
    write_volume_with_meta, Endianness, Metadata, SinogramFile, MAGIC,
};
pub use noise::{add_noise, standard_normal_samples, NoiseSpec, RNG_ID};
pub use phantom::{generate_phantom, Ellipsoid, PhantomSpec};
