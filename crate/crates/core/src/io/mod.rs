//! File formats: PLY point sets, Netpbm/PFM images, the binary density
//! field and trajectory dumps.

mod field;
mod image;
mod ply;
mod trajectory;

pub use field::{encode_field, parse_field, read_field, write_field};
pub use image::{
    encode_pfm, encode_pgm, encode_ppm, parse_pfm, parse_pgm, parse_ppm, read_pfm, read_pgm, read_ppm,
    write_pfm, write_pgm, write_ppm, PFM_INFINITY,
};
pub use ply::{
    encode_gaussian_ply, encode_gic_ply, encode_points_ply, parse_gaussian_ply, parse_gic_ply, parse_ply,
    read_gaussian_ply, read_gic_ply, read_points_ply, write_gaussian_ply, write_gic_ply, write_points_ply,
    PlyFormat, PlyTable,
};
pub use trajectory::{load_trajectory, save_trajectory, FrameEntry, TrajectoryManifest};
