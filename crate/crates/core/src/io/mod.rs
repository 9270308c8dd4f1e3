//! File formats: OBJ and PLY meshes/point sets, FMGD grids, layout secrets.

mod fmgd;
mod obj;
mod ply;
mod secret;

pub use fmgd::{read_grid, read_grid_bytes, write_grid, write_grid_bytes, FMGD_MAGIC, FMGD_VERSION};
pub use obj::{read_obj, read_obj_str, write_obj, write_obj_string};
pub use ply::{read_ply_points, write_ply_points};
pub use secret::{fingerprint_bytes, fingerprint_file, LayoutSecret};
