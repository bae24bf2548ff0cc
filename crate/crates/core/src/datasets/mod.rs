mod csv;
mod idx;
mod synthetic;

pub use csv::{from_csv, read_csv, to_csv, write_csv};
pub use idx::{encode_idx, load_idx, parse_idx, save_idx, IDX_UBYTE};
pub use synthetic::{
    gen_factor_grid, gen_linear_manifold, gen_sinusoidal_manifold, generate, FactorDataset, SyntheticKind,
    SyntheticSpec, MAX_GRID_SIZE,
};
