//! Portable artifacts: JSON reports and CSV tables.
//!
//! Floats in CSV are written with 17 significant digits; JSON uses the
//! shortest representation that reads back to the same value.

pub mod matrix_rows;
mod report;
mod tables;

pub use report::{from_json, to_json, DesignReport};
pub use tables::{
    read_grid_csv, read_polyline_csv, read_tradeoff_csv, write_grid_csv, write_polyline_csv,
    write_tradeoff_csv, TRADEOFF_HEADER,
};

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}
