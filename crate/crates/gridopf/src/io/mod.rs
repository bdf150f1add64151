//! Instance and solution file formats.
//!
//! The instance format is a JSON document carrying physical units (MW, MVAr,
//! MVA, $/MWh); parsing normalizes everything onto the system MVA base so
//! the in-memory model is pure per-unit. Solution files are plain text with
//! one row per element; all floats are serialized with 17 significant
//! digits so read(write(x)) is bit-exact. Files are UTF-8 with LF line
//! endings and `.` as the decimal separator. Angles are radians everywhere.

mod instance;
mod solution;

pub use instance::{parse_instance, write_instance, ParseError};
pub use solution::{
    read_base_solution, read_contingency_solutions, scan_contingency_solutions,
    write_base_solution, write_contingency_solutions, ContingencyBlock, SolutionError,
};
