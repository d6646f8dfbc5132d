//! Subcommand implementations. Each command is a library function taking
//! the typed config, so tests can drive the exact code path the binary
//! runs and inspect the returned report structures directly.

pub mod descent_check;
pub mod gen_data;
pub mod rates;
pub mod solve;
