//! One module per subcommand.

pub mod adjust;
pub mod curves;
pub mod meanshift;
pub mod simulate;
