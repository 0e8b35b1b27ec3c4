//! Reference systems shipped with the crate.

use crate::config::RunConfig;

/// `h(x) = -x (x - 1) (x - 2)` on `[0, 30]`, `omega = 1`.
pub const CUBIC_TOML: &str = include_str!("../configs/cubic.toml");

/// `h(x) = -x (x - 1) (x - 3) (x - 4) (x - 5) / 64` on `[0, 40]`, `omega = 1`.
/// Its regime table has the full five-row structure.
pub const QUINTIC_TOML: &str = include_str!("../configs/quintic.toml");

/// `h(x) = -2x` on `[0, 10]`, `omega = 1`.
pub const LINEAR_TOML: &str = include_str!("../configs/linear.toml");

pub fn cubic() -> RunConfig {
    RunConfig::from_toml_str(CUBIC_TOML).expect("shipped config parses")
}

pub fn quintic() -> RunConfig {
    RunConfig::from_toml_str(QUINTIC_TOML).expect("shipped config parses")
}

pub fn linear() -> RunConfig {
    RunConfig::from_toml_str(LINEAR_TOML).expect("shipped config parses")
}
