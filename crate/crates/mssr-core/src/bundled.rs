//! Bundled example networks, shared by tests, benches, and the CLI.

/// Three-species toy model whose projection merges two reactions.
pub const ABC: &str = include_str!("../../../networks/abc.net");

/// Futile cycle with synthesis and degradation of the catalysts.
pub const FUTILE: &str = include_str!("../../../networks/futile.net");

/// Yeast G protein cycle; the projected pair G/Gbg is conserved.
pub const YEAST: &str = include_str!("../../../networks/yeast.net");

/// p53 core module with saturating activation kinetics.
pub const P53: &str = include_str!("../../../networks/p53.net");

/// Lotka-Volterra chain with square-root and logarithmic kinetics.
pub const LOTKA: &str = include_str!("../../../networks/lotka.net");
