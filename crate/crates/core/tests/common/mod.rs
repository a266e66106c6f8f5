pub mod oracles;
pub mod datasets;
