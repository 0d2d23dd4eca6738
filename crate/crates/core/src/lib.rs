pub mod anomaly;
pub mod cli;
pub mod fem;
pub mod hiermc;
pub mod meta;
pub mod popgen;
pub mod signals;
pub mod surrogate;
