pub mod asclt;
pub mod config;
pub mod entropy;
pub mod erdos_renyi;
pub mod error;
pub mod maps;
pub mod measures;
pub mod observable;
pub mod orbit;
pub mod quad;
pub mod runner;
pub mod transfer;
