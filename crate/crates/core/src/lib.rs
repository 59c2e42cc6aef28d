pub mod cli;
pub mod diagnostics;
pub mod dictionary;
pub mod error;
pub mod instances;
pub mod model;
pub mod numerics;
pub mod regression;
pub mod selection;
pub mod spectral;
pub mod submodularity;
pub mod subsets;
