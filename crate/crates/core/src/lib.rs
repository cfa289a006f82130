pub mod domain;
pub mod error;
pub mod harness;
pub mod instances;
pub mod mechanisms;
pub mod mmvnn;
pub mod oracles;
pub mod price;
pub mod training;
pub mod value_models;
