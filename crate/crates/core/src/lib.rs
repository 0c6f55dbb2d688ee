pub mod bl;
pub mod cluster;
pub mod ctmc;
pub mod eprop;
pub mod equivalence;
pub mod error;
pub mod kernel;
pub mod fixed;
pub mod function;
pub mod measure;
pub mod models;
pub mod pairing;
pub mod projection;
pub mod report;
pub mod reproduce;
pub mod scheme;
pub mod space;

pub use error::{Error, Result};
