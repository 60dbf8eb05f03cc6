pub mod error;
pub mod fusion;
pub mod kk;
pub mod linalg;
pub mod ncpoly;
pub mod report;
pub mod sequences;
pub mod su2;
pub mod system;
pub mod toeplitz;

pub use error::{Error, Result};
pub use linalg::{Mat, Scalar};
pub use report::{IdentityReport, ReportBundle};
