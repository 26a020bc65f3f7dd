pub mod bv;
pub mod error;
pub mod experiment;
pub mod flux;
pub mod grid;
pub mod io;
pub mod kernel_opt;
pub mod local;
pub mod mollify;
pub mod par;
pub mod quad;
pub mod scan;
pub mod scenarios;
pub mod simplex;
pub mod testfn;

pub use error::{LabError, Result};
pub use grid::{Field, Grid, SampledField, Vec2};
pub use mollify::{Kernel, KernelProfile};
