//! Desk-scale machinery for mass transference principles: Hausdorff content
//! on dyadic nets and its Frostman dual, covering selections, Cantor-level
//! measures, and closed-form dimension numbers for limsup sets.

pub mod cantor;
pub mod config;
pub mod content;
pub mod covering;
pub mod dimfunc;
pub mod error;
pub mod estimate;
pub mod families;
pub mod formulas;
pub mod lp;
pub mod measure;
pub mod space;

pub use dimfunc::{compare, doubling_constant, invert, kappa_transform, DimensionFunction, PreceqVerdict, Relation};
pub use error::{MtpError, Result};
pub use covering::{Selection, Shape};
pub use formulas::{dimension_number, ExponentData};
pub use measure::DiscreteMeasure;
pub use space::{Aabb, Ball, Cube, CubeMask, Rectangle};
