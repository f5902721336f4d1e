//! Numerical almost Hermitian geometry on explicit coordinate charts.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod catalog;
pub mod conformal;
pub mod chart;
pub mod curvature;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod hermitian;
pub mod jet;
pub mod tensor;
pub mod twistor;

pub use chart::{Axis, ChartSpec, Components, Domain, FieldJets, FieldSource};
pub use error::{GeomError, Result};
pub use expr::{parse_expression, Expr};
pub use geometry::{Frame, LocalGeometry};
pub use jet::Jet;
pub use tensor::{FrameTag, TensorValue, Variance};
