//! Symbolic engine for curvature, conformally invariant quantization and
//! conformal symmetries of the Yamabe Laplacian on coordinate charts.

pub mod confsym;
pub mod curvature;
pub mod error;
pub mod expr;
pub mod geomdsl;
pub mod linalg;
pub mod quantize;
pub mod suite;
pub mod symbols;
pub mod tensor;

pub use error::{Error, Result};
pub use expr::{Expr, ExprError, Rat};
pub use tensor::{Geometry, TensorField, Var};
