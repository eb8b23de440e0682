use crate::expr::ExprError;
use crate::geomdsl::GeomError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("slots have mixed variance")]
    MixedVariance,
    #[error("rank {0} is not supported here")]
    RankUnsupported(usize),
    #[error("metric is degenerate")]
    DegenerateMetric,
    #[error("operand carries a density weight")]
    WeightedOperand,
    #[error("symbol is not a Killing tensor")]
    NotKilling,
    #[error("delta = {0} is excluded for the generic quantization formula")]
    ExcludedDelta(String),
    #[error("weight mismatch: {0}")]
    WeightMismatch(String),
    #[error("operator order {0} exceeds the cap")]
    OrderCap(usize),
    #[error("symbol is not trace-free")]
    NotTraceFree,
    #[error("symbol degree too low")]
    DegreeTooLow,
    #[error("generic degree-2 symbol: only the principal-symbol identity is available")]
    UnsupportedGenericDegree2,
    #[error("unknown symbol '{0}'")]
    UnknownSymbol(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
