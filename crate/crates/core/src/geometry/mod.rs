//! Metrics, conformal rescalings and pointwise curvature.

mod curvature;
pub mod lift;
mod metric;
mod rescale;
mod tensor;

pub use curvature::{connection_jet, from_derivs, geometry_jet, GeometryJet, JetLevel};
pub use metric::{
    ConformalFactor, Derivatives, MetricDerivs, MetricKind, MetricSpec, DEFAULT_FD_STEP, SINGULAR_DET,
};
pub use rescale::{nabla_upsilon, rescaled_acceleration, rescaled_schouten};
pub use tensor::Tensor;
