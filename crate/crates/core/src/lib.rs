#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod banded;
pub mod beam;
pub mod genfun;
pub mod gevrey;
pub mod jet;
pub mod numeric;
pub mod pipeline;
pub mod plot;
pub mod sim;
pub mod spline;
pub mod synthesis;
