//! Variance-stabilizing and stationarizing transforms, the ADF test, and segment anchoring.

mod adf;
mod anchor;
mod boxcox;
mod diff;

pub use adf::{adf_test, AdfResult, SignificanceLevel, CRITICAL_VALUES};
pub use anchor::{anchor_denormalize, anchor_normalize, AnchorNormalized, Anchors};
pub use boxcox::{profile_loglik, BoxCoxTransform, Inverted};
pub use diff::{difference, undifference, DifferencingSpec};

use crate::error::Result;
use crate::task::Target;

/// Box-Cox then `d` lag-one differences: twice for confirmed cases, once for deaths.
pub fn stationarize(values: &[f64], target: Target) -> Result<(BoxCoxTransform, Vec<f64>)> {
    let transform = BoxCoxTransform::fit(values)?;
    let z = transform.apply(values)?;
    let d = match target {
        Target::Confirmed => 2,
        Target::Death => 1,
    };
    let w = difference(&DifferencingSpec::new(d, 0, 7), &z)?;
    Ok((transform, w))
}
