use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// First and last values of a segment, kept for exact inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchors {
    pub first: f64,
    pub last: f64,
}

impl Anchors {
    pub fn scale(&self) -> f64 {
        self.last - self.first
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorNormalized {
    pub values: Vec<f64>,
    pub anchors: Anchors,
    /// True when first and last values coincide; `values` is then all zeros.
    pub degenerate: bool,
}

/// Affine map sending the first value to 0 and the last to 1.
pub fn anchor_normalize(segment: &[f64]) -> Result<AnchorNormalized> {
    if segment.len() < 2 {
        return Err(Error::Length {
            needed: 2,
            got: segment.len(),
        });
    }
    let anchors = Anchors {
        first: segment[0],
        last: segment[segment.len() - 1],
    };
    let scale = anchors.scale();
    if scale == 0.0 {
        return Ok(AnchorNormalized {
            values: vec![0.0; segment.len()],
            anchors,
            degenerate: true,
        });
    }
    let mut values: Vec<f64> = segment.iter().map(|x| (x - anchors.first) / scale).collect();
    // Pin the endpoints exactly against rounding.
    values[0] = 0.0;
    *values.last_mut().expect("length checked") = 1.0;
    Ok(AnchorNormalized {
        values,
        anchors,
        degenerate: false,
    })
}

/// Maps normalized values back with the given anchors (also used for values beyond the segment).
pub fn anchor_denormalize(values: &[f64], anchors: Anchors) -> Vec<f64> {
    values.iter().map(|z| anchors.first + z * anchors.scale()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_and_degenerate() {
        let n = anchor_normalize(&[2.0, 4.0, 6.0]).unwrap();
        assert_eq!(n.values, vec![0.0, 0.5, 1.0]);
        assert!(!n.degenerate);
        let flat = anchor_normalize(&[5.0, 5.0]).unwrap();
        assert_eq!(flat.values, vec![0.0, 0.0]);
        assert!(flat.degenerate);
        assert!(anchor_normalize(&[1.0]).is_err());
    }

    #[test]
    fn round_trip() {
        let x = [3.0, -1.5, 8.25, 0.5, 7.0];
        let n = anchor_normalize(&x).unwrap();
        let back = anchor_denormalize(&n.values, n.anchors);
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
