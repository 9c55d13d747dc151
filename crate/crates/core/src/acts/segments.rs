use crate::error::{Error, Result};
use crate::preprocess::Anchors;

/// Segments whose anchor gap is this small relative to their range are treated as flat.
pub const DEGENERATE_RATIO: f64 = 0.05;
/// Absolute anchor-gap floor on the mean-scaled series.
pub const DEGENERATE_FLOOR: f64 = 1e-9;

pub(crate) fn is_degenerate(segment: &[f64]) -> bool {
    let first = segment[0];
    let last = segment[segment.len() - 1];
    let (lo, hi) = segment.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(*v), hi.max(*v))
    });
    let gap = (last - first).abs();
    gap <= DEGENERATE_FLOOR || gap < DEGENERATE_RATIO * (hi - lo)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub region: usize,
    /// 0-based index of the segment's last day within the region's series.
    pub end: usize,
    /// Anchor-normalized segment values (length `l`).
    pub values: Vec<f64>,
    /// The following `h` residuals normalized with the same anchors.
    pub development: Vec<f64>,
    pub anchors: Anchors,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSet {
    pub segment_len: usize,
    pub horizon: usize,
    pub segments: Vec<Segment>,
}

impl SegmentSet {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Segments usable as attention keys.
    pub fn keys(&self) -> impl Iterator<Item = &Segment> {
        self.segments.iter().filter(|s| !s.degenerate)
    }
}

fn normalize(x: &[f64], anchors: Anchors, degenerate: bool) -> Vec<f64> {
    if degenerate {
        return vec![0.0; x.len()];
    }
    x.iter().map(|v| (v - anchors.first) / anchors.scale()).collect()
}

/// Every window `[t-l+1, t]` with a full development window `[t+1, t+h]` in each region.
pub fn build_segments(residuals: &[Vec<f64>], l: usize, h: usize) -> Result<SegmentSet> {
    if l < 2 || h == 0 {
        return Err(Error::Invalid(format!("segment length {l} and horizon {h}")));
    }
    let mut segments = Vec::new();
    for (region, r) in residuals.iter().enumerate() {
        if r.len() < l + h {
            return Err(Error::Length {
                needed: l + h,
                got: r.len(),
            });
        }
        for end in l - 1..r.len() - h {
            let seg = &r[end + 1 - l..=end];
            let anchors = Anchors {
                first: seg[0],
                last: seg[l - 1],
            };
            let degenerate = is_degenerate(seg);
            let mut values = normalize(seg, anchors, degenerate);
            if !degenerate {
                values[0] = 0.0;
                values[l - 1] = 1.0;
            }
            segments.push(Segment {
                region,
                end,
                values,
                development: normalize(&r[end + 1..=end + h], anchors, degenerate),
                anchors,
                degenerate,
            });
        }
    }
    Ok(SegmentSet {
        segment_len: l,
        horizon: h,
        segments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wave(n: usize, phase: f64) -> Vec<f64> {
        (0..n).map(|t| (t as f64 * 0.5 + phase).sin()).collect()
    }

    #[test]
    fn counts_and_anchors() {
        let s = build_segments(&[wave(30, 0.0), wave(30, 1.0)], 14, 7).unwrap();
        assert_eq!(s.len(), 2 * (30 - 7 - 14 + 1));
        assert!(s.segments.iter().all(|g| g.values[0] == 0.0));
        assert!(s.segments.iter().filter(|g| !g.degenerate).all(|g| g.values[13] == 1.0));
        let one = build_segments(&[wave(21, 0.0), wave(21, 2.0)], 14, 7).unwrap();
        assert_eq!(one.len(), 2);
        assert!(build_segments(&[wave(20, 0.0)], 14, 7).is_err());
    }

    #[test]
    fn flat_segments_are_excluded_from_keys() {
        let mut flat = vec![0.0; 30];
        flat[20] = 1.0;
        let s = build_segments(&[flat], 5, 3).unwrap();
        let keys = s.keys().count();
        assert!(keys < s.len());
        assert!(s
            .segments
            .iter()
            .filter(|g| g.degenerate)
            .all(|g| g.values.iter().all(|v| *v == 0.0)));
    }
}
