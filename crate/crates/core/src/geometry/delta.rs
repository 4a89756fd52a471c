use serde::{Deserialize, Serialize};

use super::BBox;
use crate::error::{Error, Result};

/// Box refinement relative to an anchor: centre shifts in units of anchor
/// size and log size ratios.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoxDelta {
    pub dx: f64,
    pub dy: f64,
    pub dw: f64,
    pub dh: f64,
}

fn check_positive(b: &BBox, what: &str) -> Result<()> {
    if b.width() > 0.0 && b.height() > 0.0 {
        Ok(())
    } else {
        Err(Error::DegenerateBox(format!(
            "{what} ({}, {}, {}, {}) has zero width or height",
            b.x1, b.y1, b.x2, b.y2
        )))
    }
}

pub fn encode_delta(anchor: &BBox, gt: &BBox) -> Result<BoxDelta> {
    check_positive(anchor, "anchor")?;
    check_positive(gt, "ground-truth box")?;
    let (acx, acy) = anchor.center();
    let (gcx, gcy) = gt.center();
    let (aw, ah) = (anchor.width(), anchor.height());
    Ok(BoxDelta {
        dx: (gcx - acx) / aw,
        dy: (gcy - acy) / ah,
        dw: (gt.width() / aw).ln(),
        dh: (gt.height() / ah).ln(),
    })
}

pub fn decode_delta(anchor: &BBox, d: &BoxDelta) -> Result<BBox> {
    check_positive(anchor, "anchor")?;
    let (acx, acy) = anchor.center();
    let (aw, ah) = (anchor.width(), anchor.height());
    Ok(BBox::from_center(
        acx + d.dx * aw,
        acy + d.dy * ah,
        aw * d.dw.exp(),
        ah * d.dh.exp(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_is_zero() {
        let a = BBox::new(3.0, 4.0, 13.0, 24.0);
        assert_eq!(encode_delta(&a, &a).unwrap(), BoxDelta::default());
    }

    #[test]
    fn doubling_box() {
        let d = encode_delta(
            &BBox::new(0.0, 0.0, 10.0, 10.0),
            &BBox::new(0.0, 0.0, 20.0, 20.0),
        )
        .unwrap();
        assert_eq!(d.dx, 0.5);
        assert_eq!(d.dy, 0.5);
        assert!((d.dw - 2f64.ln()).abs() < 1e-15);
        assert!((d.dh - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn degenerate_boxes_rejected() {
        let z = BBox::new(1.0, 1.0, 1.0, 5.0);
        let ok = BBox::new(0.0, 0.0, 2.0, 2.0);
        assert!(encode_delta(&z, &ok).is_err());
        assert!(encode_delta(&ok, &z).is_err());
        assert!(decode_delta(&z, &BoxDelta::default()).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(ax in -100.0..100.0f64, ay in -100.0..100.0f64, aw in 1.0..200.0f64, ah in 1.0..200.0f64,
                      gx in -100.0..100.0f64, gy in -100.0..100.0f64, gw in 1.0..200.0f64, gh in 1.0..200.0f64) {
            let a = BBox::new(ax, ay, ax + aw, ay + ah);
            let g = BBox::new(gx, gy, gx + gw, gy + gh);
            let r = decode_delta(&a, &encode_delta(&a, &g).unwrap()).unwrap();
            for (u, v) in [(r.x1, g.x1), (r.y1, g.y1), (r.x2, g.x2), (r.y2, g.y2)] {
                prop_assert!((u - v).abs() < 1e-9);
            }
        }
    }
}
