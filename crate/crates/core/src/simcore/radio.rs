use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{NodeId, Point};

/// Log-distance path-loss radio with a disk connectivity range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioModel {
    /// dBm
    pub tx_power: f64,
    /// dB at `ref_distance`
    pub ref_loss_pl0: f64,
    pub ref_distance: f64,
    pub path_loss_exp: f64,
    pub noise_floor: f64,
}

impl Default for RadioModel {
    fn default() -> Self {
        Self {
            tx_power: 0.0,
            ref_loss_pl0: 40.0,
            ref_distance: 1.0,
            path_loss_exp: 2.5,
            noise_floor: -100.0,
        }
    }
}

impl RadioModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.path_loss_exp >= 1.0) {
            return Err(Error::InvalidConfig("path_loss_exp must be >= 1".into()));
        }
        if !(self.ref_distance > 0.0) {
            return Err(Error::InvalidConfig("ref_distance must be positive".into()));
        }
        Ok(())
    }

    /// Received signal strength in dBm at `distance` meters.
    pub fn rssi_at(&self, distance: f64) -> Result<f64> {
        if !(distance > 0.0) {
            return Err(Error::NonPositiveDistance(distance));
        }
        let loss =
            self.ref_loss_pl0 + 10.0 * self.path_loss_exp * (distance / self.ref_distance).log10();
        Ok((self.tx_power - loss).max(self.noise_floor))
    }

    /// RSSI between two positions; co-located nodes read as the reference point.
    pub fn rssi_between(&self, a: Point, b: Point) -> f64 {
        let d = a.distance(&b).max(self.ref_distance);
        self.rssi_at(d).unwrap_or(self.noise_floor)
    }
}

/// One receiver's view of a transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct Reception {
    pub receiver: NodeId,
    pub rssi: f64,
    pub corrupted: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_point() {
        let m = RadioModel::default();
        assert!((m.rssi_at(m.ref_distance).unwrap() - (m.tx_power - m.ref_loss_pl0)).abs() < 1e-12);
    }

    #[test]
    fn doubling_distance_with_exponent_two() {
        let m = RadioModel {
            path_loss_exp: 2.0,
            ..RadioModel::default()
        };
        // 10 * 2 * log10(2) = 6.0206 dB
        let expected = m.tx_power - m.ref_loss_pl0 - 6.0206;
        assert!((m.rssi_at(2.0 * m.ref_distance).unwrap() - expected).abs() < 1e-4);
    }

    #[test]
    fn huge_distance_clamps_to_noise_floor() {
        let m = RadioModel::default();
        assert_eq!(m.rssi_at(1e12).unwrap(), m.noise_floor);
    }

    #[test]
    fn rejects_non_positive_distance() {
        let m = RadioModel::default();
        assert!(m.rssi_at(0.0).is_err());
        assert!(m.rssi_at(-1.0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn strictly_decreasing_until_clamp(a in 0.01f64..1e4, b in 0.01f64..1e4) {
            let m = RadioModel::default();
            let (near, far) = if a < b { (a, b) } else { (b, a) };
            proptest::prop_assume!(far - near > 1e-6);
            let (rn, rf) = (m.rssi_at(near).unwrap(), m.rssi_at(far).unwrap());
            if rf > m.noise_floor {
                proptest::prop_assert!(rn > rf);
            } else {
                proptest::prop_assert!(rn >= rf);
            }
        }
    }
}
