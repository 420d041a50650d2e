//! Line-of-sight probability and path loss for the dense-clutter,
//! high-base-station indoor factory scenario.

use super::{Scene, SceneError};

/// Decay length `k` of the LOS probability `exp(-d2d / k)`.
pub fn los_decay_length(scene: &Scene) -> f64 {
    let c = &scene.config;
    -(c.clutter_size_m / (1.0 - c.clutter_density).ln()) * (c.bs_height_m - c.ue_height_m)
        / (c.clutter_height_m - c.ue_height_m)
}

pub fn los_probability(scene: &Scene, d2d: f64) -> f64 {
    (-d2d.max(0.0) / los_decay_length(scene)).exp()
}

/// Path loss in dB. The NLOS value is floored at the LOS value.
pub fn path_loss(scene: &Scene, d3d: f64, los: bool) -> Result<f64, SceneError> {
    if !(d3d >= 1.0) {
        return Err(SceneError::DistanceTooSmall(d3d));
    }
    let fc = scene.config.carrier_ghz.log10();
    let d = d3d.log10();
    let pl_los = 31.84 + 21.50 * d + 19.00 * fc;
    if los {
        Ok(pl_los)
    } else {
        Ok(pl_los.max(33.63 + 21.9 * d + 20.0 * fc))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{build_scene, SceneConfig};

    fn scene() -> Scene {
        build_scene(SceneConfig::default()).unwrap()
    }

    #[test]
    fn los_probability_values() {
        let s = scene();
        assert_eq!(los_probability(&s, 0.0), 1.0);
        let k = los_decay_length(&s);
        // -(2 / ln 0.4) * 6.5 / 4.5
        assert!((k - 3.15279).abs() < 1e-4, "k = {k}");
        assert!((los_probability(&s, k) - (-1.0f64).exp()).abs() < 1e-15);
        assert!(los_probability(&s, 50.0) < 1e-6);
    }

    #[test]
    fn los_probability_grid_is_monotone_and_bounded() {
        let s = scene();
        let mut prev = f64::INFINITY;
        for i in 0..1000 {
            let p = los_probability(&s, i as f64 * 0.15);
            assert!((0.0..=1.0).contains(&p));
            assert!(p <= prev);
            prev = p;
        }
    }

    #[test]
    fn path_loss_values() {
        let s = scene();
        let los1 = path_loss(&s, 1.0, true).unwrap();
        assert!((los1 - (31.84 + 19.0 * 3.5f64.log10())).abs() < 1e-12);
        assert!((los1 - 42.18).abs() < 0.01);
        let nlos1 = path_loss(&s, 1.0, false).unwrap();
        assert!((nlos1 - 44.51).abs() < 0.01);
        let los10 = path_loss(&s, 10.0, true).unwrap();
        assert!((los10 - los1 - 21.5).abs() < 1e-12);
        assert!(matches!(path_loss(&s, 0.5, true), Err(SceneError::DistanceTooSmall(_))));
    }

    #[test]
    fn nlos_never_below_los() {
        let s = scene();
        for i in 0..200 {
            let d = 1.0 + i as f64;
            assert!(path_loss(&s, d, false).unwrap() >= path_loss(&s, d, true).unwrap());
        }
    }
}
