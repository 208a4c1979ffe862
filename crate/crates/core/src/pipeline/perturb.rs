//! Random tilting of sample normals.
//!
//! The generator is xoshiro256++ seeded through `seed_from_u64`, so a
//! `(r, seed)` pair reproduces the same perturbation everywhere.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::isomap::SurfaceSample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbSpec {
    /// Length of the tangential offset added to each unit normal.
    pub r: f64,
    pub seed: u64,
}

/// `{d1, d2}` completing `n` to a right-handed orthonormal frame, with `d1`
/// the projection of the coordinate axis least aligned with `n`.
pub fn tangent_frame(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let a = n.abs();
    let k = if a.x <= a.y && a.x <= a.z {
        0
    } else if a.y <= a.z {
        1
    } else {
        2
    };
    let mut e = Vector3::zeros();
    e[k] = 1.0;
    let d1 = (e - n * n.dot(&e)).normalize();
    (d1, n.cross(&d1))
}

pub fn perturb_normals(samples: &[SurfaceSample], spec: &PerturbSpec) -> Result<Vec<SurfaceSample>, PipelineError> {
    if !(spec.r >= 0.0) {
        return Err(PipelineError::NegativeNoise(spec.r));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(spec.seed);
    let pi = std::f64::consts::PI;
    Ok(samples
        .iter()
        .map(|s| {
            // drawn even at r = 0 so every r uses the same angles
            let phi: f64 = rng.random_range(-pi..=pi);
            if spec.r == 0.0 {
                return *s;
            }
            let (d1, d2) = tangent_frame(&s.n);
            let v = d1 * (spec.r * phi.cos()) + d2 * (spec.r * phi.sin());
            SurfaceSample { r: s.r, n: (s.n + v).normalize() }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn samples() -> Vec<SurfaceSample> {
        (0..50)
            .map(|k| {
                let a = k as f64 * 0.37;
                let n = Vector3::new(a.cos() * a.sin(), a.sin() * 0.8, a.cos()).normalize();
                SurfaceSample { r: Vector3::new(a, -a, 0.5 * a), n }
            })
            .collect()
    }

    #[test]
    fn zero_noise_is_identity() {
        let s = samples();
        assert_eq!(perturb_normals(&s, &PerturbSpec { r: 0.0, seed: 3 }).unwrap(), s);
    }

    #[test]
    fn fixed_seed_is_deterministic_and_unit() {
        let s = samples();
        let spec = PerturbSpec { r: 0.1, seed: 42 };
        let a = perturb_normals(&s, &spec).unwrap();
        let b = perturb_normals(&s, &spec).unwrap();
        assert_eq!(a, b);
        for (p, q) in a.iter().zip(&s) {
            assert!((p.n.norm() - 1.0).abs() < 1e-14);
            assert_eq!(p.r, q.r);
            // tilt angle is atan(r)
            let ang = p.n.dot(&q.n).clamp(-1.0, 1.0).acos();
            assert!((ang - 0.1f64.atan()).abs() < 1e-7);
        }
        let c = perturb_normals(&s, &PerturbSpec { r: 0.1, seed: 43 }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn negative_noise() {
        assert!(matches!(
            perturb_normals(&samples(), &PerturbSpec { r: -0.1, seed: 0 }),
            Err(PipelineError::NegativeNoise(_))
        ));
    }

    proptest! {
        #[test]
        fn frame_is_orthonormal(x in -1.0..1.0f64, y in -1.0..1.0f64, z in -1.0..1.0f64) {
            let v = Vector3::new(x, y, z);
            prop_assume!(v.norm() > 1e-3);
            let n = v.normalize();
            let (d1, d2) = tangent_frame(&n);
            prop_assert!(d1.dot(&n).abs() < 1e-14 && d2.dot(&n).abs() < 1e-14 && d1.dot(&d2).abs() < 1e-14);
            prop_assert!((d1.norm() - 1.0).abs() < 1e-14 && (d2.norm() - 1.0).abs() < 1e-14);
            prop_assert!((d1.cross(&d2) - n).norm() < 1e-14);
        }
    }
}
