//! Drawing parameter values from sampler specs.

use std::f64::consts::PI;

use rand::Rng;

use super::{Domain, ParamValue, ParamVector, SamplerSpec};
use crate::scene::Pose;

/// Half-width of the horizontal grasp offset drawn by the grasp sampler.
pub const GRASP_XY_RANGE: f64 = 0.02;
/// Depth offset applied along the gripper axis after orienting the grasp.
pub const GRASP_DEPTH: f64 = -0.005;

pub fn sample<R: Rng + ?Sized>(spec: &SamplerSpec, rng: &mut R) -> ParamValue {
    match spec {
        SamplerSpec::Continuous { min, max } => {
            if min == max {
                ParamValue::Scalar(*min)
            } else {
                ParamValue::Scalar(rng.random_range(*min..=*max))
            }
        }
        SamplerSpec::Discrete { values } => values[rng.random_range(0..values.len())],
        SamplerSpec::Grasp => {
            let x = rng.random_range(-GRASP_XY_RANGE..=GRASP_XY_RANGE);
            let y = rng.random_range(-GRASP_XY_RANGE..=GRASP_XY_RANGE);
            let yaw = rng.random_range(-PI..=PI);
            let g = Pose::new(x, y, 0.0, 0.0, PI, yaw).compose(&Pose::from_point(0.0, 0.0, GRASP_DEPTH));
            ParamValue::Pose(g)
        }
    }
}

pub fn sample_vector<R: Rng + ?Sized>(domain: &Domain, rng: &mut R) -> ParamVector {
    ParamVector(domain.0.iter().map(|(n, s)| (n.clone(), sample(s, rng))).collect())
}
