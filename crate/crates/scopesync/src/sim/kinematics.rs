//! Constant-curvature tip kinematics.
//!
//! The two bend angles define a bending plane `phi = atan2(theta_y, theta_x)`
//! and a total bend `theta = hypot(theta_x, theta_y)`; the bendable segment
//! is modeled as a circular arc of fixed length in that plane, riding on a
//! base that advances along the lumen axis with insertion.

use crate::geom::{Quat, Vec3};
use crate::sim::{ScopeConfig, ScopeState};
use crate::types::PoseSample;

/// Arc chord terms `(1 - cos(theta)) / theta` and `sin(theta) / theta`,
/// with series expansions near zero so the straight limit is smooth.
fn arc_terms(theta: f64) -> (f64, f64) {
    if theta.abs() < 1e-7 {
        let t2 = theta * theta;
        (theta / 2.0 - theta * t2 / 24.0, 1.0 - t2 / 6.0)
    } else {
        ((1.0 - theta.cos()) / theta, theta.sin() / theta)
    }
}

/// Distal tip pose for a given joint state.
///
/// With zero bend the segment is straight along the lumen axis and the
/// orientation is the identity (in the canonical +z frame). The total bend
/// is clamped to `max_bend_deg`.
pub fn tip_pose(state: &ScopeState, cfg: &ScopeConfig) -> PoseSample {
    let theta_x = state.bend_x_deg.to_radians();
    let theta_y = state.bend_y_deg.to_radians();
    let phi = theta_y.atan2(theta_x);
    let theta = (theta_x.hypot(theta_y)).min(cfg.max_bend_deg.to_radians());

    let length = cfg.segment_length_m;
    let (chord, rise) = arc_terms(theta);
    let radial = length * chord;
    let insertion_m = state.feed_deg * cfg.feed_mm_per_deg * 1e-3;

    let local_pos = Vec3::new(
        radial * phi.cos(),
        radial * phi.sin(),
        length * rise + insertion_m,
    );
    // Tangent frame at the arc end: rotate by theta about the in-plane
    // normal of the bending plane.
    let bend_axis = Vec3::new(-phi.sin(), phi.cos(), 0.0);
    let local_orient = Quat::from_axis_angle(bend_axis, theta);

    let z = Vec3::new(0.0, 0.0, 1.0);
    let (position, orientation) = if (cfg.lumen_axis.sub(z)).norm() < 1e-12 {
        (local_pos, local_orient)
    } else {
        // Rotate the canonical frame so +z maps onto the configured lumen
        // axis. `between` cannot fail here: both vectors are non-zero.
        let frame = Quat::between(z, cfg.lumen_axis).unwrap_or(Quat::IDENTITY);
        (frame.rotate(local_pos), frame.mul(local_orient))
    };

    PoseSample::new(state.t, position, orientation)
        .expect("constant-curvature pose is finite by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Timestamp;
    use approx::assert_relative_eq;

    fn state(bx: f64, by: f64, feed: f64) -> ScopeState {
        ScopeState {
            t: Timestamp::from_nanos(0).unwrap(),
            bend_x_deg: bx,
            bend_y_deg: by,
            feed_deg: feed,
        }
    }

    #[test]
    fn straight_limit() {
        let cfg = ScopeConfig::default();
        let p = tip_pose(&state(0.0, 0.0, 0.0), &cfg);
        assert_relative_eq!(p.position.x, 0.0, epsilon = 1e-15);
        assert_relative_eq!(p.position.y, 0.0, epsilon = 1e-15);
        assert_relative_eq!(p.position.z, cfg.segment_length_m, epsilon = 1e-15);
        assert!(p.orientation.rotation_angle_to(Quat::IDENTITY) < 1e-12);
    }

    #[test]
    fn planar_quarter_arc() {
        // 90 degrees in x: closed-form (L/theta (1-cos), 0, L/theta sin).
        let cfg = ScopeConfig::default();
        let p = tip_pose(&state(90.0, 0.0, 0.0), &cfg);
        let expected = 0.1 / (std::f64::consts::PI / 2.0);
        assert_relative_eq!(p.position.x, expected, epsilon = 1e-12);
        assert_relative_eq!(p.position.x, 0.06366, epsilon = 1e-5);
        assert_relative_eq!(p.position.y, 0.0, epsilon = 1e-15);
        assert_relative_eq!(p.position.z, 0.06366, epsilon = 1e-5);
        // Tangent has turned 90 degrees about -y... about the bend normal.
        let expected_q = Quat::from_axis_angle(Vec3::new(0.0, 1.0, 0.0), std::f64::consts::FRAC_PI_2);
        assert!(p.orientation.rotation_angle_to(expected_q) < 1e-12);
    }

    #[test]
    fn insertion_advances_base_linearly() {
        let cfg = ScopeConfig::default();
        let p0 = tip_pose(&state(0.0, 0.0, 0.0), &cfg);
        let p1 = tip_pose(&state(0.0, 0.0, 36.0), &cfg);
        // 36 deg at 0.25 mm/deg = 9.0 mm along +z.
        assert_relative_eq!(p1.position.z - p0.position.z, 9.0e-3, epsilon = 1e-12);
    }

    #[test]
    fn continuity_across_straight_limit() {
        let cfg = ScopeConfig::default();
        let mut prev = tip_pose(&state(-0.01, 0.0, 0.0), &cfg);
        let mut max_jump: f64 = 0.0;
        let mut b = -0.01;
        while b < 0.01 {
            b += 1e-4;
            let cur = tip_pose(&state(b, 0.0, 0.0), &cfg);
            let jump = cur.position.sub(prev.position).norm();
            max_jump = max_jump.max(jump);
            prev = cur;
        }
        // 1e-4 deg step moves the tip by ~L/2 * 1e-4 deg in radians.
        assert!(max_jump < 1e-6, "position jump {max_jump} across theta = 0");
    }

    #[test]
    fn bending_plane_follows_both_axes() {
        let cfg = ScopeConfig::default();
        let p = tip_pose(&state(30.0, 30.0, 0.0), &cfg);
        // Equal bends put the tip on the x = y diagonal.
        assert_relative_eq!(p.position.x, p.position.y, epsilon = 1e-12);
        assert!(p.position.x > 0.0);
    }

    #[test]
    fn lumen_axis_rotates_the_whole_frame() {
        let cfg = ScopeConfig {
            lumen_axis: Vec3::new(1.0, 0.0, 0.0),
            ..ScopeConfig::default()
        };
        let p = tip_pose(&state(0.0, 0.0, 0.0), &cfg);
        assert_relative_eq!(p.position.x, cfg.segment_length_m, epsilon = 1e-12);
        assert_relative_eq!(p.position.z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn total_bend_clamped() {
        let cfg = ScopeConfig {
            max_bend_deg: 90.0,
            ..ScopeConfig::default()
        };
        // 80 + 80 on both axes: hypot = 113 deg, clamped to 90.
        let p = tip_pose(&state(80.0, 80.0, 0.0), &cfg);
        let unclamped = tip_pose(&state(90.0 / 2f64.sqrt(), 90.0 / 2f64.sqrt(), 0.0), &cfg);
        assert_relative_eq!(p.position.z, unclamped.position.z, epsilon = 1e-9);
    }
}
