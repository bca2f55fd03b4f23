//! Workspace calibration, planar poses, and the pixel/world correspondence.
//!
//! Observations are top-down orthographic images where every pixel maps to a
//! fixed vertical column of the workspace. All image-space transforms here
//! preserve that correspondence, which is what makes image translations and
//! rotations equivalent to object rearrangements in the scene.

use crate::error::{Error, Result};

pub const TAU: f64 = std::f64::consts::TAU;

/// 2D point / vector in world coordinates (meters).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product; positive when `o` is
    /// counter-clockwise from `self`.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn scale(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }

    /// Rotate counter-clockwise by `angle` radians.
    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Normalize an angle into [0, 2pi).
pub fn normalize_angle(theta: f64) -> f64 {
    let mut t = theta % TAU;
    if t < 0.0 {
        t += TAU;
    }
    // The remainder can land exactly on TAU after the correction.
    if t >= TAU {
        t = 0.0;
    }
    t
}

/// Signed angular difference `a - b` wrapped into (-pi, pi].
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let mut d = (a - b) % TAU;
    if d > std::f64::consts::PI {
        d -= TAU;
    } else if d <= -std::f64::consts::PI {
        d += TAU;
    }
    d
}

/// Planar pose: position in meters plus rotation about the vertical axis.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose2 { x, y, theta: normalize_angle(theta) }
    }

    pub fn from_point(p: Vec2) -> Self {
        Pose2::new(p.x, p.y, 0.0)
    }

    pub fn pos(self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }
}

/// Integer pixel coordinate; `u` is the column, `v` the row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Pixel {
    pub u: i64,
    pub v: i64,
}

impl Pixel {
    pub fn new(u: i64, v: i64) -> Self {
        Pixel { u, v }
    }
}

/// Maps pixels to vertical columns of the workspace and back.
///
/// Pixel (0, 0) covers the square column starting at `origin`; columns are
/// `pixel_size_m` wide, identical along both axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkspaceCalib {
    pub origin: Vec2,
    pub width_m: f64,
    pub height_m: f64,
    pub img_w: usize,
    pub img_h: usize,
    pub pixel_size_m: f64,
}

impl WorkspaceCalib {
    /// Square-pixel calibration over a `width_m x height_m` workspace.
    pub fn new(origin: Vec2, width_m: f64, height_m: f64, img_w: usize, img_h: usize) -> Result<Self> {
        if img_w == 0 || img_h == 0 {
            return Err(Error::arg("image resolution must be nonzero"));
        }
        let px_w = width_m / img_w as f64;
        let px_h = height_m / img_h as f64;
        if (px_w - px_h).abs() > 1e-9 {
            return Err(Error::arg(format!(
                "pixels must be square: {width_m}/{img_w} != {height_m}/{img_h}"
            )));
        }
        let c = WorkspaceCalib { origin, width_m, height_m, img_w, img_h, pixel_size_m: px_w };
        debug_assert!((c.img_w as f64 * c.pixel_size_m - c.width_m).abs() < 1e-9);
        debug_assert!((c.img_h as f64 * c.pixel_size_m - c.height_m).abs() < 1e-9);
        Ok(c)
    }

    /// Default 1.0 x 0.5 m workspace at the given resolution.
    pub fn standard(img_w: usize, img_h: usize) -> Self {
        WorkspaceCalib::new(Vec2::ZERO, 1.0, 0.5, img_w, img_h).expect("2:1 resolution")
    }

    pub fn in_bounds(&self, p: Pixel) -> bool {
        p.u >= 0 && p.v >= 0 && (p.u as usize) < self.img_w && (p.v as usize) < self.img_h
    }

    /// World position of the center of the pixel's column.
    pub fn pixel_to_world(&self, p: Pixel) -> Result<Vec2> {
        if !self.in_bounds(p) {
            return Err(Error::OutOfBounds { u: p.u, v: p.v, w: self.img_w, h: self.img_h });
        }
        Ok(Vec2::new(
            self.origin.x + (p.u as f64 + 0.5) * self.pixel_size_m,
            self.origin.y + (p.v as f64 + 0.5) * self.pixel_size_m,
        ))
    }

    /// Pixel whose column contains the world point, clamped to the image.
    pub fn world_to_pixel(&self, w: Vec2) -> Pixel {
        let u = ((w.x - self.origin.x) / self.pixel_size_m).floor() as i64;
        let v = ((w.y - self.origin.y) / self.pixel_size_m).floor() as i64;
        Pixel::new(
            u.clamp(0, self.img_w as i64 - 1),
            v.clamp(0, self.img_h as i64 - 1),
        )
    }

    /// Clamp a world point into the workspace rectangle.
    pub fn clamp_world(&self, p: Vec2) -> Vec2 {
        Vec2::new(
            p.x.clamp(self.origin.x, self.origin.x + self.width_m),
            p.y.clamp(self.origin.y, self.origin.y + self.height_m),
        )
    }

    pub fn contains_world(&self, p: Vec2) -> bool {
        p.x >= self.origin.x
            && p.x <= self.origin.x + self.width_m
            && p.y >= self.origin.y
            && p.y <= self.origin.y + self.height_m
    }
}

/// Rigid transform in image space: rotation by `alpha` about `pivot`,
/// followed by translation `(du, dv)` (pixels).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageSE2 {
    pub du: f64,
    pub dv: f64,
    pub alpha: f64,
    pub pivot: (f64, f64),
}

impl ImageSE2 {
    pub fn identity() -> Self {
        ImageSE2 { du: 0.0, dv: 0.0, alpha: 0.0, pivot: (0.0, 0.0) }
    }

    pub fn translation(du: f64, dv: f64) -> Self {
        ImageSE2 { du, dv, alpha: 0.0, pivot: (0.0, 0.0) }
    }

    pub fn rotation(alpha: f64, pivot: (f64, f64)) -> Self {
        ImageSE2 { du: 0.0, dv: 0.0, alpha, pivot }
    }

    pub fn is_finite(&self) -> bool {
        self.du.is_finite()
            && self.dv.is_finite()
            && self.alpha.is_finite()
            && self.pivot.0.is_finite()
            && self.pivot.1.is_finite()
    }

    /// Where the transform sends a (continuous) pixel location.
    pub fn apply(&self, u: f64, v: f64) -> (f64, f64) {
        let (s, c) = self.alpha.sin_cos();
        let ru = u - self.pivot.0;
        let rv = v - self.pivot.1;
        (
            self.pivot.0 + c * ru - s * rv + self.du,
            self.pivot.1 + s * ru + c * rv + self.dv,
        )
    }

    /// Source location that the transform maps onto `(u, v)`.
    pub fn apply_inverse(&self, u: f64, v: f64) -> (f64, f64) {
        let (s, c) = self.alpha.sin_cos();
        let ru = u - self.du - self.pivot.0;
        let rv = v - self.dv - self.pivot.1;
        (
            self.pivot.0 + c * ru + s * rv,
            self.pivot.1 - s * ru + c * rv,
        )
    }

    /// Image of an integer pixel under the transform, rounded to the grid.
    pub fn apply_pixel(&self, p: Pixel) -> Pixel {
        let (u, v) = self.apply(p.u as f64, p.v as f64);
        Pixel::new(u.round() as i64, v.round() as i64)
    }
}

/// `n_rots` image rotations with angles `k * 2pi / n_rots` about `pivot`;
/// element 0 is the identity.
pub fn rotation_stack(n_rots: usize, pivot: (f64, f64)) -> Result<Vec<ImageSE2>> {
    if n_rots == 0 {
        return Err(Error::arg("n_rots must be >= 1"));
    }
    Ok((0..n_rots)
        .map(|k| ImageSE2::rotation(k as f64 * TAU / n_rots as f64, pivot))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_calibration_pixel_pitch() {
        // 320x160 over 1.0x0.5 m: adjacent pixels are 3.125 mm apart.
        let c = WorkspaceCalib::standard(320, 160);
        assert!((c.pixel_size_m - 0.003125).abs() < 1e-12);
        let a = c.pixel_to_world(Pixel::new(0, 0)).unwrap();
        let b = c.pixel_to_world(Pixel::new(0, 1)).unwrap();
        assert!((b.y - a.y - 0.003125).abs() < 1e-12);
        assert!((b.x - a.x).abs() < 1e-12);
    }

    #[test]
    fn pixel_origin_is_half_pixel_center() {
        let c = WorkspaceCalib::standard(320, 160);
        let w = c.pixel_to_world(Pixel::new(0, 0)).unwrap();
        assert!((w.x - c.pixel_size_m / 2.0).abs() < 1e-12);
        assert!((w.y - c.pixel_size_m / 2.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_bounds_pixel_is_error() {
        let c = WorkspaceCalib::standard(64, 32);
        assert!(c.pixel_to_world(Pixel::new(64, 0)).is_err());
        assert!(c.pixel_to_world(Pixel::new(0, -1)).is_err());
    }

    #[test]
    fn rotation_stack_identity_and_spacing() {
        let stack = rotation_stack(1, (0.0, 0.0)).unwrap();
        assert_eq!(stack.len(), 1);
        assert_eq!(stack[0].alpha, 0.0);

        let stack = rotation_stack(4, (8.0, 8.0)).unwrap();
        let expect = [0.0, TAU / 4.0, TAU / 2.0, 3.0 * TAU / 4.0];
        for (t, e) in stack.iter().zip(expect) {
            assert!((t.alpha - e).abs() < 1e-12);
        }

        let stack = rotation_stack(36, (0.0, 0.0)).unwrap();
        for w in stack.windows(2) {
            assert!((w[1].alpha - w[0].alpha - 10f64.to_radians()).abs() < 1e-12);
        }
        assert!(rotation_stack(0, (0.0, 0.0)).is_err());
    }

    #[test]
    fn angle_normalization() {
        assert!((normalize_angle(-0.5) - (TAU - 0.5)).abs() < 1e-12);
        assert_eq!(normalize_angle(TAU), 0.0);
        assert!((angle_diff(0.1, TAU - 0.1) - 0.2).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn world_pixel_round_trip(u in 0i64..320, v in 0i64..160) {
            let c = WorkspaceCalib::standard(320, 160);
            let p = Pixel::new(u, v);
            let w = c.pixel_to_world(p).unwrap();
            prop_assert_eq!(c.world_to_pixel(w), p);
        }

        #[test]
        fn se2_inverse_round_trip(
            u in 0.0f64..160.0, v in 0.0f64..80.0,
            du in -20.0f64..20.0, dv in -20.0f64..20.0,
            alpha in 0.0f64..TAU,
        ) {
            let t = ImageSE2 { du, dv, alpha, pivot: (80.0, 40.0) };
            let (fu, fv) = t.apply(u, v);
            let (bu, bv) = t.apply_inverse(fu, fv);
            prop_assert!(((bu - u).powi(2) + (bv - v).powi(2)).sqrt() < 0.5);
        }
    }
}
