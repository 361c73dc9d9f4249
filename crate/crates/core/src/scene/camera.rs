use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::V3;

/// Lower bound on the camera-facing normal component used by footprint areas.
pub const GRAZING_EPS: f64 = 1e-3;

/// Pinhole intrinsics.
///
/// Right-handed camera space with the camera at the origin, looking down
/// `-z` with `+y` up. Pixel `(0, 0)` is the top-left pixel and pixel centers
/// sit at half-integer offsets. The field of view is measured across the
/// shorter image axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fov_short_axis: f64,
    pub width: usize,
    pub height: usize,
}

/// Pixel footprint area together with a flag set when the normal was clamped.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Footprint {
    pub area: f64,
    pub grazing: bool,
}

impl CameraIntrinsics {
    pub fn new(fov_short_axis: f64, width: usize, height: usize) -> Result<Self> {
        let cam = CameraIntrinsics {
            fov_short_axis,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fov_short_axis > 0.0 && self.fov_short_axis < std::f64::consts::PI) {
            return Err(Error::OutOfRange {
                param: "camera.fov".into(),
                value: self.fov_short_axis,
                range: "(0, pi)".into(),
            });
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("camera", "width and height must be >= 1"));
        }
        Ok(())
    }

    pub fn short_axis(&self) -> usize {
        self.width.min(self.height)
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Side length of one pixel on the image plane at unit depth.
    pub fn pixel_pitch(&self) -> f64 {
        2.0 * (0.5 * self.fov_short_axis).tan() / self.short_axis() as f64
    }

    /// Image-plane ray `[X, Y, -1]` through the center of pixel `(row, col)`.
    pub fn ray(&self, row: usize, col: usize) -> V3 {
        self.ray_at(row as f64 + 0.5, col as f64 + 0.5)
    }

    /// Image-plane ray through continuous pixel coordinates.
    pub fn ray_at(&self, row: f64, col: f64) -> V3 {
        let s = self.pixel_pitch();
        V3::new(
            (col - 0.5 * self.width as f64) * s,
            (0.5 * self.height as f64 - row) * s,
            -1.0,
        )
    }

    pub fn unproject(&self, row: usize, col: usize, depth: f64) -> V3 {
        self.ray(row, col).scale(depth)
    }

    /// Continuous `(row, col)` coordinates of a camera-space point, or `None`
    /// for points at or behind the camera plane.
    pub fn project(&self, p: V3) -> Option<(f64, f64)> {
        if p.z >= 0.0 {
            return None;
        }
        let depth = -p.z;
        let s = self.pixel_pitch();
        let col = p.x / depth / s + 0.5 * self.width as f64;
        let row = 0.5 * self.height as f64 - p.y / depth / s;
        Some((row, col))
    }

    pub fn contains(&self, row: f64, col: f64) -> bool {
        row >= 0.0 && col >= 0.0 && row < self.height as f64 && col < self.width as f64
    }

    /// Surface area seen by one pixel at `depth` with camera-space `normal`.
    ///
    /// The pixel side at depth `D` is `2 D tan(f/2) / S` with `S` the short
    /// image axis; the cross-section is divided by the camera-facing normal
    /// component, clamped to [`GRAZING_EPS`].
    pub fn footprint_area(&self, depth: f64, normal: V3) -> Footprint {
        let side = self.pixel_pitch() * depth;
        let (cos, grazing) = facing(normal);
        Footprint {
            area: side * side / cos,
            grazing,
        }
    }

    /// The literal variant `(tan(f/2) / H)^2 / N_z`, without the depth factor.
    pub fn footprint_area_literal(&self, normal: V3) -> Footprint {
        let side = (0.5 * self.fov_short_axis).tan() / self.height as f64;
        let (cos, grazing) = facing(normal);
        Footprint {
            area: side * side / cos,
            grazing,
        }
    }
}

fn facing(normal: V3) -> (f64, bool) {
    let c = normal.z;
    if c > GRAZING_EPS {
        (c, false)
    } else {
        (GRAZING_EPS, true)
    }
}
