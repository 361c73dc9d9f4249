use crate::error::{Error, Result};
use crate::math::V3;

/// Row-major `height x width x channels` float image, linear radiometry.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::invalid("raster", format!("{channels} channels, expected 1 or 3")));
        }
        if data.len() != width * height * channels {
            return Err(Error::DimensionMismatch {
                field: "raster".into(),
                expected: format!("{} values", width * height * channels),
                found: format!("{} values", data.len()),
            });
        }
        Ok(Raster {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self::filled(width, height, channels, 0.0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Self {
        assert!(channels == 1 || channels == 3);
        Raster {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut r = Self::zeros(width, height, channels);
        for row in 0..height {
            for col in 0..width {
                for ch in 0..channels {
                    r.data[(row * width + col) * channels + ch] = f(row, col, ch);
                }
            }
        }
        r
    }

    /// Builds a 3-channel raster from per-pixel f64 RGB values.
    pub fn from_rgb(width: usize, height: usize, px: &[[f64; 3]]) -> Self {
        assert_eq!(px.len(), width * height);
        let data = px.iter().flat_map(|c| c.iter().map(|&v| v as f32)).collect();
        Raster {
            width,
            height,
            channels: 3,
            data,
        }
    }

    pub fn from_scalar(width: usize, height: usize, px: &[f64]) -> Self {
        assert_eq!(px.len(), width * height);
        Raster {
            width,
            height,
            channels: 1,
            data: px.iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn same_shape(&self, other: &Raster) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn check_shape(&self, field: &str, width: usize, height: usize, channels: usize) -> Result<()> {
        if self.width != width || self.height != height || self.channels != channels {
            return Err(Error::DimensionMismatch {
                field: field.into(),
                expected: format!("{width}x{height}x{channels}"),
                found: format!("{}x{}x{}", self.width, self.height, self.channels),
            });
        }
        Ok(())
    }

    pub fn check_finite(&self, field: &str) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::NonFinite {
                field: field.into(),
                index,
            }),
            None => Ok(()),
        }
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> f32 {
        self.data[(row * self.width + col) * self.channels + ch]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, ch: usize, v: f32) {
        self.data[(row * self.width + col) * self.channels + ch] = v;
    }

    /// Value at a flat pixel index; channel 0 for single-channel rasters.
    #[inline]
    pub fn at(&self, pixel: usize, ch: usize) -> f32 {
        self.data[pixel * self.channels + ch]
    }

    pub fn rgb(&self, pixel: usize) -> [f64; 3] {
        if self.channels == 1 {
            let v = self.data[pixel] as f64;
            [v, v, v]
        } else {
            let o = pixel * 3;
            [self.data[o] as f64, self.data[o + 1] as f64, self.data[o + 2] as f64]
        }
    }

    pub fn vec3(&self, pixel: usize) -> V3 {
        let [x, y, z] = self.rgb(pixel);
        V3::new(x, y, z)
    }

    /// Non-zero pixels of a single-channel mask.
    pub fn mask_pixels(&self) -> Vec<usize> {
        (0..self.pixel_count()).filter(|&p| self.at(p, 0) > 0.5).collect()
    }

    pub fn is_mask_set(&self, pixel: usize) -> bool {
        self.at(pixel, 0) > 0.5
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Raster {
        Raster {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }
}

/// Square dilation of a binary mask by `radius` pixels (Chebyshev distance).
pub fn dilate(mask: &Raster, radius: usize) -> Raster {
    morph(mask, radius, true)
}

/// Square erosion of a binary mask; pixels outside the image count as unset.
pub fn erode(mask: &Raster, radius: usize) -> Raster {
    morph(mask, radius, false)
}

fn morph(mask: &Raster, radius: usize, dilation: bool) -> Raster {
    let (w, h) = (mask.width, mask.height);
    let r = radius as isize;
    Raster::from_fn(w, h, 1, |row, col, _| {
        let mut hit = !dilation;
        'scan: for dr in -r..=r {
            for dc in -r..=r {
                let (rr, cc) = (row as isize + dr, col as isize + dc);
                let inside = rr >= 0 && cc >= 0 && (rr as usize) < h && (cc as usize) < w;
                let set = inside && mask.get(rr as usize, cc as usize, 0) > 0.5;
                if dilation && set {
                    hit = true;
                    break 'scan;
                }
                if !dilation && !set {
                    hit = false;
                    break 'scan;
                }
            }
        }
        if hit {
            1.0
        } else {
            0.0
        }
    })
}

/// `dilation(M, n) - M`: the ring of width `n` around a mask.
pub fn outer_ring(mask: &Raster, n: usize) -> Raster {
    let d = dilate(mask, n);
    Raster::from_fn(mask.width, mask.height, 1, |r, c, _| {
        if d.get(r, c, 0) > 0.5 && mask.get(r, c, 0) <= 0.5 {
            1.0
        } else {
            0.0
        }
    })
}

/// `M - erosion(M, 1)`: the inner boundary pixels of a mask.
pub fn inner_edge(mask: &Raster) -> Raster {
    let e = erode(mask, 1);
    Raster::from_fn(mask.width, mask.height, 1, |r, c, _| {
        if mask.get(r, c, 0) > 0.5 && e.get(r, c, 0) <= 0.5 {
            1.0
        } else {
            0.0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_mask(w: usize, h: usize, r0: usize, r1: usize, c0: usize, c1: usize) -> Raster {
        Raster::from_fn(w, h, 1, |r, c, _| {
            if (r0..r1).contains(&r) && (c0..c1).contains(&c) {
                1.0
            } else {
                0.0
            }
        })
    }

    #[test]
    fn new_checks_length() {
        assert!(Raster::new(2, 2, 3, vec![0.0; 11]).is_err());
        assert!(Raster::new(2, 2, 2, vec![0.0; 8]).is_err());
        assert!(Raster::new(2, 2, 3, vec![0.0; 12]).is_ok());
    }

    #[test]
    fn ring_and_edge_of_square() {
        let m = square_mask(10, 10, 3, 6, 3, 6);
        assert_eq!(outer_ring(&m, 1).mask_pixels().len(), 25 - 9);
        assert_eq!(outer_ring(&m, 2).mask_pixels().len(), 49 - 9);
        assert_eq!(inner_edge(&m).mask_pixels().len(), 9 - 1);
    }

    #[test]
    fn erosion_treats_border_as_unset() {
        let m = Raster::filled(4, 4, 1, 1.0);
        assert_eq!(inner_edge(&m).mask_pixels().len(), 12);
    }

    #[test]
    fn finite_check_reports_index() {
        let r = Raster::new(2, 1, 1, vec![0.0, f32::NAN]).unwrap();
        match r.check_finite("depth") {
            Err(Error::NonFinite { field, index }) => {
                assert_eq!(field, "depth");
                assert_eq!(index, 1);
            }
            other => panic!("{other:?}"),
        }
    }
}
