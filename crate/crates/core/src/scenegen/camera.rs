use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::geometry::{Aabb, Rect, Vec3};
use super::seed::SeedScene;

/// Pinhole camera. Yaw rotates about the vertical axis (yaw 0 looks along +z),
/// negative pitch looks down.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: Vec3,
    pub yaw: f64,
    pub pitch: f64,
    pub vertical_fov: f64,
    pub image_size: [u32; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraConfig {
    pub base_height: f64,
    pub height_jitter: f64,
    pub pitch_deg: f64,
    pub vertical_fov_deg: f64,
    pub image_width: u32,
    pub image_height: u32,
    /// Cameras stay inside the floor rectangle scaled by this factor.
    pub floor_fraction: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            base_height: 1.6,
            height_jitter: 0.1,
            pitch_deg: -5.0,
            vertical_fov_deg: 60.0,
            image_width: 1024,
            image_height: 768,
            floor_fraction: 0.75,
        }
    }
}

pub fn sample_camera<R: Rng>(seed: &SeedScene, config: &CameraConfig, rng: &mut R) -> Camera {
    let area = seed.floor_bounds.scaled(config.floor_fraction);
    let x = area.min[0] + rng.random::<f64>() * (area.max[0] - area.min[0]);
    let z = area.min[1] + rng.random::<f64>() * (area.max[1] - area.min[1]);
    let jitter = if config.height_jitter > 0.0 {
        rng.random_range(-config.height_jitter..=config.height_jitter)
    } else {
        0.0
    };
    let yaw = rng.random::<f64>() * TAU;
    Camera {
        position: Vec3::new(x, config.base_height + jitter, z),
        yaw,
        pitch: config.pitch_deg.to_radians(),
        vertical_fov: config.vertical_fov_deg.to_radians(),
        image_size: [config.image_width, config.image_height],
    }
}

/// Projection of a box onto the image plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    /// Pixel rectangle before clipping to the image.
    pub rect: Rect,
    /// Camera-space depth of the box center, clamped to the near plane.
    pub depth: f64,
    /// Every corner lies in front of the near plane.
    pub fully_in_front: bool,
}

impl Camera {
    pub const NEAR: f64 = 0.05;

    /// Right, up and forward unit vectors.
    pub fn basis(&self) -> (Vec3, Vec3, Vec3) {
        let (sy, cy) = self.yaw.sin_cos();
        let (sp, cp) = self.pitch.sin_cos();
        let forward = Vec3::new(cp * sy, sp, cp * cy);
        let right = Vec3::new(cy, 0.0, -sy);
        let up = forward.cross(right);
        (right, up, forward)
    }

    pub fn focal_px(&self) -> f64 {
        0.5 * f64::from(self.image_size[1]) / (0.5 * self.vertical_fov).tan()
    }

    pub fn image_rect(&self) -> Rect {
        Rect {
            x0: 0.0,
            y0: 0.0,
            x1: f64::from(self.image_size[0]),
            y1: f64::from(self.image_size[1]),
        }
    }

    pub fn to_camera(&self, p: Vec3) -> Vec3 {
        let (r, u, f) = self.basis();
        let d = p - self.position;
        Vec3::new(d.dot(r), d.dot(u), d.dot(f))
    }

    /// Pixel coordinates of a camera-space point in front of the camera.
    pub fn to_pixel(&self, c: Vec3) -> (f64, f64) {
        let fpx = self.focal_px();
        let w = f64::from(self.image_size[0]);
        let h = f64::from(self.image_size[1]);
        (0.5 * w + fpx * c.x / c.z, 0.5 * h - fpx * c.y / c.z)
    }

    /// Projects a box, clipping its edges against the near plane. `None` when
    /// the box lies entirely behind the near plane.
    pub fn project(&self, b: &Aabb) -> Option<Projection> {
        let corners = b.corners().map(|p| self.to_camera(p));
        let mut pts: Vec<Vec3> = corners.iter().copied().filter(|c| c.z > Self::NEAR).collect();
        if pts.is_empty() {
            return None;
        }
        let fully_in_front = pts.len() == 8;
        if !fully_in_front {
            for (i, j) in Aabb::EDGES {
                let (a, c) = (corners[i], corners[j]);
                if (a.z > Self::NEAR) != (c.z > Self::NEAR) {
                    let t = (Self::NEAR - a.z) / (c.z - a.z);
                    pts.push(a + (c - a) * t);
                }
            }
        }
        let mut rect = Rect {
            x0: f64::INFINITY,
            y0: f64::INFINITY,
            x1: f64::NEG_INFINITY,
            y1: f64::NEG_INFINITY,
        };
        for p in pts {
            let z = p.z.max(Self::NEAR);
            let (px, py) = self.to_pixel(Vec3::new(p.x, p.y, z));
            rect.x0 = rect.x0.min(px);
            rect.y0 = rect.y0.min(py);
            rect.x1 = rect.x1.max(px);
            rect.y1 = rect.y1.max(py);
        }
        let depth = self.to_camera(b.center()).z.max(Self::NEAR);
        Some(Projection {
            rect,
            depth,
            fully_in_front,
        })
    }
}
