use serde::{Deserialize, Serialize};

use super::camera::Camera;
use super::geometry::{union_area, Rect};
use super::rearrange::SceneInstance;
use crate::catalog::Domain;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaptureConfig {
    /// Objects whose clipped bbox is smaller than this are dropped.
    pub min_area_px: f64,
    /// Objects must be strictly more visible than this to be annotated.
    pub visibility_threshold: f64,
    /// Resolution of the occluder lookup grid.
    pub grid_size: usize,
}

impl Default for CaptureConfig {
    fn default() -> Self {
        Self {
            min_area_px: 400.0,
            visibility_threshold: 0.05,
            grid_size: 64,
        }
    }
}

pub const FULLY_VISIBLE: f64 = 0.999;
/// Snapshots with fewer annotated objects never reach the dialog simulator.
pub const MIN_OBJECTS: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectAnnotation {
    pub local_index: u32,
    pub item_id: String,
    /// Seed slot holding the object; stable across views of one instance.
    pub slot_id: String,
    /// `[x, y, w, h]` in pixels, clipped to the image.
    pub bbox_2d: [u32; 4],
    pub visibility: f64,
    pub fully_visible: bool,
}

impl ObjectAnnotation {
    pub fn center(&self) -> (f64, f64) {
        let [x, y, w, h] = self.bbox_2d.map(f64::from);
        (x + 0.5 * w, y + 0.5 * h)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSnapshot {
    pub snapshot_id: String,
    pub instance_id: String,
    pub domain: Domain,
    pub camera: Camera,
    /// Nearest first; `objects[i].local_index == i`.
    pub objects: Vec<ObjectAnnotation>,
}

impl SceneSnapshot {
    pub fn object(&self, local_index: u32) -> Option<&ObjectAnnotation> {
        self.objects.get(local_index as usize)
    }

    pub fn index_of_slot(&self, slot_id: &str) -> Option<u32> {
        self.objects
            .iter()
            .find(|o| o.slot_id == slot_id)
            .map(|o| o.local_index)
    }
}

pub fn accept_snapshot(snapshot: &SceneSnapshot) -> bool {
    snapshot.objects.len() >= MIN_OBJECTS
}

/// A projected occluder: an instance object or a fixture.
#[derive(Clone, Copy, Debug)]
pub struct Primitive {
    pub rect: Rect,
    pub depth: f64,
    /// Index into `instance.objects`, `None` for fixtures.
    pub object: Option<usize>,
    /// Whether the object lies wholly in front of the near plane.
    pub annotatable: bool,
}

/// Projects every object and fixture of the instance. Objects come first in
/// instance order, then fixtures; ties in depth resolve by this order.
pub fn project_primitives(instance: &SceneInstance, camera: &Camera) -> Vec<Primitive> {
    let objects = instance.objects.iter().enumerate().filter_map(|(i, o)| {
        camera.project(&o.world_box).map(|p| Primitive {
            rect: p.rect,
            depth: p.depth,
            object: Some(i),
            annotatable: p.fully_in_front,
        })
    });
    let fixtures = instance.fixtures.iter().filter_map(|b| {
        camera.project(b).map(|p| Primitive {
            rect: p.rect,
            depth: p.depth,
            object: None,
            annotatable: false,
        })
    });
    objects.chain(fixtures).collect()
}

/// Uniform grid over the image; each cell lists primitives overlapping it.
struct CoverageGrid {
    n: usize,
    cell_w: f64,
    cell_h: f64,
    cells: Vec<Vec<usize>>,
}

impl CoverageGrid {
    fn new(n: usize, image: &Rect) -> Self {
        let n = n.max(1);
        Self {
            n,
            cell_w: image.x1 / n as f64,
            cell_h: image.y1 / n as f64,
            cells: vec![Vec::new(); n * n],
        }
    }

    fn cell_range(&self, r: &Rect) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let clamp = |v: f64, len: f64| ((v / len).floor().max(0.0) as usize).min(self.n - 1);
        let cx0 = clamp(r.x0, self.cell_w);
        let cx1 = clamp(r.x1, self.cell_w);
        let cy0 = clamp(r.y0, self.cell_h);
        let cy1 = clamp(r.y1, self.cell_h);
        (cx0..cx1 + 1, cy0..cy1 + 1)
    }

    fn insert(&mut self, id: usize, clipped: &Rect) {
        let (xs, ys) = self.cell_range(clipped);
        for cy in ys {
            for cx in xs.clone() {
                self.cells[cy * self.n + cx].push(id);
            }
        }
    }

    fn candidates(&self, clipped: &Rect) -> Vec<usize> {
        let (xs, ys) = self.cell_range(clipped);
        let mut out = Vec::new();
        for cy in ys {
            for cx in xs.clone() {
                out.extend_from_slice(&self.cells[cy * self.n + cx]);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Visibility of every primitive: the fraction of its projected rectangle that
/// is inside the image and not covered by a nearer primitive.
pub fn primitive_visibility(prims: &[Primitive], image: &Rect, grid_size: usize) -> Vec<f64> {
    let mut grid = CoverageGrid::new(grid_size, image);
    let clipped: Vec<Rect> = prims.iter().map(|p| p.rect.intersect(image)).collect();
    for (i, c) in clipped.iter().enumerate() {
        if !c.is_empty() {
            grid.insert(i, c);
        }
    }
    let nearer = |j: usize, i: usize| (prims[j].depth, j) < (prims[i].depth, i);
    prims
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let full = p.rect.area();
            let clip = clipped[i];
            if full <= 0.0 || clip.is_empty() {
                return 0.0;
            }
            let occluders: Vec<Rect> = grid
                .candidates(&clip)
                .into_iter()
                .filter(|&j| j != i && nearer(j, i))
                .map(|j| clipped[j].intersect(&clip))
                .filter(|r| !r.is_empty())
                .collect();
            let visible = clip.area() - union_area(&occluders);
            (visible / full).clamp(0.0, 1.0)
        })
        .collect()
}

pub fn capture_snapshot(
    instance: &SceneInstance,
    camera: &Camera,
    config: &CaptureConfig,
    snapshot_id: impl Into<String>,
) -> SceneSnapshot {
    let image = camera.image_rect();
    let prims = project_primitives(instance, camera);
    let vis = primitive_visibility(&prims, &image, config.grid_size);

    let mut kept: Vec<(f64, usize, Rect, f64)> = prims
        .iter()
        .zip(&vis)
        .filter_map(|(p, &v)| {
            let obj = p.object?;
            let clip = p.rect.intersect(&image);
            let keep = p.annotatable
                && !clip.is_empty()
                && clip.area() >= config.min_area_px
                && v > config.visibility_threshold;
            keep.then_some((p.depth, obj, clip, v))
        })
        .collect();
    kept.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let objects = kept
        .into_iter()
        .enumerate()
        .map(|(k, (_, obj, clip, v))| {
            let o = &instance.objects[obj];
            ObjectAnnotation {
                local_index: k as u32,
                item_id: o.item_id.clone(),
                slot_id: o.slot_id.clone(),
                bbox_2d: pixel_box(&clip, camera.image_size),
                visibility: v,
                fully_visible: v >= FULLY_VISIBLE,
            }
        })
        .collect();

    SceneSnapshot {
        snapshot_id: snapshot_id.into(),
        instance_id: instance.instance_id.clone(),
        domain: instance.domain,
        camera: camera.clone(),
        objects,
    }
}

fn pixel_box(clip: &Rect, [w, h]: [u32; 2]) -> [u32; 4] {
    let x0 = (clip.x0.floor().max(0.0) as u32).min(w - 1);
    let y0 = (clip.y0.floor().max(0.0) as u32).min(h - 1);
    let x1 = (clip.x1.ceil() as u32).clamp(x0 + 1, w);
    let y1 = (clip.y1.ceil() as u32).clamp(y0 + 1, h);
    [x0, y0, x1 - x0, y1 - y0]
}
