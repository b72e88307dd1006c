//! Synthetic multi-view scenes.
//!
//! Every scene is a height field `z = h(x, y)` over a rectangle, observed by
//! `V` orthographic top-down cameras that each cover one vertical strip of
//! the rectangle. Pixel grids of neighboring strips share their border
//! column, so one global pixel lattice covers the whole scene. Instance
//! ids are functions of the pixel lattice, and a point's ground-truth id is
//! the id of the pixel it maps to, so rasters and labels agree exactly.
//!
//! Smoothing blurs the height field with a Gaussian kernel of
//! `smoothing_sigma` meters (closed form for rectangles and bumps), which
//! softens the geometric edges between instances.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Correspondence, CorrespondenceTable, FeatureMatrix, ImageFeatureStack, InstanceRaster, PointCloud, ViewDims};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    /// A wall with a slightly raised painting flush against it.
    FlushObject,
    /// A floor with several boxes standing on it.
    BoxRoom,
    /// One plane split across views, single instance.
    TwoViewSeam,
    /// A plane with Gaussian bumps, each bump its own instance.
    RandomBlobs,
}

impl FromStr for SceneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('_', "-").as_str() {
            "flush-object" => Ok(SceneKind::FlushObject),
            "box-room" => Ok(SceneKind::BoxRoom),
            "two-view-seam" => Ok(SceneKind::TwoViewSeam),
            "random-blobs" => Ok(SceneKind::RandomBlobs),
            other => Err(Error::invalid(format!("unknown scene kind {other:?}"))),
        }
    }
}

impl fmt::Display for SceneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SceneKind::FlushObject => "flush-object",
            SceneKind::BoxRoom => "box-room",
            SceneKind::TwoViewSeam => "two-view-seam",
            SceneKind::RandomBlobs => "random-blobs",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneRecipe {
    pub scene_kind: SceneKind,
    pub point_count: usize,
    pub view_count: usize,
    pub raster_dims: ViewDims,
    pub smoothing_sigma: f64,
    pub seed: u64,
}

impl SceneRecipe {
    pub fn new(scene_kind: SceneKind, point_count: usize, view_count: usize, smoothing_sigma: f64, seed: u64) -> Self {
        Self {
            scene_kind,
            point_count,
            view_count,
            raster_dims: ViewDims::new(240, 160),
            smoothing_sigma,
            seed,
        }
    }
}

/// Relief of the painting in front of the wall, in meters.
pub const PAINTING_RELIEF: f64 = 0.02;

const CAMERA_HEIGHT: f32 = 10.0;
const MIN_POINTS: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct SceneBundle {
    pub recipe: SceneRecipe,
    pub points: PointCloud,
    pub corr: CorrespondenceTable,
    pub raster: InstanceRaster,
    /// Scene-level instance id of every point, contiguous from 0.
    pub ground_truth: Vec<u32>,
    /// `instance_map[v][local]` is the scene-level id of view-local id `local`.
    pub instance_map: Vec<Vec<u32>>,
    pub view_origins: Vec<[f32; 3]>,
    pub instance_count: usize,
}

impl SceneBundle {
    /// Camera origin of each point's own view.
    pub fn point_origins(&self) -> Vec<[f32; 3]> {
        self.corr.entries().iter().map(|e| self.view_origins[e.view as usize]).collect()
    }
}

/// Axis-aligned rectangle in world coordinates.
#[derive(Clone, Copy, Debug)]
struct Rect {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Rect {
    fn contains(&self, x: f64, y: f64) -> bool {
        (self.x0..=self.x1).contains(&x) && (self.y0..=self.y1).contains(&y)
    }

    fn overlaps(&self, o: &Rect, margin: f64) -> bool {
        self.x0 - margin < o.x1 && o.x0 - margin < self.x1 && self.y0 - margin < o.y1 && o.y0 - margin < self.y1
    }

    /// Rectangle indicator blurred by an isotropic Gaussian.
    fn smoothed(&self, x: f64, y: f64, sigma: f64) -> f64 {
        if sigma <= 0.0 {
            return self.contains(x, y) as u8 as f64;
        }
        let s = sigma * SQRT_2;
        let ax = 0.5 * (libm::erf((x - self.x0) / s) - libm::erf((x - self.x1) / s));
        let ay = 0.5 * (libm::erf((y - self.y0) / s) - libm::erf((y - self.y1) / s));
        ax * ay
    }
}

#[derive(Clone, Copy, Debug)]
struct Bump {
    cx: f64,
    cy: f64,
    amplitude: f64,
    spread: f64,
}

impl Bump {
    fn height(&self, x: f64, y: f64, sigma: f64) -> f64 {
        let var = self.spread * self.spread + sigma * sigma;
        let r2 = (x - self.cx).powi(2) + (y - self.cy).powi(2);
        self.amplitude * self.spread * self.spread / var * (-r2 / (2.0 * var)).exp()
    }

    fn footprint(&self) -> f64 {
        2.0 * self.spread
    }
}

/// Global pixel lattice shared by all strip cameras.
#[derive(Clone, Copy, Debug)]
struct Lattice {
    width_m: f64,
    height_m: f64,
    views: usize,
    dims: ViewDims,
}

impl Lattice {
    fn strip_width(&self) -> f64 {
        self.width_m / self.views as f64
    }

    fn pitch_x(&self) -> f64 {
        self.strip_width() / (self.dims.width - 1) as f64
    }

    fn pitch_y(&self) -> f64 {
        self.height_m / (self.dims.height - 1) as f64
    }

    fn pixel_center(&self, view: usize, row: u32, col: u32) -> (f64, f64) {
        let g = view * (self.dims.width as usize - 1) + col as usize;
        (g as f64 * self.pitch_x(), row as f64 * self.pitch_y())
    }

    /// Expands a target rectangle to the pixel cells whose centers it contains.
    fn snap(&self, r: Rect) -> Rect {
        let (px, py) = (self.pitch_x(), self.pitch_y());
        let g0 = (r.x0 / px).ceil();
        let g1 = (r.x1 / px).floor().max(g0);
        let r0 = (r.y0 / py).ceil();
        let r1 = (r.y1 / py).floor().max(r0);
        Rect {
            x0: (g0 - 0.5) * px,
            x1: (g1 + 0.5) * px,
            y0: (r0 - 0.5) * py,
            y1: (r1 + 0.5) * py,
        }
    }
}

enum Surface {
    /// Base plane plus raised rectangles; instance `k + 1` is rectangle `k`.
    Rects(Vec<(Rect, f64)>),
    /// Base plane plus bumps; instance `k + 1` is bump `k`.
    Bumps(Vec<Bump>),
}

impl Surface {
    fn height(&self, x: f64, y: f64, sigma: f64) -> f64 {
        match self {
            Surface::Rects(rects) => rects.iter().map(|(r, h)| h * r.smoothed(x, y, sigma)).sum(),
            Surface::Bumps(bumps) => bumps.iter().map(|b| b.height(x, y, sigma)).sum(),
        }
    }

    fn label(&self, x: f64, y: f64) -> u32 {
        match self {
            Surface::Rects(rects) => rects
                .iter()
                .position(|(r, _)| r.contains(x, y))
                .map_or(0, |k| k as u32 + 1),
            Surface::Bumps(bumps) => bumps
                .iter()
                .enumerate()
                .filter(|(_, b)| (x - b.cx).hypot(y - b.cy) <= b.footprint())
                .min_by(|(_, a), (_, b)| {
                    let da = (x - a.cx).hypot(y - a.cy);
                    let db = (x - b.cx).hypot(y - b.cy);
                    da.total_cmp(&db)
                })
                .map_or(0, |(k, _)| k as u32 + 1),
        }
    }
}

fn layout(recipe: &SceneRecipe, rng: &mut ChaCha8Rng) -> Result<(Lattice, Surface)> {
    let lattice = |width_m, height_m| Lattice {
        width_m,
        height_m,
        views: recipe.view_count,
        dims: recipe.raster_dims,
    };
    Ok(match recipe.scene_kind {
        SceneKind::FlushObject => {
            let lat = lattice(4.0, 3.0);
            let painting = lat.snap(Rect { x0: 1.4, x1: 2.6, y0: 1.0, y1: 2.0 });
            (lat, Surface::Rects(vec![(painting, PAINTING_RELIEF)]))
        }
        SceneKind::BoxRoom => {
            let lat = lattice(6.0, 4.0);
            let target = rng.random_range(4..=6);
            let mut boxes: Vec<(Rect, f64)> = Vec::new();
            for _ in 0..1000 {
                if boxes.len() == target {
                    break;
                }
                let (w, d) = (rng.random_range(0.5..1.2), rng.random_range(0.5..1.2));
                let x0 = rng.random_range(0.2..lat.width_m - w - 0.2);
                let y0 = rng.random_range(0.2..lat.height_m - d - 0.2);
                let r = lat.snap(Rect { x0, x1: x0 + w, y0, y1: y0 + d });
                let height = rng.random_range(0.3..0.8);
                if boxes.iter().all(|(o, _)| !o.overlaps(&r, 0.15)) {
                    boxes.push((r, height));
                }
            }
            (lat, Surface::Rects(boxes))
        }
        SceneKind::TwoViewSeam => {
            if recipe.view_count < 2 {
                return Err(Error::invalid("two-view-seam needs at least 2 views"));
            }
            (lattice(4.0, 3.0), Surface::Rects(Vec::new()))
        }
        SceneKind::RandomBlobs => {
            let lat = lattice(5.0, 4.0);
            let count = rng.random_range(3..=7);
            let mut bumps: Vec<Bump> = Vec::new();
            for _ in 0..1000 {
                if bumps.len() == count {
                    break;
                }
                let spread = rng.random_range(0.15..0.3);
                let b = Bump {
                    cx: rng.random_range(0.5..lat.width_m - 0.5),
                    cy: rng.random_range(0.5..lat.height_m - 0.5),
                    amplitude: rng.random_range(0.1..0.3),
                    spread,
                };
                if bumps
                    .iter()
                    .all(|o| (o.cx - b.cx).hypot(o.cy - b.cy) > o.footprint() + b.footprint())
                {
                    bumps.push(b);
                }
            }
            (lat, Surface::Bumps(bumps))
        }
    })
}

pub fn generate(recipe: &SceneRecipe) -> Result<SceneBundle> {
    if recipe.view_count == 0 {
        return Err(Error::invalid("at least one view is required"));
    }
    if recipe.raster_dims.height < 2 || recipe.raster_dims.width < 2 {
        return Err(Error::invalid("rasters must be at least 2x2"));
    }
    if !(recipe.smoothing_sigma.is_finite() && recipe.smoothing_sigma >= 0.0) {
        return Err(Error::invalid("smoothing_sigma must be finite and non-negative"));
    }
    if recipe.point_count < MIN_POINTS.max(8 * recipe.view_count) {
        return Err(Error::invalid(format!(
            "{} points are too few to cover a {} scene with {} views",
            recipe.point_count, recipe.scene_kind, recipe.view_count
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(recipe.seed);
    let (lat, surface) = layout(recipe, &mut rng)?;
    let dims = recipe.raster_dims;
    let views = recipe.view_count;

    let mut raw = Vec::with_capacity(views * (dims.height * dims.width) as usize);
    for v in 0..views {
        for row in 0..dims.height {
            for col in 0..dims.width {
                let (x, y) = lat.pixel_center(v, row, col);
                raw.push(surface.label(x, y) as i32);
            }
        }
    }

    let sw = lat.strip_width();
    let mut positions = Vec::with_capacity(recipe.point_count);
    let mut entries = Vec::with_capacity(recipe.point_count);
    let mut scene_ids = Vec::with_capacity(recipe.point_count);
    for _ in 0..recipe.point_count {
        let x = rng.random_range(0.0..=lat.width_m);
        let y = rng.random_range(0.0..=lat.height_m);
        let view = ((x / sw) as usize).min(views - 1);
        let nx = (((x - view as f64 * sw) / sw) as f32).clamp(0.0, 1.0);
        let ny = ((y / lat.height_m) as f32).clamp(0.0, 1.0);
        let (row, col) = dims.nearest_pixel(nx, ny);
        let plane = (dims.height * dims.width) as usize;
        scene_ids.push(raw[view * plane + (row * dims.width + col) as usize] as u32);
        let z = surface.height(x, y, recipe.smoothing_sigma);
        positions.push([x as f32, y as f32, z as f32]);
        entries.push(Correspondence { view: view as u32, x: nx, y: ny });
    }

    let mut present: Vec<u32> = scene_ids.clone();
    present.sort_unstable();
    present.dedup();
    let missing = (0..=present.last().copied().unwrap_or(0)).find(|id| present.binary_search(id).is_err());
    if missing.is_some() {
        return Err(Error::invalid(format!(
            "{} points are too few to cover every instance of the {} scene",
            recipe.point_count, recipe.scene_kind
        )));
    }
    let instance_count = present.len();

    let plane = (dims.height * dims.width) as usize;
    let instance_map: Vec<Vec<u32>> = (0..views)
        .map(|v| {
            let mut ids: Vec<u32> = raw[v * plane..(v + 1) * plane].iter().map(|&l| l as u32).collect();
            ids.sort_unstable();
            ids.dedup();
            ids
        })
        .collect();
    let (raster, _) = InstanceRaster::relabeled(views, dims.height as usize, dims.width as usize, raw)?;
    let corr = CorrespondenceTable::new(entries, vec![dims; views])?;
    let points = PointCloud::new(positions)?;
    let view_origins = (0..views)
        .map(|v| [((v as f64 + 0.5) * sw) as f32, (lat.height_m / 2.0) as f32, CAMERA_HEIGHT])
        .collect();
    Ok(SceneBundle {
        recipe: *recipe,
        points,
        corr,
        raster,
        ground_truth: scene_ids,
        instance_map,
        view_origins,
        instance_count,
    })
}

/// Image features and text embeddings that make decoding meaningful on a
/// synthetic scene: every instance gets a random unit embedding, feature
/// maps carry the embedding of the instance under each texel plus noise,
/// and the first `instance_count` text rows are the clean embeddings.
pub fn synthetic_features(
    bundle: &SceneBundle,
    feature_dims: ViewDims,
    channels: usize,
    text_rows: usize,
    seed: u64,
) -> Result<(ImageFeatureStack, FeatureMatrix)> {
    if text_rows < bundle.instance_count {
        return Err(Error::invalid(format!(
            "{text_rows} text rows cannot cover {} instances",
            bundle.instance_count
        )));
    }
    if channels == 0 || feature_dims.height < 2 || feature_dims.width < 2 {
        return Err(Error::invalid("feature maps need at least 1 channel and 2x2 texels"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = |rng: &mut ChaCha8Rng| {
        let v: Vec<f32> = (0..channels).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f32>().sqrt().max(1e-6);
        v.into_iter().map(|x| x / norm).collect::<Vec<f32>>()
    };
    let text: Vec<Vec<f32>> = (0..text_rows).map(|_| unit(&mut rng)).collect();
    let raster_dims = bundle.raster.dims();
    let views = bundle.raster.views();
    let (fh, fw) = (feature_dims.height as usize, feature_dims.width as usize);
    let mut data = Vec::with_capacity(views * fh * fw * channels);
    for v in 0..views {
        for r in 0..fh {
            for c in 0..fw {
                // Texel centers share the align-corners convention with the raster.
                let (row, col) = raster_dims.nearest_pixel(c as f32 / (fw - 1) as f32, r as f32 / (fh - 1) as f32);
                let local = bundle.raster.get(v, row as usize, col as usize).unwrap_or(0).max(0) as usize;
                let id = bundle.instance_map[v][local] as usize;
                data.extend(text[id].iter().map(|&t| t + rng.random_range(-0.05f32..0.05)));
            }
        }
    }
    let stack = ImageFeatureStack::new(views, fh, fw, channels, data)?;
    let text = FeatureMatrix::from_rows(&text)?;
    Ok((stack, text))
}
