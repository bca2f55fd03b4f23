//! Orthographic top-down rasterization of scenes into spatially consistent
//! observations and segmentation masks, plus SE(2) image transforms and the
//! PPM/PGM export used by the CLI.
//!
//! No anti-aliasing anywhere: tests compare images bit-exactly.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom;
use crate::scene::{Scene, ZoneGeometry};
use crate::spatial::{ImageSE2, Pixel, Vec2, WorkspaceCalib};

/// Fixed entity palette. Per-task overrides (bag colors, item colors) are
/// chosen from here at reset time.
pub mod palette {
    pub const TABLE: [f32; 3] = [0.50, 0.50, 0.50];
    pub const ZONE: [f32; 3] = [0.10, 0.80, 0.15];
    pub const CABLE: [f32; 3] = [0.85, 0.15, 0.10];
    pub const FABRIC: [f32; 3] = [0.85, 0.55, 0.25];
    pub const CUBE: [f32; 3] = [0.80, 0.10, 0.10];
    pub const BLOCK: [f32; 3] = [0.85, 0.10, 0.20];
    pub const BAG_YELLOW: [f32; 3] = [0.90, 0.80, 0.10];
    pub const BAG_BLUE: [f32; 3] = [0.15, 0.30, 0.85];
    pub const ITEM_CYAN: [f32; 3] = [0.10, 0.60, 0.80];
    pub const ITEM_MAGENTA: [f32; 3] = [0.70, 0.20, 0.70];
}

/// Synthetic height of one fabric layer (meters).
pub const FABRIC_LAYER_HEIGHT: f64 = 0.006;
/// Stroke half-width for polyline zones (meters).
pub const ZONE_LINE_HALF_WIDTH: f64 = 0.008;
/// Dot radius for ring-target zones (meters).
pub const ZONE_DOT_RADIUS: f64 = 0.008;

/// H x W x 6 observation: channels 0-2 color in [0,1], channels 3-5 the
/// replicated depth/height in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationImage {
    pub w: usize,
    pub h: usize,
    pub data: Vec<f32>,
}

impl ObservationImage {
    pub fn new(w: usize, h: usize) -> Self {
        ObservationImage { w, h, data: vec![0.0; w * h * 6] }
    }

    #[inline]
    pub fn idx(&self, u: usize, v: usize) -> usize {
        (v * self.w + u) * 6
    }

    pub fn pixel(&self, u: usize, v: usize) -> &[f32] {
        let i = self.idx(u, v);
        &self.data[i..i + 6]
    }

    pub fn set_pixel(&mut self, u: usize, v: usize, color: [f32; 3], depth: f32) {
        let i = self.idx(u, v);
        self.data[i] = color[0];
        self.data[i + 1] = color[1];
        self.data[i + 2] = color[2];
        self.data[i + 3] = depth;
        self.data[i + 4] = depth;
        self.data[i + 5] = depth;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Per-pixel topmost entity ids; 0 is background/table.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationMask {
    pub w: usize,
    pub h: usize,
    pub data: Vec<u16>,
}

impl SegmentationMask {
    pub fn id_at(&self, u: usize, v: usize) -> u16 {
        self.data[v * self.w + u]
    }

    pub fn count_id(&self, id: u16) -> usize {
        self.data.iter().filter(|&&x| x == id).count()
    }

    pub fn pixels_of(&self, id: u16) -> Vec<Pixel> {
        let mut out = Vec::new();
        for v in 0..self.h {
            for u in 0..self.w {
                if self.data[v * self.w + u] == id {
                    out.push(Pixel::new(u as i64, v as i64));
                }
            }
        }
        out
    }
}

struct Raster {
    w: usize,
    h: usize,
    color: Vec<[f32; 3]>,
    depth: Vec<f64>,
    id: Vec<u16>,
}

impl Raster {
    fn new(w: usize, h: usize) -> Self {
        Raster {
            w,
            h,
            color: vec![palette::TABLE; w * h],
            depth: vec![0.0; w * h],
            id: vec![0; w * h],
        }
    }

    /// Later paint calls win ties, which realizes the painter's order
    /// table -> zones -> fabrics -> beads -> items.
    #[inline]
    fn paint(&mut self, u: usize, v: usize, height: f64, color: [f32; 3], id: u16) {
        let i = v * self.w + u;
        if height >= self.depth[i] {
            self.depth[i] = height;
            self.color[i] = color;
            self.id[i] = id;
        }
    }
}

fn pixel_bbox(c: &WorkspaceCalib, min: Vec2, max: Vec2) -> (usize, usize, usize, usize) {
    let lo = c.world_to_pixel(min);
    let hi = c.world_to_pixel(max);
    (lo.u as usize, lo.v as usize, hi.u as usize, hi.v as usize)
}

fn rasterize(scene: &Scene, c: &WorkspaceCalib) -> Raster {
    let mut r = Raster::new(c.img_w, c.img_h);

    // Zones (flat, drawn over the table only).
    for z in &scene.zones {
        if !z.visible {
            continue;
        }
        match &z.geometry {
            ZoneGeometry::Polygon(poly) => {
                if poly.len() >= 3 {
                    let (minx, maxx) = poly.iter().fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p.x), a.1.max(p.x)));
                    let (miny, maxy) = poly.iter().fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p.y), a.1.max(p.y)));
                    let (u0, v0, u1, v1) = pixel_bbox(c, Vec2::new(minx, miny), Vec2::new(maxx, maxy));
                    for v in v0..=v1 {
                        for u in u0..=u1 {
                            let p = c.pixel_to_world(Pixel::new(u as i64, v as i64)).unwrap();
                            if geom::point_in_polygon(p, poly) {
                                r.paint(u, v, 0.0, z.color, z.mask_id);
                            }
                        }
                    }
                }
            }
            ZoneGeometry::Polyline { points, .. } => {
                if points.len() >= 2 {
                    let m = ZONE_LINE_HALF_WIDTH;
                    let (minx, maxx) = points.iter().fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p.x), a.1.max(p.x)));
                    let (miny, maxy) = points.iter().fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p.y), a.1.max(p.y)));
                    let (u0, v0, u1, v1) = pixel_bbox(
                        c,
                        c.clamp_world(Vec2::new(minx - m, miny - m)),
                        c.clamp_world(Vec2::new(maxx + m, maxy + m)),
                    );
                    for v in v0..=v1 {
                        for u in u0..=u1 {
                            let p = c.pixel_to_world(Pixel::new(u as i64, v as i64)).unwrap();
                            if geom::point_polyline_distance(p, points) <= m {
                                r.paint(u, v, 0.0, z.color, z.mask_id);
                            }
                        }
                    }
                }
            }
            ZoneGeometry::Ring(targets) => {
                for t in targets {
                    paint_disk(&mut r, c, *t, ZONE_DOT_RADIUS, 0.0, z.color, z.mask_id);
                }
            }
        }
    }

    // Fabrics: per-pixel layer count from mesh self-overlap; a fabric that
    // has been folded over an item renders above it.
    for f in &scene.fabrics {
        let s = f.side;
        let mut layers = vec![0u16; c.img_w * c.img_h];
        for row in 0..s - 1 {
            for col in 0..s - 1 {
                let quad = [
                    f.vertex(row, col),
                    f.vertex(row, col + 1),
                    f.vertex(row + 1, col + 1),
                    f.vertex(row + 1, col),
                ];
                let (minx, maxx) = quad.iter().fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p.x), a.1.max(p.x)));
                let (miny, maxy) = quad.iter().fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p.y), a.1.max(p.y)));
                let (u0, v0, u1, v1) = pixel_bbox(
                    c,
                    c.clamp_world(Vec2::new(minx, miny)),
                    c.clamp_world(Vec2::new(maxx, maxy)),
                );
                for v in v0..=v1 {
                    for u in u0..=u1 {
                        let p = c.pixel_to_world(Pixel::new(u as i64, v as i64)).unwrap();
                        if geom::point_in_polygon(p, &quad) {
                            layers[v * c.img_w + u] += 1;
                        }
                    }
                }
            }
        }
        for v in 0..c.img_h {
            for u in 0..c.img_w {
                let n = layers[v * c.img_w + u];
                if n > 0 {
                    let mut h = n as f64 * FABRIC_LAYER_HEIGHT;
                    let p = c.pixel_to_world(Pixel::new(u as i64, v as i64)).unwrap();
                    for &item_idx in &f.above_items {
                        let item = &scene.rigid_items[item_idx];
                        if item.contains(p) {
                            h += item.height;
                        }
                    }
                    r.paint(u, v, h, f.color, f.mask_id);
                }
            }
        }
    }

    // Beads.
    for cable in &scene.cables {
        for (i, b) in cable.beads.iter().enumerate() {
            paint_disk(
                &mut r,
                c,
                *b,
                cable.radius,
                cable.radius * 2.0,
                cable.color,
                cable.mask_base + i as u16,
            );
        }
    }

    // Rigid items.
    for item in &scene.rigid_items {
        let fp = item.world_footprint();
        if fp.len() < 3 {
            continue;
        }
        let (minx, maxx) = fp.iter().fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p.x), a.1.max(p.x)));
        let (miny, maxy) = fp.iter().fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p.y), a.1.max(p.y)));
        let (u0, v0, u1, v1) = pixel_bbox(
            c,
            c.clamp_world(Vec2::new(minx, miny)),
            c.clamp_world(Vec2::new(maxx, maxy)),
        );
        for v in v0..=v1 {
            for u in u0..=u1 {
                let p = c.pixel_to_world(Pixel::new(u as i64, v as i64)).unwrap();
                if geom::point_in_polygon(p, &fp) {
                    r.paint(u, v, item.height, item.color, item.mask_id);
                }
            }
        }
    }

    r
}

fn paint_disk(r: &mut Raster, c: &WorkspaceCalib, center: Vec2, radius: f64, height: f64, color: [f32; 3], id: u16) {
    let (u0, v0, u1, v1) = pixel_bbox(
        c,
        c.clamp_world(Vec2::new(center.x - radius, center.y - radius)),
        c.clamp_world(Vec2::new(center.x + radius, center.y + radius)),
    );
    let r2 = radius * radius;
    for v in v0..=v1 {
        for u in u0..=u1 {
            let p = c.pixel_to_world(Pixel::new(u as i64, v as i64)).unwrap();
            let d = p - center;
            if d.dot(d) <= r2 {
                r.paint(u, v, height, color, id);
            }
        }
    }
}

/// Rasterize the scene into the 6-channel observation.
pub fn render_observation(scene: &Scene, c: &WorkspaceCalib) -> ObservationImage {
    let r = rasterize(scene, c);
    let mut img = ObservationImage::new(c.img_w, c.img_h);
    for v in 0..c.img_h {
        for u in 0..c.img_w {
            let i = v * c.img_w + u;
            img.set_pixel(u, v, r.color[i], r.depth[i] as f32);
        }
    }
    img
}

/// Rasterize the scene into per-pixel topmost entity ids.
pub fn render_segmentation(scene: &Scene, c: &WorkspaceCalib) -> SegmentationMask {
    let r = rasterize(scene, c);
    SegmentationMask { w: c.img_w, h: c.img_h, data: r.id }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interp {
    Nearest,
    Bilinear,
}

/// Resample an observation under an SE(2) pixel transform. Each output
/// pixel is sampled from the inverse-transformed source location;
/// out-of-frame samples become table color at depth zero.
pub fn transform_image_se2(img: &ObservationImage, t: &ImageSE2, interp: Interp) -> Result<ObservationImage> {
    if !t.is_finite() {
        return Err(Error::arg("non-finite SE(2) transform"));
    }
    if !img.is_finite() {
        return Err(Error::arg("non-finite observation"));
    }
    let (w, h) = (img.w, img.h);
    let mut out = ObservationImage::new(w, h);
    let fill = [
        palette::TABLE[0],
        palette::TABLE[1],
        palette::TABLE[2],
        0.0,
        0.0,
        0.0,
    ];
    for v in 0..h {
        for u in 0..w {
            let (su, sv) = t.apply_inverse(u as f64, v as f64);
            let o = out.idx(u, v);
            match interp {
                Interp::Nearest => {
                    let (ru, rv) = (su.round(), sv.round());
                    if ru >= 0.0 && rv >= 0.0 && (ru as usize) < w && (rv as usize) < h {
                        let s = img.idx(ru as usize, rv as usize);
                        out.data[o..o + 6].copy_from_slice(&img.data[s..s + 6]);
                    } else {
                        out.data[o..o + 6].copy_from_slice(&fill);
                    }
                }
                Interp::Bilinear => {
                    let u0 = su.floor();
                    let v0 = sv.floor();
                    let fu = (su - u0) as f32;
                    let fv = (sv - v0) as f32;
                    let mut acc = [0.0f32; 6];
                    for (dv, wv) in [(0.0, 1.0 - fv), (1.0, fv)] {
                        for (du, wu) in [(0.0, 1.0 - fu), (1.0, fu)] {
                            let sx = u0 + du;
                            let sy = v0 + dv;
                            let weight = wu * wv;
                            if weight == 0.0 {
                                continue;
                            }
                            let tap: &[f32] =
                                if sx >= 0.0 && sy >= 0.0 && (sx as usize) < w && (sy as usize) < h {
                                    let s = img.idx(sx as usize, sy as usize);
                                    &img.data[s..s + 6]
                                } else {
                                    &fill
                                };
                            for c in 0..6 {
                                acc[c] += weight * tap[c];
                            }
                        }
                    }
                    out.data[o..o + 6].copy_from_slice(&acc);
                }
            }
        }
    }
    Ok(out)
}

// --- image file export -------------------------------------------------------

/// 8-bit binary PPM (P6) of the color channels.
pub fn write_ppm(path: &Path, img: &ObservationImage) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    write!(f, "P6\n{} {}\n255\n", img.w, img.h)?;
    let mut buf = Vec::with_capacity(img.w * img.h * 3);
    for v in 0..img.h {
        for u in 0..img.w {
            let px = img.pixel(u, v);
            for c in 0..3 {
                buf.push((px[c].clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
    }
    f.write_all(&buf)?;
    Ok(())
}

/// 16-bit binary PGM (P5) of the depth channel in millimeters
/// (big-endian sample order per the Netpbm convention).
pub fn write_pgm_depth(path: &Path, img: &ObservationImage) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    write!(f, "P5\n{} {}\n65535\n", img.w, img.h)?;
    let mut buf = Vec::with_capacity(img.w * img.h * 2);
    for v in 0..img.h {
        for u in 0..img.w {
            let mm = (img.pixel(u, v)[3] as f64 * 1000.0).round().clamp(0.0, 65535.0) as u16;
            buf.extend_from_slice(&mm.to_be_bytes());
        }
    }
    f.write_all(&buf)?;
    Ok(())
}

/// 8-bit PGM heatmap of a scalar map, min-max normalized so that darker
/// pixels are low values.
pub fn write_pgm_heatmap(path: &Path, values: &[f32], w: usize, h: usize) -> Result<()> {
    if values.len() != w * h {
        return Err(Error::arg("heatmap size mismatch"));
    }
    let lo = values.iter().cloned().fold(f32::INFINITY, f32::min);
    let hi = values.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
    let range = if hi > lo { hi - lo } else { 1.0 };
    let mut f = std::fs::File::create(path)?;
    write!(f, "P5\n{w} {h}\n255\n")?;
    let buf: Vec<u8> = values
        .iter()
        .map(|v| (((v - lo) / range).clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    f.write_all(&buf)?;
    Ok(())
}
