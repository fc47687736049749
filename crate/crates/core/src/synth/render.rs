//! Rasterisation of one object on the static desk background.
//!
//! Shapes are signed distance functions in a unit frame (x in `[-1, 1]`,
//! y in `[-1, 1]`), scaled by the object's half-extent. Every pixel centre
//! is mapped back through the camera transform into desk coordinates, so
//! edges stay antialiased under rotation and scaling.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Affine, CameraSpec, Point, SceneSpec};
use crate::dataset::{CameraId, RawImage};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Bar,
    Ellipse,
    Wedge,
    Cross,
    LShape,
    Hexagon,
    Diamond,
    Capsule,
    TShape,
    Arrow,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 10] = [
        ShapeKind::Bar,
        ShapeKind::Ellipse,
        ShapeKind::Wedge,
        ShapeKind::Cross,
        ShapeKind::LShape,
        ShapeKind::Hexagon,
        ShapeKind::Diamond,
        ShapeKind::Capsule,
        ShapeKind::TShape,
        ShapeKind::Arrow,
    ];

    /// Signed distance in unit coordinates; negative inside.
    fn sdf(self, x: f64, y: f64) -> f64 {
        match self {
            ShapeKind::Bar => sd_box(x, y, 0.0, 0.0, 1.0, 0.45),
            ShapeKind::Ellipse => sd_ellipse(x, y, 1.0, 0.55),
            ShapeKind::Wedge => sd_polygon(x, y, &[(1.0, 0.0), (-0.8, 0.7), (-0.8, -0.7)]),
            ShapeKind::Cross => {
                sd_box(x, y, 0.0, 0.0, 1.0, 0.3).min(sd_box(x, y, -0.3, 0.0, 0.3, 0.85))
            }
            ShapeKind::LShape => {
                sd_box(x, y, 0.0, 0.5, 1.0, 0.3).min(sd_box(x, y, -0.7, -0.2, 0.3, 0.7))
            }
            ShapeKind::Hexagon => {
                let v: Vec<(f64, f64)> = (0..6)
                    .map(|i| {
                        let a = std::f64::consts::FRAC_PI_3 * i as f64;
                        (a.cos(), 0.75 * a.sin())
                    })
                    .collect();
                sd_polygon(x, y, &v)
            }
            ShapeKind::Diamond => {
                sd_polygon(x, y, &[(1.0, 0.0), (0.0, 0.6), (-1.0, 0.0), (0.0, -0.6)])
            }
            ShapeKind::Capsule => sd_segment(x, y, -0.6, 0.6) - 0.4,
            ShapeKind::TShape => {
                sd_box(x, y, 0.7, 0.0, 0.3, 0.9).min(sd_box(x, y, -0.2, 0.0, 0.8, 0.28))
            }
            ShapeKind::Arrow => sd_polygon(
                x,
                y,
                &[
                    (1.0, 0.0),
                    (0.2, 0.7),
                    (0.2, 0.3),
                    (-1.0, 0.3),
                    (-1.0, -0.3),
                    (0.2, -0.3),
                    (0.2, -0.7),
                ],
            ),
        }
    }
}

fn sd_box(x: f64, y: f64, cx: f64, cy: f64, hx: f64, hy: f64) -> f64 {
    let qx = (x - cx).abs() - hx;
    let qy = (y - cy).abs() - hy;
    qx.max(0.0).hypot(qy.max(0.0)) + qx.max(qy).min(0.0)
}

fn sd_ellipse(x: f64, y: f64, rx: f64, ry: f64) -> f64 {
    let k0 = (x / rx).hypot(y / ry);
    let k1 = (x / (rx * rx)).hypot(y / (ry * ry));
    if k1 == 0.0 {
        return -rx.min(ry);
    }
    k0 * (k0 - 1.0) / k1
}

fn sd_segment(x: f64, y: f64, x0: f64, x1: f64) -> f64 {
    let cx = x.clamp(x0, x1);
    (x - cx).hypot(y)
}

/// Exact distance to a simple polygon, signed by the crossing-number rule.
fn sd_polygon(x: f64, y: f64, v: &[(f64, f64)]) -> f64 {
    let mut d = (x - v[0].0).powi(2) + (y - v[0].1).powi(2);
    let mut sign = 1.0;
    let mut j = v.len() - 1;
    for i in 0..v.len() {
        let (ex, ey) = (v[j].0 - v[i].0, v[j].1 - v[i].1);
        let (wx, wy) = (x - v[i].0, y - v[i].1);
        let t = ((wx * ex + wy * ey) / (ex * ex + ey * ey)).clamp(0.0, 1.0);
        let (bx, by) = (wx - ex * t, wy - ey * t);
        d = d.min(bx * bx + by * by);
        let c = [y >= v[i].1, y < v[j].1, ex * wy > ey * wx];
        if c.iter().all(|&b| b) || c.iter().all(|&b| !b) {
            sign = -sign;
        }
        j = i;
    }
    sign * d.sqrt()
}

/// Appearance of one object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectStyle {
    pub shape: ShapeKind,
    pub color: [u8; 3],
    /// Half of the longest extent, in pixels.
    pub half_extent: f64,
}

const PALETTE_COLORS: [[u8; 3]; 20] = [
    [200, 40, 40],
    [40, 90, 200],
    [40, 160, 60],
    [230, 170, 20],
    [130, 50, 170],
    [20, 170, 170],
    [220, 100, 20],
    [60, 60, 60],
    [200, 60, 140],
    [110, 150, 30],
    [30, 50, 120],
    [150, 90, 40],
    [240, 230, 60],
    [90, 200, 230],
    [120, 20, 40],
    [20, 110, 80],
    [250, 140, 170],
    [80, 80, 200],
    [170, 200, 120],
    [30, 30, 30],
];

impl ObjectStyle {
    /// Built-in appearance of object `id` (1-based) when the scene does
    /// not supply a palette.
    pub fn builtin(id: u32) -> ObjectStyle {
        let i = (id.max(1) - 1) as usize;
        ObjectStyle {
            shape: ShapeKind::ALL[i % ShapeKind::ALL.len()],
            color: PALETTE_COLORS[i % PALETTE_COLORS.len()],
            half_extent: 34.0 + ((i * 7) % 13) as f64,
        }
    }

    /// Radius of a disc around the object centre containing every pixel the
    /// object can touch, antialiasing included.
    pub fn bounding_radius(&self) -> f64 {
        self.half_extent * std::f64::consts::SQRT_2 + 1.0
    }

    fn stripe_color(&self) -> [f64; 3] {
        let c = self.color.map(|v| f64::from(v) / 255.0);
        // light objects get a dark stripe and dark objects a light one
        let luma = 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2];
        if luma > 0.45 {
            c.map(|v| v * 0.35)
        } else {
            c.map(|v| v + (1.0 - v) * 0.65)
        }
    }
}

/// Desk texture in linear `[0, 1]` RGB at a desk coordinate.
fn desk(p: Point) -> [f64; 3] {
    let (x, y) = (p.x, p.y);
    let v = 0.03 * (x / 41.0).sin()
        + 0.025 * (y / 57.0).cos()
        + 0.02 * ((x + 2.0 * y) / 90.0).sin()
        + 0.015 * (y / 6.5 + 2.0 * (x / 60.0).sin()).sin();
    // colour ramps over the working area, flat beyond it
    let u = ((x - 320.0) / 180.0).clamp(-1.0, 1.0);
    let w = ((y - 240.0) / 180.0).clamp(-1.0, 1.0);
    [
        0.56 + 0.3 * u + v,
        0.52 + 0.3 * w + 0.95 * v,
        0.56 - 0.12 * (u + w) + 0.85 * v,
    ]
}

const MARKER_COLOR: [f64; 3] = [1.0, 0.0, 1.0];

fn blend(dst: &mut [f32], src: [f64; 3], alpha: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d = (f64::from(*d) * (1.0 - alpha) + s * alpha) as f32;
    }
}

/// Coverage of a pixel by a shape from its signed distance in pixels.
fn coverage(sd: f64) -> f64 {
    (0.5 - sd).clamp(0.0, 1.0)
}

/// Renders scenes for one [`SceneSpec`]. The static background of each
/// camera is computed once.
#[derive(Debug)]
pub struct Renderer {
    spec: SceneSpec,
    backgrounds: [Vec<f32>; 3],
}

impl Renderer {
    pub fn new(spec: &SceneSpec) -> Renderer {
        let backgrounds = CameraId::ALL.map(|cam| background(spec, spec.camera(cam)));
        Renderer {
            spec: spec.clone(),
            backgrounds,
        }
    }

    pub fn spec(&self) -> &SceneSpec {
        &self.spec
    }

    /// Draws `object` centred at desk position `position`, rotated by
    /// `rotation_deg`, as seen by `cam`. `rng` drives the camera noise and
    /// is not touched for cameras without noise.
    pub fn render<R: Rng + ?Sized>(
        &self,
        object: &ObjectStyle,
        position: Point,
        rotation_deg: f64,
        cam: CameraId,
        rng: &mut R,
    ) -> Result<RawImage> {
        let spec = &self.spec;
        let camera = spec.camera(cam);
        let to_image = camera.affine(spec.width, spec.height);
        let to_desk = to_image.inverse();
        let (w, h) = (spec.width as usize, spec.height as usize);

        // object bounds in image space
        let centre = to_image.apply(position);
        let r = object.bounding_radius() * camera.scale;
        if centre.x - r < 0.0
            || centre.y - r < 0.0
            || centre.x + r > w as f64
            || centre.y + r > h as f64
        {
            return Err(Error::Scene(format!(
                "object at ({:.1}, {:.1}) does not fit in the {cam} frame",
                position.x, position.y
            )));
        }

        let mut buf = self.backgrounds[cam.code() as usize].clone();
        let (sin, cos) = (-rotation_deg).to_radians().sin_cos();
        let s = object.half_extent;
        let fill = object.color.map(|v| f64::from(v) / 255.0);
        let stripe = object.stripe_color();
        let y0 = (centre.y - r).floor().max(0.0) as usize;
        let y1 = ((centre.y + r).ceil() as usize).min(h);
        let x0 = (centre.x - r).floor().max(0.0) as usize;
        let x1 = ((centre.x + r).ceil() as usize).min(w);
        for py in y0..y1 {
            for px in x0..x1 {
                let d = to_desk.apply(Point::new(px as f64 + 0.5, py as f64 + 0.5));
                let (dx, dy) = (d.x - position.x, d.y - position.y);
                let lx = (cos * dx - sin * dy) / s;
                let ly = (sin * dx + cos * dy) / s;
                let a = coverage(object.shape.sdf(lx, ly) * s);
                if a == 0.0 {
                    continue;
                }
                let band = coverage(((ly - 0.12).abs() - 0.1) * s);
                let color = [0, 1, 2].map(|c| fill[c] * (1.0 - band) + stripe[c] * band);
                let i = (py * w + px) * 3;
                blend(&mut buf[i..i + 3], color, a);
            }
        }

        if camera.blur_sigma > 0.0 {
            gaussian_blur(&mut buf, w, h, camera.blur_sigma);
        }
        if camera.noise_sigma > 0.0 {
            let sigma = camera.noise_sigma as f32;
            for v in buf.iter_mut() {
                let n: f32 = StandardNormal.sample(rng);
                *v += sigma * n;
            }
        }

        let mut img = RawImage::new(spec.width, spec.height);
        for (o, v) in img.data.iter_mut().zip(&buf) {
            *o = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        }
        Ok(img)
    }
}

fn background(spec: &SceneSpec, camera: &CameraSpec) -> Vec<f32> {
    let to_desk = camera.affine(spec.width, spec.height).inverse();
    let (w, h) = (spec.width as usize, spec.height as usize);
    let mut buf = vec![0f32; w * h * 3];
    for py in 0..h {
        for px in 0..w {
            let d = to_desk.apply(Point::new(px as f64 + 0.5, py as f64 + 0.5));
            let mut rgb = desk(d);
            let m = (d.x - spec.marker.x).hypot(d.y - spec.marker.y) - spec.marker_radius;
            let a = coverage(m * camera.scale);
            for c in 0..3 {
                rgb[c] = rgb[c] * (1.0 - a) + MARKER_COLOR[c] * a;
            }
            let i = (py * w + px) * 3;
            for c in 0..3 {
                buf[i + c] = rgb[c] as f32;
            }
        }
    }
    buf
}

/// Separable Gaussian blur of an interleaved RGB buffer with edge clamping.
fn gaussian_blur(buf: &mut [f32], w: usize, h: usize, sigma: f64) {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f32> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp() as f32)
        .collect();
    let total: f32 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);

    let mut tmp = vec![0f32; buf.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0f32; 3];
            for (k, &wt) in kernel.iter().enumerate() {
                let sx = (x as isize + k as isize - radius).clamp(0, w as isize - 1) as usize;
                let i = (y * w + sx) * 3;
                for c in 0..3 {
                    acc[c] += wt * buf[i + c];
                }
            }
            tmp[(y * w + x) * 3..][..3].copy_from_slice(&acc);
        }
    }
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0f32; 3];
            for (k, &wt) in kernel.iter().enumerate() {
                let sy = (y as isize + k as isize - radius).clamp(0, h as isize - 1) as usize;
                let i = (sy * w + x) * 3;
                for c in 0..3 {
                    acc[c] += wt * tmp[i + c];
                }
            }
            buf[(y * w + x) * 3..][..3].copy_from_slice(&acc);
        }
    }
}

/// Convenience wrapper building a [`Renderer`] for a single image.
pub fn render_scene<R: Rng + ?Sized>(
    spec: &SceneSpec,
    object: &ObjectStyle,
    position: Point,
    rotation_deg: f64,
    cam: CameraId,
    rng: &mut R,
) -> Result<RawImage> {
    Renderer::new(spec).render(object, position, rotation_deg, cam, rng)
}

/// Maps desk coordinates into a camera image.
impl CameraSpec {
    pub fn affine(&self, width: u32, height: u32) -> Affine {
        let c = Point::new(f64::from(width) / 2.0, f64::from(height) / 2.0);
        let (sin, cos) = self.rotation_deg.to_radians().sin_cos();
        let (a, b) = (self.scale * cos, -self.scale * sin);
        let (d, e) = (self.scale * sin, self.scale * cos);
        Affine {
            m: [
                [a, b, c.x + self.shift[0] - a * c.x - b * c.y],
                [d, e, c.y + self.shift[1] - d * c.x - e * c.y],
            ],
        }
    }
}
