use std::path::Path;

use image::{DynamicImage, ImageReader, RgbImage};

use crate::error::{Error, Result};

/// Side length of network inputs.
pub const INPUT_SIZE: usize = 128;
pub const CHANNELS: usize = 3;
pub const NORM_MEAN: f32 = 0.5;
pub const NORM_STD: f32 = 0.5;

/// Interleaved 8-bit RGB image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl RawImage {
    pub fn new(width: u32, height: u32) -> Self {
        RawImage {
            width,
            height,
            data: vec![0; width as usize * height as usize * CHANNELS],
        }
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let mut img = RawImage::new(width, height);
        for px in img.data.chunks_exact_mut(3) {
            px.copy_from_slice(&rgb);
        }
        img
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn into_rgb_image(self) -> RgbImage {
        RgbImage::from_raw(self.width, self.height, self.data).expect("buffer matches dimensions")
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        image::save_buffer_with_format(
            path,
            &self.data,
            self.width,
            self.height,
            image::ExtendedColorType::Rgb8,
            image::ImageFormat::Png,
        )
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Decodes an RGB image. Images without exactly three colour channels are
/// rejected rather than converted.
pub fn load_image(path: impl AsRef<Path>) -> Result<RawImage> {
    let path = path.as_ref();
    let err = |message: String| Error::Image {
        path: path.to_path_buf(),
        message,
    };
    let decoded = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| err(format!("decode failed: {e}")))?;
    let rgb = match decoded {
        DynamicImage::ImageRgb8(img) => img,
        DynamicImage::ImageRgb16(_) | DynamicImage::ImageRgb32F(_) => decoded.to_rgb8(),
        other => {
            return Err(err(format!(
                "expected 3 channels, found {} ({:?})",
                other.color().channel_count(),
                other.color()
            )))
        }
    };
    Ok(RawImage {
        width: rgb.width(),
        height: rgb.height(),
        data: rgb.into_raw(),
    })
}

/// Normalised network input, channel-major `3 × 128 × 128`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    data: Vec<f32>,
}

impl ImageTensor {
    pub const LEN: usize = CHANNELS * INPUT_SIZE * INPUT_SIZE;

    pub fn from_vec(data: Vec<f32>) -> Option<Self> {
        (data.len() == Self::LEN).then_some(ImageTensor { data })
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * INPUT_SIZE + y) * INPUT_SIZE + x]
    }
}

/// Triangle-filter resampling of one channel. When shrinking, the kernel
/// widens with the scale factor so every source pixel contributes.
pub fn resize_bilinear(
    src: &[f32],
    width: usize,
    height: usize,
    out_w: usize,
    out_h: usize,
) -> Vec<f32> {
    assert_eq!(src.len(), width * height, "source buffer size");
    let horizontal = filter_weights(width, out_w);
    let vertical = filter_weights(height, out_h);

    let mut rows = vec![0.0f32; out_w * height];
    for y in 0..height {
        let line = &src[y * width..(y + 1) * width];
        for (x, (start, weights)) in horizontal.iter().enumerate() {
            let acc: f64 = weights
                .iter()
                .zip(&line[*start..])
                .map(|(w, v)| w * f64::from(*v))
                .sum();
            rows[y * out_w + x] = acc as f32;
        }
    }

    let mut out = vec![0.0f32; out_w * out_h];
    for (y, (start, weights)) in vertical.iter().enumerate() {
        for x in 0..out_w {
            let acc: f64 = weights
                .iter()
                .enumerate()
                .map(|(k, w)| w * f64::from(rows[(start + k) * out_w + x]))
                .sum();
            out[y * out_w + x] = acc as f32;
        }
    }
    out
}

fn filter_weights(in_size: usize, out_size: usize) -> Vec<(usize, Vec<f64>)> {
    let scale = in_size as f64 / out_size as f64;
    let filter_scale = scale.max(1.0);
    let support = filter_scale;
    (0..out_size)
        .map(|i| {
            let center = (i as f64 + 0.5) * scale;
            let lo = ((center - support + 0.5).floor().max(0.0)) as usize;
            let hi = ((center + support + 0.5).floor() as usize).min(in_size);
            let mut weights: Vec<f64> = (lo..hi)
                .map(|x| {
                    let t = ((x as f64 - center + 0.5) / filter_scale).abs();
                    (1.0 - t).max(0.0)
                })
                .collect();
            let total: f64 = weights.iter().sum();
            if total > 0.0 {
                weights.iter_mut().for_each(|w| *w /= total);
            }
            (lo, weights)
        })
        .collect()
}

/// Resizes planar `[0, 1]` channels to 128×128 and standardises each value
/// as `(x - 0.5) / 0.5`.
pub fn preprocess_unit(planes: &[Vec<f32>; 3], width: usize, height: usize) -> ImageTensor {
    let mut data = Vec::with_capacity(ImageTensor::LEN);
    for plane in planes {
        let resized = resize_bilinear(plane, width, height, INPUT_SIZE, INPUT_SIZE);
        data.extend(resized.into_iter().map(|v| (v - NORM_MEAN) / NORM_STD));
    }
    ImageTensor { data }
}

pub fn preprocess(raw: &RawImage) -> ImageTensor {
    let n = raw.width as usize * raw.height as usize;
    let mut planes = [vec![0.0f32; n], vec![0.0f32; n], vec![0.0f32; n]];
    for (i, px) in raw.data.chunks_exact(3).enumerate() {
        for c in 0..3 {
            planes[c][i] = f32::from(px[c]) / 255.0;
        }
    }
    preprocess_unit(&planes, raw.width as usize, raw.height as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 4×4 ramp `0..16 / 15`.
    fn toy() -> Vec<f32> {
        (0..16).map(|v| v as f32 / 15.0).collect()
    }

    fn assert_close(actual: &[f32], expected: &[f32]) {
        assert_eq!(actual.len(), expected.len());
        for (a, e) in actual.iter().zip(expected) {
            assert!((a - e).abs() < 1e-6, "{actual:?} vs {expected:?}");
        }
    }

    // Expected values produced by PIL's BILINEAR resize on a float image.
    #[test]
    fn matches_reference_resampler_on_toy_image() {
        assert_close(
            &resize_bilinear(&toy(), 4, 4, 2, 2),
            &[0.2380953, 0.3428572, 0.6571429, 0.7619048],
        );
        assert_close(
            &resize_bilinear(&toy(), 4, 4, 3, 3),
            &[0.1, 0.18, 0.26, 0.42, 0.5, 0.58, 0.74, 0.82, 0.9],
        );
        assert_close(
            &resize_bilinear(&toy(), 4, 4, 3, 2),
            &[
                0.2104762, 0.2904762, 0.3704762, 0.6295238, 0.7095238, 0.7895238,
            ],
        );
        assert_close(
            &resize_bilinear(&toy(), 4, 4, 6, 5),
            &[
                0.0, 0.0333333, 0.0777778, 0.1222222, 0.1666667, 0.2, //
                0.1866667, 0.22, 0.2644444, 0.3088889, 0.3533333, 0.3866667, //
                0.4, 0.4333334, 0.4777778, 0.5222223, 0.5666667, 0.6, //
                0.6133333, 0.6466667, 0.6911111, 0.7355556, 0.78, 0.8133333, //
                0.8, 0.8333334, 0.8777778, 0.9222223, 0.9666667, 1.0,
            ],
        );
    }

    #[test]
    fn mid_gray_maps_to_zero() {
        let n = 640 * 480;
        let planes = [vec![0.5f32; n], vec![0.5f32; n], vec![0.5f32; n]];
        let t = preprocess_unit(&planes, 640, 480);
        assert_eq!(t.as_slice().len(), 3 * 128 * 128);
        assert!(t.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn white_maps_to_one() {
        let t = preprocess(&RawImage::filled(640, 480, [255, 255, 255]));
        assert!(t.as_slice().iter().all(|v| (*v - 1.0).abs() < 1e-6));
    }

    #[test]
    fn checkerboard_stays_in_range() {
        let mut img = RawImage::new(640, 480);
        for y in 0..480u32 {
            for x in 0..640u32 {
                let v = if (x / 8 + y / 8) % 2 == 0 { 255 } else { 0 };
                let i = ((y * 640 + x) * 3) as usize;
                img.data[i..i + 3].copy_from_slice(&[v, 255 - v, v]);
            }
        }
        let t = preprocess(&img);
        assert_eq!(t.as_slice().len(), ImageTensor::LEN);
        assert!(t.as_slice().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn load_rejects_grayscale_and_truncated_files() {
        let dir = tempfile::tempdir().unwrap();
        let gray = dir.path().join("gray.png");
        image::GrayImage::new(8, 8).save(&gray).unwrap();
        let err = load_image(&gray).unwrap_err();
        assert!(err.to_string().contains("3 channels"), "{err}");

        let rgb = dir.path().join("rgb.png");
        RawImage::filled(640, 480, [10, 20, 30])
            .save_png(&rgb)
            .unwrap();
        let raw = load_image(&rgb).unwrap();
        assert_eq!(
            (raw.width, raw.height, raw.data.len()),
            (640, 480, 640 * 480 * 3)
        );
        assert_eq!(raw.pixel(5, 7), [10, 20, 30]);

        let bytes = std::fs::read(&rgb).unwrap();
        let cut = dir.path().join("cut.png");
        std::fs::write(&cut, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(load_image(&cut), Err(Error::Image { .. })));
    }

    proptest::proptest! {
        #[test]
        fn preprocess_range(w in 1usize..40, h in 1usize..40, seed in 0u8..255) {
            let raw = RawImage {
                width: w as u32,
                height: h as u32,
                data: (0..w * h * 3).map(|i| (i as u8).wrapping_mul(seed | 1)).collect(),
            };
            let t = preprocess(&raw);
            proptest::prop_assert!(t.as_slice().iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }
}
