//! 8-bit PNG I/O and the small tensor reshuffles around it.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use anyhow::{bail, Context, Result};
use mgbp::Tensor;

/// Decodes a PNG to `[1, 3, H, W]` with values in `[0, 255]`. Grey images are
/// replicated to three channels and alpha is dropped.
pub fn load_png(path: &Path) -> Result<Tensor> {
    let file = File::open(path).with_context(|| format!("{}", path.display()))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::normalize_to_color8());
    let mut reader = decoder.read_info().with_context(|| format!("{}: malformed PNG", path.display()))?;
    let size = reader
        .output_buffer_size()
        .with_context(|| format!("{}: image too large", path.display()))?;
    let mut buf = vec![0u8; size];
    let info = reader
        .next_frame(&mut buf)
        .with_context(|| format!("{}: malformed PNG", path.display()))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let take: &[usize] = match info.color_type {
        png::ColorType::Grayscale => &[0, 0, 0],
        png::ColorType::GrayscaleAlpha => &[0, 0, 0],
        png::ColorType::Rgb => &[0, 1, 2],
        png::ColorType::Rgba => &[0, 1, 2],
        png::ColorType::Indexed => bail!("{}: palette was not expanded", path.display()),
    };
    let stride = info.color_type.samples();
    let line = info.line_size;
    Ok(Tensor::from_fn(&[1, 3, h, w], |i| {
        let c = i / (h * w);
        let (y, x) = ((i / w) % h, i % w);
        buf[y * line + x * stride + take[c]] as f64
    }))
}

/// Round half away from zero, then clamp.
pub fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Encodes `[1, 3, H, W]` as an 8-bit RGB PNG.
pub fn save_png(path: &Path, img: &Tensor) -> Result<()> {
    let s = img.shape();
    if s.len() != 4 || s[0] != 1 || s[1] != 3 {
        bail!("cannot encode a tensor of shape {s:?} as RGB");
    }
    let (h, w) = (s[2], s[3]);
    let d = img.data();
    let mut bytes = Vec::with_capacity(3 * h * w);
    for i in 0..h * w {
        for c in 0..3 {
            bytes.push(to_u8(d[c * h * w + i]));
        }
    }
    let file = File::create(path).with_context(|| format!("{}", path.display()))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), w as u32, h as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header()?;
    writer.write_image_data(&bytes)?;
    writer.finish()?;
    Ok(())
}

/// Replicate-pads the two trailing axes up to `(h, w)`.
pub fn pad_replicate(x: &Tensor, h: usize, w: usize) -> Tensor {
    let s = x.shape();
    let r = s.len();
    let (h0, w0) = (s[r - 2], s[r - 1]);
    let mut shape = s.to_vec();
    shape[r - 2] = h;
    shape[r - 1] = w;
    let d = x.data();
    Tensor::from_fn(&shape, |i| {
        let outer = i / (h * w);
        let y = ((i / w) % h).min(h0 - 1);
        let xx = (i % w).min(w0 - 1);
        d[(outer * h0 + y) * w0 + xx]
    })
}

/// Crops the two trailing axes to their top-left `(h, w)`.
pub fn crop_spatial(x: &Tensor, h: usize, w: usize) -> Result<Tensor> {
    let s = x.shape();
    let r = s.len();
    let mut size = s.to_vec();
    size[r - 2] = h;
    size[r - 1] = w;
    Ok(x.crop(&vec![0; r], &size)?)
}

/// Stacks `[1, C, H, W]` frames into `[1, C, T, H, W]`.
pub fn stack_frames(frames: &[Tensor]) -> Result<Tensor> {
    let first = frames.first().context("no frames")?.shape().to_vec();
    if let Some(f) = frames.iter().find(|f| f.shape() != first.as_slice()) {
        bail!("frame shapes differ: {:?} and {:?}", first, f.shape());
    }
    let (c, hw, t) = (first[1], first[2] * first[3], frames.len());
    Ok(Tensor::from_fn(&[1, c, t, first[2], first[3]], |i| {
        let ch = i / (t * hw);
        let ti = (i / hw) % t;
        frames[ti].data()[ch * hw + i % hw]
    }))
}

/// Splits `[1, C, T, H, W]` into `T` frames of `[1, C, H, W]`.
pub fn unstack_frames(video: &Tensor) -> Result<Vec<Tensor>> {
    let s = video.shape();
    if s.len() != 5 || s[0] != 1 {
        bail!("expected a [1, C, T, H, W] video, got {s:?}");
    }
    let (c, t, hw) = (s[1], s[2], s[3] * s[4]);
    Ok((0..t)
        .map(|ti| Tensor::from_fn(&[1, c, s[3], s[4]], |i| video.data()[((i / hw) * t + ti) * hw + i % hw]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_is_half_away_from_zero_and_clamped() {
        assert_eq!(to_u8(0.5), 1);
        assert_eq!(to_u8(1.49), 1);
        assert_eq!(to_u8(2.5), 3);
        assert_eq!(to_u8(-0.4), 0);
        assert_eq!(to_u8(254.5), 255);
        assert_eq!(to_u8(300.0), 255);
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        let img = Tensor::from_fn(&[1, 3, 5, 7], |i| (i * 37 % 256) as f64);
        save_png(&p, &img).unwrap();
        assert_eq!(load_png(&p).unwrap(), img);
    }

    #[test]
    fn frames_round_trip() {
        let frames: Vec<Tensor> = (0..4)
            .map(|t| Tensor::from_fn(&[1, 3, 2, 3], |i| (t * 100 + i) as f64))
            .collect();
        let v = stack_frames(&frames).unwrap();
        assert_eq!(v.shape(), &[1, 3, 4, 2, 3]);
        assert_eq!(unstack_frames(&v).unwrap(), frames);
    }

    #[test]
    fn padding_replicates_edges() {
        let x = Tensor::from_fn(&[1, 1, 2, 2], |i| i as f64);
        let p = pad_replicate(&x, 3, 4);
        assert_eq!(p.data(), &[0., 1., 1., 1., 2., 3., 3., 3., 2., 3., 3., 3.]);
        assert_eq!(crop_spatial(&p, 2, 2).unwrap(), x);
    }
}
