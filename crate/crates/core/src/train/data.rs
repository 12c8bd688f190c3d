use rand::Rng;

use super::TrainConfig;
use crate::error::{Error, Result};
use crate::tensor::{bicubic_resize, Direction, Tensor};

/// High-resolution training images, each `[1, C, H, W]` in `[0, 255]`.
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub images: Vec<Tensor>,
}

impl Dataset {
    pub fn new(images: Vec<Tensor>) -> Result<Self> {
        for (i, im) in images.iter().enumerate() {
            if im.ndim() != 4 || im.batch() != 1 {
                return Err(Error::Shape(format!("image {i} must be [1, C, H, W], got {:?}", im.shape())));
            }
        }
        Ok(Dataset { images })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

/// Bicubic-impaired network input: `S_f` down, then bicubic up by `f`.
pub fn impair(hr: &Tensor, factor: usize) -> Result<Tensor> {
    let lr = bicubic_resize(hr, factor, Direction::Down)?;
    bicubic_resize(&lr, factor, Direction::Up)
}

/// Aligned `(input, target)` patches.
#[derive(Clone, Debug)]
pub struct Batch {
    pub input: Tensor,
    pub target: Tensor,
    /// Images skipped for being smaller than the patch.
    pub skipped: usize,
}

/// Spatial transform applied identically to both members of a pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Augment {
    pub flip_h: bool,
    pub flip_v: bool,
    pub transpose: bool,
}

impl Augment {
    pub const NONE: Augment = Augment {
        flip_h: false,
        flip_v: false,
        transpose: false,
    };

    /// Applies to a square `[N, C, P, P]` tensor. Transpose combined with
    /// the flips covers every 90° rotation.
    pub fn apply(&self, x: &Tensor) -> Tensor {
        let s = x.shape();
        let (h, w) = (s[2], s[3]);
        let plane = h * w;
        let mut out = x.clone();
        let src = x.data();
        let dst = out.data_mut();
        for base in (0..src.len()).step_by(plane) {
            for i in 0..h {
                for j in 0..w {
                    let (mut a, mut b) = if self.transpose { (j, i) } else { (i, j) };
                    if self.flip_v {
                        a = h - 1 - a;
                    }
                    if self.flip_h {
                        b = w - 1 - b;
                    }
                    dst[base + i * w + j] = src[base + a * w + b];
                }
            }
        }
        out
    }
}

/// Draws `cfg.batch_size` random crops of size `cfg.patch(factor)`,
/// augments each, and builds its input by bicubic impairment of the
/// augmented crop.
pub fn sample_patches<R: Rng>(data: &Dataset, cfg: &TrainConfig, factor: usize, rng: &mut R) -> Result<Batch> {
    if data.is_empty() {
        return Err(Error::Config("dataset is empty".into()));
    }
    let p = cfg.patch(factor);
    let usable: Vec<&Tensor> = data
        .images
        .iter()
        .filter(|im| im.shape()[2] >= p && im.shape()[3] >= p)
        .collect();
    let skipped = data.len() - usable.len();
    if usable.is_empty() {
        return Err(Error::Config(format!("every image is smaller than the {p}×{p} patch")));
    }
    let mut inputs = Vec::with_capacity(cfg.batch_size);
    let mut targets = Vec::with_capacity(cfg.batch_size);
    for _ in 0..cfg.batch_size {
        let im = usable[rng.random_range(0..usable.len())];
        let (h, w) = (im.shape()[2], im.shape()[3]);
        let y = rng.random_range(0..=h - p);
        let x = rng.random_range(0..=w - p);
        let aug = Augment {
            flip_h: cfg.flip_h && rng.random_bool(0.5),
            flip_v: cfg.flip_v && rng.random_bool(0.5),
            transpose: cfg.rotate90 && rng.random_bool(0.5),
        };
        let crop = im.crop(&[0, 0, y, x], &[1, im.channels(), p, p])?;
        let hr = aug.apply(&crop);
        inputs.push(impair(&hr, factor)?);
        targets.push(hr);
    }
    Ok(Batch {
        input: Tensor::stack_batch(&inputs)?,
        target: Tensor::stack_batch(&targets)?,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rotations_are_permutations() {
        let x = Tensor::from_fn(&[1, 1, 3, 3], |i| i as f64);
        let t = Augment {
            transpose: true,
            ..Augment::NONE
        };
        assert_eq!(t.apply(&x).data(), &[0.0, 3.0, 6.0, 1.0, 4.0, 7.0, 2.0, 5.0, 8.0]);
        let mut sorted = Augment {
            flip_h: true,
            flip_v: true,
            transpose: true,
        }
        .apply(&x)
        .into_data();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(sorted, x.data());
    }

    #[test]
    fn pairs_are_consistent_and_seeded() {
        let img = Tensor::from_fn(&[1, 3, 40, 40], |i| ((i * 13) % 251) as f64);
        let data = Dataset::new(vec![img, Tensor::zeros(&[1, 3, 8, 8])]).unwrap();
        let cfg = TrainConfig {
            batch_size: 3,
            patch_size: Some(16),
            ..TrainConfig::published()
        };
        let a = sample_patches(&data, &cfg, 4, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = sample_patches(&data, &cfg, 4, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a.input, b.input);
        assert_eq!(a.target, b.target);
        assert_eq!(a.skipped, 1);
        for n in 0..3 {
            let hr = a.target.batch_slice(n, 1).unwrap();
            assert_eq!(impair(&hr, 4).unwrap(), a.input.batch_slice(n, 1).unwrap());
        }
    }
}
