use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-axis tiling parameters; the time axis is ignored for images.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TileSettings {
    /// Tile extent `[t, y, x]`.
    pub tile: [usize; 3],
    pub temporal_stride: usize,
    /// Spatial stride `[y, x]`; half the tile when absent.
    pub spatial_stride: Option<[usize; 2]>,
    /// Zero-weight margin on tile edges that lie inside the image.
    pub guard: [usize; 3],
    /// Spatial origins are kept on multiples of this (the network's coarsest
    /// stride, so tiles see the same sampling grid as the whole image).
    pub align: usize,
}

impl TileSettings {
    pub fn new(tile: [usize; 3]) -> Self {
        TileSettings {
            tile,
            temporal_stride: 5,
            spatial_stride: None,
            guard: [0; 3],
            align: 1,
        }
    }

    pub fn strides(&self) -> [usize; 3] {
        let [sy, sx] = self
            .spatial_stride
            .unwrap_or([(self.tile[1] / 2).max(1), (self.tile[2] / 2).max(1)]);
        [self.temporal_stride, sy, sx]
    }
}

/// Separable taper `w(j) = sin²(π(j + 1)/(m + 1))`, flattened to 1 on sides
/// that touch the image border and zeroed over the guard band elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct BlendWindow {
    axes: [Vec<f64>; 3],
}

impl BlendWindow {
    pub fn axis_weights(len: usize, guard: usize, at_start: bool, at_end: bool) -> Vec<f64> {
        let gl = if at_start { 0 } else { guard };
        let gr = if at_end { 0 } else { guard };
        let inner = len.saturating_sub(gl + gr);
        (0..len)
            .map(|j| {
                if j < gl || j >= len - gr || inner == 0 {
                    return 0.0;
                }
                let k = j - gl;
                if (at_start && 2 * k <= inner) || (at_end && 2 * k + 1 >= inner) {
                    return 1.0;
                }
                (PI * (k + 1) as f64 / (inner + 1) as f64).sin().powi(2)
            })
            .collect()
    }

    pub fn axis(&self, a: usize) -> &[f64] {
        &self.axes[a]
    }

    pub fn at(&self, t: usize, y: usize, x: usize) -> f64 {
        self.axes[0][t] * self.axes[1][y] * self.axes[2][x]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TilePlan {
    /// Full input shape, `[N, C, (T,) H, W]`.
    pub input_shape: Vec<usize>,
    pub extent: [usize; 3],
    pub tile: [usize; 3],
    pub guard: [usize; 3],
    /// Per-axis origin lists; tiles are their Cartesian product.
    pub axis_origins: [Vec<usize>; 3],
}

fn axis_origins(extent: usize, tile: usize, stride: usize, align: usize) -> Vec<usize> {
    if tile == extent {
        return vec![0];
    }
    let last = extent - tile;
    let mut out = Vec::new();
    let mut o = 0;
    while o < last {
        out.push(o / align * align);
        o += stride;
    }
    out.push(last);
    out.dedup();
    out
}

/// Plans overlapping tiles with the last tile on each axis clamped to the
/// border.
pub fn plan_tiles(input_shape: &[usize], settings: &TileSettings) -> Result<TilePlan> {
    let extent = match input_shape.len() {
        4 => [1, input_shape[2], input_shape[3]],
        5 => [input_shape[2], input_shape[3], input_shape[4]],
        _ => return Err(Error::Shape(format!("cannot tile a tensor of shape {input_shape:?}"))),
    };
    let mut tile = settings.tile;
    if input_shape.len() == 4 {
        tile[0] = 1;
    }
    let strides = settings.strides();
    let names = ["time", "height", "width"];
    if settings.align == 0 {
        return Err(Error::Config("tile.align: must be >= 1".into()));
    }
    let mut axis = [Vec::new(), Vec::new(), Vec::new()];
    for a in 0..3 {
        let n = names[a];
        if tile[a] == 0 || tile[a] > extent[a] {
            return Err(Error::Config(format!(
                "tile {n} extent {} must be in 1..={}",
                tile[a], extent[a]
            )));
        }
        if strides[a] == 0 {
            return Err(Error::Config(format!("tile {n} stride must be >= 1")));
        }
        let align = if a == 0 { 1 } else { settings.align };
        if a > 0 && (!tile[a].is_multiple_of(align) || extent[a] % align != 0 || !strides[a].is_multiple_of(align)) {
            return Err(Error::Config(format!(
                "tile {n}: extent {}, tile {} and stride {} must be multiples of {align}",
                extent[a], tile[a], strides[a]
            )));
        }
        axis[a] = axis_origins(extent[a], tile[a], strides[a], align);
    }
    let plan = TilePlan {
        input_shape: input_shape.to_vec(),
        extent,
        tile,
        guard: if input_shape.len() == 4 {
            [0, settings.guard[1], settings.guard[2]]
        } else {
            settings.guard
        },
        axis_origins: axis,
    };
    for a in 0..3 {
        if plan.axis_coverage(a).iter().any(|&w| w <= 0.0) {
            return Err(Error::Config(format!(
                "tile {}: stride {} with guard {} leaves pixels without weight",
                names[a], strides[a], plan.guard[a]
            )));
        }
    }
    Ok(plan)
}

impl TilePlan {
    pub fn tile_count(&self) -> usize {
        self.axis_origins.iter().map(Vec::len).product()
    }

    /// Tile origins `[t, y, x]` in plan order (time outermost).
    pub fn origins(&self) -> Vec<[usize; 3]> {
        let mut out = Vec::with_capacity(self.tile_count());
        for &t in &self.axis_origins[0] {
            for &y in &self.axis_origins[1] {
                for &x in &self.axis_origins[2] {
                    out.push([t, y, x]);
                }
            }
        }
        out
    }

    fn axis_window(&self, a: usize, origin: usize) -> Vec<f64> {
        let at_start = origin == 0;
        let at_end = origin + self.tile[a] == self.extent[a];
        BlendWindow::axis_weights(self.tile[a], self.guard[a], at_start, at_end)
    }

    pub fn window(&self, origin: [usize; 3]) -> BlendWindow {
        BlendWindow {
            axes: [0, 1, 2].map(|a| self.axis_window(a, origin[a])),
        }
    }

    /// Summed window weight along one axis.
    pub fn axis_coverage(&self, a: usize) -> Vec<f64> {
        let mut acc = vec![0.0; self.extent[a]];
        for &o in &self.axis_origins[a] {
            for (j, w) in self.axis_window(a, o).into_iter().enumerate() {
                acc[o + j] += w;
            }
        }
        acc
    }

    /// Accumulated weight at `[t, y, x]`; separable because tiles form a grid.
    pub fn accumulated_weight(&self) -> [Vec<f64>; 3] {
        [0, 1, 2].map(|a| self.axis_coverage(a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn temporal_origins_clamp_last() {
        let o = axis_origins(100, 37, 5, 1);
        let mut expected: Vec<usize> = (0..=60).step_by(5).collect();
        expected.push(63);
        assert_eq!(o, expected);
    }

    #[test]
    fn full_tile_is_single() {
        let p = plan_tiles(&[1, 3, 16, 16], &TileSettings::new([1, 16, 16])).unwrap();
        assert_eq!(p.tile_count(), 1);
        assert!(p.window([0, 0, 0]).axis(1).iter().all(|&w| w == 1.0));
    }

    #[test]
    fn oversize_tile_is_config_error() {
        assert!(matches!(
            plan_tiles(&[1, 3, 8, 8], &TileSettings::new([1, 16, 8])),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn window_is_symmetric_in_the_interior() {
        let w = BlendWindow::axis_weights(9, 0, false, false);
        for j in 0..9 {
            assert!((w[j] - w[8 - j]).abs() < 1e-15);
            assert!(w[j] > 0.0 && w[j] <= 1.0);
        }
    }

    #[test]
    fn guard_band_needs_enough_overlap() {
        let mut s = TileSettings::new([1, 8, 8]);
        s.guard = [0, 3, 3];
        s.spatial_stride = Some([6, 6]);
        assert!(plan_tiles(&[1, 3, 20, 20], &s).is_err());
        s.spatial_stride = Some([2, 2]);
        assert!(plan_tiles(&[1, 3, 20, 20], &s).is_ok());
    }
}
