//! Plantar pressure heatmaps: Gaussian splatting of channel forces onto a
//! grid over the normalized insole outline.
//!
//! Row 0 is the toe end of the insole, column 0 the medial edge.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{GaitEvent, GaitEventKind};
use crate::signal::ForceFrame;
use crate::turbo::turbo;
use crate::types::{insole_contains, RegionMap, FSR_CHANNELS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HeatmapError {
    #[error("no {0} event in trial")]
    EventNotFound(GaitEventKind),
    #[error("invalid heatmap configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeatmapConfig {
    pub width: usize,
    pub height: usize,
    pub sigma_cells: f64,
}

impl Default for HeatmapConfig {
    fn default() -> Self {
        Self {
            width: 40,
            height: 96,
            sigma_cells: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapGrid {
    pub width: usize,
    pub height: usize,
    /// Row-major cell values.
    pub cells: Vec<f64>,
    pub mask: Vec<bool>,
}

impl HeatmapGrid {
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.cells[row * self.width + col]
    }

    pub fn sum(&self) -> f64 {
        self.cells.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.cells.iter().copied().fold(0.0, f64::max)
    }

    /// `(col, row)` of the largest cell.
    pub fn argmax(&self) -> (usize, usize) {
        let i = self
            .cells
            .iter()
            .enumerate()
            .fold(0, |best, (i, &v)| if v > self.cells[best] { i } else { best });
        (i % self.width, i / self.width)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for row in self.cells.chunks(self.width) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// Binary PPM (P6). Cells are scaled by the grid maximum; outside the
    /// insole is white.
    pub fn write_ppm<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        let max = self.max();
        let mut bytes = Vec::with_capacity(self.cells.len() * 3);
        for (&v, &inside) in self.cells.iter().zip(&self.mask) {
            let rgb = if !inside {
                [255, 255, 255]
            } else if max > 0.0 {
                turbo(v / max)
            } else {
                turbo(0.0)
            };
            bytes.extend_from_slice(&rgb);
        }
        w.write_all(&bytes)
    }
}

/// Precomputed unit-mass kernels, one per channel.
#[derive(Debug, Clone)]
pub struct Splatter {
    width: usize,
    height: usize,
    mask: Vec<bool>,
    kernels: Vec<Vec<(usize, f64)>>,
}

impl Splatter {
    pub fn new(map: &RegionMap, cfg: &HeatmapConfig) -> Result<Self, HeatmapError> {
        if cfg.width == 0 || cfg.height == 0 || !(cfg.sigma_cells > 0.0) {
            return Err(HeatmapError::InvalidConfig(
                "grid size and sigma must be positive".into(),
            ));
        }
        let (w, h) = (cfg.width, cfg.height);
        let cell_center = |col: usize, row: usize| ((col as f64 + 0.5) / w as f64, 1.0 - (row as f64 + 0.5) / h as f64);
        let mask: Vec<bool> = (0..w * h)
            .map(|i| {
                let (x, y) = cell_center(i % w, i / w);
                insole_contains(x, y)
            })
            .collect();

        let reach = (4.0 * cfg.sigma_cells).ceil() as isize;
        let two_var = 2.0 * cfg.sigma_cells * cfg.sigma_cells;
        let kernels = (0..FSR_CHANNELS)
            .map(|ch| {
                let [x, y] = map.coords[ch];
                if !insole_contains(x, y) {
                    return Vec::new();
                }
                let (cx, cy) = (x * w as f64 - 0.5, (1.0 - y) * h as f64 - 0.5);
                let mut weights = Vec::new();
                for row in (cy.round() as isize - reach)..=(cy.round() as isize + reach) {
                    for col in (cx.round() as isize - reach)..=(cx.round() as isize + reach) {
                        if row < 0 || col < 0 || row >= h as isize || col >= w as isize {
                            continue;
                        }
                        let i = row as usize * w + col as usize;
                        if !mask[i] {
                            continue;
                        }
                        let d2 = (col as f64 - cx).powi(2) + (row as f64 - cy).powi(2);
                        weights.push((i, (-d2 / two_var).exp()));
                    }
                }
                let mass: f64 = weights.iter().map(|(_, v)| v).sum();
                if mass > 0.0 {
                    weights.iter_mut().for_each(|(_, v)| *v /= mass);
                }
                weights
            })
            .collect();
        Ok(Self {
            width: w,
            height: h,
            mask,
            kernels,
        })
    }

    fn empty(&self) -> HeatmapGrid {
        HeatmapGrid {
            width: self.width,
            height: self.height,
            cells: vec![0.0; self.width * self.height],
            mask: self.mask.clone(),
        }
    }

    fn accumulate(&self, grid: &mut HeatmapGrid, force: &[f64; FSR_CHANNELS], scale: f64) {
        for (kernel, &f) in self.kernels.iter().zip(force) {
            let v = f.max(0.0) * scale;
            if v == 0.0 {
                continue;
            }
            for &(i, weight) in kernel {
                grid.cells[i] += v * weight;
            }
        }
    }

    /// Instantaneous pressure picture; the grid sums to the total force of
    /// channels on the insole.
    pub fn splat(&self, force: &[f64; FSR_CHANNELS]) -> HeatmapGrid {
        let mut grid = self.empty();
        self.accumulate(&mut grid, force, 1.0);
        grid
    }

    /// Per-cell time integral over the trial (N·s).
    pub fn cumulative(&self, frames: &[ForceFrame]) -> HeatmapGrid {
        let mut grid = self.empty();
        for pair in frames.windows(2) {
            let dt = (pair[1].timestamp_ms - pair[0].timestamp_ms) as f64 / 1000.0;
            self.accumulate(&mut grid, &pair[0].force, dt);
        }
        grid
    }

    /// Picture at the first event of `kind`.
    pub fn at_event(
        &self,
        frames: &[ForceFrame],
        events: &[GaitEvent],
        kind: GaitEventKind,
    ) -> Result<HeatmapGrid, HeatmapError> {
        let event = events
            .iter()
            .find(|e| e.kind == kind)
            .ok_or(HeatmapError::EventNotFound(kind))?;
        let frame = frames
            .iter()
            .find(|f| f.timestamp_ms == event.timestamp_ms)
            .ok_or(HeatmapError::EventNotFound(kind))?;
        Ok(self.splat(&frame.force))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn splatter() -> Splatter {
        Splatter::new(&RegionMap::default(), &HeatmapConfig::default()).unwrap()
    }

    #[test]
    fn zero_force_gives_zero_grid() {
        let map = RegionMap::default();
        let frames: Vec<_> = (0..10)
            .map(|i| ForceFrame::from_forces(i * 10, [0.0; FSR_CHANNELS], &map))
            .collect();
        assert!(splatter().cumulative(&frames).cells.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn max_sits_on_the_loaded_channel() {
        let map = RegionMap::default();
        let cfg = HeatmapConfig::default();
        for ch in [0, 2, 7, 12] {
            let mut f = [0.0; FSR_CHANNELS];
            f[ch] = 5.0;
            let grid = splatter().splat(&f);
            let [x, y] = map.coords[ch];
            // The peak cell's center is within half a cell of the sensor;
            // a sensor on a cell edge may resolve to either neighbor.
            let (col, row) = grid.argmax();
            assert!(((col as f64 + 0.5) - x * cfg.width as f64).abs() <= 0.5, "channel {ch}");
            assert!(
                ((row as f64 + 0.5) - (1.0 - y) * cfg.height as f64).abs() <= 0.5,
                "channel {ch}"
            );
        }
    }

    #[test]
    fn grid_sum_equals_total_force() {
        let s = splatter();
        let f: [f64; FSR_CHANNELS] = std::array::from_fn(|i| 0.3 * i as f64);
        let total: f64 = f.iter().sum();
        assert!((s.splat(&f).sum() - total).abs() < 1e-9 * total);
        let doubled = f.map(|v| 2.0 * v);
        assert!((s.splat(&doubled).sum() - 2.0 * total).abs() < 1e-9 * total);
    }

    #[test]
    fn off_insole_channel_contributes_nothing() {
        let mut map = RegionMap::default();
        map.coords[4] = [0.02, 0.5];
        let s = Splatter::new(&map, &HeatmapConfig::default()).unwrap();
        let mut f = [0.0; FSR_CHANNELS];
        f[4] = 10.0;
        assert_eq!(s.splat(&f).sum(), 0.0);
    }

    #[test]
    fn cells_outside_mask_stay_zero() {
        let grid = splatter().splat(&[1.0; FSR_CHANNELS]);
        for (v, inside) in grid.cells.iter().zip(&grid.mask) {
            assert!(*v >= 0.0);
            if !inside {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn missing_event_is_reported() {
        let s = splatter();
        assert_eq!(
            s.at_event(&[], &[], GaitEventKind::HeelOff),
            Err(HeatmapError::EventNotFound(GaitEventKind::HeelOff))
        );
    }

    #[test]
    fn ppm_header_and_size() {
        let mut buf = Vec::new();
        splatter().splat(&[1.0; FSR_CHANNELS]).write_ppm(&mut buf).unwrap();
        let header = b"P6\n40 96\n255\n";
        assert_eq!(&buf[..header.len()], header);
        assert_eq!(buf.len(), header.len() + 40 * 96 * 3);
    }
}
