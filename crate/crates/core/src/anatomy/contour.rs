//! Per-slice body contour: threshold, keep the largest 8-connected component,
//! fill interior holes.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::volumes::{Dims, LabelVolume, ScalarVolume, Spacing};

/// Midway between air and soft tissue, in HU.
pub const DEFAULT_CT_THRESHOLD: f64 = -500.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(-1, 0), (1, 0), (0, -1), (0, 1)],
            Connectivity::Eight => &[(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)],
        }
    }
}

/// Binary body mask; each non-empty axial slice holds one filled component.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyContourMask {
    dims: Dims,
    spacing: Spacing,
    data: Vec<bool>,
}

impl BodyContourMask {
    pub fn new(dims: Dims, spacing: Spacing, data: Vec<bool>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::shape(format!("mask has {} voxels, dims need {}", data.len(), dims.len())));
        }
        Ok(BodyContourMask { dims, spacing, data })
    }

    /// Every non-background voxel of `labels` counts as inside.
    pub fn from_labels(labels: &LabelVolume) -> Self {
        BodyContourMask {
            dims: labels.dims(),
            spacing: labels.spacing(),
            data: labels.data().iter().map(|&c| c != 0).collect(),
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn slice(&self, z: usize) -> &[bool] {
        let n = self.dims.slice_len();
        &self.data[z * n..(z + 1) * n]
    }

    /// As a 0/1 label volume, for `.svol` storage.
    pub fn to_label_volume(&self, subject_id: &str) -> Result<LabelVolume> {
        LabelVolume::new(self.dims, self.spacing, self.data.iter().map(|&b| b as u16).collect(), subject_id)
    }
}

/// Labels the `true` pixels of a row-major `width x height` grid; returns the
/// per-pixel label (0 = not set, components numbered from 1 in scan order)
/// and the component sizes.
pub fn label_components(mask: &[bool], width: usize, height: usize, conn: Connectivity) -> (Vec<u32>, Vec<usize>) {
    let mut labels = vec![0u32; mask.len()];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || labels[start] != 0 {
            continue;
        }
        let id = sizes.len() as u32 + 1;
        labels[start] = id;
        queue.push_back(start);
        let mut size = 0;
        while let Some(p) = queue.pop_front() {
            size += 1;
            let (x, y) = ((p % width) as isize, (p / width) as isize);
            for &(dx, dy) in conn.offsets() {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= width as isize || ny >= height as isize {
                    continue;
                }
                let q = ny as usize * width + nx as usize;
                if mask[q] && labels[q] == 0 {
                    labels[q] = id;
                    queue.push_back(q);
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

/// Largest component under `conn`; ties go to the component found first in
/// scan order.
pub fn largest_component(mask: &[bool], width: usize, height: usize, conn: Connectivity) -> Vec<bool> {
    let (labels, sizes) = label_components(mask, width, height, conn);
    let Some(best) = sizes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i as u32 + 1)
    else {
        return vec![false; mask.len()];
    };
    labels.iter().map(|&l| l == best).collect()
}

/// Sets every background pixel not 4-connected to the border.
pub fn fill_holes(mask: &[bool], width: usize, height: usize) -> Vec<bool> {
    let mut outside = vec![false; mask.len()];
    let mut queue = VecDeque::new();
    for y in 0..height {
        for x in 0..width {
            let border = x == 0 || y == 0 || x + 1 == width || y + 1 == height;
            let p = y * width + x;
            if border && !mask[p] {
                outside[p] = true;
                queue.push_back(p);
            }
        }
    }
    while let Some(p) = queue.pop_front() {
        let (x, y) = ((p % width) as isize, (p / width) as isize);
        for &(dx, dy) in Connectivity::Four.offsets() {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx >= width as isize || ny >= height as isize {
                continue;
            }
            let q = ny as usize * width + nx as usize;
            if !mask[q] && !outside[q] {
                outside[q] = true;
                queue.push_back(q);
            }
        }
    }
    outside.iter().map(|&o| !o).collect()
}

pub fn extract_body_contour(img: &ScalarVolume, threshold: f64) -> Result<BodyContourMask> {
    extract_body_contour_with(img, threshold, Exec::default())
}

pub fn extract_body_contour_with(img: &ScalarVolume, threshold: f64, exec: Exec) -> Result<BodyContourMask> {
    let dims = img.dims();
    let (w, h) = (dims.nx, dims.ny);
    let slices = exec.map_range(dims.nz, |z| {
        let n = dims.slice_len();
        let bin: Vec<bool> = img.data()[z * n..(z + 1) * n].iter().map(|&v| v as f64 > threshold).collect();
        let body = largest_component(&bin, w, h, Connectivity::Eight);
        fill_holes(&body, w, h)
    });
    let data: Vec<bool> = slices.concat();
    if !data.iter().any(|&b| b) {
        return Err(Error::EmptyContour);
    }
    BodyContourMask::new(dims, img.spacing(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volumes::Modality;

    fn img(w: usize, h: usize, f: impl Fn(usize, usize) -> f32) -> ScalarVolume {
        let mut data = Vec::new();
        for y in 0..h {
            for x in 0..w {
                data.push(f(x, y));
            }
        }
        ScalarVolume::new(Dims::new(w, h, 1), Spacing::isotropic(1.0), data, Modality::CtHu, (-1024.0, 3000.0)).unwrap()
    }

    #[test]
    fn full_foreground() {
        let m = extract_body_contour(&img(6, 5, |_, _| 40.0), -500.0).unwrap();
        assert!(m.data().iter().all(|&b| b));
    }

    #[test]
    fn disk_hole_is_filled() {
        let v = img(15, 15, |x, y| {
            let r2 = (x as f32 - 7.0).powi(2) + (y as f32 - 7.0).powi(2);
            if (x, y) == (7, 7) {
                -1000.0
            } else if r2 <= 25.0 {
                40.0
            } else {
                -1000.0
            }
        });
        let m = extract_body_contour(&v, -500.0).unwrap();
        assert!(m.slice(0)[7 * 15 + 7]);
        let disk = (0..225).filter(|&p| ((p % 15) as f32 - 7.0).powi(2) + ((p / 15) as f32 - 7.0).powi(2) <= 25.0).count();
        assert_eq!(m.count(), disk);
    }

    #[test]
    fn all_empty_is_error() {
        assert!(matches!(extract_body_contour(&img(4, 4, |_, _| -1000.0), -500.0), Err(Error::EmptyContour)));
    }

    #[test]
    fn diagonal_pixels_join_under_eight() {
        let m = vec![true, false, false, true];
        let (_, s8) = label_components(&m, 2, 2, Connectivity::Eight);
        let (_, s4) = label_components(&m, 2, 2, Connectivity::Four);
        assert_eq!(s8, vec![2]);
        assert_eq!(s4, vec![1, 1]);
    }

    #[test]
    fn ring_gap_keeps_hole_open() {
        // a 5x5 ring with one missing edge pixel: the interior connects to the border
        let mut m = vec![false; 49];
        for y in 1..6 {
            for x in 1..6 {
                if x == 1 || y == 1 || x == 5 || y == 5 {
                    m[y * 7 + x] = true;
                }
            }
        }
        m[7 + 3] = false;
        let filled = fill_holes(&m, 7, 7);
        assert!(!filled[3 * 7 + 3]);
        m[7 + 3] = true;
        assert!(fill_holes(&m, 7, 7)[3 * 7 + 3]);
    }
}
