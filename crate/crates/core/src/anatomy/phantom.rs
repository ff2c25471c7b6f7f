//! Procedural phantoms: an elliptic body filled with soft tissue and
//! non-overlapping elliptic organs, deterministic in `(seed, spec)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physiosynth::classes::{AORTA, BONE, FAT, KIDNEY, LIVER, SOFT_TISSUE, SPLEEN};
use crate::physiosynth::{simulate_ct, TissueParameterTable, CT_RANGE};
use crate::volumes::{Dims, LabelVolume, ScalarVolume, Spacing};

/// Closed interval sampled uniformly.
pub type Range = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrganSpec {
    pub class_id: u16,
    /// In-plane semi-axes in mm.
    pub semi_axis_x_mm: Range,
    pub semi_axis_y_mm: Range,
    /// Centre as a fraction of the body semi-axes, in `[-1, 1]`.
    pub center_x_frac: Range,
    pub center_y_frac: Range,
    /// Optional ellipsoid extent along z; `None` spans every slice.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semi_axis_z_mm: Option<Range>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    pub spacing_mm: [f32; 3],
    pub body_semi_axis_x_mm: Range,
    pub body_semi_axis_y_mm: Range,
    pub organs: Vec<OrganSpec>,
    #[serde(default = "default_attempts")]
    pub max_attempts: usize,
}

fn default_attempts() -> usize {
    500
}

fn organ(class_id: u16, ax: Range, ay: Range, cx: Range, cy: Range) -> OrganSpec {
    OrganSpec {
        class_id,
        semi_axis_x_mm: ax,
        semi_axis_y_mm: ay,
        center_x_frac: cx,
        center_y_frac: cy,
        semi_axis_z_mm: None,
    }
}

impl Default for PhantomSpec {
    /// A 64 x 64 single-slice abdomen at 1 mm.
    fn default() -> Self {
        PhantomSpec {
            dims: [64, 64, 1],
            spacing_mm: [1.0, 1.0, 3.0],
            body_semi_axis_x_mm: [26.0, 29.5],
            body_semi_axis_y_mm: [18.0, 22.0],
            organs: vec![
                organ(LIVER, [7.0, 9.5], [5.0, 6.5], [-0.5, -0.3], [-0.45, -0.2]),
                organ(SPLEEN, [3.5, 5.0], [3.0, 4.5], [0.4, 0.6], [-0.3, 0.0]),
                organ(KIDNEY, [2.5, 3.5], [3.5, 4.5], [-0.5, -0.4], [0.4, 0.5]),
                organ(KIDNEY, [2.5, 3.5], [3.5, 4.5], [0.4, 0.5], [0.4, 0.5]),
                organ(BONE, [3.0, 4.0], [3.0, 4.0], [-0.05, 0.05], [0.55, 0.65]),
                organ(AORTA, [1.8, 2.4], [1.8, 2.4], [-0.05, 0.1], [0.2, 0.3]),
                organ(FAT, [3.0, 5.0], [2.0, 3.0], [-0.15, 0.2], [-0.7, -0.5]),
            ],
            max_attempts: default_attempts(),
        }
    }
}

impl PhantomSpec {
    pub fn with_dims(mut self, nx: usize, ny: usize, nz: usize) -> Self {
        let scale = nx.min(ny) as f64 / 64.0;
        self.dims = [nx, ny, nz];
        let s = |r: Range| [r[0] * scale, r[1] * scale];
        self.body_semi_axis_x_mm = s(self.body_semi_axis_x_mm);
        self.body_semi_axis_y_mm = s(self.body_semi_axis_y_mm);
        for o in &mut self.organs {
            o.semi_axis_x_mm = s(o.semi_axis_x_mm);
            o.semi_axis_y_mm = s(o.semi_axis_y_mm);
        }
        self
    }

    fn validate(&self) -> Result<()> {
        if self.dims.contains(&0) {
            return Err(Error::Validation("phantom dims must be >= 1".into()));
        }
        let ranges = [self.body_semi_axis_x_mm, self.body_semi_axis_y_mm]
            .into_iter()
            .chain(self.organs.iter().flat_map(|o| [o.semi_axis_x_mm, o.semi_axis_y_mm]));
        for r in ranges {
            if !(r[0] > 0.0 && r[0] <= r[1]) {
                return Err(Error::Validation(format!("semi-axis range {r:?} must satisfy 0 < lo <= hi")));
            }
        }
        for o in &self.organs {
            if o.class_id == 0 || o.class_id == SOFT_TISSUE {
                return Err(Error::Validation(format!("organ class {} is reserved", o.class_id)));
            }
        }
        Ok(())
    }
}

fn draw(rng: &mut ChaCha8Rng, r: Range) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..=r[1])
    }
}

struct Ellipse {
    cx: f64,
    cy: f64,
    ax: f64,
    ay: f64,
    cos: f64,
    sin: f64,
    z: Option<(f64, f64)>,
}

impl Ellipse {
    fn contains(&self, x: f64, y: f64, z: f64) -> bool {
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = (dx * self.cos + dy * self.sin) / self.ax;
        let v = (-dx * self.sin + dy * self.cos) / self.ay;
        let w = self.z.map_or(0.0, |(cz, az)| (z - cz) / az);
        u * u + v * v + w * w <= 1.0
    }
}

/// Whole-phantom redraws (new body, then organs) before placement gives up.
pub const PHANTOM_ROUNDS: usize = 8;

/// Generates a fused label volume (air outside, soft tissue inside the body,
/// organs inside the soft tissue) and its subject id `phantom-<seed>`. When an
/// organ finds no free position the whole phantom is redrawn from the same
/// random stream, up to [`PHANTOM_ROUNDS`] times.
pub fn generate_phantom(seed: u64, spec: &PhantomSpec) -> Result<(LabelVolume, String)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = None;
    for _ in 0..PHANTOM_ROUNDS {
        match draw_labels(&mut rng, spec) {
            Ok(labels) => {
                let id = format!("phantom-{seed:04}");
                let [nx, ny, nz] = spec.dims;
                let sp = Spacing::new(spec.spacing_mm[0], spec.spacing_mm[1], spec.spacing_mm[2]);
                return Ok((LabelVolume::new(Dims::new(nx, ny, nz), sp, labels, id.clone())?, id));
            }
            Err(e @ Error::Placement(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one round"))
}

fn draw_labels(rng: &mut ChaCha8Rng, spec: &PhantomSpec) -> Result<Vec<u16>> {
    let [nx, ny, nz] = spec.dims;
    let [sx, sy, sz] = spec.spacing_mm.map(|v| v as f64);
    let dims = Dims::new(nx, ny, nz);
    let pos = |x: usize, y: usize, z: usize| (x as f64 * sx, y as f64 * sy, z as f64 * sz);
    let (cx, cy) = ((nx - 1) as f64 * sx / 2.0, (ny - 1) as f64 * sy / 2.0);

    let body = Ellipse {
        cx,
        cy,
        ax: draw(rng, spec.body_semi_axis_x_mm),
        ay: draw(rng, spec.body_semi_axis_y_mm),
        cos: 1.0,
        sin: 0.0,
        z: None,
    };
    let idx = |x: usize, y: usize, z: usize| x + nx * (y + ny * z);
    let mut labels = vec![0u16; dims.len()];
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let (px, py, pz) = pos(x, y, z);
                if body.contains(px, py, pz) {
                    labels[idx(x, y, z)] = SOFT_TISSUE;
                }
            }
        }
    }
    if !labels.contains(&SOFT_TISSUE) {
        return Err(Error::Placement("body ellipse covers no voxel".into()));
    }
    // interior: body voxels whose in-plane 8-neighbours are all body
    let interior: Vec<bool> = (0..dims.len())
        .map(|i| {
            let (x, y, z) = (i % nx, (i / nx) % ny, i / (nx * ny));
            if labels[i] == 0 || x == 0 || y == 0 || x + 1 == nx || y + 1 == ny {
                return false;
            }
            (-1isize..=1).all(|dy| {
                (-1isize..=1).all(|dx| labels[idx((x as isize + dx) as usize, (y as isize + dy) as usize, z)] != 0)
            })
        })
        .collect();
    // voxels owned by an organ or adjacent to one
    let mut blocked = vec![false; dims.len()];
    let z_extent = (nz - 1) as f64 * sz;

    for (k, o) in spec.organs.iter().enumerate() {
        let mut placed = None;
        for _ in 0..spec.max_attempts.max(1) {
            let angle = rng.random_range(0.0..std::f64::consts::PI);
            let e = Ellipse {
                cx: cx + draw(rng, o.center_x_frac) * body.ax,
                cy: cy + draw(rng, o.center_y_frac) * body.ay,
                ax: draw(rng, o.semi_axis_x_mm),
                ay: draw(rng, o.semi_axis_y_mm),
                cos: angle.cos(),
                sin: angle.sin(),
                z: o.semi_axis_z_mm.map(|r| (rng.random_range(0.0..=z_extent.max(0.0)), draw(rng, r))),
            };
            let voxels: Vec<usize> = (0..dims.len())
                .filter(|&i| {
                    let (px, py, pz) = pos(i % nx, (i / nx) % ny, i / (nx * ny));
                    e.contains(px, py, pz)
                })
                .collect();
            if !voxels.is_empty() && voxels.iter().all(|&i| interior[i] && !blocked[i]) {
                placed = Some(voxels);
                break;
            }
        }
        let voxels = placed.ok_or_else(|| {
            Error::Placement(format!(
                "organ #{k} (class {}) found no free position in {} attempts",
                o.class_id, spec.max_attempts
            ))
        })?;
        for &i in &voxels {
            labels[i] = o.class_id;
        }
        for &i in &voxels {
            let (x, y, z) = (i % nx, (i / nx) % ny, i / (nx * ny));
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let (qx, qy) = (x as isize + dx, y as isize + dy);
                    if qx >= 0 && qy >= 0 && (qx as usize) < nx && (qy as usize) < ny {
                        blocked[idx(qx as usize, qy as usize, z)] = true;
                    }
                }
            }
        }
    }
    Ok(labels)
}

/// Acquired-image stand-in for a phantom: the CT prior with partial-volume
/// blur (separable [1 2 1] / 4 per axis) plus Gaussian noise of `noise_hu`.
pub fn reference_scan(labels: &LabelVolume, table: &TissueParameterTable, noise_hu: f64, seed: u64) -> Result<ScalarVolume> {
    let prior = simulate_ct(labels, table)?;
    let dims = labels.dims();
    let (nx, ny) = (dims.nx, dims.ny);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_hu.max(0.0)).map_err(|e| Error::domain(e.to_string()))?;
    let mut out = Vec::with_capacity(dims.len());
    let w = [0.25, 0.5, 0.25];
    for z in 0..dims.nz {
        let s = prior.slice(z);
        for y in 0..ny {
            for x in 0..nx {
                let mut acc = 0.0;
                for (j, wy) in w.iter().enumerate() {
                    for (i, wx) in w.iter().enumerate() {
                        let qx = (x as isize + i as isize - 1).clamp(0, nx as isize - 1) as usize;
                        let qy = (y as isize + j as isize - 1).clamp(0, ny as isize - 1) as usize;
                        acc += wx * wy * s.get(qx, qy);
                    }
                }
                let v = acc + noise.sample(&mut rng);
                out.push((v as f32).clamp(CT_RANGE.0, CT_RANGE.1));
            }
        }
    }
    ScalarVolume::new(dims, labels.spacing(), out, crate::volumes::Modality::CtHu, CT_RANGE)
}
