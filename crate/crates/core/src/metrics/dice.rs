use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

/// `2 |a & b| / (|a| + |b|)`, defined as 1 when both masks are empty.
pub fn dice(a: &[bool], b: &[bool]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(format!("mask lengths differ: {} vs {}", a.len(), b.len())));
    }
    let (mut inter, mut na, mut nb) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        na += x as usize;
        nb += y as usize;
        inter += (x && y) as usize;
    }
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (na + nb) as f64)
}

/// Dice of `labels == class` for each requested class.
pub fn dice_per_class(a: &[u16], b: &[u16], classes: &[u16]) -> Result<BTreeMap<u16, f64>> {
    if a.len() != b.len() {
        return Err(Error::shape(format!("label lengths differ: {} vs {}", a.len(), b.len())));
    }
    classes
        .iter()
        .map(|&c| {
            let ma: Vec<bool> = a.iter().map(|&v| v == c).collect();
            let mb: Vec<bool> = b.iter().map(|&v| v == c).collect();
            Ok((c, dice(&ma, &mb)?))
        })
        .collect()
}

/// Organ x patient grid of Dice scores.
#[derive(Debug, Clone, PartialEq)]
pub struct DiceHeatmap {
    pub organs: Vec<String>,
    pub patients: Vec<String>,
    /// `values[organ][patient]`.
    pub values: Vec<Vec<f64>>,
}

impl DiceHeatmap {
    pub fn new(organs: Vec<String>, patients: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != organs.len() || values.iter().any(|r| r.len() != patients.len()) {
            return Err(Error::shape("heatmap grid does not match its labels"));
        }
        Ok(DiceHeatmap {
            organs,
            patients,
            values,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut head = vec!["organ".to_string()];
        head.extend(self.patients.iter().cloned());
        w.write_record(&head).expect("in-memory write");
        for (o, row) in self.organs.iter().zip(&self.values) {
            let mut rec = vec![o.clone()];
            rec.extend(row.iter().map(|v| format!("{v:.6}")));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    /// Grey-level PNG, `cell` pixels per entry, brightness = Dice.
    pub fn to_png(&self, cell: usize) -> Vec<u8> {
        let cell = cell.max(1);
        let (w, h) = (self.patients.len().max(1) * cell, self.organs.len().max(1) * cell);
        let mut px = vec![0u8; w * h];
        for (r, row) in self.values.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                let g = (v.clamp(0.0, 1.0) * 255.0).round_ties_even() as u8;
                for y in r * cell..(r + 1) * cell {
                    px[y * w + c * cell..y * w + (c + 1) * cell].fill(g);
                }
            }
        }
        encode_gray_png(w, h, &px)
    }

    pub fn write(&self, csv_path: &Path, png_path: &Path) -> Result<()> {
        std::fs::write(csv_path, self.to_csv()).map_err(|e| Error::io(csv_path, e))?;
        std::fs::write(png_path, self.to_png(16)).map_err(|e| Error::io(png_path, e))
    }
}

fn encode_gray_png(w: usize, h: usize, px: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    let mut enc = png::Encoder::new(&mut out, w as u32, h as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let mut wr = enc.write_header().expect("in-memory png");
    wr.write_image_data(px).expect("in-memory png");
    wr.finish().expect("in-memory png");
    out
}
