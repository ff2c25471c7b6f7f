use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TABLE_VERSION: &str = "tissues-v1";
const DEFAULT_TABLE_CSV: &str = include_str!("../../data/tissues_v1.csv");
const CSV_HEADER: [&str; 7] = ["class_id", "name", "hu", "t1_ms", "t2_ms", "rho", "fat_fraction"];

/// Class ids of the shipped table that other modules rely on.
pub mod classes {
    pub const AIR: u16 = 0;
    pub const SOFT_TISSUE: u16 = 1;
    pub const FAT: u16 = 2;
    pub const MUSCLE: u16 = 3;
    pub const BONE: u16 = 4;
    pub const VERTEBRA: u16 = 5;
    pub const LIVER: u16 = 6;
    pub const SPLEEN: u16 = 7;
    pub const KIDNEY: u16 = 8;
    pub const PANCREAS: u16 = 9;
    pub const STOMACH: u16 = 10;
    pub const AORTA: u16 = 13;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TissueRow {
    pub class_id: u16,
    pub name: String,
    pub hu: f64,
    pub t1_ms: f64,
    pub t2_ms: f64,
    pub rho: f64,
    pub fat_fraction: f64,
}

impl TissueRow {
    fn check(&self) -> std::result::Result<(), String> {
        if !(self.t1_ms > 0.0 && self.t2_ms > 0.0 && self.t1_ms >= self.t2_ms) {
            return Err(format!("need t1_ms >= t2_ms > 0, got t1={} t2={}", self.t1_ms, self.t2_ms));
        }
        if !(-1024.0..=3000.0).contains(&self.hu) {
            return Err(format!("hu {} outside [-1024, 3000]", self.hu));
        }
        if !(0.0..=1.0).contains(&self.fat_fraction) {
            return Err(format!("fat_fraction {} outside [0, 1]", self.fat_fraction));
        }
        if self.class_id == 0 {
            if self.rho != 0.0 || self.hu != -1000.0 {
                return Err("air (class 0) must have rho = 0 and hu = -1000".into());
            }
        } else if !(self.rho > 0.0 && self.rho <= 1.2) {
            return Err(format!("rho {} outside (0, 1.2]", self.rho));
        }
        Ok(())
    }
}

/// Per-class physical parameters keyed by class id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TissueParameterTable {
    version: String,
    rows: BTreeMap<u16, TissueRow>,
    /// Opposed-phase signal factors replacing `|1 - 2 * fat_fraction|` for
    /// specific classes.
    #[serde(default)]
    opposed_phase_override: BTreeMap<u16, f64>,
}

impl Default for TissueParameterTable {
    fn default() -> Self {
        Self::from_csv_str(DEFAULT_TABLE_VERSION, DEFAULT_TABLE_CSV).expect("shipped tissue table is valid")
    }
}

impl TissueParameterTable {
    pub fn from_rows(version: impl Into<String>, rows: impl IntoIterator<Item = TissueRow>) -> Result<Self> {
        let version = version.into();
        let mut map = BTreeMap::new();
        for (i, row) in rows.into_iter().enumerate() {
            let bad = |message: String| Error::Config {
                source_name: version.clone(),
                line: i + 2,
                message,
            };
            row.check().map_err(bad)?;
            if map.contains_key(&row.class_id) {
                return Err(bad(format!("duplicate class_id {}", row.class_id)));
            }
            map.insert(row.class_id, row);
        }
        if !map.contains_key(&0) {
            return Err(Error::Config {
                source_name: version,
                line: 1,
                message: "table must contain air (class 0)".into(),
            });
        }
        Ok(TissueParameterTable {
            version,
            rows: map,
            opposed_phase_override: BTreeMap::new(),
        })
    }

    /// Parses `class_id,name,hu,t1_ms,t2_ms,rho,fat_fraction`; errors carry
    /// 1-based line numbers.
    pub fn from_csv_str(source_name: &str, text: &str) -> Result<Self> {
        let cfg_err = |line: usize, message: String| Error::Config {
            source_name: source_name.to_string(),
            line,
            message,
        };
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| cfg_err(1, e.to_string()))?;
        if header.iter().collect::<Vec<_>>() != CSV_HEADER {
            return Err(cfg_err(1, format!("expected header `{}`", CSV_HEADER.join(","))));
        }
        let mut rows = Vec::new();
        let mut lines = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                cfg_err(line, e.to_string())
            })?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let num = |i: usize| -> Result<f64> {
                rec[i].parse::<f64>().map_err(|_| cfg_err(line, format!("column {} is not a number: {:?}", CSV_HEADER[i], &rec[i])))
            };
            let class_id = rec[0]
                .parse::<u16>()
                .map_err(|_| cfg_err(line, format!("class_id is not a u16: {:?}", &rec[0])))?;
            rows.push(TissueRow {
                class_id,
                name: rec[1].to_string(),
                hu: num(2)?,
                t1_ms: num(3)?,
                t2_ms: num(4)?,
                rho: num(5)?,
                fat_fraction: num(6)?,
            });
            lines.push(line);
        }
        // re-run validation with real line numbers
        let mut seen = BTreeMap::new();
        for (row, &line) in rows.iter().zip(&lines) {
            row.check().map_err(|m| cfg_err(line, m))?;
            if seen.insert(row.class_id, ()).is_some() {
                return Err(cfg_err(line, format!("duplicate class_id {}", row.class_id)));
            }
        }
        Self::from_rows(source_name, rows)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&path.display().to_string(), &text)
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).unwrap();
        for r in self.rows.values() {
            w.write_record([
                r.class_id.to_string(),
                r.name.clone(),
                r.hu.to_string(),
                r.t1_ms.to_string(),
                r.t2_ms.to_string(),
                r.rho.to_string(),
                r.fat_fraction.to_string(),
            ])
            .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, class_id: u16) -> Option<&TissueRow> {
        self.rows.get(&class_id)
    }

    pub fn lookup(&self, class_id: u16) -> Result<&TissueRow> {
        self.get(class_id)
            .ok_or_else(|| Error::Lookup(format!("class id {class_id} not in tissue table {}", self.version)))
    }

    pub fn rows(&self) -> impl Iterator<Item = &TissueRow> {
        self.rows.values()
    }

    pub fn class_by_name(&self, name: &str) -> Option<u16> {
        self.rows.values().find(|r| r.name == name).map(|r| r.class_id)
    }

    pub fn with_opposed_phase_override(mut self, class_id: u16, factor: f64) -> Result<Self> {
        self.lookup(class_id)?;
        if !(0.0..=1.0).contains(&factor) {
            return Err(Error::domain(format!("opposed-phase factor {factor} outside [0, 1]")));
        }
        self.opposed_phase_override.insert(class_id, factor);
        Ok(self)
    }

    pub fn opposed_phase_override(&self, class_id: u16) -> Option<f64> {
        self.opposed_phase_override.get(&class_id).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_table_loads() {
        let t = TissueParameterTable::default();
        assert_eq!(t.version(), DEFAULT_TABLE_VERSION);
        assert_eq!(t.len(), 21);
        assert_eq!(t.lookup(classes::AIR).unwrap().hu, -1000.0);
        assert_eq!(t.lookup(classes::LIVER).unwrap().hu, 60.0);
        assert_eq!(t.class_by_name("kidney"), Some(classes::KIDNEY));
        assert_eq!(t.class_by_name("soft_tissue"), Some(classes::SOFT_TISSUE));
        assert_eq!(t.class_by_name("fat"), Some(classes::FAT));
        assert_eq!(t.class_by_name("cortical_bone"), Some(classes::BONE));
    }

    #[test]
    fn csv_round_trip() {
        let t = TissueParameterTable::default();
        let again = TissueParameterTable::from_csv_str(DEFAULT_TABLE_VERSION, &t.to_csv_string()).unwrap();
        assert_eq!(again, t);
    }

    fn line_of(text: &str) -> usize {
        match TissueParameterTable::from_csv_str("t.csv", text) {
            Err(Error::Config { line, .. }) => line,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn errors_are_line_numbered() {
        let h = "class_id,name,hu,t1_ms,t2_ms,rho,fat_fraction\n";
        let air = "0,air,-1000,1000,1,0,0\n";
        assert_eq!(line_of("id,name\n"), 1);
        assert_eq!(line_of(&format!("{h}{air}1,x,40,abc,50,0.8,0\n")), 3);
        assert_eq!(line_of(&format!("{h}{air}1,x,40,10,50,0.8,0\n")), 3);
        assert_eq!(line_of(&format!("{h}{air}1,x,40,100,50,0.8,0\n1,y,40,100,50,0.8,0\n")), 4);
        assert_eq!(line_of(&format!("{h}1,x,40,100,50,0.8,0\n0,air,-1000,1000,1,0.5,0\n")), 3);
        assert_eq!(line_of(&format!("{h}1,x,4000,100,50,0.8,0\n")), 2);
        assert_eq!(line_of(&format!("{h}1,x,40,100,50,0.8,0\n")), 1);
    }
}
