use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_PRESETS_JSON: &str = include_str!("../../data/sequence_presets_v1.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceKind {
    Ct,
    GreT1,
    SpaceT2,
    VibeIn,
    VibeOpp,
    DixonVibeIn,
    DixonVibeOpp,
}

impl SequenceKind {
    pub fn is_mr(self) -> bool {
        self != SequenceKind::Ct
    }

    pub fn is_vibe(self) -> bool {
        matches!(
            self,
            SequenceKind::VibeIn | SequenceKind::VibeOpp | SequenceKind::DixonVibeIn | SequenceKind::DixonVibeOpp
        )
    }

    pub fn is_opposed_phase(self) -> bool {
        matches!(self, SequenceKind::VibeOpp | SequenceKind::DixonVibeOpp)
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "ct" => SequenceKind::Ct,
            "gre" | "gre_t1" => SequenceKind::GreT1,
            "space" | "space_t2" => SequenceKind::SpaceT2,
            "vibe_in" => SequenceKind::VibeIn,
            "vibe_opp" => SequenceKind::VibeOpp,
            "dixon_in" | "dixon_vibe_in" => SequenceKind::DixonVibeIn,
            "dixon_opp" | "dixon_vibe_opp" => SequenceKind::DixonVibeOpp,
            _ => return None,
        })
    }
}

/// Acquisition parameters; timing fields are ignored for CT.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceParams {
    pub kind: SequenceKind,
    pub tr_ms: f64,
    pub te_ms: f64,
    pub flip_deg: f64,
}

impl SequenceParams {
    pub fn ct() -> Self {
        SequenceParams {
            kind: SequenceKind::Ct,
            tr_ms: 0.0,
            te_ms: 0.0,
            flip_deg: 0.0,
        }
    }

    pub fn new(kind: SequenceKind, tr_ms: f64, te_ms: f64, flip_deg: f64) -> Result<Self> {
        let p = SequenceParams {
            kind,
            tr_ms,
            te_ms,
            flip_deg,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.kind.is_mr() {
            return Ok(());
        }
        if !(self.tr_ms.is_finite() && self.tr_ms > 0.0) {
            return Err(Error::domain(format!("tr_ms must be > 0, got {}", self.tr_ms)));
        }
        if !(self.te_ms.is_finite() && self.te_ms >= 0.0) {
            return Err(Error::domain(format!("te_ms must be >= 0, got {}", self.te_ms)));
        }
        if !(self.flip_deg > 0.0 && self.flip_deg < 180.0) {
            return Err(Error::domain(format!("flip_deg must be in (0, 180), got {}", self.flip_deg)));
        }
        Ok(())
    }
}

/// Named parameter sets loaded from a JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequencePresets {
    pub version: String,
    pub presets: BTreeMap<String, SequenceParams>,
}

impl Default for SequencePresets {
    fn default() -> Self {
        Self::from_json_str("sequence_presets_v1.json", DEFAULT_PRESETS_JSON).expect("shipped presets are valid")
    }
}

impl SequencePresets {
    pub fn from_json_str(source_name: &str, text: &str) -> Result<Self> {
        let presets: SequencePresets = serde_json::from_str(text).map_err(|e| Error::Config {
            source_name: source_name.into(),
            line: e.line(),
            message: e.to_string(),
        })?;
        for (name, p) in &presets.presets {
            p.validate().map_err(|e| Error::Config {
                source_name: source_name.into(),
                line: line_of_key(text, name),
                message: format!("preset {name:?}: {e}"),
            })?;
        }
        Ok(presets)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&path.display().to_string(), &text)
    }

    pub fn get(&self, name: &str) -> Result<SequenceParams> {
        self.presets
            .get(name)
            .copied()
            .ok_or_else(|| Error::Lookup(format!("no sequence preset named {name:?}")))
    }
}

fn line_of_key(text: &str, key: &str) -> usize {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map_or(0, |i| i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_presets() {
        let p = SequencePresets::default();
        let gre = p.get("gre").unwrap();
        assert_eq!((gre.kind, gre.tr_ms, gre.flip_deg), (SequenceKind::GreT1, 25.0, 30.0));
        assert_eq!(p.get("space").unwrap().te_ms, 90.0);
        let vibe = p.get("vibe_opp").unwrap();
        assert_eq!((vibe.tr_ms, vibe.flip_deg), (4.5, 10.0));
        assert!(p.get("nope").is_err());
    }

    #[test]
    fn invalid_preset_reports_line() {
        let text = "{\n \"version\": \"x\",\n \"presets\": {\n  \"bad\": {\"kind\": \"gre_t1\", \"tr_ms\": 10, \"te_ms\": 1, \"flip_deg\": 190}\n }\n}";
        match SequencePresets::from_json_str("p.json", text) {
            Err(Error::Config { line: 4, .. }) => {}
            other => panic!("{other:?}"),
        }
        match SequencePresets::from_json_str("p.json", "{\n \"version\": 3 }") {
            Err(Error::Config { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn param_bounds() {
        assert!(SequenceParams::new(SequenceKind::GreT1, 0.0, 1.0, 30.0).is_err());
        assert!(SequenceParams::new(SequenceKind::SpaceT2, 100.0, -1.0, 90.0).is_err());
        assert!(SequenceParams::new(SequenceKind::VibeIn, 5.0, 2.0, 180.0).is_err());
        assert!(SequenceParams::new(SequenceKind::Ct, -1.0, -1.0, 500.0).is_ok());
        assert_eq!(SequenceKind::parse("vibe-opp"), Some(SequenceKind::VibeOpp));
    }
}
