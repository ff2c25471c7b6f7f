//! Synthetic anatomies assembled from organs of several subjects on a shared
//! grid, with a per-voxel record of where each label came from.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physiosynth::classes::SOFT_TISSUE;
use crate::volumes::LabelVolume;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecipeEntry {
    pub organ_class_id: u16,
    pub source_subject_id: String,
    /// Lower wins under [`ConflictPolicy::PriorityOrder`]; entries without a
    /// priority rank after those with one, in recipe order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priority: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictPolicy {
    #[default]
    PriorityOrder,
    /// Earliest recipe entry wins, priorities ignored.
    FirstWins,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionRecipe {
    pub entries: Vec<RecipeEntry>,
    pub contour_source: String,
    #[serde(default)]
    pub conflict_policy: ConflictPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_subject_id: Option<String>,
}

impl CompositionRecipe {
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            if !seen.insert(e.organ_class_id) {
                return Err(Error::Validation(format!("organ class {} listed twice", e.organ_class_id)));
            }
            if e.organ_class_id == 0 {
                return Err(Error::Validation("background (class 0) cannot be composed".into()));
            }
        }
        Ok(())
    }

    /// Entries in the order they claim contested voxels.
    fn precedence(&self) -> Vec<&RecipeEntry> {
        let mut order: Vec<(usize, &RecipeEntry)> = self.entries.iter().enumerate().collect();
        if self.conflict_policy == ConflictPolicy::PriorityOrder {
            order.sort_by_key(|(i, e)| (e.priority.unwrap_or(u32::MAX), *i));
        }
        order.into_iter().map(|(_, e)| e).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Composition {
    pub labels: LabelVolume,
    /// Per voxel: 0 for background, otherwise `1 + index` into `sources`.
    pub provenance: Vec<u16>,
    pub sources: Vec<String>,
}

impl Composition {
    pub fn provenance_volume(&self) -> Result<LabelVolume> {
        LabelVolume::new(
            self.labels.dims(),
            self.labels.spacing(),
            self.provenance.clone(),
            format!("{}-prov", self.labels.subject_id()).chars().take(24).collect::<String>(),
        )
    }

    /// Voxel counts keyed by (source subject, class).
    pub fn counts_by_source(&self) -> BTreeMap<(String, u16), usize> {
        let mut out = BTreeMap::new();
        for (&p, &c) in self.provenance.iter().zip(self.labels.data()) {
            if p != 0 {
                *out.entry((self.sources[p as usize - 1].clone(), c)).or_insert(0) += 1;
            }
        }
        out
    }
}

/// Copies each recipe organ from its source subject, clips everything to the
/// contour source's body, and fills the remaining interior with soft tissue
/// attributed to the contour source.
pub fn compose_anatomy(subjects: &BTreeMap<String, LabelVolume>, recipe: &CompositionRecipe) -> Result<Composition> {
    recipe.validate()?;
    let get = |id: &str| {
        subjects
            .get(id)
            .ok_or_else(|| Error::Lookup(format!("unknown subject {id:?}")))
    };
    let base = get(&recipe.contour_source)?;
    let mut sources = vec![recipe.contour_source.clone()];
    for e in &recipe.entries {
        let s = get(&e.source_subject_id)?;
        if !s.same_grid(base.dims(), base.spacing()) {
            return Err(Error::shape(format!(
                "subject {:?} grid differs from contour source {:?}; resample first",
                e.source_subject_id, recipe.contour_source
            )));
        }
        if !sources.contains(&e.source_subject_id) {
            sources.push(e.source_subject_id.clone());
        }
    }
    let index_of = |id: &str| sources.iter().position(|s| s == id).unwrap() as u16 + 1;

    let n = base.data().len();
    let mut labels = vec![0u16; n];
    let mut provenance = vec![0u16; n];
    for e in recipe.precedence() {
        let src = subjects[&e.source_subject_id].data();
        let tag = index_of(&e.source_subject_id);
        for v in 0..n {
            if src[v] == e.organ_class_id && base.data()[v] != 0 && provenance[v] == 0 {
                labels[v] = e.organ_class_id;
                provenance[v] = tag;
            }
        }
    }
    for v in 0..n {
        if base.data()[v] != 0 && provenance[v] == 0 {
            labels[v] = SOFT_TISSUE;
            provenance[v] = 1;
        }
    }
    let id = recipe.output_subject_id.clone().unwrap_or_else(|| "composite".into());
    Ok(Composition {
        labels: LabelVolume::new(base.dims(), base.spacing(), labels, id)?,
        provenance,
        sources,
    })
}
