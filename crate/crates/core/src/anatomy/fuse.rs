use crate::error::{Error, Result};
use crate::physiosynth::classes::SOFT_TISSUE;
use crate::volumes::LabelVolume;

use super::BodyContourMask;

/// Restricts organ labels to the body: organ class inside the contour,
/// `SOFT_TISSUE` for unlabelled interior voxels, air outside.
pub fn fuse_masks(organs: &LabelVolume, contour: &BodyContourMask) -> Result<LabelVolume> {
    if !organs.same_grid(contour.dims(), contour.spacing()) {
        return Err(Error::shape(format!(
            "organs {:?}/{:?} vs contour {:?}/{:?}",
            organs.dims(),
            organs.spacing(),
            contour.dims(),
            contour.spacing()
        )));
    }
    let data = organs
        .data()
        .iter()
        .zip(contour.data())
        .map(|(&c, &inside)| match (inside, c) {
            (false, _) => 0,
            (true, 0) => SOFT_TISSUE,
            (true, c) => c,
        })
        .collect();
    LabelVolume::new(organs.dims(), organs.spacing(), data, organs.subject_id())
}
