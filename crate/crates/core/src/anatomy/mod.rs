//! Body contours, organ/contour fusion, multi-subject composition and
//! procedural phantoms.

mod compose;
mod contour;
mod fuse;
mod phantom;

pub use compose::{compose_anatomy, Composition, CompositionRecipe, ConflictPolicy, RecipeEntry};
pub use contour::{extract_body_contour, extract_body_contour_with, fill_holes, label_components, largest_component, BodyContourMask, Connectivity, DEFAULT_CT_THRESHOLD};
pub use fuse::fuse_masks;
pub use phantom::{generate_phantom, reference_scan, OrganSpec, PhantomSpec, PHANTOM_ROUNDS};
