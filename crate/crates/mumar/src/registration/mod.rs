//! Multi-view registration of marker plane models.
//!
//! The solver works on sliding windows of consecutive views: inside a
//! window each view is repeatedly registered against the mean plane models
//! of the others ([`multiview_register_window`]), window-edge transforms
//! are propagated to the views outside it, every window is re-anchored on
//! the history of committed planes ([`SceneStructure`]), and the object
//! clouds finally ride along on the recovered per-view transforms
//! ([`transform_object`]).

mod sequence;
mod structure;
mod window;

pub use sequence::{
    register_sequence, scene_adjust, transform_object, ErrorSample, RegistrationReport,
};
pub use structure::{SceneStructure, StructureEntry};
pub use window::{
    multiview_register_window, register_view_to_scene, registration_error, scene_model,
    RegistrationOptions, ViewAlignment, WindowReport, WindowState,
};
