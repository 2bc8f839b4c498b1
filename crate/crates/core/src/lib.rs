//! Airway tree tracing from 3-D chest CT volumes.
//!
//! The tracer grows the trachea from a seed, then follows the tree with
//! oriented volumes of interest (VOIs). Inside each VOI the image is
//! sharpened, dark cavities are enhanced, and a gradient vector flow (GVF)
//! field is solved; its magnitude and a circle-flux tube-likeness measure
//! locate centerlines and branch points, which seed child VOIs. Leaks into
//! the surrounding parenchyma are rejected by face-coverage and exit-contour
//! circularity tests.

pub mod config;
pub mod enhance;
pub mod error;
pub mod eval;
pub mod gvf;
mod par;
pub mod phantom;
pub mod trachea;
pub mod tube;
pub mod tracer;
pub mod voi;
pub mod volume;

pub use error::{Error, Result};
