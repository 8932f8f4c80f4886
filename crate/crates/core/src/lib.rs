//! Conformal tori in the 4-sphere: associated families, holonomy spectral
//! curves, Darboux transforms and harmonic maps into the 2-sphere.

pub mod darboux;
pub mod error;
pub mod family;
pub mod fourier;
pub mod harmonic;
pub mod holonomy;
pub mod moebius;
pub mod quat;
pub mod spectral;
pub mod surface;

pub use error::{Error, Result};
pub use quat::{Quaternion, QMat2, QVec2, C64};
pub use surface::{builtin_surface, sample_frames, BuiltinKind, FrameGrid, SurfaceKind, SurfaceSpec, TorusLattice};
