//! Nonconforming P2 / discontinuous P1 mixed finite elements for the
//! stationary Stokes equations on tetrahedral grids.
//!
//! The velocity space enriches continuous P2 with three central bubbles per
//! tet and one face bubble per interior face; pressure is discontinuous P1.
//! The guide in `book/` walks through the construction; the modules follow
//! the same order:
//!
//! * [`mesh`]: structured tetrahedral meshes of the unit cube and their geometry
//! * [`quadrature`]: simplex quadrature rules
//! * [`basis`]: local shape functions
//! * [`space`]: global degrees of freedom
//! * [`assembly`]: the saddle-point system and error norms
//! * [`solver`], [`infsup`]: direct solution and inf-sup estimation
//! * [`problem`], [`convergence`], [`verify`]: the manufactured problem,
//!   refinement studies and verification suites
//! * [`vtk`]: mesh export

pub mod assembly;
pub mod basis;
pub mod convergence;
pub mod error;
pub mod infsup;
pub mod mesh;
pub mod problem;
pub mod quadrature;
pub mod solver;
pub mod space;
pub mod sparse;
pub mod verify;
pub mod vtk;

pub use error::{Error, Result};
