//! Hybridized finite element methods (HDG, hybridized IPDG, hybridized
//! Raviart-Thomas) for second order elliptic problems in 2D, statically
//! condensed to a skeletal trace system, together with a geometric multigrid
//! solver built from discrete Dirichlet-to-Neumann maps on an agglomeration
//! hierarchy. The multigrid cycle works both as a standalone solver and as a
//! left preconditioner for GMRES.

pub mod agglomeration;
pub mod error;
pub mod fem_basis;
pub mod hybridized;
pub mod krylov;
pub mod mesh;
pub mod multigrid;
pub mod smoothers;
pub mod trace_system;

pub use error::Error;
