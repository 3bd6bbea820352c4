//! A computational laboratory for Yoccoz extensions of circle-map
//! linearizations.
//!
//! The library walks the full chain from arithmetic to analysis:
//!
//! * [`cf`] — continued fractions, convergents, arithmetic-class statistics;
//! * [`rotation`] — dynamical partitions of the rotation, closest-return
//!   lengths, subdivision combinatorics;
//! * [`dynamics`] — a tuned critical circle map and its partitions;
//! * [`grid`] — the half-plane grids built over the partitions;
//! * [`elliptic`] — elliptic-function helpers for the conformal base map;
//! * [`extension`] — per-cell quasiconformal extensions and the cell map;
//! * [`analysis`] — dilatation fields, tail areas and gauge fits;
//! * [`pipeline`] — manifests and reproducible end-to-end runs.

pub mod analysis;
pub mod basemap;
pub mod cellmap;
pub mod cf;
pub mod dynamics;
pub mod elliptic;
pub mod error;
pub mod extension;
pub mod grid;
pub mod pipeline;
pub mod rotation;

pub use error::{Error, Result};
