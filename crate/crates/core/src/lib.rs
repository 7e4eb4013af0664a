//! Basin geometry and a coupled Bayesian / inverse-Bayesian inference loop.
//!
//! The crate has two halves that meet in the middle:
//!
//! * Complex-plane machinery: Newton-map orbits and basin labeling
//!   ([`newton`]), boundary extraction and box-counting dimension
//!   ([`fractal`]), and the inner/outer coarse-graining partition whose
//!   uncertain shell yields a threshold probability and a stochastic
//!   switch kernel ([`partition`]).
//! * Discrete inference machinery: finite distributions, Bayes updates and
//!   the variational free energy ([`bayes`]), the threshold relation with
//!   rough-set approximations and likelihood re-estimation ([`inverse`]),
//!   and the combined loop with its perception and random-walk
//!   applications ([`bib`], [`perception`], [`walker`]).
//!
//! Grid-scale work (labeling, kernel sampling, box counting) runs on rayon
//! when the default `parallel` feature is enabled; `*_seq` variants are
//! always compiled and produce bit-identical results for a fixed seed.

pub mod bayes;
pub mod bib;
pub mod fractal;
pub mod inverse;
pub mod newton;
pub mod partition;
pub mod perception;
pub mod pixmap;
pub mod rng;
pub mod stats;
pub mod trajectory;
pub mod walker;

pub use bayes::{BayesError, Distribution, FreeEnergyReport, GenerativeModel, JointTable, LikelihoodTable};
pub use bib::{BibState, Scenario, StreamSpec};
pub use fractal::{BoundaryMask, DimensionEstimate, FractalError, MeasureReport};
pub use inverse::{BinaryRelation, ExplorationPolicy, IbConfig, InverseError, RoughApproximation, ThetaSource};
pub use newton::{CellLabel, ComplexGrid, GridSpec, NewtonError, Orbit, PolynomialMap, TerminalStatus};
pub use partition::{Partition, PartitionError, Region, SwitchKernel};
pub use stats::StatsError;
pub use trajectory::{Event, TrajectoryLog, WalkLog};
