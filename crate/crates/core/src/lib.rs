//! Hamilton–Jacobi reachability for two-satellite collision avoidance under
//! planar Hill–Clohessy–Wiltshire dynamics.
//!
//! The crate computes backward reachable tubes of a zero-sum game between a
//! controlled satellite and a bounded adversarial disturbance, then uses the
//! resulting value function as the switching surface of a three-mode hybrid
//! supervisor in closed-loop simulation.
//!
//! - [`dynamics`]: relative motion, closed-form propagation, Hamiltonian.
//! - [`field`], [`contour`], [`hjf`]: grids, fields, slices and file I/O.
//! - [`solver`]: the level-set solver.
//! - [`supervisor`]: guards, PD laws and escape modes.
//! - [`sim`]: closed-loop episodes and Monte Carlo batches.
//! - [`config`]: run configuration files.

pub mod config;
pub mod contour;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod hjf;
pub mod sim;
pub mod solver;
pub mod supervisor;
pub mod value;

pub use config::RunConfig;
pub use dynamics::{GameConvention, InputVec, OrbitGameParams, StateVec};
pub use error::{Error, Result};
pub use field::{Axis, AxisSpec, BoxBounds, GridSpec, ScalarField, TargetSetSpec};
pub use sim::{Controller, DisturbancePolicy, EpisodeSettings, Outcome, TrajectoryRecord};
pub use solver::{SolveConfig, SolveMode, ValueFunctionResult};
pub use supervisor::{Mode, SupervisorConfig};
pub use value::ValueFunction;
