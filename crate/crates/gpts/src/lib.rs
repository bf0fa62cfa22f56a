//! Gaussian-process bandits over tree paths.
//!
//! Arms are root-to-leaf paths of a `(B, D)` tree, rewards are modelled by a
//! zero-mean GP whose covariance between two paths depends only on how many
//! nodes they share. The crate provides:
//!
//! - [`kernels`]: chi-sequences for the linear, Gaussian and discounted-MDP
//!   path kernels, kernel evaluation, and the explicit sparse feature map;
//! - [`gp`]: the incremental GP posterior and the confidence schedule;
//! - [`search`]: the UCB tree search that represents unexplored regions by
//!   dummy nodes and selects arms in time linear in the sample count;
//! - [`spectrum`]: closed-form eigenvalues of the whole-tree kernel matrix,
//!   their nonincreasing reindexing, bracketing bounds, and prior sampling;
//! - [`bounds`]: computable information-gain and regret bounds;
//! - [`planning`]: open-loop planning in discounted deterministic MDPs via
//!   the tree search with the MDP kernel and a logarithmic depth schedule.
//!
//! # Quick start
//!
//! ```
//! use gpts::search::{run_search, SearchConfig, StoppingRule};
//! use gpts::{chi_gaussian, Path};
//!
//! let chi = chi_gaussian(2, 4, 1.5)?;
//! let mut config = SearchConfig::new(chi, 0.01);
//! config.seed = 7;
//! let mut reward = |p: &Path| if p.actions()[0] == 0 { 1.0 } else { 0.0 };
//! let trace = run_search(config, &StoppingRule::FixedIterations(100), None, &mut reward)?;
//! let (best, value) = trace.best().unwrap();
//! assert_eq!(value, 1.0);
//! println!("best arm {best} observed {value}");
//! # Ok::<(), gpts::Error>(())
//! ```
//!
//! Every run is a pure function of its configuration and seed; all
//! randomness flows through seeded ChaCha streams.

pub mod bounds;
pub mod error;
pub mod gp;
pub mod kernels;
pub mod planning;
pub mod search;
pub mod spectrum;

pub use error::{Error, Result};
pub use kernels::{chi_gaussian, chi_linear, chi_mdp, ChiSequence, KernelKind, Path};
