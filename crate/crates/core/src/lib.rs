//! Location-privacy toolkit over Markov decision processes.
//!
//! A user moves between points of interest (the MDP states) and at each
//! step reports a cloaking region (the action). An adversary who knows the
//! reporting policy tracks a Bayesian belief over the user's location. The
//! crate builds such models from GPS traces ([`mobility`]), measures what
//! the adversary learns ([`adversary`], [`metrics`], [`baselines`]) and
//! synthesizes cheapest policies whose adversary belief on secret states
//! stays below a threshold ([`synthesis`]), using the solvers in [`optim`].

pub mod adversary;
pub mod baselines;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod linalg;
pub mod mdp;
pub mod metrics;
pub mod mobility;
pub mod optim;
pub mod synthesis;

pub use adversary::{ActionDistribution, Belief};
pub use baselines::{BaselineKind, Mechanism, Rollout};
pub use error::{Error, Result};
pub use mdp::{Distribution, MarkovChain, Mdp, OccupancyMeasure, Policy};
pub use metrics::{DistanceMatrix, PrivacySpec, PrivacyVerdict};
pub use mobility::{CloakRegion, ClusterParams, PoiCluster, TraceDataset};
pub use optim::{LinearProgram, LpSolution, LpStatus};
pub use synthesis::{Certificate, InvarianceVerdict, SynthesisMode, SynthesisOptions, SynthesisResult};
