//! Best-response-with-lookahead (BRL) price dynamics for Fisher markets
//! with CES buyers in the weak-gross-substitutes regime (`0 < ρ < 1`).
//!
//! Each good is sold by its own seller. A seller's best response is the
//! price that exactly clears its good given the other prices; a BRL seller
//! best-responds to the prices it *predicts* from a finite mental model of
//! everyone else (level-k reasoning is the uniform special case). All such
//! updates are monotone and strictly sub-homogeneous on an invariant price
//! box, hence contractions in the Thompson metric, so synchronous and
//! asynchronous dynamics converge linearly to the unique equilibrium.
//!
//! Modules:
//! - [`market`]: market instances, demand, spending, utilities, the price box
//! - [`best_response`]: exact seller best responses
//! - [`beliefs`]: mental-model trees and BRL updates
//! - [`dynamics`]: schedules, profile sources, trajectories
//! - [`analysis`]: Thompson metric, equilibrium oracles, contraction and
//!   decay estimates
//! - [`generate`]: seeded random markets
//! - [`cli`]: config-driven experiment commands behind the `fisher-brl` binary
//!
//! ```
//! use fisher_brl::{best_response::best_response, Market, PriceVector};
//!
//! let market = Market::new(vec![1.0], vec![vec![1.0, 1.0]], 0.5).unwrap();
//! let p = PriceVector::new(vec![1.0, 1.0]).unwrap();
//! let r = best_response(&market, &p, 0).unwrap();
//! assert!((r.price - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-12);
//! ```

pub mod analysis;
pub mod beliefs;
pub mod best_response;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod generate;
pub mod market;

pub use analysis::{thompson, EquilibriumResult};
pub use beliefs::{BeliefProfile, MentalModel};
pub use error::{Error, Result};
pub use market::{Allocation, Market, PriceBox, PriceVector};
