//! Coded caching delivery over a degraded Gaussian broadcast channel.
//!
//! The crate builds centralized and decentralized cache placements, forms
//! XOR-coded multicast messages grouped by each set's weakest receiver, and
//! computes the delivery time when those groups are served one at a time
//! (orthogonal) or all at once by superposition coding (concurrent). A
//! seeded Monte Carlo layer compares the schemes over Rayleigh fading.
//!
//! ```
//! use codedcast::{
//!     delivery::transmission_time, model::{ChannelState, PlacementMode, Scheme, SystemParams},
//! };
//! use num_rational::Ratio;
//!
//! let params = SystemParams::new(4, 4, Ratio::from_integer(2)).unwrap();
//! let channel = ChannelState::new(vec![1.0, 3.0, 5.0, 7.0]).unwrap();
//! let orth = transmission_time(&params, PlacementMode::Centralized, Scheme::Orthogonal, &channel).unwrap();
//! let conc = transmission_time(&params, PlacementMode::Centralized, Scheme::Concurrent, &channel).unwrap();
//! assert!((orth - 7.0 / 12.0).abs() < 1e-12);
//! assert!(conc < orth);
//! ```

pub mod delivery;
pub mod error;
pub mod experiments;
pub mod gbc;
pub mod model;
pub mod placement;
pub mod solver;

pub use error::{Error, Result};
