//! Hardware-free BLE iBeacon discovery and dynamic broadcasting.
//!
//! * [`codec`]: bit-exact iBeacon advertising payloads.
//! * [`node`]: the dual-radio beacon node (duty-cycled scanner plus
//!   round-robin advertiser).
//! * [`registry`]: user profiles, entrance history, profile taxonomy, the
//!   wire API and on-disk store.
//! * [`simnet`]: deterministic radio and mobility simulator.
//! * [`analytics`]: usage aggregations over interaction logs.

pub mod analytics;
pub mod codec;
pub mod node;
pub mod registry;
pub mod simnet;

