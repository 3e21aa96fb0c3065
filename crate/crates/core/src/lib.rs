//! Continuous local flexibility market clearing with DC network checks.
//!
//! - [`grid`]: DC network model, PTDFs, headroom and transferable quantities.
//! - [`market`]: order book and continuous pay-as-bid clearing.
//! - [`io`]: file formats, configuration and batch replay.
//! - [`oracle`]: independent DC solve and exhaustive activation checks.
//! - [`api`]: JSON payloads of the HTTP service.

pub mod api;
pub mod grid;
pub mod io;
pub mod market;
pub mod oracle;
