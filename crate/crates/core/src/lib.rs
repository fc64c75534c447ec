//! Trust dynamics in credit networks.
//!
//! Agents borrow from each other, loans mature, and from time to time an
//! agent's balance sheet is disclosed to its lenders, who then play a
//! foreclosure coordination game. When the cost of miscoordination is high
//! enough the lenders pull out and the agent defaults, which strips links from
//! its counterparties and can tip the whole network from a dense, trusting
//! state into a sparse one.
//!
//! The crate offers three views of the same model:
//!
//! * [`dynamics`]: exact event-driven simulation of a finite network,
//! * [`master_eq`]: the stationary joint law of one agent's liabilities and
//!   assets, with default rates solved self-consistently,
//! * [`mean_field`]: the one-dimensional fixed-point equation for the default
//!   rate and the phase diagram it implies.
//!
//! [`game`] holds the foreclosure rule and its equilibrium checks, and
//! [`network`] the multigraph the simulation runs on.

pub mod dynamics;
pub mod game;
pub mod master_eq;
pub mod mean_field;
pub mod network;
pub mod params;

pub use network::{BalanceSheet, CreditNetwork, Event, LinkId};
pub use params::{Params, ParamsError};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/game.md")]
    mod game {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/master-equation.md")]
    mod master_equation {}
    #[doc = include_str!("../../../book/src/mean-field.md")]
    mod mean_field {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/limitations.md")]
    mod limitations {}
}
