//! Exact computation of dynamic equilibria (Nash flows over time) in fluid
//! queuing networks.
//!
//! The engine integrates the equilibrium phase by phase: in each phase the
//! label and flow derivatives are a normalized thin flow with resetting
//! ([`ntfr`]), labels and queues evolve linearly, and the phase ends when an
//! arc becomes active or a queue empties ([`engine`]). Around it sit the
//! steady-state linear programs ([`steady`]), the potential function and
//! pseudopolynomial bounds ([`potential`]), the gadget generators of
//! [`gadgets`], and the JSON/CSV report layer ([`report`]).

pub mod cli;
pub mod dynamics;
pub mod engine;
pub mod gadgets;
pub mod instance;
pub mod maxflow;
pub mod ntfr;
pub mod potential;
pub mod rat;
pub mod report;
pub mod simplex;
pub mod steady;
