//! Simulator and scheduling library for frame delivery in a D2D-aided fog
//! radio access network: rate-aware instantly-decodable network coding at
//! the eRRHs, cooperative D2D relaying between users, power allocation, and
//! the baseline schemes the proposed schedulers are measured against.

pub mod channel;
pub mod config;
pub mod experiment;
pub mod graphs;
pub mod model;
pub mod nc;
pub mod power;
pub mod schedulers;
pub mod sets;
pub mod sim;
