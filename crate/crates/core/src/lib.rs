//! Quality-diversity search for the Traveling Thief Problem.
//!
//! A MAP-Elites archive indexed by tour length and packing profit is filled
//! by combining one tour operator (EAX-1AB crossover or a random 2-opt move)
//! with one packing operator (the exact packing-while-travelling DP or a
//! (1+1) EA). A (μ+1) EA over the same operators serves as the baseline.

pub mod archive;
pub mod harness;
pub mod instance;
pub mod kp_ops;
pub mod oracle;
pub mod render;
pub mod solvers;
pub mod tsp_ops;
pub mod ttp;

pub use archive::{GridSpec, InsertOutcome, MapGrid, MapSnapshot};
pub use instance::{EdgeWeightType, Instance, InstanceBuilder, InstanceError, Item};
pub use ttp::{PackingList, Solution, Tour, TtpError};
