//! Executable model of the FlexRay static segment.
//!
//! * [`stream`]: finite prefixes of timed streams and their operators.
//! * [`protocol`]: messages, frames and schedule configurations.
//! * [`engine`]: scheduler, bus interface, cable and the composed
//!   architecture, evaluated tick by tick.
//! * [`monitor`]: correctness predicates evaluated over finished traces.
//! * [`refinement`]: seeded and exhaustive campaigns that check the
//!   requirement guarantees against simulated runs.
//! * [`cli`]: the `flexray-sim` command line.

pub mod cli;
pub mod engine;
pub mod monitor;
pub mod protocol;
pub mod refinement;
pub mod stream;
pub mod verdict;

pub use engine::{arch_tick, simulate, simulate_with, CollisionPolicy, TickRecord, Trace};
pub use protocol::{ClusterConfig, Frame, Message, NodeConfig};
pub use stream::{Interval, TimeIndex, TimedStreamPrefix};
pub use verdict::{Verdict, Violation};
