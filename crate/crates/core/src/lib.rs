//! Target assignment and pathfinding: agents pick one goal each from a
//! private candidate list and must reach it without collisions. The solver
//! alternates between multi-agent pathfinding and local reassignment of
//! the agents that delay the others most.

pub mod feedback;
pub mod grid;
pub mod instance;
pub mod mapf;
pub mod matching;
pub mod reassign;
pub mod refine;
pub mod stats;
pub mod time;
