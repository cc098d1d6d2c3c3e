//! Feasible descent methods on box-constrained smooth convex problems:
//! coordinate and projected-gradient solvers, certification of the
//! descent-method inequalities on recorded traces, and linear-rate constants.

pub mod data;
pub mod geometry;
pub mod linalg;
pub mod problems;
pub mod rates;
pub mod solvers;
pub mod verify;
