pub mod boost;
pub mod cascade;
pub mod data;
pub mod error;
pub mod harness;
pub mod linear;
pub mod mpm;
pub mod simplex_qp;
pub mod stump;
