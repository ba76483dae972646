pub mod arith;
pub mod group;
pub mod harness;
pub mod polycyclic;
pub mod protocol;
pub mod prover;
pub mod sampling;
