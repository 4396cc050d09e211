//! Transient simulation and behavioral modeling of superconducting
//! optoelectronic synapse circuits.

pub mod circuit;
pub mod synapse;
pub mod engine;
pub mod netlist;
pub mod par;
pub mod presets;
pub mod plasticity;
pub mod experiments;
