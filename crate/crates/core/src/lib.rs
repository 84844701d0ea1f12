pub mod analysis;
pub mod cli;
pub mod exact;
pub mod lattice;
pub mod mc;
pub mod rational;
pub mod vbstate;
