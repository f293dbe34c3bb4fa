//! Post-processing: the dense reference solver, line profiles and
//! real-space Green function analysis.

pub mod green_field;
pub mod oracle;
pub mod profile;
