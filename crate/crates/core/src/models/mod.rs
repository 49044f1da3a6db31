//! Concrete measures from boundary-driven and ring particle systems.

pub mod harmonic;
pub mod queue;
pub mod ring;
pub mod tasep;
pub mod two_lines;
