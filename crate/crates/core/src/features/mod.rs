pub mod general;
pub mod sequence;
