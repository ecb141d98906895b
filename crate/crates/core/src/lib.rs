// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accumulation;
pub mod clustering;
pub mod geometry;
pub mod ground;
pub mod mapping;
pub mod odometry;
pub mod spatial;
pub mod vision;

#[cfg(test)]
mod test_scenes;
