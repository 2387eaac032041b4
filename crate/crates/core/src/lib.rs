pub mod boundary;
pub mod frenet;
pub mod geometry;
pub mod governor;
pub mod obstacles;
pub mod optimizer;
pub mod pipeline;
