pub mod association;
pub mod attacks;
pub mod frameworks;
pub mod harness;
pub mod model;
pub mod webdoc;
