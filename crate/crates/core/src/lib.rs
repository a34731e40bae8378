//! Star-access distributed key generation with non-exportable key shares.

pub mod algebra;
pub mod codec;
pub mod fischlin;
pub mod keybox;
pub mod oracle;
pub mod sdkg;
pub mod sigma;
pub mod transport;
pub mod usv;
