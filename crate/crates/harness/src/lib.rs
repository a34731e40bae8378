//! Simulation harness for the stardkg stack: scenario runners, JSON reports, the
//! plaintext leak scanner and the acceptance suite.

pub mod acceptance;
pub mod report;
pub mod scan;
pub mod scenario;
pub mod setup;
