pub mod base;
pub mod beacon;
pub mod equivocation;
pub mod linos;
pub mod oracle;
pub mod proofs;
pub mod registration;
pub mod tamper;
