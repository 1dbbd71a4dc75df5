pub mod analytic;
pub mod simulate;
pub mod sweep;
pub mod verify;
