//! Multiscale pharmacokinetic/pharmacodynamic simulation of a
//! hypoxia-activated prodrug.

pub mod params;
pub mod odeint;
pub mod pkpd0d;
pub mod surrogate;
pub mod sensitivity;
pub mod tissue;
pub mod backend;
