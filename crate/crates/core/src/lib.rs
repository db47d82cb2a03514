#![no_std]
extern crate alloc;

pub mod dynamics;
pub mod model;
pub mod mpc;
pub mod qp;
pub mod signals;
pub mod sim;
pub mod topology;
