#![allow(dead_code)]

pub mod estimator;
pub mod gradcheck;
pub mod infra;
pub mod steps;
