//! Shared oracles and generators for integration tests.

#![allow(dead_code)]

pub mod decision;
pub mod naive;
