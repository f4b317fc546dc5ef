// `!(x <= tol)` is used on purpose throughout so that NaN fails checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod catalog;
pub mod cli;
pub mod flow;
pub mod geometry;
pub mod hermitian;
pub mod identities;
pub mod integrator;
pub mod scenario_file;
pub mod tensor;
pub mod trajectory_io;
