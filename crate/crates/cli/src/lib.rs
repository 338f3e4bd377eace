//! Pipeline commands (`extract`, `train`, `render`, `bench`) and the HTTP
//! render service behind the `tvinr` binary.

// `!(a < b)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod scene;
pub mod service;
