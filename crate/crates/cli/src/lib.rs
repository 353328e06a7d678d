//! The `fieldlog` command line tool and HTTP service.

pub mod app;
pub mod cli;
pub mod config;
pub mod error;
pub mod http;
pub mod ops;
