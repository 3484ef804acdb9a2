//! Command-line support and the HTTP inference service.

pub mod service;
