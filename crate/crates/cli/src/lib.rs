//! File formats, experiment specs and the runner behind the `scoregen`
//! command.

pub mod csv_io;
pub mod manifest;
pub mod pipeline;
pub mod presets;
pub mod spec;
