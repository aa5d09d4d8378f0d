//! Pipeline driver, graph export and HTTP query service for conditor.

pub mod build;
pub mod graph;
pub mod pipeline;
pub mod query;
pub mod server;

pub use build::{cmd_build, BuildReport, ExitStatus};
pub use graph::{graph_export, GraphEdge, GraphExport, GraphNode};
pub use pipeline::{compile, Compiled};
pub use query::{open_store, QueryService, SearchHit};
