//! Shared fixtures for the criterion benches.

use lacelab_core::lattice::catalog_graph;
use lacelab_core::GraphSpec;

/// A catalog graph by name; panics on unknown names.
pub fn graph(name: &str) -> GraphSpec {
    catalog_graph(name).unwrap_or_else(|| panic!("no catalog graph named {name}"))
}
