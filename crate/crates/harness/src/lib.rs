//! Scenario runner for the flow-stability toolkit (placeholder).
