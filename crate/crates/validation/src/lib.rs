//! Holds the acceptance run in `tests/acceptance.rs`. Kept apart from the
//! library so a red criterion does not stop the other test targets under
//! `cargo test --workspace`.
