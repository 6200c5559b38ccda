//! Acceptance suite for `robust-cooling`. The checks live in `tests/acceptance.rs` and run with
//! `cargo test -p robust-cooling-validation --test acceptance`.
