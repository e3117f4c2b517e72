//! Acceptance criteria for the solver library live in `tests/acceptance.rs`.
