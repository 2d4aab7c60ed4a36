//! Acceptance checks for `panostitch`, run with `cargo test -p panostitch-suite`.
//! Each check prints one `PASS`/`FAIL` line; see `tests/acceptance.rs`.
