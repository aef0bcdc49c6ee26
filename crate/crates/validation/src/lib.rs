//! Holds the `acceptance` test target, which checks the numerical and
//! statistical guarantees of `entropy-core` end to end. Run it with
//! `cargo test -p entropy-validation --test acceptance`.
