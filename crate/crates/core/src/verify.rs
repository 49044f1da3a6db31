//! Verification suites (placeholder).
