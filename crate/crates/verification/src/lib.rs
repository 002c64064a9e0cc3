//! Holds the `acceptance` test target, kept in its own package so that a
//! failing criterion does not stop the rest of the workspace tests.
