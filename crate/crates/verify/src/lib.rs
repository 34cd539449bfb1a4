//! Holds the `acceptance` test target of the workspace. It is kept in its own
//! package so that it runs after the unit and integration tests of `rild` and
//! `rild-cli`. A failing acceptance run would otherwise stop them from running.
