//! HTTP front end for the grounding engine: per-client sessions holding an
//! application world, grounding with optional execution, and the learner
//! dialogue. Every response body carries `schema_version`.

pub mod routes;
pub mod state;

pub use routes::{router, SCHEMA_VERSION};
pub use state::{AppState, Session};
