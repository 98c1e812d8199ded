//! End-to-end latency constrained design space exploration for systems of
//! communicating PSMs (FSM + multi-cycle computation blocks).

pub mod baseline;
pub mod bench;
pub mod chromosome;
pub mod error;
pub mod eval;
pub mod fdss;
pub mod handshake;
pub mod latency;
pub mod lcso;
pub mod model;
pub mod oracle;
pub mod pareto;
pub mod pathfind;
pub mod pipeline;

pub use chromosome::{Chromosome, FrequencyAssignment};
pub use error::{DseError, Result};
pub use model::SystemModel;

/// Runs `f` on a dedicated rayon pool of `threads` workers (0 means the
/// global pool).
pub(crate) fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    if threads == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(e) => {
            log::warn!("could not build a {threads}-thread pool ({e}); using the global pool");
            f()
        }
    }
}
