//! File formats, wall-clock timing and the `sparsegap` command line on top
//! of `sparsegap-core`.

pub mod cli;
pub mod io;

use std::time::Instant;

use sparsegap_core::experiments::Clock;

/// Seconds since construction.
#[derive(Debug, Clone, Copy)]
pub struct WallClock(Instant);

impl WallClock {
    pub fn new() -> Self {
        WallClock(Instant::now())
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn now_s(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}
