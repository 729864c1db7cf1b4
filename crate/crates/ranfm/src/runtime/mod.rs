//! Runtime surface: byte-exact checkpointing, sliding-window streaming
//! inference, the synthetic telemetry simulator, and a resource benchmark.

pub mod bench;
pub mod checkpoint;
pub mod simulate;
pub mod stream;

pub use bench::{bench, bench_csv, BenchRow};
pub use checkpoint::{
    checkpoint_bytes, load_checkpoint, parse_checkpoint, save_checkpoint, CheckpointConfig, MAGIC,
    VERSION,
};
pub use simulate::{simulate_telemetry, Scenario, ScenarioSpec, DEFAULT_PERIOD_MS};
pub use stream::{infer_window, stream_infer, StreamRecord, StreamState};
