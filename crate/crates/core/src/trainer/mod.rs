//! End-to-end training and SER evaluation.

pub mod eval;
pub mod step;
pub mod train;

pub use eval::{
    bpsk_ser_montecarlo, bpsk_ser_theoretical, evaluate_ser, q_function, sweep_snr, SweepRecord,
};
pub use step::{composite_loss, forward_backward, sample_training_batch, BatchOutcome, SymbolTriple};
pub use train::{train, Checkpoint, LogRecord, StepStats, TrainConfig, TrainLog, Trainer};
