//! Streaming transmitter/receiver over IQ sample files.

pub mod iq;
pub mod modem;

pub use iq::{read_iq_file, write_iq_file, IqStream, DEFAULT_SAMPLE_RATE};
pub use modem::{
    align_sequences, autocorrelation, dominant_period, measure_throughput, raw_bit_rate, rx_stream, symbol_at, tx_stream,
    window_count, windowed_ser, Alignment, Throughput,
};
