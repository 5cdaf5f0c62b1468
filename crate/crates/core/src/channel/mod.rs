//! Channel models: the differentiable training channel and the streaming
//! channel with clock drift.

pub mod frame;
pub mod impair;
pub mod rng;
pub mod stream;

pub use frame::{assemble_training_frame, TrainingFrame};
pub use impair::{
    add_awgn, attenuate, channel_apply, channel_backward, channel_pass, eb_to_es, es_to_eb,
    extract_window, noise_variance, phase_rotate, window_len, window_start, ChannelDraws,
    ChannelParams, ImpairmentOrder, DEFAULT_A_MIN, DEFAULT_TRAIN_ES_N0_DB,
};
pub use rng::RngStream;
pub use stream::{apply_slips, slip_source_index, stream_channel, StreamChannelParams};
