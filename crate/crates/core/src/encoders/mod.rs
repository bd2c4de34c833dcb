//! LSTM encoders: the cell, sequence runner, and the model variants with
//! their classification heads.

mod io;
mod lstm;
mod model;

pub use io::{load_model, model_from_bytes, model_to_bytes, save_model};
pub use lstm::{
    lstm_cell, lstm_cell_backward, run_lstm, run_lstm_backward, CellCache, Direction, LstmGrads,
    LstmParams, LstmState, LstmTrace,
};
pub use model::{
    bowv_features, init_model, DropoutMasks, EncodedPair, ForwardPass, HeadGrads, HeadMask,
    HeadParams, Model, ModelGrads, ModelInit, Variant, ALL_VARIANTS,
};
