pub mod error;
pub mod factors;
pub mod imbalance;
pub mod market_data;
pub mod panel;
pub mod correlation;
pub mod synth;
pub mod pipeline;
