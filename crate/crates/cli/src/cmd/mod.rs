pub mod edm;
pub mod emg;
pub mod pca;
pub mod reward;
pub mod synth;

use serde::Serialize;

use crate::config::RunConfig;

/// JSON summary written by every command; the effective config is echoed back.
#[derive(Serialize)]
pub struct Summary<'a, T: Serialize> {
    pub command: &'static str,
    #[serde(flatten)]
    pub result: T,
    pub config: &'a RunConfig,
}
