//! Analysis toolkit for neuromechanical imitation studies.
//!
//! * [`trial_data`]: trial-aligned multichannel series and CSV interchange.
//! * [`filter`] and [`emg`]: Butterworth biquads and the EMG envelope chain.
//! * [`reward`]: imitation reward terms, spectral power fraction, seed sweeps.
//! * [`edm`]: delay embeddings and simplex-projection forecasting.
//! * [`pca`]: principal-component compression of layer activations.
//! * [`arm`]: a seeded two-link arm generating coupled kinematics/activation/EMG.

pub mod arm;
pub mod edm;
pub mod emg;
pub mod filter;
pub mod pca;
pub mod reward;
pub mod stats;
pub mod trial_data;

pub use trial_data::{ChannelKind, ChannelSpec, CsvFormat, TrialSet};
