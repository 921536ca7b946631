//! Modeling and predicting VR users' neck muscle contraction level (MCL)
//! from head kinematics.
//!
//! The crate covers the full desk-scale protocol: a synthetic biophysical
//! oracle generates paired motion / MCL / raw-EMG data; an EMG pipeline
//! recovers MCL from raw signals; MCLNet estimates MCL from completed
//! trajectories; TrajectoryNet forecasts movement velocity profiles from
//! target poses alone, enabling pre-movement cumulative-MCL prediction
//! and discomfort-ordered scan-path generation.

pub mod config;
pub mod dsp;
pub mod emg;
pub mod error;
pub mod io;
pub mod kinematics;
pub mod mclnet;
pub mod metrics;
pub mod nn;
pub mod oracle;
pub mod scanpath;
pub mod trajnet;
pub mod workflow;

pub use error::{Error, Result};
