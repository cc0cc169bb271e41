//! Implicit acoustic echo cancellation (iAEC) for keyword spotting under
//! device playback.
//!
//! The crate covers the whole experimental pipeline: signal primitives
//! ([`dsp`]), image-source room simulation ([`roomsim`]), SIR-controlled
//! mixing and on-the-fly triplet augmentation ([`mixer`]), classical echo
//! cancellers ([`aec_classic`]), the reference-fusion TCN classifier with
//! hand-written backpropagation ([`nnet`]), the optimisation loop
//! ([`train`]) and metrics ([`eval`]). [`fixtures`] renders small synthetic
//! corpora so everything can run without the full speech corpora.

pub mod aec_classic;
pub mod dsp;
pub mod eval;
pub mod fixtures;
pub mod mixer;
pub mod nnet;
pub mod roomsim;
pub mod seed;
pub mod train;
