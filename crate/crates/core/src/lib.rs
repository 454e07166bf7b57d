//! Kernel entity salience model.
//!
//! Entities are embedded by combining a learned entity vector with a CNN
//! encoding of their description, then compared against the mentions and
//! words of a document through a bank of RBF kernels. The pooled kernel
//! scores drive two tasks:
//!
//! * entity salience: a linear layer over the kernel scores, trained with a
//!   pairwise hinge loss ([`salience`]);
//! * ad hoc search: log-normalised kernel scores of query entities become
//!   ranking features for a pairwise linear ranker ([`ranking`]).
//!
//! The crate is `no_std` (it needs `alloc`). File formats, threading and the
//! command-line tools live in the `kesm` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod baselines;
pub mod corpus;
mod error;
pub mod eval;
pub mod exec;
pub(crate) mod math;
pub mod model;
pub mod optim;
pub mod ranking;
pub mod salience;
pub mod synthetic;
pub mod vocab;

pub use error::{Error, Result};

pub use corpus::{DescriptionStore, Document, Mention, RawDescription, RawDocument, SaliencePair};
pub use exec::{Executor, Sequential};
pub use model::{KernelBank, KernelScores, ModelParams};
pub use vocab::Vocabulary;
