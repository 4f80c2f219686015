//! Finite-dimensional laboratory for factoring the identity through
//! operators on truncated sequence spaces with subsymmetric bases.
//!
//! The pipeline: build a block basis annihilated against past and future
//! data (`annihilate`, `blocks`), pick the branch of the operator that
//! retains a large diagonal (`factor::select_h`), assemble the factorization
//! Id = N . H . M, and verify every quantitative bound with certified
//! operator-norm brackets (`opnorm`).

pub mod annihilate;
pub mod blocks;
pub mod exact;
pub mod factor;
pub mod harness;
pub mod opnorm;
pub mod oracle;
pub mod seqspace;
