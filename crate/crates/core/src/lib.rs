//! Prompt batching by clique functions, itemized dispatch, and joint
//! efficiency / faithfulness scoring of batching methods.

pub mod backend;
pub mod batch;
pub mod clique;
pub mod data;
pub mod eval;
pub mod experiment;
pub mod text;
pub mod tradeoff;
