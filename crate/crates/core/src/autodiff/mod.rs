//! Reverse-mode automatic differentiation over real and complex arrays.
//!
//! A [`Graph`] is a tape: every operation evaluates eagerly and appends a
//! node recording its inputs. [`Graph::backward`] walks the tape once in
//! reverse and accumulates adjoints. Graphs are rebuilt for every evaluation.
//!
//! Complex adjoints follow the convention `dL/dRe z + i dL/dIm z` for a real
//! loss `L`. Under it the adjoint of a linear map is its conjugate transpose,
//! so the adjoint of the unitary FFT is the inverse FFT, and `y = |z|^2`
//! back-propagates `2 * ybar * z`.

mod adam;
mod gradcheck;
mod graph;
mod layer;
mod ops;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{grad_check, GradCheck, GradCheckOptions};
pub use graph::{Graph, Var};
pub use ops::sigmoid;
pub use layer::{conv_layer_backward, conv_layer_forward};
pub use tensor::Tensor;
