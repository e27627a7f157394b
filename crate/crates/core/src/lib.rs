//! Embedding-space attribution for dual-encoder vision-language models.
//!
//! Conventional attribution explains a single scalar output. Here each
//! dimension of the image embedding gets its own attribution map, and a text
//! prompt fuses those maps by weighting them with its temperature-scaled
//! text embedding. Because the maps for one image do not depend on the
//! prompt, they are built once and reused for any number of prompts.

pub mod attribution;
pub mod data;
pub mod fusion;
pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod numeric;
pub mod render;
pub mod tape;
pub mod tensor;

pub use error::{Result, VlxError};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
