use std::sync::Arc;

use super::VectorFunction;
use crate::data::PromptSet;
use crate::error::{Result, VlxError};
use crate::model::DualEncoderModel;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// The scalar an attribution explains.
#[derive(Clone, Debug, PartialEq)]
pub enum ScalarTarget {
    /// Component `i` of the normalized image embedding.
    EmbeddingDim(usize),
    /// `τ · (I_p · t)` for a text embedding `t`.
    SimilarityLogit(Vec<f64>),
    /// Softmax probability of class `class` under prompt-ensemble logits.
    ClassProbability {
        class: usize,
        prompt_sets: Vec<PromptSet>,
    },
}

impl ScalarTarget {
    pub fn describe(&self) -> String {
        match self {
            ScalarTarget::EmbeddingDim(i) => format!("embedding_dim:{i}"),
            ScalarTarget::SimilarityLogit(_) => "similarity_logit".to_string(),
            ScalarTarget::ClassProbability { class, prompt_sets } => {
                format!("class_probability:{}", prompt_sets[*class].label)
            }
        }
    }
}

/// The normalized image embedding `I_p` as a function of the pixels.
pub struct VisionEmbedding<'m> {
    model: &'m DualEncoderModel,
}

impl<'m> VisionEmbedding<'m> {
    pub fn new(model: &'m DualEncoderModel) -> Self {
        Self { model }
    }
}

impl VectorFunction for VisionEmbedding<'_> {
    fn output_dim(&self) -> usize {
        self.model.embed_dim()
    }

    fn forward<'t>(&'t self, tape: &mut Tape<'t>, input: Var) -> Result<Var> {
        let vars = self.model.bind(tape, false);
        let emb = self.model.vision_graph(tape, &vars, input, 1)?;
        tape.reshape(emb, vec![self.model.embed_dim()])
    }
}

enum Head {
    Dim(Arc<[usize]>),
    /// `[M, 1]` column, already scaled by τ.
    Logit(Tensor),
    /// `[M, C]` class embeddings scaled by τ, and the class to read.
    Probability(Tensor, Arc<[usize]>),
}

/// A [`ScalarTarget`] bound to a model, as a one-output function.
pub struct TargetFunction<'m> {
    model: &'m DualEncoderModel,
    head: Head,
}

impl<'m> TargetFunction<'m> {
    pub fn new(model: &'m DualEncoderModel, target: ScalarTarget) -> Result<Self> {
        let m = model.embed_dim();
        let tau = model.tau();
        let head = match target {
            ScalarTarget::EmbeddingDim(i) => {
                if i >= m {
                    return Err(VlxError::Parameter(format!(
                        "embedding dimension {i} out of range for M = {m}"
                    )));
                }
                Head::Dim(vec![i].into())
            }
            ScalarTarget::SimilarityLogit(t) => {
                if t.len() != m {
                    return Err(VlxError::Dimension {
                        op: "similarity target",
                        lhs: vec![m],
                        rhs: vec![t.len()],
                    });
                }
                let scaled = t.iter().map(|v| tau * v).collect();
                Head::Logit(Tensor::new(vec![m, 1], scaled)?)
            }
            ScalarTarget::ClassProbability { class, prompt_sets } => {
                if class >= prompt_sets.len() {
                    return Err(VlxError::Parameter(format!(
                        "class {class} out of range for {} classes",
                        prompt_sets.len()
                    )));
                }
                let embs = model.class_embeddings(&prompt_sets)?;
                let c = embs.len();
                let mut data = vec![0.0; m * c];
                for (j, e) in embs.iter().enumerate() {
                    for (i, v) in e.iter().enumerate() {
                        data[i * c + j] = tau * v;
                    }
                }
                Head::Probability(Tensor::new(vec![m, c], data)?, vec![class].into())
            }
        };
        Ok(Self { model, head })
    }
}

impl VectorFunction for TargetFunction<'_> {
    fn output_dim(&self) -> usize {
        1
    }

    fn forward<'t>(&'t self, tape: &mut Tape<'t>, input: Var) -> Result<Var> {
        let vars = self.model.bind(tape, false);
        let emb = self.model.vision_graph(tape, &vars, input, 1)?;
        match &self.head {
            Head::Dim(index) => tape.gather(emb, index.clone(), vec![1]),
            Head::Logit(t) => {
                let t = tape.constant_ref(t);
                let l = tape.matmul(emb, t)?;
                tape.reshape(l, vec![1])
            }
            Head::Probability(classes, index) => {
                let w = tape.constant_ref(classes);
                let logits = tape.matmul(emb, w)?;
                let probs = tape.softmax_rows(logits)?;
                tape.gather(probs, index.clone(), vec![1])
            }
        }
    }
}
