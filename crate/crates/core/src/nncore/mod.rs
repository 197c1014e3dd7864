//! Dense feed-forward networks with exact backprop, BCE loss, Adam and LoRA adapters.
//!
//! All arithmetic is `f64`. Weight matrices are stored out × in, row-major.

mod adam;
mod backprop;
mod batch;
mod layer;
mod network;
mod weights;

pub use adam::AdamState;
pub use backprop::{
    accuracy_of, backward, backward_from_logits, evaluate, loss_bce, loss_bce_grad, mean_bce, mean_loss, predict,
    Gradients,
};
pub use batch::Batch;
pub use layer::{lora_merge, sigmoid, Activation, DenseLayer, LoraAdapter};
pub use network::{ForwardTrace, Network};
pub use weights::{LayerShape, LayerSlots, Layout, WeightVector};
