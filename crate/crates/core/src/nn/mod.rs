//! The classifier: dense layers, dropout, softmax, SGD and model files.

mod io;
mod mlp;
mod optim;
mod softmax;

pub use io::{load_model, model_from_json, model_to_json, save_model, MODEL_FORMAT_VERSION};
pub use mlp::{ForwardMode, ForwardTrace, Gradients, MlpModel};
pub use optim::SgdMomentum;
pub use softmax::softmax;
pub(crate) use softmax::{log_softmax_at, softmax_backward_row};
