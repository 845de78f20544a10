//! Feature-generator networks, their losses, and adversarial training.

mod adam;
pub mod eve;
pub mod inputs;
pub mod loss;
mod mlp;
pub mod train;

pub use adam::AdamState;
pub use eve::{eve_features, train_eve, train_eve_on, CrossMultPhase, EveConfig, EveOutcome, FeatureScheme, NeuralScheme};
pub use inputs::{adversary_inputs, alice_inputs, bob_inputs, generator_input, AdversaryInput};
pub use loss::{
    adversary_loss, corr_coef, eve_loss, generator_loss, mse, mse_adversarial_loss, mse_adversary_loss, AdversaryLoss,
    FeatureBatch, GeneratorLoss,
};
pub use mlp::{Activation, ForwardCache, Gradients, Layer, LayerGrad, Mlp};
pub use train::{
    evaluate, feature_values, pre_activation_values, train_adversarial, AdversarialTrainer, Correlations, EpochLog,
    EvalRecord, FeatureNets, LossKind, TrainBatch, TrainConfig, TrainOutcome,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NeuralError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("forward cache does not belong to the current parameters")]
    StaleCache,
    #[error("bad batch: {0}")]
    Batch(String),
    #[error("zero variance in correlation")]
    ZeroVariance,
    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("data error: {0}")]
    Data(String),
}

pub type Result<T> = std::result::Result<T, NeuralError>;
