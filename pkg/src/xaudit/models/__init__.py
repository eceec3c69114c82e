from .forest import RandomForest, Tree, fit_random_forest, predict_forest
from .mlp import (
    ForwardTrace,
    LayerSpec,
    MlpModel,
    TrainConfig,
    forward,
    forward_trace,
    gradient_wrt_input,
    target_score,
    train_mlp,
)
from .serialize import load_model, save_model


def predict(model, x):
    """Model output for x: class probabilities for classifiers, values for regressors."""
    return model.predict(x)


__all__ = [
    "ForwardTrace",
    "LayerSpec",
    "MlpModel",
    "RandomForest",
    "TrainConfig",
    "Tree",
    "fit_random_forest",
    "forward",
    "forward_trace",
    "gradient_wrt_input",
    "load_model",
    "predict",
    "predict_forest",
    "save_model",
    "target_score",
    "train_mlp",
]
