from crowdledger.neural.backend import BACKEND
from crowdledger.neural.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from crowdledger.neural.gradcheck import NonFiniteLossError, gradient_check
from crowdledger.neural.layers import (
    Conv1D,
    Dense,
    Dropout,
    Embedding,
    Flatten,
    Layer,
    LSTM,
    MaxPool1D,
    NeuralError,
    NoForwardCacheError,
    Parameter,
    Sequential,
    ShapeMismatchError,
    Sigmoid,
    Tanh,
    glorot_uniform,
    mse_loss,
)
from crowdledger.neural.optim import Adam

__all__ = [
    "Adam",
    "BACKEND",
    "CheckpointError",
    "Conv1D",
    "Dense",
    "Dropout",
    "Embedding",
    "Flatten",
    "LSTM",
    "Layer",
    "MaxPool1D",
    "NeuralError",
    "NoForwardCacheError",
    "NonFiniteLossError",
    "Parameter",
    "Sequential",
    "ShapeMismatchError",
    "Sigmoid",
    "Tanh",
    "glorot_uniform",
    "gradient_check",
    "load_checkpoint",
    "mse_loss",
    "save_checkpoint",
]
