"""Sliding-window gradient boosting for concept-drifting batch streams."""
from .errors import DataError, ModelFileError
from .gbdt import BACKEND, GbdtModel, TrainParams, continue_training, train
from .pipeline import (
    LrSchedule,
    Mode,
    RetrainPolicy,
    WindowConfig,
    init_state,
    next_lr,
    process_batch,
)

__version__ = "0.1.0"
