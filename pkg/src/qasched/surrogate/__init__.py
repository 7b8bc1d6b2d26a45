"""LSTM surrogate that maps coupling feature vectors to schedule curves."""

from .dataset import Dataset, DatasetRecord, read_jsonl, write_jsonl
from .lstm import (LayerWeights, LstmModel, backward, forward, forward_batch,
                   init_model, load_model, lstm_cell_step, save_model)
from .train import (EpochStats, TrainConfig, history_to_csv, loss_mse,
                    mean_mre, metric_mre, predict, split_indices, train)

__all__ = [
    "Dataset", "DatasetRecord", "read_jsonl", "write_jsonl",
    "LayerWeights", "LstmModel", "backward", "forward", "forward_batch",
    "init_model", "load_model", "lstm_cell_step", "save_model",
    "EpochStats", "TrainConfig", "history_to_csv", "loss_mse", "mean_mre",
    "metric_mre", "predict", "split_indices", "train",
]
