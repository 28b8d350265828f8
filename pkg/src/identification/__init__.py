from .edmd import (
    FitReport,
    LiftedPredictor,
    SnapshotDataset,
    assemble,
    evaluate,
    evaluate_baseline,
    fit,
    predict,
    split_heldout,
)
from .lifting import HistoryBuffer, LiftingSpec, lift, lift_dataset, lift_trajectory, push
from .predictor_io import load_predictor, save_predictor

__all__ = [
    'FitReport', 'HistoryBuffer', 'LiftedPredictor', 'LiftingSpec', 'SnapshotDataset',
    'assemble', 'evaluate', 'evaluate_baseline', 'fit', 'lift', 'lift_dataset',
    'lift_trajectory', 'load_predictor', 'predict', 'push', 'save_predictor',
    'split_heldout',
]
