"""Spatial-spectral precondition boosting for two-class multichannel trials."""
from .core import (AdditiveModel, Band, BoostConfig, ChannelSet, GLOBAL_BAND, Precondition,
                   SessionDataset, TrialMatrix, validate_dataset)
from .boost import predict, predict_dataset, train_session
from .precondition import build_universe, generate_band_universe
from .synthgen import PlantSpec, generate_session

__version__ = "0.1.0"
