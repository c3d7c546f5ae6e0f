from .boost import BoostConfig, Ensemble, train, predict
from .cir import CirConfig
from .data import Dataset, load_csv
from .loss import LossSpec, LossKind

__version__ = "0.1.0"
