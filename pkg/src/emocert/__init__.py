"""emocert: train, evaluate and self-certify compact facial-emotion CNNs."""

__version__ = "0.1.0"

from emocert.estimator import EmotionNetClassifier
from emocert.rng import Rng, derive_seed

__all__ = ["EmotionNetClassifier", "Rng", "derive_seed", "__version__"]
