"""Sequential random search for hyperparameter tuning."""

__version__ = "0.1.0"
