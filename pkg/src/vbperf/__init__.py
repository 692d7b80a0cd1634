"""Season-performance prediction from wearable, survey and box-score data."""

__version__ = "0.1.0"
