"""Signal and noise models for superheterodyne Rydberg atomic receivers."""

__version__ = "0.1.0"
