"""Joint transmit-power and downlink scheduling for Earth-observation satellites."""

__version__ = "0.1.0"
