"""
SleepStack - sleep stage classification from single-channel EEG
"""

__version__ = "0.1.0"
