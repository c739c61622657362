"""
Core functionality for the SleepStack toolkit
"""
