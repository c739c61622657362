"""
Command modules for the SleepStack CLI
"""
