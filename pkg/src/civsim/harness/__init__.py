"""Batch front end: scenario runs, sweeps, attack campaigns, calibration fitting."""
