"""Configuration, error and manifest models for blowup-lab."""
