"""Periodic water waves with vorticity: streams, dispersion, branches and spectra."""

__version__ = "0.1.0"
