"""Semi-automatic cranial implant design workbench."""

__version__ = "0.1.0"
