"""Verification workbench for paired-lines unitaries and the NW/majority distinguisher."""

__version__ = "0.1.0"
