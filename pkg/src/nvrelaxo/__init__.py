"""Relaxometry of shallow NV centers near spin-labelled surface proteins.

Forward models (surface noise, label scenes, ensemble T1 curves), decay-curve
fitting, and Monte Carlo inversions back to surface and protein densities.
"""

__version__ = "0.1.0"
