"""Effective models of high-contrast composite elastic plates.

Computes homogenized membrane/bending tensors, inclusion (Bloch) spectra,
the frequency-dispersion (Zhikov) function and band-gap limit spectra, and
coupled macro-micro resolvent/evolution solutions, validated against a
direct fine-scale 3D simulation.
"""

__version__ = "0.1.0"
