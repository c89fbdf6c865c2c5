"""Simulator for a reprogrammable six-mode linear-optical processor.

Subpackages and modules:

* ``lpu.mesh``: triangular MZI mesh, decomposition and Haar sampling
* ``lpu.fock``: multi-photon transition probabilities via permanents
* ``lpu.chip``: virtual hardware, calibration and photon-counting runs
* ``lpu.protocols``: gates, boson sampling, ZTL, Bayesian tests, CHMs
* ``lpu.tomography``: process tomography
* ``lpu.cli``: the ``lpu`` command-line runner
"""

__version__ = "0.1.0"
