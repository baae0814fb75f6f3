"""wavex: cross-frequency wave-field benchmarks, transfer diagnostics, and
amplitude-anchored generative enhancement.

The package covers the full desk-scale pipeline: synthetic benchmark
generators (a two-path simulator and a finite-difference frequency-domain
solver), exact amplitude/phase error decompositions, a phase-prior
surrogate, evaluation metrics with bootstrap intervals, a small spectral
neural operator, a conditional flow-matching enhancer, and the experiment
harness gluing them together.
"""

from .field import (ComplexField, Domain, PolarField, RegionMask,
                    TravelTimeSpec, decompose_regional_error, from_polar,
                    regional_error_bound, synth_from_travel_time, to_polar)
from .metrics import (BootstrapCI, amp_similarity, awpc, bootstrap_ci,
                      h1_error, phase_similarity, relative_similarity_curve)
from .dataio import Dataset, Split, make_split, read_dataset, write_dataset

__all__ = [
    "ComplexField", "Domain", "PolarField", "RegionMask", "TravelTimeSpec",
    "decompose_regional_error", "from_polar", "regional_error_bound",
    "synth_from_travel_time", "to_polar",
    "BootstrapCI", "amp_similarity", "awpc", "bootstrap_ci", "h1_error",
    "phase_similarity", "relative_similarity_curve",
    "Dataset", "Split", "make_split", "read_dataset", "write_dataset",
]

__version__ = "0.1.0"
