"""
ifpt2d: inverse first-passage-time boundaries for the two-compartment
Ornstein-Uhlenbeck model, with exact forward simulation to check them.
"""
from ifpt2d.models import BoundaryEstimate, DriftSchedule, FptSampleSet, ModelParams
from ifpt2d.solver.inverse import solve
from ifpt2d.transform.drift import simulate_transformed, to_drift

__all__ = [
    "BoundaryEstimate",
    "DriftSchedule",
    "FptSampleSet",
    "ModelParams",
    "simulate_transformed",
    "solve",
    "to_drift",
]
