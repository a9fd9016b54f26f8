from .base import Record, frozen_array, json_safe
from .reports import (BehaviorClass, CharacteristicRoot, ConvergenceSample,
                      ConvergenceStudy, ConvergenceSummary, DecayFit,
                      DecayProfile, FlockingCertificate, ForceFieldBounds,
                      InequalityCheck, InfluenceReport, InfluenceViolation,
                      RootSearchResult, StabilityReport, SweepRow,
                      TailIntegral)

__all__ = [
    "json_safe",
    "Record",
    "frozen_array",
    "BehaviorClass",
    "CharacteristicRoot",
    "ConvergenceSample",
    "ConvergenceStudy",
    "ConvergenceSummary",
    "DecayFit",
    "DecayProfile",
    "FlockingCertificate",
    "ForceFieldBounds",
    "InequalityCheck",
    "InfluenceReport",
    "InfluenceViolation",
    "RootSearchResult",
    "StabilityReport",
    "SweepRow",
    "TailIntegral",
]
