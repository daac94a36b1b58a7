"""
Производные выводы: кривые обобщения, длины отсечения, вердикты о механизме.
"""

from .generalization import (
    CutoffFlag,
    GeneralizationCurve,
    curve_from_predictions,
    cutoff_length,
    generalization_curve,
)
from .mechanism import (
    MechanismLabel,
    MechanismVerdict,
    Phase,
    SignatureMatch,
    classify_mechanism,
    phase_detect,
    signature_match,
)

__all__ = [
    "CutoffFlag",
    "GeneralizationCurve",
    "curve_from_predictions",
    "cutoff_length",
    "generalization_curve",
    "MechanismLabel",
    "MechanismVerdict",
    "Phase",
    "SignatureMatch",
    "classify_mechanism",
    "phase_detect",
    "signature_match",
]
