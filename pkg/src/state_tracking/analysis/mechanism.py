"""
Вердикты о механизме: AA / PAA / Neither, сравнение сигнатур, фазы обучения.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np

from ..algorithms.registers import Algorithm
from ..algorithms.signatures import IdealSignature
from ..core.errors import DataError
from ..interpretability.patching import SignatureGrid
from ..model.training import TrainingLog

logger = logging.getLogger(__name__)

TIE_TOLERANCE = 1e-12
TWO_PHASE_PARITY = 0.9
TWO_PHASE_STATE = 0.5
LOCKSTEP_START = 0.25


class MechanismLabel(str, Enum):
    AA = "AA"
    PAA = "PAA"
    NEITHER = "Neither"


class Phase(str, Enum):
    TWO_PHASE = "two-phase"
    SIMULTANEOUS = "simultaneous"
    UNDETERMINED = "undetermined"


@dataclass
class MechanismVerdict:
    """Метка механизма и доказательства (длины отсечения, сопоставление сигнатур)."""
    label: MechanismLabel
    evidence: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {"label": self.label.value, "evidence": self.evidence}


def classify_mechanism(
    state_cutoff: int,
    parity_cutoff: int,
    train_len: int,
    tol: int = 2,
    converged_fraction: float = 0.9,
) -> MechanismVerdict:
    """
    Классифицирует механизм по длинам отсечения одной кривой обобщения.

    Neither - модель не сошлась (state_cutoff < converged_fraction·train_len)
    или чётность обобщается хуже состояния; PAA - отсечение чётности
    больше отсечения состояния более чем на tol; AA - отличие не больше tol.
    """
    evidence = {
        "state_cutoff": state_cutoff,
        "parity_cutoff": parity_cutoff,
        "train_len": train_len,
        "tol": tol,
        "converged_fraction": converged_fraction,
    }
    if state_cutoff < train_len * converged_fraction:
        evidence["reason"] = "unconverged"
        label = MechanismLabel.NEITHER
    elif parity_cutoff > state_cutoff + tol:
        evidence["reason"] = "parity generalizes further than state"
        label = MechanismLabel.PAA
    elif abs(parity_cutoff - state_cutoff) <= tol:
        evidence["reason"] = "parity and state cutoffs agree"
        label = MechanismLabel.AA
    else:
        evidence["reason"] = "parity cutoff below state cutoff"
        label = MechanismLabel.NEITHER
    return MechanismVerdict(label, evidence)


@dataclass
class SignatureMatch:
    best: Algorithm
    scores: Dict[str, float]
    tie_broken: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "best": self.best.value,
            "scores": self.scores,
            "tie_broken": self.tie_broken,
        }


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a.ravel() - a.mean()
    b = b.ravel() - b.mean()
    norm = np.sqrt((a ** 2).sum() * (b ** 2).sum())
    return float((a * b).sum() / norm)


def signature_match(
    empirical: Union[SignatureGrid, np.ndarray],
    ideals: Sequence[IdealSignature],
) -> SignatureMatch:
    """
    Корреляция Пирсона эмпирической сетки с идеальными.

    При равенстве (в пределах 1e-12) выбирается более простой алгоритм
    (sequential < parallel < associative < parity-associative).

    Raises:
        DataError: Размеры сеток не совпадают или одна из сеток постоянна
    """
    if isinstance(empirical, SignatureGrid):
        grid = empirical.values
    else:
        grid = np.asarray(empirical, dtype=float)
    if grid.std() == 0:
        raise DataError("empirical grid has zero variance")
    if not ideals:
        raise DataError("no ideal signatures to match against")

    scores: Dict[str, float] = {}
    candidates = []
    for ideal in ideals:
        if ideal.grid is None or ideal.grid.shape != grid.shape:
            raise DataError(
                f"ideal {ideal.algorithm.value} grid shape "
                f"{None if ideal.grid is None else ideal.grid.shape} != {grid.shape}"
            )
        if ideal.grid.std() == 0:
            raise DataError(f"ideal {ideal.algorithm.value} grid has zero variance")
        key = ideal.algorithm.value
        if ideal.algorithm == Algorithm.PARITY_ASSOCIATIVE:
            key = f"{key}/{ideal.parity_relation.value}"
        score = _pearson(grid, ideal.grid)
        scores[key] = score
        candidates.append((score, ideal.algorithm))

    top = max(score for score, _ in candidates)
    tied = sorted(
        {alg for score, alg in candidates if top - score <= TIE_TOLERANCE},
        key=lambda a: a.rank,
    )
    return SignatureMatch(best=tied[0], scores=scores, tie_broken=len(tied) > 1)


def phase_detect(log: TrainingLog, train_len: int, tol: int = 2) -> Phase:
    """
    Определяет, выучена ли чётность раньше состояния.

    two-phase - на каком-то шаге отсечение чётности >= 0.9·train_len при
    отсечении состояния <= 0.5·train_len; simultaneous - после того как
    оба отсечения превысили 0.25·train_len, они различаются не более чем на tol.
    """
    records = log.evaluated_records()
    if len(records) < 2:
        return Phase.UNDETERMINED

    for r in records:
        parity_done = r.parity_cutoff >= TWO_PHASE_PARITY * train_len
        if parity_done and r.state_cutoff <= TWO_PHASE_STATE * train_len:
            logger.info(
                f"Двухфазное обучение: шаг {r.step}, "
                f"чётность {r.parity_cutoff}, состояние {r.state_cutoff}"
            )
            return Phase.TWO_PHASE

    start: Optional[int] = None
    for i, r in enumerate(records):
        if min(r.state_cutoff, r.parity_cutoff) > LOCKSTEP_START * train_len:
            start = i
            break
    if start is not None and all(
        abs(r.parity_cutoff - r.state_cutoff) <= tol for r in records[start:]
    ):
        return Phase.SIMULTANEOUS
    return Phase.UNDETERMINED
