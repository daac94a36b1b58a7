"""
Эталонные алгоритмы отслеживания состояния и их сигнатуры.

Компоненты:
- Algorithm, RegisterGrid, ParityRegister, ParallelS3State: типы регистров
- run_sequential, run_parallel_s3, run_associative, run_parity_associative: симуляторы
- ideal_patching_signature, ideal_probing_signature: идеальные сигнатуры
"""

from .registers import Algorithm, ParallelS3State, ParityRegister, RegisterGrid
from .signatures import (
    IdealSignature,
    ParityRelation,
    export_signature,
    ideal_patching_signature,
    ideal_probing_signature,
)
from .simulators import (
    complement_transposition,
    decode_parity_register,
    final_prediction,
    run_associative,
    run_parallel_s3,
    run_parity_associative,
    run_sequential,
    simulate,
)

__all__ = [
    "Algorithm",
    "ParallelS3State",
    "ParityRegister",
    "RegisterGrid",
    "IdealSignature",
    "ParityRelation",
    "export_signature",
    "ideal_patching_signature",
    "ideal_probing_signature",
    "complement_transposition",
    "decode_parity_register",
    "final_prediction",
    "run_associative",
    "run_parallel_s3",
    "run_parity_associative",
    "run_sequential",
    "simulate",
]
