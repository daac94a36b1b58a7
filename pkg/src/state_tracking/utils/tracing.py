"""
Трассировка стадий эксперимента.

Каждая стадия (генерация данных, стадия curriculum, батарея анализа, sweep)
оборачивается в span: замеряется длительность, а в словарь метрик стадия
дописывает свои итоги. Трасса содержит время, поэтому пишется только в
logs/trace.jsonl и никогда не попадает в хешируемые артефакты.
"""

import json
import logging
import time
import uuid
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional

logger = logging.getLogger(__name__)


def _new_session() -> str:
    return uuid.uuid4().hex[:8]


@dataclass
class TraceEvent:
    """Завершённая стадия."""

    stage: str
    component: str
    detail: str
    started_at: datetime
    duration_ms: float
    metrics: Dict[str, Any] = field(default_factory=dict)
    error: Optional[str] = None

    def to_record(self, session_id: str) -> Dict[str, Any]:
        record = asdict(self)
        record["started_at"] = self.started_at.isoformat(timespec="milliseconds")
        record["session_id"] = session_id
        return record


class TracingManager:
    """
    Журнал стадий одного запуска команды.

    Пример:
        tracer = TracingManager()
        with tracer.span("train_stage", "Trainer", "stage 0") as metrics:
            ...
            metrics["steps"] = 400
        tracer.dump(run_dir / "logs" / "trace.jsonl")
    """

    def __init__(self) -> None:
        self.events: List[TraceEvent] = []
        self.session_id = _new_session()

    @contextmanager
    def span(
        self, stage: str, component: str, detail: str = ""
    ) -> Iterator[Dict[str, Any]]:
        """Замеряет стадию; исключение пишется в событие и пробрасывается дальше."""
        metrics: Dict[str, Any] = {}
        started_at = datetime.now()
        start = time.perf_counter()
        error = None
        try:
            yield metrics
        except Exception as e:
            error = f"{type(e).__name__}: {e}"
            raise
        finally:
            event = TraceEvent(
                stage=stage,
                component=component,
                detail=detail,
                started_at=started_at,
                duration_ms=(time.perf_counter() - start) * 1000,
                metrics=metrics,
                error=error,
            )
            self.events.append(event)
            logger.debug(
                f"[{component}] {stage} ({detail}): {event.duration_ms:.1f} мс"
            )

    def total_duration_ms(self) -> float:
        return sum(e.duration_ms for e in self.events)

    def report(self) -> str:
        """Текстовая сводка стадий сессии."""
        lines = [f"Стадии сессии {self.session_id}:"]
        for event in self.events:
            line = (
                f"  {event.component} -> {event.stage} [{event.detail}] "
                f"{event.duration_ms:.1f} мс"
            )
            if event.metrics:
                metrics = sorted(event.metrics.items())
                line += " " + ", ".join(f"{k}={v}" for k, v in metrics)
            if event.error:
                line += f" ОШИБКА {event.error}"
            lines.append(line)
        return "\n".join(lines)

    def dump(self, path: Path) -> Path:
        """Дописывает события сессии в JSONL."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "a", encoding="utf-8") as f:
            for event in self.events:
                record = event.to_record(self.session_id)
                f.write(json.dumps(record, ensure_ascii=False, default=str) + "\n")
        return path

    def clear(self) -> None:
        """Очищает журнал и начинает новую сессию."""
        self.events.clear()
        self.session_id = _new_session()
