from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass


@dataclass(frozen=True)
class SolveMetric:
    kind: str  # newton | eigen | eigen_inner | corrector | crossing
    iterations: int
    residual_norm: float
    converged: bool


class SolverMetrics:
    """Bounded history of solver runs for the ``solver_stats`` report block.

    Sweep rows and branches record from worker threads.
    """

    def __init__(self, max_history: int = 10_000):
        self._history: deque[SolveMetric] = deque(maxlen=max_history)
        self._lock = threading.Lock()

    def record(self, metric: SolveMetric) -> None:
        with self._lock:
            self._history.append(metric)

    def reset(self) -> None:
        with self._lock:
            self._history.clear()

    def _snapshot(self) -> list[SolveMetric]:
        with self._lock:
            return list(self._history)

    @property
    def total_solves(self) -> int:
        return len(self._snapshot())

    @property
    def converged(self) -> int:
        return sum(1 for m in self._snapshot() if m.converged)

    @property
    def failure_rate(self) -> float:
        history = self._snapshot()
        if not history:
            return 0.0
        return 1.0 - sum(1 for m in history if m.converged) / len(history)

    @property
    def avg_iterations(self) -> float:
        history = self._snapshot()
        if not history:
            return 0.0
        return sum(m.iterations for m in history) / len(history)

    def p95_iterations(self) -> int:
        iterations = sorted(m.iterations for m in self._snapshot())
        if not iterations:
            return 0
        idx = int(len(iterations) * 0.95)
        return iterations[min(idx, len(iterations) - 1)]

    def by_kind(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for m in self._snapshot():
            counts[m.kind] = counts.get(m.kind, 0) + 1
        return dict(sorted(counts.items()))

    def summary(self) -> dict:
        return {
            "total_solves": self.total_solves,
            "converged": self.converged,
            "failure_rate": round(self.failure_rate, 3),
            "avg_iterations": round(self.avg_iterations, 1),
            "p95_iterations": self.p95_iterations(),
            "by_kind": self.by_kind(),
        }


_collector = SolverMetrics()


def get_metrics() -> SolverMetrics:
    return _collector
