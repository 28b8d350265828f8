"""
Timing and error tracking for control loops and pipeline stages.

Every monitor owns a private Prometheus registry, so several monitors (one per
scenario worker, say) never share counters.
"""

import logging
import time
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import psutil
from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram, write_to_textfile

logger = logging.getLogger(__name__)

LATENCY_BUCKETS = (1e-5, 5e-5, 1e-4, 5e-4, 1e-3, 5e-3, 1e-2, 5e-2, 0.1, 0.5, 1.0, 5.0, 30.0)


@dataclass
class OperationRecord:
    """One timed operation."""
    operation: str
    latency_ms: float
    memory_mb: float
    error: Optional[str] = None
    timestamp: datetime = field(default_factory=datetime.now)


class LoopMonitor:
    """Collects per-operation latency, process memory and errors."""

    def __init__(self, sample_memory_every: int = 100):
        """
        Args:
            sample_memory_every: Read process RSS on every n-th record only
        """
        self.registry = CollectorRegistry()
        self.latency = Histogram(
            'tower_operation_latency_seconds',
            'Operation latency',
            ['operation_type'],
            buckets=LATENCY_BUCKETS,
            registry=self.registry,
        )
        self.failures = Counter(
            'tower_operation_failures',
            'Failed operations',
            ['operation_type'],
            registry=self.registry,
        )
        self.errors = Counter(
            'tower_operation_errors',
            'Operation errors by exception type',
            ['error_type'],
            registry=self.registry,
        )
        self.peak_memory = Gauge(
            'tower_peak_memory_bytes',
            'Largest process RSS seen while an operation ran',
            ['operation_type'],
            registry=self.registry,
        )

        self.records: List[OperationRecord] = []
        self.error_history: List[Dict[str, Any]] = []
        self.sample_memory_every = max(1, sample_memory_every)
        self._process = psutil.Process()
        self._last_memory_mb = self._memory_mb()

    def _memory_mb(self) -> float:
        return self._process.memory_info().rss / (1024 * 1024)

    def _sample(self, name: str, operation: str) -> float:
        value = self.registry.get_sample_value(name, {"operation_type": operation})
        return 0.0 if value is None else float(value)

    def track_operation(self, operation_type: str):
        """Context manager timing one operation; exceptions are recorded and re-raised.

        Args:
            operation_type: Name the operation is grouped under
        """
        class OperationTracker:
            def __init__(self, monitor):
                self.monitor = monitor
                self.operation_type = operation_type
                self.start_time = None

            def __enter__(self):
                self.start_time = time.perf_counter()
                return self

            def __exit__(self, exc_type, exc_val, exc_tb):
                duration = time.perf_counter() - self.start_time
                self.monitor.record(
                    latency_ms=duration * 1000,
                    operation_type=self.operation_type,
                    error=exc_val,
                )
                return False

        return OperationTracker(self)

    def record(self,
               latency_ms: float,
               operation_type: str,
               error: Optional[BaseException] = None):
        if len(self.records) % self.sample_memory_every == 0:
            self._last_memory_mb = self._memory_mb()
        self.records.append(OperationRecord(
            operation=operation_type,
            latency_ms=latency_ms,
            memory_mb=self._last_memory_mb,
            error=type(error).__name__ if error else None,
        ))

        self.latency.labels(operation_type=operation_type).observe(latency_ms / 1000)
        peak = self.peak_memory.labels(operation_type=operation_type)
        memory_bytes = self._last_memory_mb * 1024 * 1024
        if memory_bytes > self._sample('tower_peak_memory_bytes', operation_type):
            peak.set(memory_bytes)

        if error:
            self.failures.labels(operation_type=operation_type).inc()
            self.errors.labels(error_type=type(error).__name__).inc()
            self.error_history.append({
                "timestamp": datetime.now().isoformat(),
                "operation": operation_type,
                "error_type": type(error).__name__,
                "error_message": str(error),
                "latency_ms": latency_ms,
            })
            logger.debug(f"{operation_type} failed after {latency_ms:.2f} ms: {error}")

    def operations(self) -> List[str]:
        return sorted({r.operation for r in self.records})

    def get_performance_summary(self, operation_type: Optional[str] = None) -> Dict[str, Any]:
        """Latency statistics, peak memory and error rate.

        Counts, averages, failures and peak memory come from the registry;
        percentiles from the retained records.

        Args:
            operation_type: Restrict to one operation; all operations when None
        """
        operations = self.operations() if operation_type is None else [operation_type]
        count = sum(self._sample('tower_operation_latency_seconds_count', op) for op in operations)
        if count == 0:
            return {"message": "No operations recorded"}

        total_s = sum(self._sample('tower_operation_latency_seconds_sum', op) for op in operations)
        failures = sum(self._sample('tower_operation_failures_total', op) for op in operations)
        peak_bytes = max(self._sample('tower_peak_memory_bytes', op) for op in operations)
        latencies = [r.latency_ms for r in self.records if r.operation in operations]
        return {
            "total_operations": int(count),
            "latency": {
                "avg_ms": total_s * 1000 / count,
                "p95_ms": float(np.percentile(latencies, 95)),
                "p99_ms": float(np.percentile(latencies, 99)),
                "max_ms": float(np.max(latencies)),
            },
            "memory": {
                "peak_mb": peak_bytes / (1024 * 1024),
            },
            "errors": {
                "total_count": int(failures),
                "error_rate": failures / count,
            },
        }

    def get_error_summary(self) -> Dict[str, Any]:
        if not self.error_history:
            return {"message": "No errors recorded"}

        error_types: Dict[str, Dict[str, Any]] = {}
        for error in self.error_history:
            entry = error_types.setdefault(error["error_type"], {"count": 0, "examples": []})
            if len(entry["examples"]) < 3:
                entry["examples"].append({
                    "message": error["error_message"],
                    "operation": error["operation"],
                })
        for name, entry in error_types.items():
            entry["count"] = int(self.registry.get_sample_value(
                'tower_operation_errors_total', {"error_type": name}))
        return {"total_errors": len(self.error_history), "error_types": error_types}

    def flat_summary(self) -> Dict[str, float]:
        """Per-operation summary flattened to `key = value` friendly names."""
        flat: Dict[str, float] = {}
        for operation in self.operations():
            summary = self.get_performance_summary(operation)
            prefix = operation.replace(" ", "_")
            flat[f"{prefix}_count"] = summary["total_operations"]
            for key, value in summary["latency"].items():
                flat[f"{prefix}_latency_{key}"] = value
            flat[f"{prefix}_peak_memory_mb"] = summary["memory"]["peak_mb"]
            flat[f"{prefix}_error_rate"] = summary["errors"]["error_rate"]
        return flat

    def write_textfile(self, path: Union[str, Path]) -> Path:
        """Registry contents in the Prometheus text exposition format."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        write_to_textfile(str(path), self.registry)
        return path
