"""
Tests for the loop monitor.
"""

import pytest

from src.monitoring.loop_monitor import LoopMonitor


@pytest.fixture
def monitor():
    """Create a test monitor."""
    return LoopMonitor(sample_memory_every=1)


def test_track_operation(monitor):
    """Test operation tracking."""
    with monitor.track_operation("controller_step"):
        sum(range(1000))

    summary = monitor.get_performance_summary("controller_step")
    assert summary["total_operations"] == 1
    assert summary["latency"]["avg_ms"] >= 0
    assert summary["memory"]["peak_mb"] > 0
    assert summary["errors"]["error_rate"] == 0


def test_errors_are_recorded_and_reraised(monitor):
    """Test failing operations are counted and propagated."""
    with pytest.raises(ValueError):
        with monitor.track_operation("identify"):
            raise ValueError("singular")

    summary = monitor.get_error_summary()
    assert summary["total_errors"] == 1
    assert summary["error_types"]["ValueError"]["examples"][0]["message"] == "singular"
    assert monitor.get_performance_summary("identify")["errors"]["error_rate"] == 1.0


def test_summary_filtering(monitor):
    """Test summaries are grouped by operation."""
    for _ in range(3):
        monitor.record(latency_ms=1.0, operation_type="a")
    monitor.record(latency_ms=5.0, operation_type="b")

    assert monitor.get_performance_summary("a")["total_operations"] == 3
    assert monitor.get_performance_summary()["total_operations"] == 4
    assert monitor.get_performance_summary("b")["latency"]["max_ms"] == 5.0
    assert "message" in monitor.get_performance_summary("c")


def test_flat_summary_keys(monitor):
    """Test the flat summary has one key set per operation."""
    monitor.record(latency_ms=2.0, operation_type="design lqr")
    flat = monitor.flat_summary()
    assert flat["design_lqr_count"] == 1
    assert flat["design_lqr_latency_p95_ms"] == pytest.approx(2.0)
    assert "design_lqr_peak_memory_mb" in flat


def test_empty_monitor():
    """Test an unused monitor reports nothing."""
    monitor = LoopMonitor()
    assert monitor.flat_summary() == {}
    assert "message" in monitor.get_error_summary()


def test_registry_backs_summary(monitor):
    """Test counts and averages come from the monitor's own Prometheus registry."""
    monitor.record(latency_ms=4.0, operation_type="controller_step")
    monitor.record(latency_ms=2.0, operation_type="controller_step", error=RuntimeError("x"))

    labels = {"operation_type": "controller_step"}
    registry = monitor.registry
    assert registry.get_sample_value("tower_operation_latency_seconds_count", labels) == 2
    assert registry.get_sample_value("tower_operation_latency_seconds_sum", labels) == pytest.approx(0.006)
    assert registry.get_sample_value("tower_operation_failures_total", labels) == 1
    assert registry.get_sample_value("tower_operation_errors_total", {"error_type": "RuntimeError"}) == 1

    flat = monitor.flat_summary()
    assert flat["controller_step_latency_avg_ms"] == pytest.approx(3.0)
    assert flat["controller_step_error_rate"] == pytest.approx(0.5)


def test_monitors_do_not_share_counters():
    """Test two monitors keep separate registries."""
    first, second = LoopMonitor(), LoopMonitor()
    first.record(latency_ms=1.0, operation_type="identify")
    assert second.flat_summary() == {}
    assert second.registry.get_sample_value(
        "tower_operation_latency_seconds_count", {"operation_type": "identify"}) is None


def test_textfile_export(monitor, tmp_path):
    """Test the registry is written in the Prometheus text format."""
    monitor.record(latency_ms=1.0, operation_type="collect")
    text = monitor.write_textfile(tmp_path / "monitor.prom").read_text()
    assert 'tower_operation_latency_seconds_count{operation_type="collect"} 1.0' in text
    assert "# TYPE tower_peak_memory_bytes gauge" in text
