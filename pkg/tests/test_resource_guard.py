"""Tests for the resource guard and thread resolution."""

from unittest.mock import MagicMock, patch

from thermolimit.resource_guard import ResourceStatus, check_resources, resolve_threads


def _status(ok=True, available=8192.0, cpus=8):
    return ResourceStatus(ok=ok, memory_percent=40.0, memory_available_mb=available,
                          cpu_count=cpus, reason="" if ok else "Memory usage too high")


def test_check_resources_returns_status():
    status = check_resources()
    assert isinstance(status, ResourceStatus)
    assert isinstance(status.ok, bool)
    assert 0 <= status.memory_percent <= 100
    assert status.cpu_count >= 1


def test_status_to_dict_round_trips_fields():
    d = _status().to_dict()
    assert d["cpu_count"] == 8
    assert d["ok"] is True


class TestResolveThreads:
    """Worker count capping."""

    def test_capped_by_cpu_count(self):
        with patch("thermolimit.resource_guard.check_resources", return_value=_status(cpus=4)):
            assert resolve_threads(16) == 4

    def test_capped_by_available_memory(self):
        status = _status(available=600.0)
        with patch("thermolimit.resource_guard.check_resources", return_value=status):
            assert resolve_threads(8) == 2

    def test_single_thread_when_resources_short(self):
        with patch("thermolimit.resource_guard.check_resources",
                   return_value=_status(ok=False)):
            assert resolve_threads(8) == 1

    def test_nonpositive_request_means_one(self):
        with patch("thermolimit.resource_guard.check_resources", return_value=_status()):
            assert resolve_threads(0) == 1

    def test_default_comes_from_config(self):
        config = MagicMock(default_threads=3)
        with patch("thermolimit.config.get_config", return_value=config), \
                patch("thermolimit.resource_guard.check_resources", return_value=_status()):
            assert resolve_threads(None) == 3
