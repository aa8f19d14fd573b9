import pytest

from hardy_lab import config
from hardy_lab.space import build_space


@pytest.fixture(autouse=True)
def scratch(tmp_path, monkeypatch):
    """Every test writes under its own data root, without the disk cache."""
    monkeypatch.setenv(config._data_root_key, tmp_path.as_posix())
    monkeypatch.setenv(config._path_cache_files_key, "")
    monkeypatch.setenv(config._use_cache_key, "false")
    monkeypatch.setenv(config._progress_key, "false")
    monkeypatch.setenv(config._threads_key, "2")
    monkeypatch.setenv(config._seed_key, "0")
    return tmp_path


@pytest.fixture
def line():
    """[-1, 1] at spacing 1/64 (129 points)."""
    return build_space("grid", dimension=1, origin=-1.0, extent=2.0, spacing=1.0 / 64.0)


@pytest.fixture
def unit_grid():
    """[0, 1] at spacing 1/64 (65 points)."""
    return build_space("grid", dimension=1, extent=1.0, spacing=1.0 / 64.0)


@pytest.fixture
def torus():
    """Circle of circumference 1 at spacing 1/64."""
    return build_space("torus", dimension=1, extent=1.0, spacing=1.0 / 64.0)


@pytest.fixture
def square():
    """[0, 1]^2 at spacing 1/8 (81 points)."""
    return build_space("grid", dimension=2, extent=1.0, spacing=1.0 / 8.0)
