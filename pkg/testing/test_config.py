import os

import polars as pl
import pytest

from hardy_lab import config
from hardy_lab.cache_manager import FileCacheManager
from hardy_lab.exceptions import ConfigError


def _table(n: int) -> pl.DataFrame:
    return pl.DataFrame({"k": list(range(n))})


class TestConfig:
    def test_values_come_from_the_environment(self, scratch) -> None:
        assert config.data_root == scratch.as_posix()
        assert config.threads == 2
        assert config.seed == 0
        assert config.use_cache is False
        assert config.path_cache_files == (scratch / "cached_files").as_posix()

    def test_assignment_writes_the_environment(self) -> None:
        config.seed = 17
        assert os.environ[config._seed_key] == "17"
        assert config.seed == 17

    def test_threads_floor(self, monkeypatch) -> None:
        monkeypatch.setenv(config._threads_key, "0")
        assert config.threads == 1

    def test_cache_directory_needs_a_root(self, monkeypatch) -> None:
        monkeypatch.setenv(config._data_root_key, "")
        with pytest.raises(ConfigError):
            config.path_cache_files


class TestFileCacheManager:
    def test_compute_then_reuse(self, scratch) -> None:
        calls = []

        def build(n: int) -> pl.DataFrame:
            calls.append(n)
            return _table(n)

        path = (scratch / "tables" / "t.parquet").as_posix()
        first = FileCacheManager(path, call=build, call_args=dict(n=3)).cached_table()
        again = FileCacheManager(path, call=build, call_args=dict(n=3)).cached_table()
        assert calls == [3]
        assert first.equals(again)
        assert (scratch / "tables" / ".t.parquet.hash").is_file()

    def test_changed_arguments_recompute(self, scratch) -> None:
        path = (scratch / "t.parquet").as_posix()
        FileCacheManager(path, call=_table, call_args=dict(n=2)).cached_table()
        manager = FileCacheManager(path, call=_table, call_args=dict(n=4))
        assert not manager.is_cached()
        assert manager.cached_table().height == 4
        assert manager.is_cached()
