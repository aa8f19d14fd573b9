from __future__ import annotations

import os
import json
from pathlib import Path


def _to_bool(value: str) -> bool:
    return str(value).strip().lower() in ("1", "true", "yes", "on")


class TypedEnvVar:
    def __init__(self, env_name: str, default=None, convert=str):
        self.env_name = env_name
        self.default = default
        self.convert = convert

    def __get__(self, obj, objtype=None):
        value = os.getenv(self.env_name)
        if value is None or value == "":
            return self.default

        if self.convert in [list, dict]:
            return json.loads(value)

        return self.convert(value)

    def __set__(self, obj, value):
        if isinstance(value, (list, dict)):
            os.environ[self.env_name] = json.dumps(value)
        else:
            os.environ[self.env_name] = str(value)


class Config:
    """
    Global configuration for hardy-lab.

    Every setting is stored in an environment variable, so a `.env` file
    (loaded at import), the shell, or direct attribute assignment all work.

    The config instance is typically accessed via:
```python
        from hardy_lab import config
        config.threads = 4
        config.seed = 20240611
```

    Attributes
    ----------
    code_root : str
        Directory of the installed package. Set via `_hardy_lab_code_root_`.
    data_root : str
        Root directory for scratch data (cached density tables, default
        bundle output). Set via `_hardy_lab_data_root_`. Defaults to
        `<repo>/.scratch`.
    threads : int
        Upper bound on worker threads for certification scans and atom
        suites. Set via `HARDY_LAB_THREADS`. Default is os.cpu_count().
    seed : int
        Default seed for randomized suites when a campaign does not set one.
        Set via `_hardy_lab_seed_`. Default is 0.
    use_cache : bool
        Store expensive tables (subordinator densities) on disk.
        Set via `_hardy_lab_use_cache_`. Default is True.
    progress : bool
        Show tqdm progress bars for decomposition levels and atom suites.
        Set via `_hardy_lab_progress_`. Default is False.
    path_cache_files : str
        Directory for cached files. Set via `_hardy_lab_path_cache_files_`
        or directly. Default is {data_root}/cached_files.

    Examples
    --------
    >>> from hardy_lab import config
    >>> config.data_root = "/projects/hardy"
    >>> print(config.path_cache_files)
    '/projects/hardy/cached_files'

    Using environment variables:
```bash
        export HARDY_LAB_THREADS=8
        export _hardy_lab_use_cache_=false
```
    """

    _code_root_key = "_hardy_lab_code_root_"
    _data_root_key = "_hardy_lab_data_root_"
    _threads_key = "HARDY_LAB_THREADS"
    _seed_key = "_hardy_lab_seed_"
    _use_cache_key = "_hardy_lab_use_cache_"
    _progress_key = "_hardy_lab_progress_"
    _path_cache_files_key = "_hardy_lab_path_cache_files_"

    code_root = TypedEnvVar(_code_root_key, default="", convert=str)
    data_root = TypedEnvVar(_data_root_key, default="", convert=str)
    _threads = TypedEnvVar(_threads_key, os.cpu_count(), int)
    seed = TypedEnvVar(_seed_key, 0, int)
    use_cache = TypedEnvVar(_use_cache_key, True, _to_bool)
    progress = TypedEnvVar(_progress_key, False, _to_bool)
    _path_cache_files = TypedEnvVar(_path_cache_files_key, "", str)

    @property
    def threads(self) -> int:
        value = self._threads
        if value is None or value < 1:
            return 1
        return value

    @threads.setter
    def threads(self, value: int):
        self._threads = int(value)

    @property
    def path_cache_files(self) -> str:
        if self._path_cache_files != "":
            return self._path_cache_files
        else:
            if self.data_root == "":
                from . import logger
                from .exceptions import ConfigError

                message = "You must set config.data_root to get a default cache file directory"
                logger.error(message)
                raise ConfigError(message)

            return (Path(self.data_root) / "cached_files").as_posix()

    @path_cache_files.setter
    def path_cache_files(self, value: str):
        self._path_cache_files = value
