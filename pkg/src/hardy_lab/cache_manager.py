from __future__ import annotations

from typing import Callable

import os
import json
import hashlib
from pathlib import Path

import polars as pl


class FileCacheManager:
    """
    Manages the cache lifecycle for a single table file, retaining the
    computing call and its arguments so a stale table is never reused.
    """

    def __init__(
            self,
            path_save: str,
            call: Callable | None = None,
            call_args: dict | None = None):
        self.path_save = Path(path_save).as_posix()
        self.call = call
        self.call_args = call_args
        self.hash = self._generate_source_hash()

    def _generate_source_hash(self) -> str:
        """Hash of the call name and its (JSON-normalized) arguments."""

        call_name = ""
        if self.call is not None:
            call_name = f"{self.call.__module__}.{self.call.__qualname__}"
        call_signature = json.dumps(
            dict(
                call=call_name,
                call_args=self.call_args,
            ),
            sort_keys=True,
            default=repr,
        )
        return hashlib.sha256(call_signature.encode('utf-8')).hexdigest()

    def _get_metadata_path(self) -> str:
        dirname = os.path.dirname(self.path_save)
        basename = os.path.basename(self.path_save)
        return Path(os.path.join(dirname, f".{basename}.hash")).as_posix()

    def is_cached(self) -> bool:
        """
        Checks if the file exists and its companion hash matches this call.
        """
        if not os.path.exists(self.path_save):
            return False

        meta_path = self._get_metadata_path()
        if not os.path.exists(meta_path):
            return False

        try:
            with open(meta_path, 'r') as f:
                saved_hash = f.read().strip()

            return saved_hash == self.hash

        except IOError:
            return False

    def save_metadata(self):
        """
        Saves the call hash to the companion file. Called after a
        successful write of the table.
        """
        meta_path = self._get_metadata_path()

        os.makedirs(os.path.dirname(meta_path), exist_ok=True)

        with open(meta_path, 'w') as f:
            f.write(self.hash)

    def read(self) -> pl.DataFrame:
        return pl.read_parquet(self.path_save)

    def write(self, df: pl.DataFrame):
        os.makedirs(os.path.dirname(self.path_save), exist_ok=True)
        df.write_parquet(self.path_save)
        self.save_metadata()

    def cached_table(self) -> pl.DataFrame:
        """Return the cached table, computing and saving it when missing."""
        if self.is_cached():
            return self.read()

        df = self.call(**(self.call_args or {}))
        self.write(df)
        return df
