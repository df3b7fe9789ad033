"""Self-describing checkpoint files: named arrays plus a JSON header.

The header records the decoder configuration, the charset, the training seed,
the fingerprint of the n-gram model injected during training (None for the
plain decoder) and the decode length cap, all under a versioned magic string.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .charset import Charset
from .decoder import DecoderConfig

MAGIC = "ngraminject-checkpoint"
VERSION = 1


class CheckpointError(ValueError):
    """Raised for unreadable or incompatible checkpoint files."""


@dataclass(frozen=True)
class Checkpoint:
    """Trained decoder parameters plus everything needed to decode with them."""

    params: dict[str, np.ndarray]
    config: DecoderConfig
    charset: Charset
    seed: int
    use_ngi: bool
    lm_fingerprint: Optional[str]
    length_cap: int

    def save(self, path: Union[str, Path]) -> None:
        meta = {
            "magic": MAGIC,
            "version": VERSION,
            "config": {
                "charset_size": self.config.charset_size,
                "d": self.config.d,
                "heads": self.config.heads,
                "layers": self.config.layers,
                "ffn_dim": self.config.ffn_dim,
                "dropout": self.config.dropout,
                "proto_dim": self.config.proto_dim,
            },
            "charset": list(self.charset.symbols),
            "seed": self.seed,
            "use_ngi": self.use_ngi,
            "lm_fingerprint": self.lm_fingerprint,
            "length_cap": self.length_cap,
        }
        arrays = dict(self.params)
        arrays["__meta__"] = np.frombuffer(
            json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8
        )
        with open(path, "wb") as fh:
            np.savez(fh, **arrays)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Checkpoint":
        with np.load(path) as data:
            arrays = {k: data[k] for k in data.files}
        raw = arrays.pop("__meta__", None)
        if raw is None:
            raise CheckpointError(f"{path}: missing checkpoint header")
        try:
            meta = json.loads(bytes(raw).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as err:
            raise CheckpointError(f"{path}: unreadable header: {err}") from None
        if meta.get("magic") != MAGIC:
            raise CheckpointError(f"{path}: not a decoder checkpoint")
        if meta.get("version") != VERSION:
            raise CheckpointError(f"{path}: unsupported version {meta.get('version')}")
        return cls(
            params=arrays,
            config=DecoderConfig(**meta["config"]),
            charset=Charset(tuple(meta["charset"])),
            seed=int(meta["seed"]),
            use_ngi=bool(meta["use_ngi"]),
            lm_fingerprint=meta["lm_fingerprint"],
            length_cap=int(meta["length_cap"]),
        )

    def params_digest(self) -> str:
        """Order-independent digest of all parameter bytes, for mutation checks."""
        import hashlib

        h = hashlib.sha256()
        for name in sorted(self.params):
            h.update(name.encode())
            h.update(np.ascontiguousarray(self.params[name]).tobytes())
        return h.hexdigest()
