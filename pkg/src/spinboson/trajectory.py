"""Time-series container with a reproducibility manifest."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["Trajectory", "manifest_hash"]


def manifest_hash(manifest: dict) -> str:
    """Short stable digest of a manifest dictionary."""
    canonical = json.dumps(manifest, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


@dataclass
class Trajectory:
    """Named real-valued series on a shared time grid.

    The manifest records everything that produced the data (method, bath
    parameters, expansion digest, integrator settings) so a run can be
    reproduced bit for bit.
    """

    t: np.ndarray
    channels: dict
    manifest: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        for name, series in self.channels.items():
            series = np.asarray(series, dtype=float)
            if series.shape != self.t.shape:
                raise ValueError(
                    f"channel {name!r} has shape {series.shape}, "
                    f"expected {self.t.shape}"
                )
            self.channels[name] = series

    @property
    def hash(self) -> str:
        return manifest_hash(self.manifest)

    def channel(self, name: str) -> np.ndarray:
        return self.channels[name]

    def window(self, t_lo: float, t_hi: float) -> "Trajectory":
        """Restrict to t in [t_lo, t_hi] (inclusive)."""
        mask = (self.t >= t_lo) & (self.t <= t_hi)
        return Trajectory(
            t=self.t[mask],
            channels={k: v[mask] for k, v in self.channels.items()},
            manifest=dict(self.manifest, window=[t_lo, t_hi]),
        )

    def value_at(self, t_point: float, channel: str) -> float:
        idx = int(np.argmin(np.abs(self.t - t_point)))
        return float(self.channels[channel][idx])

    def to_csv(self, path, *, write_manifest: bool = True):
        """Write `# manifest: <hash>` header, column names, then rows."""
        path = Path(path)
        names = ["t"] + list(self.channels)
        data = np.column_stack([self.t] + [self.channels[n] for n in names[1:]])
        with path.open("w") as fh:
            fh.write(f"# manifest: {self.hash}\n")
            fh.write(",".join(names) + "\n")
            for row in data:
                fh.write(",".join(format(x, ".17g") for x in row) + "\n")
        if write_manifest:
            manifest_path = path.with_suffix(".manifest.json")
            manifest_path.write_text(
                json.dumps(self.manifest, sort_keys=True, indent=1)
            )
        return path

    @classmethod
    def from_csv(cls, path, manifest: dict | None = None) -> "Trajectory":
        path = Path(path)
        with path.open() as fh:
            header = fh.readline().strip()
            names = fh.readline().strip().split(",")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        if manifest is None:
            manifest_path = path.with_suffix(".manifest.json")
            manifest = (
                json.loads(manifest_path.read_text())
                if manifest_path.exists()
                else {"manifest_line": header}
            )
        channels = {n: data[:, i] for i, n in enumerate(names) if i > 0}
        return cls(t=data[:, 0], channels=channels, manifest=manifest)
