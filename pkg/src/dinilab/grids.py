"""Tensor-grid scalar fields on box domains, with multilinear probing and
flat-binary export (float64 row-major plus a JSON sidecar).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["GridField"]


@dataclass
class GridField:
    """Node-sampled scalar field on the box [lo, hi] with uniform spacing."""

    lo: tuple
    hi: tuple
    values: np.ndarray

    def __post_init__(self):
        self.lo = tuple(float(v) for v in self.lo)
        self.hi = tuple(float(v) for v in self.hi)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != len(self.lo) or len(self.lo) != len(self.hi):
            raise ValueError("values rank must match box dimension")
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise ValueError("box extents must be positive")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def spacing(self) -> tuple:
        return tuple((h - l) / (n - 1) for l, h, n in zip(self.lo, self.hi, self.shape))

    def axis_coords(self, axis: int) -> np.ndarray:
        return np.linspace(self.lo[axis], self.hi[axis], self.shape[axis])

    def meshgrid(self) -> list[np.ndarray]:
        axes = [self.axis_coords(i) for i in range(len(self.shape))]
        return np.meshgrid(*axes, indexing="ij")

    def copy(self) -> "GridField":
        return GridField(self.lo, self.hi, self.values.copy())

    def probe(self, points) -> np.ndarray:
        """Multilinear interpolation at physical coordinates (n, dim)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        dim = len(self.shape)
        if pts.shape[1] != dim:
            raise ValueError("probe points have wrong dimension")
        sp = self.spacing
        out = np.zeros(len(pts))
        frac = np.empty((len(pts), dim))
        base = np.empty((len(pts), dim), dtype=int)
        for a in range(dim):
            t = (pts[:, a] - self.lo[a]) / sp[a]
            if np.any(t < -1e-9) or np.any(t > self.shape[a] - 1 + 1e-9):
                raise ValueError("probe point outside box")
            t = np.clip(t, 0.0, self.shape[a] - 1)
            b = np.minimum(t.astype(int), self.shape[a] - 2)
            base[:, a] = b
            frac[:, a] = t - b
        for corner in range(2 ** dim):
            w = np.ones(len(pts))
            idx = []
            for a in range(dim):
                bit = (corner >> a) & 1
                w = w * (frac[:, a] if bit else 1.0 - frac[:, a])
                idx.append(base[:, a] + bit)
            out += w * self.values[tuple(idx)]
        return out

    # -- persistence ----------------------------------------------------------

    def save(self, path_base: str | Path) -> None:
        """Write <base>.f64 (row-major float64) and <base>.json sidecar."""
        base = Path(path_base)
        self.values.astype("<f8").tofile(base.with_suffix(".f64"))
        sidecar = {
            "shape": list(self.shape),
            "spacing": list(self.spacing),
            "box": {"lo": list(self.lo), "hi": list(self.hi)},
            "dtype": "<f8",
            "order": "C",
        }
        base.with_suffix(".json").write_text(json.dumps(sidecar, indent=2) + "\n")

    @staticmethod
    def load(path_base: str | Path) -> "GridField":
        base = Path(path_base)
        sidecar = json.loads(base.with_suffix(".json").read_text())
        values = np.fromfile(base.with_suffix(".f64"), dtype="<f8")
        values = values.reshape(sidecar["shape"])
        return GridField(sidecar["box"]["lo"], sidecar["box"]["hi"], values)
