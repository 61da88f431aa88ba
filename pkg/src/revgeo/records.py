"""Census record type shared by the search pipelines."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class GeodesicRecord:
    """One closed geodesic found by a search pipeline.

    ``loop`` is the discretized BrokenLoop, ``extras`` holds
    provenance-specific diagnostics (shooting momentum, closure defect, ...).
    ``index`` and ``group`` are filled in during census assembly.
    """

    provenance: str  # parallel_scan | descent | mountain_pass | sweep | shooting
    loop: object
    degree: int
    length: float
    energy: float
    index: object = None
    group: int = None
    id: str = None
    extras: dict = field(default_factory=dict)

    def mean_z(self):
        return float(self.loop.z.mean())
