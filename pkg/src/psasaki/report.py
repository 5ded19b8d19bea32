"""Residual records shared by every verification routine."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np


@dataclass(frozen=True)
class IdentityRecord:
    id: str
    anchor: str
    residual: float
    tolerance: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def residual_of(values) -> float:
    a = np.asarray(values, dtype=float)
    if a.size == 0:
        return 0.0
    if not np.all(np.isfinite(a)):
        return float("inf")
    return float(np.max(np.abs(a)))


@dataclass
class IdentityReport:
    """Named residuals; a record passes when its residual is within tolerance."""

    records: list[IdentityRecord] = field(default_factory=list)

    def add(self, id: str, anchor: str, values, tolerance: float, *, lower_bound: bool = False) -> IdentityRecord:
        """Record ``max |values|``.

        With ``lower_bound=True`` the record passes when the residual
        *exceeds* the tolerance; negative controls use this.
        """
        r = residual_of(values)
        ok = (r > tolerance) if lower_bound else (r <= tolerance)
        rec = IdentityRecord(id, anchor, r, float(tolerance), bool(ok))
        self.records.append(rec)
        return rec

    def add_flag(self, id: str, anchor: str, ok: bool, residual: float = 0.0, tolerance: float = 0.0) -> IdentityRecord:
        rec = IdentityRecord(id, anchor, float(residual), float(tolerance), bool(ok))
        self.records.append(rec)
        return rec

    def extend(self, other: "IdentityReport", prefix: str = "") -> None:
        for r in other.records:
            self.records.append(IdentityRecord(prefix + r.id, r.anchor, r.residual, r.tolerance, r.passed))

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def __getitem__(self, id: str) -> IdentityRecord:
        for r in self.records:
            if r.id == id:
                return r
        raise KeyError(id)

    def __contains__(self, id: str) -> bool:
        return any(r.id == id for r in self.records)

    def failures(self) -> list[IdentityRecord]:
        return [r for r in self.records if not r.passed]

    def max_residual(self) -> float:
        return max((r.residual for r in self.records), default=0.0)

    def summary(self) -> str:
        lines = []
        for r in self.records:
            mark = "PASS" if r.passed else "FAIL"
            lines.append(f"{mark} {r.id:<34s} {r.residual:10.3e} (tol {r.tolerance:.1e})  {r.anchor}")
        return "\n".join(lines)
