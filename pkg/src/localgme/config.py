"""Numerical tolerances and size caps shared by every module."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    hermitian: float = 1e-10
    trace: float = 1e-10
    psd: float = 1e-9
    ket_norm: float = 1e-12
    trace_preserve: float = 1e-12
    degenerate: float = 1e-14
    # diagonal filters keep relative precision; only true underflow counts as annihilation
    filter_min_success: float = 1e-300
    kraus_weight: float = -1e-12
    measurement: float = 1e-9
    behavior_nonneg: float = 1e-12
    behavior_norm: float = 1e-10
    jacobi_offdiag: float = 1e-12
    jacobi_max_sweeps: int = 100
    bisection_tol: float = 1e-14
    bisection_max_iter: int = 200
    unsteerable_slack: float = 1e-12
    lp_feasibility: float = 1e-9
    max_matrix_side: int = 65536
    max_vertices: int = 1_000_000
    max_grid_points: int = 1_000_000

    def with_overrides(self, **overrides) -> "Tolerances":
        unknown = set(overrides) - set(asdict(self))
        if unknown:
            raise ValueError(f"unknown tolerance fields: {sorted(unknown)}")
        return replace(self, **overrides)

    def as_dict(self) -> dict:
        return asdict(self)


DEFAULT = Tolerances()
