"""Every numeric default the command line uses, in one place."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

from . import functionals, jellium, maximal, quadrature


@dataclass(frozen=True)
class RunConfig:
    quadrature_rtol: float = quadrature.DEFAULT_RTOL
    grad13_floor: float = functionals.GRAD13_FLOOR
    corr_panels: int = functionals.CORR_PANELS
    corr_order: int = functionals.CORR_ORDER
    alphas: tuple = functionals.DEFAULT_ALPHAS
    scaling_Z: tuple = (1, 2, 4, 8)
    heat_T: tuple = (0.1, 0.2762, 1.0)
    lemma_slack: float = maximal.LEMMA_SLACK
    maximal_radii: tuple = (1e-3, 1e3, 241)
    shell_cutoff: int = jellium.DEFAULT_SHELL_CUTOFF
    tail_tolerance: float = jellium.TAIL_TOLERANCE
    max_finite_n: int = jellium.MAX_FINITE_N
    fourier_k: tuple = jellium.DEFAULT_K_VALUES
    grad13_divergence_ratio: float = 1.5
    tolerance_scale: float = 1.0
    threads_env: str = quadrature.THREADS_ENV
    output_format: str = "table"
    extra: dict = field(default_factory=dict)

    def as_dict(self):
        d = asdict(self)
        d.pop("extra")
        return d


DEFAULTS = RunConfig()
