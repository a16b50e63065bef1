from dataclasses import dataclass, fields

HYBRID_INITS = ("baseline", "constructed", "both")


@dataclass(frozen=True)
class AlgorithmSettings:
    """Tolerances and caps shared by every alternating-optimization solver."""

    epsilon: float = 1e-4          # fractional-increase stop rule
    solver_tol: float = 1e-8
    max_outer_iters: int = 100
    feas_epsilon: float = 1e-4
    feas_max_iters: int = 50
    tau_zero_tol: float = 1e-6
    clamp: float = 1e-8            # floor for expansion points that get divided by
    mu_floor: float = 1e-10        # SINRs below this are held at zero in the phase step
    rank_tol: float = 1e-4
    eh_penalty: float = 1e3        # weight on the relative EH slack in the phase programs
    hybrid_init: str = "baseline"  # "baseline" (best of PS/TS), "constructed" (EH-slot construction) or "both"

    def __post_init__(self):
        if self.hybrid_init not in HYBRID_INITS:
            raise ValueError(f"hybrid_init must be one of {HYBRID_INITS}, got {self.hybrid_init!r}")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown algorithm settings: {sorted(unknown)}")
        return cls(**d)
