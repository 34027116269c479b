"""Lambert-W evaluation, well-separation condition, capacity lower bound, and
the empirical storage/retrieval experiment."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegreeExhausted,
    InfeasibleStorage,
    OutOfDomain,
    SingleMemory,
    SizeOverflow,
)
from .hopfield import (
    Normalization,
    PatternMatrix,
    RetrievalConfig,
    retrieve_dense,
    retrieve_lowrank,
    separation,
)

_BRANCH_POINT = -math.exp(-1.0)


def lambert_w0(x: float) -> float:
    """Principal branch of the Lambert W function by Halley iteration.

    Initial guess is ln(1+x) for x >= 0 and the branch-point series for
    x in (-1/e, 0); residual |w e^w - x| is driven below 1e-13 max(1, |x|).
    """
    x = float(x)
    if x < _BRANCH_POINT - 1e-15:
        raise OutOfDomain(f"lambert_w0 needs x >= -1/e, got {x}")
    if abs(x - _BRANCH_POINT) <= 1e-15:
        return -1.0
    if x == 0.0:
        return 0.0
    if x >= 0.0:
        w = math.log1p(x)
        if x > math.e:  # asymptotic guess converges faster for large x
            lx = math.log(x)
            w = lx - math.log(lx)
    else:
        p = math.sqrt(2.0 * (math.e * x + 1.0))
        w = -1.0 + p - p * p / 3.0 + 11.0 * p**3 / 72.0
    tol = 1e-13 * max(1.0, abs(x))
    for _ in range(100):
        ew = math.exp(w)
        f = w * ew - x
        if abs(f) <= tol:
            break
        wp1 = w + 1.0
        w -= f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
    return w


@dataclass(frozen=True)
class CapacityParams:
    """Knobs of the capacity analysis.

    The analysis' capacity formula needs sqrt(p) > 1 for a non-empty domain
    even though the text presents p as a probability; p is therefore only
    required to be positive here, and capacity_lower_bound reports OutOfDomain
    whenever the logarithm argument is not positive.
    """

    p: float
    d: int
    m: float
    beta: float
    R: float
    M: int
    B: float
    delta_a: float

    def __post_init__(self):
        for name in ("p", "m", "beta", "R", "B"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.d < 1 or self.M < 1:
            raise ValueError("d and M must be >= 1")
        if not 0 <= self.delta_a < 0.1:
            raise ValueError("delta_a must lie in [0, 0.1)")

    @property
    def error_margin(self) -> float:
        """delta_H = 2 M B delta_a."""
        return 2.0 * self.M * self.B * self.delta_a


def well_separation_threshold(params: CapacityParams) -> float:
    """Lower bound on the separation Delta_mu guaranteeing each sphere maps
    into itself: (1/beta) ln(2(M-1)m / (R - 2MB delta_a)) + 2 m R."""
    if params.M < 2:
        raise ValueError("well-separation needs M >= 2")
    denom = params.R - params.error_margin
    if denom <= 0:
        raise InfeasibleStorage(
            f"R = {params.R} must exceed 2*M*B*delta_a = {params.error_margin}"
        )
    return (1.0 / params.beta) * math.log(
        2.0 * (params.M - 1) * params.m / denom
    ) + 2.0 * params.m * params.R


def check_well_separated(memory: PatternMatrix, params: CapacityParams) -> list:
    """Per-pattern booleans: separation >= threshold."""
    if memory.count < 2:
        raise SingleMemory("well-separation check needs at least two patterns")
    threshold = well_separation_threshold(params)
    return [separation(memory, mu) >= threshold for mu in range(memory.count)]


def capacity_lower_bound(params: CapacityParams) -> float:
    """Stored-pattern count lower bound sqrt(p) * C^((d-1)/4), with C solving
    C = b / W0(e^(a + ln b)); implemented verbatim, reporting OutOfDomain
    when the logarithm argument or b is not positive."""
    if params.d < 2:
        raise ValueError("d must be >= 2")
    denom = params.R - params.error_margin
    if denom <= 0:
        raise InfeasibleStorage(
            f"R = {params.R} must exceed 2*M*B*delta_a = {params.error_margin}"
        )
    log_arg = 2.0 * params.m * (math.sqrt(params.p) - 1.0) / denom
    if log_arg <= 0:
        raise OutOfDomain(
            f"logarithm argument {log_arg} <= 0 (sqrt(p) - 1 must be positive)"
        )
    b = 4.0 * params.m**2 * params.beta / (5.0 * (params.d - 1))
    if b <= 0:
        raise OutOfDomain(f"b = {b} <= 0")
    a = (4.0 / (params.d - 1)) * (math.log(log_arg) + 1.0)
    c = b / lambert_w0(math.exp(a + math.log(b)))
    return math.sqrt(params.p) * c ** ((params.d - 1) / 4.0)


def _sample_sphere(rng: np.random.Generator, d: int, m: float) -> np.ndarray:
    v = rng.standard_normal(d)
    return m * v / np.linalg.norm(v)


def run_capacity_experiment(
    d: int,
    m: float,
    beta: float,
    M_list,
    trials: int,
    perturbation: float = 0.1,
    eps: float | None = None,
    rng_seed: int = 0,
    delta_a: float = 1e-3,
    max_degree: int = 32,
    rank_cap: int = 10**6,
) -> list:
    """Per M: sample M patterns on the radius-m sphere, perturb a stored
    pattern by perturbation * R, run one retrieval step, and count successes.

    The low-rank path is attempted first; when its polynomial/rank budget is
    infeasible for the given (d, beta, m) the dense map is used instead and
    the row records solver="dense-fallback".  Per-trial RNG streams derive
    from (seed, M, trial), so results are order-independent.
    """
    if not 0 < perturbation < 1:
        raise ValueError("perturbation must lie in (0, 1)")
    if trials == 0:
        return []
    rows = []
    for m_count in M_list:
        rng = np.random.default_rng([rng_seed, m_count])
        memory = PatternMatrix(
            np.column_stack([_sample_sphere(rng, d, m) for _ in range(m_count)])
        )
        if m_count >= 2:
            x = memory.data.T
            sq = np.sum(x * x, axis=1)
            d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
            np.fill_diagonal(d2, np.inf)
            radius = 0.5 * math.sqrt(max(float(np.min(d2)), 0.0))
        else:
            radius = m  # lone pattern: any finite sphere works
        cfg = RetrievalConfig(
            beta=beta,
            delta_a=delta_a,
            normalization=Normalization.QUERY,
            max_degree=max_degree,
            rank_cap=rank_cap,
        )
        margin = 2.0 * m_count * memory.max_norm * delta_a
        eps_used = (radius / 2.0 + margin) if eps is None else eps
        probe = PatternMatrix(memory.data[:, :1], role="query")
        solver_name = "lowrank"
        retrieve = retrieve_lowrank
        try:
            retrieve_lowrank(memory, probe, cfg)
        except (DegreeExhausted, SizeOverflow):
            solver_name = "dense-fallback"
            retrieve = retrieve_dense
        successes = 0
        errors = []
        for trial in range(trials):
            trng = np.random.default_rng([rng_seed, m_count, trial])
            mu = int(trng.integers(m_count))
            noise = trng.standard_normal(d)
            noise /= np.linalg.norm(noise)
            query = memory.data[:, mu] + perturbation * radius * noise
            out = retrieve(memory, PatternMatrix(query[:, None], role="query"), cfg)
            retrieved = out.Z[:, 0]
            err = float(np.linalg.norm(retrieved - memory.data[:, mu]))
            errors.append(err)
            nearest = int(
                np.argmin(np.linalg.norm(memory.data - retrieved[:, None], axis=0))
            )
            if err <= eps_used and nearest == mu:
                successes += 1
        rows.append(
            {
                "d": d,
                "m": m,
                "beta": beta,
                "M": m_count,
                "trials": trials,
                "success_rate": successes / trials if trials else float("nan"),
                "mean_error": float(np.mean(errors)) if errors else float("nan"),
                "seed": rng_seed,
                "solver": solver_name,
                "eps": eps_used,
                "sphere_radius": radius,
            }
        )
    return rows


def capacity_experiment_csv(rows, path) -> None:
    cols = ["d", "m", "beta", "M", "trials", "success_rate", "mean_error", "seed"]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(repr(row[c]) for c in cols) + "\n")
