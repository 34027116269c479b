"""Low-degree polynomial approximation of exp with entrywise relative error.

The fit targets ``|P(x) - e^x| <= delta * e^x`` on a symmetric interval
``[-b, b]``.  Construction is Chebyshev interpolation converted to the power
basis; the degree is found by incrementing from 1 and accepting the first
degree whose validation-grid relative error meets the target.  The power basis
is required downstream: the monomial feature map reads the coefficients
directly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev

from .errors import DegreeExhausted, InvalidBound

GRID_POINTS = 4096
DEFAULT_MAX_DEGREE = 32


@dataclass(frozen=True)
class ExpPolynomial:
    """Power-basis polynomial with a certified relative-error bound against exp.

    ``coeffs[i]`` multiplies ``x**i``.  The certificate only covers
    ``[-interval_bound, interval_bound]``; evaluation outside is permitted but
    unguaranteed.
    """

    coeffs: tuple
    degree: int
    interval_bound: float
    target_rel_error: float
    certified_rel_error: float

    def __post_init__(self):
        if len(self.coeffs) != self.degree + 1:
            raise ValueError("coefficient count must equal degree + 1")
        if self.degree > 0 and self.coeffs[-1] == 0.0:
            raise ValueError("leading coefficient must be nonzero")
        if not self.interval_bound > 0:
            raise ValueError("interval_bound must be positive")
        if not 0 < self.target_rel_error < 0.1:
            raise ValueError("target_rel_error must lie in (0, 0.1)")
        if self.certified_rel_error > self.target_rel_error:
            raise ValueError("certificate exceeds the requested target")

    def __call__(self, x):
        return eval_poly(self, x)

    def to_json(self) -> str:
        return json.dumps(
            {
                "degree": self.degree,
                "interval_bound": self.interval_bound,
                "target_rel_error": self.target_rel_error,
                "certified_rel_error": self.certified_rel_error,
                "coeffs": list(self.coeffs),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "ExpPolynomial":
        obj = json.loads(text)
        return cls(
            coeffs=tuple(obj["coeffs"]),
            degree=obj["degree"],
            interval_bound=obj["interval_bound"],
            target_rel_error=obj["target_rel_error"],
            certified_rel_error=obj["certified_rel_error"],
        )


def _validation_grid(interval_bound: float, n: int = GRID_POINTS) -> np.ndarray:
    # Uniform grid; endpoints included explicitly so the certificate always
    # covers the interval boundary.
    grid = np.linspace(-interval_bound, interval_bound, n)
    return np.union1d(grid, np.array([-interval_bound, interval_bound]))


def _rel_error_on(coeffs: np.ndarray, x: np.ndarray) -> float:
    # |P(x) - e^x| / e^x computed as |P(x) e^{-x} - 1|: stable when e^x
    # overflows (e^{-x} underflows to 0 and the ratio saturates at 1)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        p = np.polynomial.polynomial.polyval(x, coeffs)
        err = np.abs(p * np.exp(-x) - 1.0)
    err = np.where(np.isnan(err), np.inf, err)
    return float(np.max(err))


def fit_exp_poly(
    interval_bound: float,
    delta_a: float,
    max_degree: int = DEFAULT_MAX_DEGREE,
) -> ExpPolynomial:
    """Fit the smallest-degree power-basis approximation of exp on
    ``[-interval_bound, interval_bound]`` with grid relative error <= delta_a.

    Raises DegreeExhausted when no degree up to ``max_degree`` meets the
    target; this signals an infeasible (bound, delta) combination at desk
    scale.
    """
    if not interval_bound > 0:
        raise InvalidBound(f"interval_bound must be positive, got {interval_bound}")
    if not 0 < delta_a < 0.1:
        raise ValueError(f"delta_a must lie in (0, 0.1), got {delta_a}")
    if max_degree < 1:
        raise ValueError("max_degree must be >= 1")

    grid = _validation_grid(interval_bound)
    for degree in range(1, max_degree + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            cheb = chebyshev.Chebyshev.interpolate(
                np.exp, degree, domain=[-interval_bound, interval_bound]
            )
            coeffs = cheb.convert(kind=np.polynomial.Polynomial).coef
        if not np.all(np.isfinite(coeffs)):
            continue
        if len(coeffs) < degree + 1:  # trailing zeros trimmed by convert
            coeffs = np.pad(coeffs, (0, degree + 1 - len(coeffs)))
        err = _rel_error_on(coeffs, grid)
        if err <= delta_a and coeffs[-1] != 0.0:
            return ExpPolynomial(
                coeffs=tuple(float(c) for c in coeffs),
                degree=degree,
                interval_bound=float(interval_bound),
                target_rel_error=float(delta_a),
                certified_rel_error=err,
            )
    raise DegreeExhausted(
        f"no degree <= {max_degree} reaches relative error {delta_a} "
        f"on [-{interval_bound}, {interval_bound}]"
    )


def eval_poly(p: ExpPolynomial, x):
    """Horner evaluation of the power-basis polynomial at ``x`` (scalar or array)."""
    x = np.asarray(x, dtype=float)
    acc = np.full_like(x, p.coeffs[-1])
    for c in reversed(p.coeffs[:-1]):
        acc = acc * x + c
    return float(acc) if acc.ndim == 0 else acc


def sup_relative_error(p: ExpPolynomial, grid_points: int) -> float:
    """Max of |P(x) - e^x| / e^x over a uniform grid on the fit interval."""
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    x = np.linspace(-p.interval_bound, p.interval_bound, grid_points)
    return _rel_error_on(np.asarray(p.coeffs), x)


def degree_bound(scaled_bound: float, delta_a: float) -> int:
    """Reference degree bound for the exp approximation, as a ceiling.

    ``scaled_bound`` is the score-interval half width (B^2 * beta * d in the
    retrieval setting).  When the inner logarithm of the second branch is not
    positive the max degenerates and the first branch alone is used.
    """
    if not scaled_bound > 0:
        raise InvalidBound(f"scaled_bound must be positive, got {scaled_bound}")
    if not 0 < delta_a < 0.1:
        raise ValueError(f"delta_a must lie in (0, 0.1), got {delta_a}")
    log_inv = math.log(1.0 / delta_a)
    inner = log_inv / scaled_bound
    if inner <= 1.0:
        return math.ceil(scaled_bound)
    second = log_inv / math.log(inner)
    return math.ceil(max(scaled_bound, second))
