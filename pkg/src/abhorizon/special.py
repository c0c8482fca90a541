"""Special-function primitives and the arrival-mass quantities of the model.

All functions broadcast over numpy arrays so that the optimizers can
evaluate a whole population of hyperparameters at once.
"""

from __future__ import annotations

from typing import Literal

import numpy as np
from scipy import special as sc

RhoConvention = Literal["negbin-pmf", "as-written"]

#: Coefficient convention used for the frequency-resolved predictor.  Chosen
#: by Monte-Carlo comparison against the urn sampler (see tests/test_acceptance.py).
DEFAULT_RHO_CONVENTION: RhoConvention = "negbin-pmf"


def _positive(name: str, *values) -> None:
    for v in values:
        v = np.asarray(v, dtype=float)
        if np.any(~(v > 0)):
            raise ValueError(f"{name} requires strictly positive arguments")


def log_gamma(z):
    """Natural log of the gamma function for ``z > 0``."""
    _positive("log_gamma", z)
    return sc.gammaln(z)


def log_beta(a, b):
    """``log B(a, b)`` for positive ``a`` and ``b``."""
    _positive("log_beta", a, b)
    return sc.betaln(a, b)


def log_binom_real(top, k):
    """Log of the generalized binomial coefficient ``C(top, k)``.

    ``top`` may be real; requires ``top - k + 1 > 0``.
    """
    top = np.asarray(top, dtype=float)
    k = np.asarray(k, dtype=float)
    if np.any(k < 0) or np.any(~(top - k + 1 > 0)):
        raise ValueError("log_binom_real requires k >= 0 and top - k + 1 > 0")
    return sc.gammaln(top + 1) - sc.gammaln(k + 1) - sc.gammaln(top - k + 1)


def _check_sigma_r(sigma, r) -> None:
    s = np.asarray(sigma, dtype=float)
    if np.any(~((s > 0) & (s < 1))):
        raise ValueError("sigma must lie in (0, 1)")
    _positive("r", r)


def _log_gamma_ratio(a, sigma):
    # log Gamma(a) / Gamma(a - sigma), accurate for large a via poch
    return np.log(sc.poch(a - sigma, sigma))


def psi(sigma, r, x, y):
    """Arrival mass between day ``x`` and day ``x + y``.

    Equals ``sigma * [B(r x + 1, -sigma) - B(r (x + y) + 1, -sigma)]``,
    evaluated as ``Gamma(1 - sigma) * [g(r (x + y) + 1) - g(r x + 1)]`` with
    ``g(a) = Gamma(a) / Gamma(a - sigma)`` so no negative-argument beta
    function is ever formed.
    """
    _check_sigma_r(sigma, r)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < 0) or np.any(y < 0):
        raise ValueError("psi requires x, y >= 0")
    sigma = np.asarray(sigma, dtype=float)
    l1 = _log_gamma_ratio(r * x + 1.0, sigma)
    l2 = _log_gamma_ratio(r * (x + y) + 1.0, sigma)
    out = np.exp(sc.gammaln(1.0 - sigma) + l1) * np.expm1(l2 - l1)
    return out if out.ndim else float(out)


def log_rho(j, sigma, r, D0, D1, convention: RhoConvention = DEFAULT_RHO_CONVENTION):
    """Log of the Poisson intensity of new users triggering exactly ``j``
    times within ``D1`` days after a ``D0``-day pilot (per unit of the
    largest-jump variable).

    ``convention`` selects the binomial coefficient: ``"negbin-pmf"`` uses
    ``C(j + r D1 - 1, j)``, the NegBin(r D1, s) mass; ``"as-written"`` uses
    ``C(j + r D1 + 1, j)``.
    """
    _check_sigma_r(sigma, r)
    j = np.asarray(j, dtype=float)
    if np.any(j < 1):
        raise ValueError("rho requires j >= 1")
    if np.any(np.asarray(D0) < 0) or np.any(np.asarray(D1) <= 0):
        raise ValueError("rho requires D0 >= 0 and D1 >= 1")
    rd1 = np.asarray(r, dtype=float) * D1
    if convention == "negbin-pmf":
        top = j + rd1 - 1.0
    elif convention == "as-written":
        top = j + rd1 + 1.0
    else:
        raise ValueError(f"unknown rho convention {convention!r}")
    out = (
        log_binom_real(top, j)
        + np.log(sigma)
        + sc.betaln(np.asarray(r, dtype=float) * (D0 + D1) + 1.0, j - sigma)
    )
    return out if np.ndim(out) else float(out)


def rho(j, sigma, r, D0, D1, convention: RhoConvention = DEFAULT_RHO_CONVENTION):
    """``exp(log_rho(...))``."""
    out = np.exp(log_rho(j, sigma, r, D0, D1, convention))
    return out if np.ndim(out) else float(out)
