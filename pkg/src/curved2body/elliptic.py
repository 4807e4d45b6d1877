"""Jacobi elliptic functions and the complete integral of the first kind.

Evaluation uses the descending Landen/arithmetic-geometric-mean scheme
(DLMF 22.20(ii)): the AGM tables are built once for the modulus, then the
amplitude is recovered by the backward half-angle recursion.  ``dn`` is
formed from ``sqrt(1 - k^2 sn^2)`` so both Jacobi identities hold to
rounding at every evaluated point.  A trig-limit series is used below
``k = 1e-7``; moduli within ``1e-12`` of 1 are rejected.

All functions accept scalar or array ``w`` and are pure.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

_K_ONE_GUARD = 1.0 - 1e-12
_K_TRIG_LIMIT = 1e-7
_AGM_TOL = 1e-17


@dataclass(frozen=True)
class EllipticModulus:
    """Modulus k with its complementary modulus k' = sqrt(1 - k^2)."""

    k: float
    k_prime: float = field(init=False)

    def __post_init__(self):
        _check_modulus(self.k)
        object.__setattr__(self, "k_prime", np.sqrt((1.0 - self.k) * (1.0 + self.k)))


def _check_modulus(k):
    if not np.isfinite(k) or k < 0.0:
        raise DomainError(f"modulus must satisfy 0 <= k < 1, got {k}")
    if k >= _K_ONE_GUARD:
        raise DomainError(f"modulus too close to 1 (k = {k}); quarter period diverges")


def _agm_scale(k):
    """Descending AGM tables (a_n, c_n) for the given modulus."""
    a = [1.0]
    c = [k]
    b = np.sqrt((1.0 - k) * (1.0 + k))
    while c[-1] > _AGM_TOL and len(a) < 32:
        a_next = 0.5 * (a[-1] + b)
        b_next = np.sqrt(a[-1] * b)
        c.append(0.5 * (a[-1] - b))
        a.append(a_next)
        b = b_next
    return a, c


def complete_K(k):
    """Complete elliptic integral of the first kind K(k).

    Parameters
    ----------
    k : float
        Modulus, 0 <= k < 1 (not the parameter m = k^2).

    Returns
    -------
    float
        Quarter period of the Jacobi functions with modulus k.
    """
    _check_modulus(k)
    a, _ = _agm_scale(k)
    return np.pi / (2.0 * a[-1])


def jacobi_am(w, k):
    """Jacobi amplitude am(w, k), unwrapped so it is monotone in w.

    Satisfies am(0) = 0, am(2K) = pi and d(am)/dw = dn > 0.  The value is
    not reduced mod 2*pi: the Kepler-equation inversion needs a globally
    monotone angle.
    """
    _check_modulus(k)
    w = np.asarray(w, dtype=float)
    if k < _K_TRIG_LIMIT:
        # trig limit with the first Landen correction, error O(k^4)
        return w - 0.25 * k * k * (w - np.sin(w) * np.cos(w))
    a, c = _agm_scale(k)
    n = len(a) - 1
    phi = (2.0**n) * a[n] * w
    for i in range(n, 0, -1):
        s = np.clip(c[i] / a[i] * np.sin(phi), -1.0, 1.0)
        phi = 0.5 * (phi + np.arcsin(s))
    return phi


def jacobi_sn_cn_dn(w, k):
    """Jacobi elliptic functions (sn, cn, dn) at argument w, modulus k.

    Returns
    -------
    (sn, cn, dn) : ndarray or float triple
        ``sn = sin(am w)``, ``cn = cos(am w)`` and
        ``dn = sqrt(1 - k^2 sn^2)``; the identities
        ``sn^2 + cn^2 = 1`` and ``dn^2 + k^2 sn^2 = 1`` hold to rounding.
    """
    phi = jacobi_am(w, k)
    sn = np.sin(phi)
    cn = np.cos(phi)
    dn = np.sqrt(1.0 - (k * sn) * (k * sn))
    return sn, cn, dn


def jacobi_cd_nd_sd(w, k):
    """Ratios cd = cn/dn, nd = 1/dn, sd = sn/dn used by the conic parametrization."""
    sn, cn, dn = jacobi_sn_cn_dn(w, k)
    return cn / dn, 1.0 / dn, sn / dn
