"""Batched matrix exponential and logarithm.

Every function accepts arrays of shape ``(..., d, d)`` and works on the
trailing two axes.  The exponential uses scaling and squaring on a Taylor
polynomial; the logarithm uses inverse scaling and squaring (Denman-Beavers
square roots) followed by the ``atanh`` series.
"""

from __future__ import annotations

import numpy as np

from .errors import LogDomain

_TAYLOR_DEGREE = 18
_ATANH_TERMS = 14
_LOG_SERIES_RADIUS = 0.25


def _norm1(a: np.ndarray) -> np.ndarray:
    return np.abs(a).sum(axis=-2).max(axis=-1)


def _eye_like(a: np.ndarray) -> np.ndarray:
    return np.broadcast_to(np.eye(a.shape[-1]), a.shape)


def expm1m(a: np.ndarray) -> np.ndarray:
    """Return ``exp(a) - I`` without cancellation for small ``a``."""
    a = np.asarray(a, dtype=float)
    norm = float(np.max(_norm1(a), initial=0.0))
    if norm > 0.5:
        return expm(a) - _eye_like(a)
    # Horner on (exp(a) - I) = a (I + a/2 (I + a/3 (...)))
    eye = _eye_like(a)
    acc = eye
    for j in range(_TAYLOR_DEGREE, 1, -1):
        acc = eye + (a @ acc) / j
    return a @ acc


def expm(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return a.copy()
    norm = float(np.max(_norm1(a)))
    squarings = max(0, int(np.ceil(np.log2(norm / 0.25)))) if norm > 0.25 else 0
    scaled = a / (2.0**squarings)
    result = expm1m(scaled) + _eye_like(a)
    for _ in range(squarings):
        result = result @ result
    return result


def _check_log_domain(m: np.ndarray, tol: float = 1e-9) -> None:
    eig = np.linalg.eigvals(m)
    bad = (np.abs(eig.imag) <= tol * np.maximum(1.0, np.abs(eig))) & (eig.real <= 0)
    if np.any(bad):
        idx = np.argwhere(bad.any(axis=-1))
        raise LogDomain(
            f"matrix at batch index {tuple(int(i) for i in idx[0])} has an eigenvalue on the "
            "closed negative real axis; principal logarithm undefined"
        )


def _sqrtm_db(m: np.ndarray, iters: int = 60) -> np.ndarray:
    y = m.copy()
    z = np.array(_eye_like(m))
    for _ in range(iters):
        yi = np.linalg.inv(y)
        zi = np.linalg.inv(z)
        y_new = 0.5 * (y + zi)
        z = 0.5 * (z + yi)
        delta = np.max(np.abs(y_new - y))
        y = y_new
        if delta <= 1e-15 * max(1.0, float(np.max(np.abs(y)))):
            break
    return y


def log1pm(e: np.ndarray) -> np.ndarray:
    """Principal ``log(I + e)``; accurate when ``e`` is small.

    Passing the increment ``e`` rather than ``I + e`` keeps full relative
    precision for near-identity arguments.
    """
    e = np.asarray(e, dtype=float)
    if e.size == 0:
        return e.copy()
    eye = _eye_like(e)
    norm = _norm1(e)
    small = norm <= _LOG_SERIES_RADIUS
    out = np.empty_like(e)
    if np.all(small):
        return _log_series(e, eye)
    if np.any(small):
        out[small] = _log_series(e[small], eye[small])
    big = ~small
    out[big] = _logm_general(e[big] + eye[big])
    return out


def _log_series(e: np.ndarray, eye: np.ndarray) -> np.ndarray:
    # log(I+E) = 2 atanh(Z), Z = E (2I + E)^{-1}
    z = np.linalg.solve(np.swapaxes(2 * eye + e, -1, -2), np.swapaxes(e, -1, -2))
    z = np.swapaxes(z, -1, -2)
    z2 = z @ z
    acc = eye / (2 * _ATANH_TERMS + 1)
    for j in range(_ATANH_TERMS - 1, -1, -1):
        acc = eye / (2 * j + 1) + z2 @ acc
    return 2.0 * (z @ acc)


def _logm_general(m: np.ndarray) -> np.ndarray:
    _check_log_domain(m)
    eye = _eye_like(m)
    k = 0
    x = m
    while float(np.max(_norm1(x - eye))) > _LOG_SERIES_RADIUS:
        x = _sqrtm_db(x)
        k += 1
        if k > 60:
            raise LogDomain("inverse scaling and squaring did not converge")
    return (2.0**k) * _log_series(x - eye, eye)


def logm(m: np.ndarray) -> np.ndarray:
    """Principal matrix logarithm of each matrix in the batch."""
    m = np.asarray(m, dtype=float)
    return log1pm(m - _eye_like(m))


def inv_ext(a: np.ndarray) -> np.ndarray:
    """Extended-precision inverse: double inverse plus two Newton corrections."""
    a = np.asarray(a, dtype=np.longdouble)
    x = np.linalg.inv(a.astype(float)).astype(np.longdouble)
    eye = np.eye(a.shape[-1], dtype=np.longdouble)
    for _ in range(2):
        x = x + x @ (eye - a @ x)
    return x


def log1pm_ext(e: np.ndarray) -> np.ndarray:
    """``log(I + e)`` in extended precision for increments inside the series radius.

    Larger increments fall back to the double-precision routine.
    """
    e = np.asarray(e, dtype=np.longdouble)
    if e.size == 0:
        return e.copy()
    small = _norm1(e) <= _LOG_SERIES_RADIUS
    out = np.empty_like(e)
    if np.any(~small):
        out[~small] = log1pm(e[~small].astype(float))
    es = e[small]
    eye = np.broadcast_to(np.eye(e.shape[-1], dtype=np.longdouble), es.shape)
    z = es @ inv_ext(2 * eye + es)
    z2 = z @ z
    terms = 2 * _ATANH_TERMS
    acc = eye / (2 * terms + 1)
    for j in range(terms - 1, -1, -1):
        acc = eye / (2 * j + 1) + z2 @ acc
    out[small] = 2 * (z @ acc)
    return out
