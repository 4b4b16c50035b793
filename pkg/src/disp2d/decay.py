"""Time scans of |K_t(x, y)| and decay-model fits.

Models (all fits weighted by the inverse squared relative quadrature error):

``pure_power``       |K| = C t^{-p}
``power_with_log2``  |K| = C t^{-p} log^{-2} t
``single_log2``      |K| = C / (t log^2 t)
``two_term``         |K| = C / (t log^2 t) + C2 / t^{1 + alpha}

residual_rms is the weighted rms of the relative residuals, the same
measure for every model, so nested models compare fairly.
"""

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .resolvent import fmt
from .stone import STONE_COLUMNS, propagator_kernels

MODELS = ("pure_power", "power_with_log2", "single_log2", "two_term")
MIN_POINTS = 8
MIN_DECADES = 2.0
MAX_REL_ERROR = 0.1


class FitRefusedError(ValueError):
    """Scan too short, too narrow or too noisy for a meaningful fit."""


def weight_w(x):
    """w(x) = log^2(2 + |x|)."""
    x = np.asarray(x, dtype=float)
    return float(np.log(2.0 + np.hypot(x[0], x[1])) ** 2)


def default_alpha(beta):
    """min(1/4, beta - 3/2) / 2, the midpoint of the admissible interval."""
    return 0.5 * min(0.25, beta - 1.5)


@dataclass
class ScanPoint:
    t: float
    abs_k: float
    error: float
    ok: bool
    kernel: object = None


def decay_scan(x, y, t_grid, machinery, cutoff=None, quad=None, use="value"):
    """One propagator evaluation per grid time; accuracy failures are flagged, not raised.

    ``use`` selects |K| at the saturated L ("value") or the max over the L
    list ("sup_abs"), the operational form of the sup over L.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    if np.any(t_grid <= 2):
        raise ValueError("t_grid entries must exceed 2")
    table = propagator_kernels(t_grid, [x], [y], machinery, cutoff, quad)
    out = []
    for row in table:
        k = row[0]
        mag = k.sup_abs if use == "sup_abs" else abs(k.value)
        out.append(ScanPoint(k.t, float(mag), k.abs_error_estimate, k.converged, k))
    return out


@dataclass
class DecayFitResult:
    model: str
    C: float
    p: float
    residual_rms: float
    t_range: tuple
    alpha: float = float("nan")
    C2: float = float("nan")
    n_points: int = 0


def _prepare(scan, t_range):
    pts = [s for s in scan if s.ok and s.abs_k > 0]
    if t_range is not None:
        pts = [s for s in pts if t_range[0] <= s.t <= t_range[1]]
    if len(pts) < MIN_POINTS:
        raise FitRefusedError(f"need at least {MIN_POINTS} accurate scan points, got {len(pts)}")
    t = np.array([s.t for s in pts])
    y = np.array([s.abs_k for s in pts])
    err = np.array([s.error for s in pts])
    if math.log10(t.max() / t.min()) < MIN_DECADES:
        raise FitRefusedError("scan spans less than two decades in t")
    if np.any(err >= MAX_REL_ERROR * y):
        raise FitRefusedError("error estimates exceed 10% of the values")
    rel = np.maximum(err / y, 1e-12)
    w = 1.0 / rel**2
    return t, y, w / w.sum()


def _lstsq(design, rhs, w):
    sw = np.sqrt(w)[:, None]
    a = design * sw
    if np.linalg.cond(a) > 1e12:
        raise FitRefusedError("ill-conditioned fit design")
    coef, *_ = np.linalg.lstsq(a, rhs * sw[:, 0], rcond=None)
    return coef


def fit_decay(scan, model, alpha=None, t_range=None):
    """Weighted least-squares fit of a decay model to a scan."""
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    t, y, w = _prepare(scan, t_range)
    lt = np.log(t)
    if model in ("pure_power", "power_with_log2"):
        rhs = np.log(y) + (2.0 * np.log(lt) if model == "power_with_log2" else 0.0)
        coef = _lstsq(np.column_stack([np.ones_like(lt), -lt]), rhs, w)
        C, p = math.exp(coef[0]), float(coef[1])
        pred = C * t**-p * (lt**-2.0 if model == "power_with_log2" else 1.0)
        res = DecayFitResult(model, C, p, 0.0, (float(t[0]), float(t[-1])), n_points=t.size)
    else:
        base = 1.0 / (t * lt**2)
        cols = [base / y]
        if model == "two_term":
            if alpha is None:
                raise ValueError("two_term model needs alpha")
            cols.append(t ** -(1.0 + alpha) / y)
        coef = _lstsq(np.column_stack(cols), np.ones_like(t), w)
        pred = coef[0] * base + (coef[1] * t ** -(1.0 + alpha) if model == "two_term" else 0.0)
        res = DecayFitResult(model, float(coef[0]), 1.0, 0.0, (float(t[0]), float(t[-1])),
                             alpha=float(alpha) if model == "two_term" else float("nan"),
                             C2=float(coef[1]) if model == "two_term" else float("nan"), n_points=t.size)
    r = (pred - y) / y
    res.residual_rms = float(math.sqrt(np.sum(w * r * r)))
    return res


def weighted_sup(scan, x, y):
    """max_t t log^2(t) |K_t| / sqrt(w(x) w(y)) over the accurate scan points, with its location."""
    norm = math.sqrt(weight_w(x) * weight_w(y))
    vals = [(s.t * math.log(s.t) ** 2 * s.abs_k / norm, s.t) for s in scan if s.ok]
    if not vals:
        raise FitRefusedError("no accurate scan points")
    return max(vals)


def write_scan_csv(path, scan, header_lines=()):
    """Scan rows in the stone CSV schema."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(",".join(STONE_COLUMNS) + "\n")
        for s in scan:
            fh.write(",".join(s.kernel.row()) + "\n")


def content_hash(*chunks):
    h = hashlib.sha256()
    for c in chunks:
        h.update(c if isinstance(c, bytes) else str(c).encode())
    return h.hexdigest()


def fit_report(results, fixture, inputs_hash):
    """Plain-text report: one block per fitted model."""
    lines = [f"fixture: {fixture}", f"inputs_sha256: {inputs_hash}"]
    for r in results:
        lines.append(f"model: {r.model}")
        lines.append(f"  C: {fmt(r.C)}")
        lines.append(f"  p: {fmt(r.p)}")
        if r.model == "two_term":
            lines.append(f"  C2: {fmt(r.C2)}")
            lines.append(f"  alpha: {fmt(r.alpha)}")
        lines.append(f"  residual_rms: {fmt(r.residual_rms)}")
        lines.append(f"  t_range: {fmt(r.t_range[0])} {fmt(r.t_range[1])}")
        lines.append(f"  n_points: {r.n_points}")
    return "\n".join(lines) + "\n"
