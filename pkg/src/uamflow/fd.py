"""Drake fundamental-diagram calibration, scaling and envelope diagnostics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

KMH_FLOW = 3.6e6  # drones/(m*s) -> drones/(km*h)
KM2_DENSITY = 1e6  # drones/m^2 -> drones/km^2


class FitError(RuntimeError):
    """Least-squares fit failed; carries the last iterate."""

    def __init__(self, message, v_f=float("nan"), alpha=float("nan"), objective=float("nan")):
        super().__init__(message)
        self.v_f = v_f
        self.alpha = alpha
        self.objective = objective


@dataclass(frozen=True)
class FilterConfig:
    n_bins: int = 20
    percentile: float = 75.0

    def __post_init__(self):
        if self.n_bins < 1:
            raise ValueError("n_bins must be >= 1")
        if not 0.0 <= self.percentile <= 100.0:
            raise ValueError("percentile must lie in [0, 100]")


@dataclass(frozen=True)
class FdFit:
    v_f: float
    alpha: float
    k_c_analytic: float
    q_max_analytic: float
    k_c_empirical: float
    q_max_empirical: float
    r2: float
    rmse: float
    n_samples_used: int
    iterations: int = 0


@dataclass(frozen=True)
class ScaleFactors:
    delta_eta: float = 1.0
    delta_v: float = 1.0

    def __post_init__(self):
        if not (self.delta_eta > 0 and self.delta_v > 0):
            raise ValueError("scale factors must be positive")

    @classmethod
    def from_physical(cls, size_from, size_to, speed_from, speed_to) -> "ScaleFactors":
        if min(size_from, size_to, speed_from, speed_to) <= 0:
            raise ValueError("sizes and speeds must be positive")
        return cls(size_to / size_from, speed_to / speed_from)

    def compose(self, other: "ScaleFactors") -> "ScaleFactors":
        return ScaleFactors(self.delta_eta * other.delta_eta, self.delta_v * other.delta_v)


def drake_eval(k, v_f: float, alpha: float):
    k = np.asarray(k, dtype=float)
    out = k * v_f * np.exp(-alpha * k)
    return float(out) if out.ndim == 0 else out


def percentile_filter(k, q, cfg: FilterConfig = FilterConfig()):
    """Keep, per equal-width density bin, samples whose flow reaches the bin's p-th percentile.

    Returns the boolean keep-mask over the input samples.
    """
    k = np.asarray(k, dtype=float)
    q = np.asarray(q, dtype=float)
    if len(k) == 0:
        raise ValueError("no samples to filter")
    lo, hi = k.min(), k.max()
    if hi > lo:
        b = np.floor((k - lo) / (hi - lo) * cfg.n_bins).astype(np.int64)
        b = np.clip(b, 0, cfg.n_bins - 1)
    else:
        b = np.zeros(len(k), dtype=np.int64)
    keep = np.zeros(len(k), dtype=bool)
    for bin_id in np.unique(b):
        members = b == bin_id
        thr = np.percentile(q[members], cfg.percentile)
        keep |= members & (q >= thr)
    return keep


def envelope_slope(k, q, low_density_quantile: float = 0.5, n_bins: int = 10) -> float:
    """Slope through the origin of the per-bin maximum flows at low density."""
    k = np.asarray(k, dtype=float)
    q = np.asarray(q, dtype=float)
    if len(k) == 0:
        raise ValueError("no samples")
    cut = np.quantile(k, low_density_quantile)
    sel = (k <= cut) & (k > 0)
    ks, qs = k[sel], q[sel]
    if len(ks) < 2 or ks.max() <= 0:
        raise ValueError("fewer than 2 usable envelope bins")
    b = np.clip(np.floor(ks / ks.max() * n_bins).astype(np.int64), 0, n_bins - 1)
    top_k, top_q = [], []
    for bin_id in np.unique(b):
        j = np.flatnonzero(b == bin_id)
        best = j[np.argmax(qs[j])]
        top_k.append(ks[best])
        top_q.append(qs[best])
    if len(top_k) < 2:
        raise ValueError("fewer than 2 usable envelope bins")
    top_k, top_q = np.array(top_k), np.array(top_q)
    return float(top_k @ top_q / (top_k @ top_k))


def _initial_guess(k, q):
    try:
        v0 = envelope_slope(k, q)
    except ValueError:
        v0 = float("nan")
    if not (math.isfinite(v0) and v0 > 0):
        v0 = float(np.percentile(q / k, 90))
    if not v0 > 0:
        v0 = 1.0
    return v0, 1.0 / float(np.mean(k))


def _levenberg_marquardt(k, q, v_f, alpha, max_iter=200, rtol=1e-10):
    def residual(v, a):
        return q - k * v * np.exp(-a * k)

    r = residual(v_f, alpha)
    obj = float(r @ r)
    lam = 1e-3
    for it in range(1, max_iter + 1):
        e = np.exp(-alpha * k)
        # Jacobian of the model (the residual Jacobian is its negative)
        J = np.column_stack([k * e, -v_f * k * k * e])
        A = J.T @ J
        g = J.T @ r
        if obj == 0.0 or np.max(np.abs(g)) <= 1e-15 * max(1.0, obj):
            return v_f, alpha, obj, it
        while True:
            step = np.linalg.solve(A + lam * np.diag(np.diag(A)), g)
            v_new, a_new = v_f + step[0], alpha + step[1]
            r_new = residual(v_new, a_new)
            obj_new = float(r_new @ r_new)
            if np.isfinite(obj_new) and obj_new <= obj:
                break
            lam *= 10.0
            if lam > 1e16:
                # no descent direction left: a stationary point to machine precision
                return v_f, alpha, obj, it
        decrease = (obj - obj_new) / obj
        v_f, alpha, r, obj = v_new, a_new, r_new, obj_new
        lam = max(lam / 10.0, 1e-12)
        if decrease < rtol:
            return v_f, alpha, obj, it
    raise FitError(f"no convergence after {max_iter} iterations", v_f, alpha, obj)


def fit_drake(k, q, v_f0: float | None = None, alpha0: float | None = None) -> FdFit:
    """Least-squares fit of q = k*v_f*exp(-alpha*k) by damped Gauss-Newton."""
    k = np.asarray(k, dtype=float)
    q = np.asarray(q, dtype=float)
    if len(k) != len(q):
        raise ValueError("k and q differ in length")
    if np.any(k <= 0):
        raise ValueError("densities must be positive (drop empty cells first)")
    if len(np.unique(k)) < 3:
        raise ValueError("need at least 3 distinct densities")
    # canonical order makes the result independent of input ordering
    order = np.lexsort((q, k))
    k, q = k[order], q[order]

    g_v, g_a = _initial_guess(k, q)
    v_f, alpha, obj, iters = _levenberg_marquardt(k, q, v_f0 or g_v, alpha0 or g_a)
    v_f, alpha = float(v_f), float(alpha)
    if not (v_f > 0 and alpha > 0):
        raise FitError(f"fit left the model domain (v_f={v_f:.4g}, alpha={alpha:.4g})", v_f, alpha, obj)

    ss_tot = float(np.sum((q - q.mean()) ** 2))
    r2 = 1.0 - obj / ss_tot if ss_tot > 0 else (1.0 if obj == 0 else float("-inf"))
    j = int(np.argmax(q))
    return FdFit(
        v_f=float(v_f),
        alpha=float(alpha),
        k_c_analytic=1.0 / alpha,
        q_max_analytic=float(drake_eval(1.0 / alpha, v_f, alpha)),
        k_c_empirical=float(k[j]),
        q_max_empirical=float(q[j]),
        r2=float(r2),
        rmse=math.sqrt(obj / len(k)),
        n_samples_used=int(len(k)),
        iterations=iters,
    )


def filter_and_fit(k, q, cfg: FilterConfig = FilterConfig()):
    """Drop empty cells, apply the percentile filter and fit; returns (fit, keep_mask)."""
    k = np.asarray(k, dtype=float)
    q = np.asarray(q, dtype=float)
    nz = k > 0
    keep = np.zeros(len(k), dtype=bool)
    keep[nz] = percentile_filter(k[nz], q[nz], cfg)
    return fit_drake(k[keep], q[keep]), keep


def scale_fit(fit: FdFit, f: ScaleFactors) -> FdFit:
    """Map a reduced-scale fit to another size/speed scale (SI units throughout)."""
    area = f.delta_eta**2
    flow = f.delta_v / area
    return replace(
        fit,
        v_f=fit.v_f * f.delta_v,
        alpha=fit.alpha * area,
        k_c_analytic=fit.k_c_analytic / area,
        q_max_analytic=fit.q_max_analytic * flow,
        k_c_empirical=fit.k_c_empirical / area,
        q_max_empirical=fit.q_max_empirical * flow,
        rmse=fit.rmse * flow,
    )


def scaled_summary(fit: FdFit, f: ScaleFactors, empirical: bool = True) -> dict:
    """Scaled (v_f m/s, k_c per km^2, q_max per km per h) for the chosen (k_c, q_max) pair."""
    s = scale_fit(fit, f)
    k_c = s.k_c_empirical if empirical else s.k_c_analytic
    q_max = s.q_max_empirical if empirical else s.q_max_analytic
    return {
        "v_f_scaled": s.v_f,
        "k_c_scaled_per_km2": k_c * KM2_DENSITY,
        "q_max_scaled_per_km_h": q_max * KMH_FLOW,
    }


# ---------------------------------------------------------------------------
# fit document: "key = value" lines, '#' comments

FIT_KEYS = ("v_f", "alpha", "k_c_analytic", "q_max_analytic", "k_c_empirical", "q_max_empirical", "r2", "rmse",
            "n_samples_used")
SCALED_KEYS = ("v_f_scaled", "k_c_scaled_per_km2", "q_max_scaled_per_km_h")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def fit_document(fit: FdFit, config: dict, scaled: dict | None = None, factors: ScaleFactors | None = None) -> str:
    lines = ["# Drake fundamental-diagram fit: q(k) = k * v_f * exp(-alpha * k)",
             "# units: k drones/m^2, q drones/(m*s), v_f m/s, alpha m^2, rmse drones/(m*s)"]
    for key in sorted(config):
        lines.append(f"{key} = {_fmt(config[key])}")
    lines.append("rmse_unit = drones/(m*s)")
    d = asdict(fit)
    for key in FIT_KEYS:
        lines.append(f"{key} = {_fmt(d[key])}")
    if scaled is not None:
        if factors is not None:
            lines.append(f"delta_eta = {_fmt(factors.delta_eta)}")
            lines.append(f"delta_v = {_fmt(factors.delta_v)}")
        for key in SCALED_KEYS:
            lines.append(f"{key} = {_fmt(scaled[key])}")
    return "\n".join(lines) + "\n"


def parse_document(text: str) -> dict:
    out = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"line {n}: expected 'key = value'")
        out[key.strip()] = value.strip()
    return out


def fit_from_document(doc: dict) -> FdFit:
    try:
        vals = {key: float(doc[key]) for key in FIT_KEYS if key != "n_samples_used"}
        return FdFit(n_samples_used=int(doc["n_samples_used"]), **vals)
    except KeyError as exc:
        raise ValueError(f"fit document lacks field {exc}") from None
