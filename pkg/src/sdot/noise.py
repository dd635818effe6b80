"""Marginal perturbation families and smoothed max operators.

A marginal family is described by a generating curve F (a nondecreasing
function used through shifted, weighted copies), one per atom of the target
measure. Smoothing the discrete max through such a family is equivalent to
penalizing choice probabilities on the simplex with an f-divergence whose
generator is the running integral of the quantile of F. This module carries
both views: the analytic one (cdf/quantile/divergence evaluations) and the
operational one (choice probabilities and smoothed transform values, via
closed forms where available and a guarded bisection elsewhere).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import CostSpec, DiscreteMeasure, cost_vector

MODEL_KINDS = ("exponential", "uniform", "pareto", "hyperbolic", "tdist")

# shift that normalizes the sinh family so its divergence generator
# vanishes at 1: sqrt(2) - 1 - arcsinh(1)
HYPERBOLIC_OFFSET = math.sqrt(2.0) - 1.0 - math.asinh(1.0)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MarginalModel:
    """Noise family attached to the atoms of a target measure.

    Parameters
    ----------
    kind : str
        One of ``exponential``, ``uniform``, ``pareto``, ``hyperbolic``,
        ``tdist``.
    lam : float
        Scale of the perturbation, strictly positive.
    eta : array_like
        Per-atom weights, strictly positive, summing to one.
    q : float, optional
        Tail exponent, required for (and only for) the ``pareto`` kind;
        any positive value except 1. ``q=2`` reproduces the uniform kind.
    """

    kind: str
    lam: float
    eta: np.ndarray
    q: float | None = None

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown marginal model kind: {self.kind!r}")
        lam = float(self.lam)
        if not np.isfinite(lam) or lam <= 0.0:
            raise ValueError("lam must be a positive finite number")
        object.__setattr__(self, "lam", lam)
        eta = np.asarray(self.eta, dtype=float)
        if eta.ndim != 1 or eta.size == 0:
            raise ValueError("eta must be a nonempty 1-d array")
        if not np.all(np.isfinite(eta)) or np.any(eta <= 0.0):
            raise ValueError("eta entries must be positive and finite")
        if abs(eta.sum() - 1.0) > 1e-9:
            raise ValueError("eta must sum to one")
        object.__setattr__(self, "eta", _readonly(eta))
        if self.kind == "pareto":
            if self.q is None:
                raise ValueError("pareto kind requires the exponent q")
            q = float(self.q)
            if not np.isfinite(q) or q <= 0.0 or q == 1.0:
                raise ValueError("pareto exponent q must be positive and != 1")
            object.__setattr__(self, "q", q)
        elif self.q is not None:
            raise ValueError(f"kind {self.kind!r} does not take an exponent q")

    @property
    def n(self) -> int:
        return self.eta.size

    def to_json(self) -> dict:
        out = {"kind": self.kind, "lambda": self.lam, "eta": self.eta.tolist()}
        if self.q is not None:
            out["q"] = self.q
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "MarginalModel":
        for key in ("kind", "lambda", "eta"):
            if key not in obj:
                raise ValueError(f"marginal model JSON is missing {key!r}")
        return cls(obj["kind"], float(obj["lambda"]),
                   np.asarray(obj["eta"], dtype=float), q=obj.get("q"))


# ------------------------------------------------------------------ curves

def _cdf_extended(model: MarginalModel, z):
    """Generating cdf extended monotonically to the whole line.

    Outside the natural domain the pareto branches continue with 0 (q > 1)
    and +inf (q < 1); the other kinds evaluate everywhere as written.
    """
    z = np.asarray(z, dtype=float)
    lam = model.lam
    with np.errstate(over="ignore"):
        if model.kind == "exponential":
            return np.exp(z / lam - 1.0)
        if model.kind == "uniform":
            return z / (2.0 * lam) + 0.5
        if model.kind == "hyperbolic":
            return np.sinh(z / lam - HYPERBOLIC_OFFSET)
        if model.kind == "tdist":
            n = model.n
            v = z - lam * math.sqrt(n - 1.0)
            return 0.5 * n * (1.0 + v / np.sqrt(lam * lam + v * v))
        q = model.q
        base = z * (q - 1.0) / (lam * q) + 1.0 / q
        if q > 1.0:
            return np.where(base > 0.0, np.maximum(base, 0.0) ** (1.0 / (q - 1.0)), 0.0)
        with np.errstate(divide="ignore"):
            return np.where(base > 0.0, np.maximum(base, 1e-300) ** (1.0 / (q - 1.0)), np.inf)


def generating_cdf(model: MarginalModel, s):
    """Evaluate the generating cdf F on its natural domain."""
    s = np.asarray(s, dtype=float)
    if model.kind == "pareto":
        base = s * (model.q - 1.0) / (model.lam * model.q) + 1.0 / model.q
        if np.any(base < 0.0):
            raise ValueError("argument outside the pareto generating domain")
    out = _cdf_extended(model, s)
    return float(out) if out.ndim == 0 else out


def generating_quantile(model: MarginalModel, t):
    """Inverse of the generating cdf, for t > 0 (and t < n for tdist)."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0.0) or not np.all(np.isfinite(t)):
        raise ValueError("quantile argument must be strictly positive")
    lam = model.lam
    if model.kind == "exponential":
        out = lam * (1.0 + np.log(t))
    elif model.kind == "uniform":
        out = lam * (2.0 * t - 1.0)
    elif model.kind == "hyperbolic":
        out = lam * (np.arcsinh(t) + HYPERBOLIC_OFFSET)
    elif model.kind == "tdist":
        n = model.n
        if np.any(t >= n):
            raise ValueError("tdist quantile argument must be below the atom count")
        out = lam * math.sqrt(n - 1.0) + lam * (2.0 * t - n) / (2.0 * np.sqrt(t * (n - t)))
    else:
        q = model.q
        out = lam * (q * t ** (q - 1.0) - 1.0) / (q - 1.0)
    return float(out) if out.ndim == 0 else out


def marginal_cdf(model: MarginalModel, i: int, s: float) -> float:
    """Cdf of the i-th marginal perturbation: clip(1 - eta_i F(-s)) to [0, 1]."""
    val = 1.0 - model.eta[i] * _cdf_extended(model, -float(s))
    return float(np.clip(val, 0.0, 1.0))


def marginal_quantile(model: MarginalModel, i: int, t: float) -> float:
    """Quantile of the i-th marginal perturbation at level t in (0, 1)."""
    t = float(t)
    if not 0.0 < t < 1.0:
        raise ValueError("marginal quantile level must lie in (0, 1)")
    return -float(generating_quantile(model, (1.0 - t) / model.eta[i]))


# -------------------------------------------------------------- divergence

def _f_value(model: MarginalModel, s):
    """Divergence generator: integral of the generating quantile from 0 to s."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0.0):
        raise ValueError("divergence generator argument must be nonnegative")
    lam = model.lam
    if model.kind == "exponential":
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(s > 0.0, lam * s * np.log(np.maximum(s, 1e-300)), 0.0)
    elif model.kind == "uniform":
        out = lam * (s * s - s)
    elif model.kind == "hyperbolic":
        out = lam * (s * np.arcsinh(s) - np.sqrt(s * s + 1.0) + 1.0 + HYPERBOLIC_OFFSET * s)
    elif model.kind == "tdist":
        n = model.n
        inside = s <= n
        sc = np.minimum(s, float(n))
        out = np.where(inside,
                       lam * (s * math.sqrt(n - 1.0) - np.sqrt(sc * (n - sc))),
                       np.inf)
    else:
        q = model.q
        out = lam * (s ** q - s) / (q - 1.0)
    return float(out) if out.ndim == 0 else out


def divergence_generator_value(model: MarginalModel, s):
    return _f_value(model, s)


class DivergenceGenerator:
    """Callable view of the divergence generator f and its derivative."""

    def __init__(self, model: MarginalModel):
        self.model = model

    def value(self, s):
        return _f_value(self.model, s)

    def derivative(self, s):
        return generating_quantile(self.model, s)


def discrete_f_divergence(model: MarginalModel, p) -> float:
    """f-divergence of a simplex point p against the model weights eta."""
    p = np.asarray(p, dtype=float)
    if p.shape != (model.n,):
        raise ValueError("p must have one entry per atom")
    if np.any(p < -1e-12):
        raise ValueError("p entries must be nonnegative")
    p = np.maximum(p, 0.0)
    return float(np.sum(model.eta * _f_value(model, p / model.eta)))


def _f_divergence_rows(model: MarginalModel, P: np.ndarray) -> np.ndarray:
    return np.sum(model.eta[None, :] * _f_value(model, P / model.eta[None, :]), axis=1)


# ------------------------------------------------------------ probabilities

@dataclass(frozen=True)
class ChoiceProbabilities:
    """Choice probability vector with its computation route and mass slack.

    ``tol`` bounds how far the entries may fall short of summing to one;
    closed-form routes report 0.
    """

    p: np.ndarray
    method: str
    tol: float

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 1 or not np.all(np.isfinite(p)):
            raise ValueError("probabilities must be a finite 1-d array")
        if np.any(p < -1e-12):
            raise ValueError("probabilities must be nonnegative")
        p = np.maximum(p, 0.0)
        if abs(p.sum() - 1.0) > max(float(self.tol), 1e-10):
            raise ValueError("probabilities must sum to one within tol")
        object.__setattr__(self, "p", _readonly(p))
        object.__setattr__(self, "tol", float(self.tol))


def softmax_probs(u, eta, lam: float) -> ChoiceProbabilities:
    """Weighted softmax with max-shift stabilization."""
    u = np.asarray(u, dtype=float)
    eta = np.asarray(eta, dtype=float)
    z = u / lam
    w = eta * np.exp(z - np.max(z))
    return ChoiceProbabilities(w / w.sum(), "closed-form", 0.0)


def sparsemax_probs(v, eta) -> ChoiceProbabilities:
    """Maximize sum(v*p) - sum(p^2/eta) over the simplex by support sorting."""
    v = np.asarray(v, dtype=float)
    eta = np.asarray(eta, dtype=float)
    order = np.argsort(-v, kind="stable")
    vs, es = v[order], eta[order]
    ce = np.cumsum(es)
    cu = np.cumsum(es * vs)
    keep = 2.0 + ce * vs > cu
    k = int(np.max(np.nonzero(keep)[0]))
    tau = (cu[k] - 2.0) / ce[k]
    p = np.maximum(eta * (v - tau), 0.0) / 2.0
    return ChoiceProbabilities(p, "sort", 0.0)


def _clip_probs(model: MarginalModel, Z: np.ndarray) -> np.ndarray:
    return np.clip(model.eta[None, :] * _cdf_extended(model, Z), 0.0, 1.0)


def _mass_at_tau(u, model: MarginalModel, tau: float) -> float:
    u = np.asarray(u, dtype=float)
    return float(_clip_probs(model, (u + tau)[None, :]).sum())


def marginal_lipschitz(model: MarginalModel) -> float | None:
    """Largest slope any marginal cdf can attain; None when unbounded."""
    lam, eta = model.lam, model.eta
    if model.kind == "exponential":
        return 1.0 / lam
    if model.kind == "uniform":
        return float(np.max(eta)) / (2.0 * lam)
    if model.kind == "hyperbolic":
        return math.sqrt(1.0 + float(np.max(eta)) ** 2) / lam
    if model.kind == "tdist":
        return float(np.max(eta)) * model.n / (2.0 * lam)
    q = model.q
    if q > 2.0:
        return None
    return float(np.max(eta ** (q - 1.0))) / (lam * q)


def bisection_delta(model: MarginalModel, eps: float) -> float:
    """Bracket width that makes the bisection output eps-accurate in l2."""
    rootn = math.sqrt(model.n)
    lip = marginal_lipschitz(model)
    if lip is not None:
        return eps / (lip * rootn)
    # unbounded slope: use the Holder continuity of the pareto branch
    q = model.q
    return (model.lam * q / (q - 1.0)) * (eps / (rootn * float(np.max(model.eta)))) ** (q - 1.0)


def _bisection_batch(U: np.ndarray, model: MarginalModel, eps: float) -> np.ndarray:
    m, n = U.shape
    if n == 1:
        return np.ones((m, 1))
    try:
        qvec = generating_quantile(model, (1.0 / n) / model.eta)
    except ValueError as exc:
        raise ValueError(f"bisection bracket is not finite for this model: {exc}") from exc
    nodes = qvec[None, :] - U
    lo = nodes.min(axis=1)
    hi = nodes.max(axis=1)
    delta = bisection_delta(model, eps)
    width = hi - lo
    steps = np.zeros(m, dtype=int)
    pos = width > delta
    steps[pos] = np.ceil(np.log2(width[pos] / delta)).astype(int)
    for k in range(int(steps.max(initial=0))):
        active = steps > k
        mid = 0.5 * (lo + hi)
        mass = _clip_probs(model, U + mid[:, None]).sum(axis=1)
        go_hi = active & (mass > 1.0)
        go_lo = active & ~(mass > 1.0)
        hi = np.where(go_hi, mid, hi)
        lo = np.where(go_lo, mid, lo)
    return _clip_probs(model, U + lo[:, None])


def bisection_probs(u, model: MarginalModel, eps: float) -> ChoiceProbabilities:
    """Choice probabilities by bisecting the scalar mass balance.

    Parameters
    ----------
    u : array_like
        Utility vector, one entry per atom.
    model : MarginalModel
        Any of the five kinds; closed-form kinds are accepted too.
    eps : float
        Target l2 accuracy of the returned vector; must be positive. The
        entries may undersum one by at most sqrt(n) * eps.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim != 1 or u.size != model.n or not np.all(np.isfinite(u)):
        raise ValueError("u must be a finite vector with one entry per atom")
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    p = _bisection_batch(u[None, :], model, eps)[0]
    return ChoiceProbabilities(p, "bisection", math.sqrt(model.n) * eps)


def probs_from_utilities(u, model: MarginalModel, eps: float | None = None) -> ChoiceProbabilities:
    """Dispatch on the model kind: closed form when known, else bisection."""
    u = np.asarray(u, dtype=float)
    if model.kind == "exponential":
        return softmax_probs(u, model.eta, model.lam)
    if model.kind == "uniform":
        return sparsemax_probs(u / model.lam, model.eta)
    if eps is None:
        raise ValueError(f"model kind {model.kind!r} needs an accuracy eps for bisection")
    return bisection_probs(u, model, eps)


def _utilities(phi, x, nu: DiscreteMeasure, c: CostSpec) -> np.ndarray:
    phi = np.asarray(phi, dtype=float).reshape(-1)
    if phi.size != nu.n_atoms or not np.all(np.isfinite(phi)):
        raise ValueError("phi must be a finite vector with one entry per atom")
    return phi - cost_vector(x, nu.atoms, c)


def choice_probabilities(phi, x, nu: DiscreteMeasure, c: CostSpec, model: MarginalModel,
                         eps: float | None = None) -> ChoiceProbabilities:
    """Smoothed argmax weights of phi_i - c(x, y_i) under the noise model.

    Parameters
    ----------
    phi : array_like
        Potential vector over the atoms of ``nu``.
    x : array_like
        Source point.
    nu : DiscreteMeasure
        Target measure; its atoms set the utilities.
    c : CostSpec
        Ground cost.
    model : MarginalModel
        Noise family; its weights must match the atom count.
    eps : float, optional
        Accuracy for kinds solved by bisection; ignored by closed forms.
    """
    if model.n != nu.n_atoms:
        raise ValueError("model weights and measure atoms disagree in length")
    return probs_from_utilities(_utilities(phi, x, nu, c), model, eps=eps)


# --------------------------------------------------------------- transforms

def utilities_values_probs(U: np.ndarray, model: MarginalModel | None,
                           eps: float | None = None):
    """Smoothed transform values and probabilities for rows of utilities.

    With ``model=None`` this is the plain max with one-hot rows (first
    maximizer on ties). Returns ``(values, P)`` with one row per input row.
    """
    U = np.asarray(U, dtype=float)
    m, n = U.shape
    if model is None:
        win = np.argmax(U, axis=1)
        vals = U[np.arange(m), win]
        P = np.zeros_like(U)
        P[np.arange(m), win] = 1.0
        return vals, P
    if model.n != n:
        raise ValueError("model weights and utility columns disagree in length")
    lam, eta = model.lam, model.eta
    if model.kind == "exponential":
        Z = U / lam
        mx = Z.max(axis=1)
        W = eta[None, :] * np.exp(Z - mx[:, None])
        s = W.sum(axis=1)
        return lam * (mx + np.log(s)), W / s[:, None]
    if model.kind == "uniform":
        V = U / lam
        order = np.argsort(-V, axis=1, kind="stable")
        vs = np.take_along_axis(V, order, axis=1)
        es = eta[order]
        ce = np.cumsum(es, axis=1)
        cu = np.cumsum(es * vs, axis=1)
        keep = 2.0 + ce * vs > cu
        k = n - 1 - np.argmax(keep[:, ::-1], axis=1)
        rows = np.arange(m)
        tau = (cu[rows, k] - 2.0) / ce[rows, k]
        P = np.maximum(eta[None, :] * (V - tau[:, None]), 0.0) / 2.0
        # folded quadratic form of the maximand at the sorted solution
        vals = lam * (1.0 + (V * P).sum(axis=1) - (P * P / eta[None, :]).sum(axis=1))
        return vals, P
    if eps is None:
        raise ValueError(f"model kind {model.kind!r} needs an accuracy eps for bisection")
    P = _bisection_batch(U, model, eps)
    # evaluate the maximand at the nearest simplex point so the value
    # error stays quadratic in eps and never exceeds the plain max
    pad = P + eta[None, :] * (1.0 - P.sum(axis=1))[:, None]
    if model.kind == "tdist":
        pad = np.minimum(pad, eta[None, :] * model.n)
    vals = (U * pad).sum(axis=1) - _f_divergence_rows(model, pad)
    return vals, P


def smooth_c_transform(phi, x, nu: DiscreteMeasure, c: CostSpec,
                       model: MarginalModel | None, eps: float | None = None) -> float:
    """Smoothed conjugate of the potential at a source point.

    Replaces max_i of phi_i - c(x, y_i) with its noise-smoothed value;
    ``model=None`` gives the plain max.

    Parameters
    ----------
    phi, x, nu, c
        As in :func:`choice_probabilities`.
    model : MarginalModel or None
        Noise family, or None for the unsmoothed transform.
    eps : float, optional
        Accuracy for kinds solved by bisection.
    """
    u = _utilities(phi, x, nu, c)
    vals, _ = utilities_values_probs(u[None, :], model, eps=eps)
    return float(vals[0])


def approximation_bound(model: MarginalModel) -> float:
    """Worst-case gap between the plain and smoothed transforms."""
    with np.errstate(invalid="ignore"):
        vals = model.eta * _f_value(model, 1.0 / model.eta)
    return float(np.max(vals))


def self_concordance_bound(model: MarginalModel) -> float | None:
    """Constant in the |h'''| <= M h'' bound along the scalar root map."""
    if model.kind in ("exponential", "hyperbolic"):
        return 1.0 / model.lam
    if model.kind == "uniform":
        return 0.0
    if model.kind == "tdist":
        return 1.5 / model.lam
    return 0.0 if model.q == 2.0 else None


# -------------------------------------------------- jacobian and chebyshev

def choice_jacobian(u, model: MarginalModel, eps: float = 1e-9) -> np.ndarray:
    """Jacobian of the choice probabilities in the utilities.

    Valid where the optimum keeps every coordinate off the boundary; on
    boundary coordinates a one-sided zero slope is used.
    """
    p = probs_from_utilities(u, model, eps=eps).p
    lam, eta = model.lam, model.eta
    if model.kind == "exponential":
        g = p / lam
    elif model.kind == "uniform":
        g = np.where(p > 0.0, eta / (2.0 * lam), 0.0)
    elif model.kind == "hyperbolic":
        g = np.where(p > 0.0, np.sqrt(eta * eta + p * p) / lam, 0.0)
    elif model.kind == "tdist":
        a = p / (eta * model.n)
        g = eta * model.n * np.clip(4.0 * a * (1.0 - a), 0.0, None) ** 1.5 / (2.0 * lam)
    else:
        with np.errstate(divide="ignore"):
            g = np.where(p > 0.0, eta * (p / eta) ** (2.0 - model.q), 0.0) / (lam * model.q)
    total = g.sum()
    if total <= 0.0:
        return np.zeros((model.n, model.n))
    return np.diag(g) - np.outer(g, g) / total


def project_to_simplex(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    v = np.asarray(v, dtype=float)
    sv = np.sort(v)[::-1]
    css = np.cumsum(sv)
    idx = np.arange(1, v.size + 1)
    rho = int(np.max(np.nonzero(sv + (1.0 - css) / idx > 0.0)[0]))
    tau = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - tau, 0.0)


def _cheb_objective(u: np.ndarray, lam: float, p: np.ndarray) -> float:
    return float(u @ p + lam * np.sum(np.sqrt(np.clip(p * (1.0 - p), 0.0, None))))


def chebyshev_value(u, lam: float, tol: float = 1e-8, max_iter: int = 20000) -> float:
    """Maximize sum(u*p) + lam * sum(sqrt(p(1-p))) over the simplex.

    Projected gradient ascent with backtracking; the optimum is interior
    for finite utilities so the clipped gradient is exact near the solution.
    """
    u = np.asarray(u, dtype=float)
    n = u.size
    if n == 1:
        return float(u[0])
    p = np.full(n, 1.0 / n)
    val = _cheb_objective(u, lam, p)
    step = 1.0
    stall = 0
    for _ in range(max_iter):
        pc = np.clip(p, 1e-15, 1.0 - 1e-15)
        g = u + lam * (1.0 - 2.0 * pc) / (2.0 * np.sqrt(pc * (1.0 - pc)))
        s = step
        cand = cval = None
        while s >= 1e-18:
            trial = project_to_simplex(p + s * g)
            tval = _cheb_objective(u, lam, trial)
            if tval > val:
                cand, cval = trial, tval
                break
            s *= 0.5
        if cand is None:
            break
        gain = cval - val
        p, val = cand, cval
        step = min(s * 2.0, 1e6)
        if gain < tol * 1e-4:
            stall += 1
            if stall >= 10:
                break
        else:
            stall = 0
    return val
