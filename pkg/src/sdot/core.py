"""Ground types for semi-discrete transport.

A problem instance pairs a continuous source (a :class:`SamplerSpec` that can
be drawn from) with a discrete target (:class:`DiscreteMeasure`) under a cost
given by :class:`CostSpec`.  The plain (unsmoothed) per-sample dual integrand
is the discrete c-transform ``max_i phi_i - c(x, y_i)``; its subgradient in
``phi`` is the one-hot indicator of the winning atom.

All types are immutable after construction.  Samplers own their random stream
(a counter-based Philox generator), so repeated draws continue the stream and
drawing ``n`` then ``m`` points equals drawing ``n + m`` points at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "CostSpec",
    "DiscreteMeasure",
    "Potential",
    "Sampler",
    "SamplerSpec",
    "cost_matrix",
    "cost_vector",
    "derive_seed",
    "discrete_c_transform",
    "draw",
    "eval_cost",
    "make_sampler",
    "subgradient_indicator",
]

COST_KINDS = ("p-norm-power", "sup-norm")
SAMPLER_KINDS = ("gaussian-standard", "hypercube-uniform", "empirical")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class DiscreteMeasure:
    """Atoms ``y_1..y_N`` in R^d with a probability vector over them."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim != 2 or atoms.shape[0] < 1:
            raise ValueError("atoms must be a nonempty (N, d) array")
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (atoms.shape[0],):
            raise ValueError("weights length must match the number of atoms")
        if not np.all(np.isfinite(atoms)) or not np.all(np.isfinite(w)):
            raise ValueError("atoms and weights must be finite")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1 within 1e-12")
        object.__setattr__(self, "atoms", _readonly(atoms))
        object.__setattr__(self, "weights", _readonly(w))

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[0]

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    def to_json(self) -> dict:
        return {"atoms": self.atoms.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "DiscreteMeasure":
        for field in ("atoms", "weights"):
            if field not in obj:
                raise ValueError(f"measure JSON is missing field '{field}'")
        return cls(np.asarray(obj["atoms"], dtype=float), np.asarray(obj["weights"], dtype=float))


@dataclass(frozen=True)
class CostSpec:
    """Transport cost: Euclidean norm to a power, or the sup-norm."""

    kind: str
    p: float | None = None

    def __post_init__(self):
        if self.kind not in COST_KINDS:
            raise ValueError(f"cost kind must be one of {COST_KINDS}, got '{self.kind}'")
        if self.kind == "p-norm-power":
            if self.p is None or not self.p >= 1:
                raise ValueError("p-norm-power cost needs an exponent p >= 1")
        elif self.p is not None:
            raise ValueError("sup-norm cost takes no exponent")

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "p-norm-power":
            out["p"] = self.p
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "CostSpec":
        if "kind" not in obj:
            raise ValueError("cost JSON is missing field 'kind'")
        return cls(obj["kind"], p=obj.get("p"))


@dataclass(frozen=True)
class SamplerSpec:
    """Source of i.i.d. draws: standard Gaussian, unit hypercube, or empirical."""

    kind: str
    d: int | None = None
    seed: int = 0
    points: np.ndarray | None = None
    weights: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in SAMPLER_KINDS:
            raise ValueError(f"sampler kind must be one of {SAMPLER_KINDS}, got '{self.kind}'")
        if not isinstance(self.seed, (int, np.integer)):
            raise ValueError("sampler seed must be an integer")
        if self.kind == "empirical":
            if self.points is None or self.weights is None:
                raise ValueError("empirical sampler needs points and weights")
            pts = np.asarray(self.points, dtype=float)
            w = np.asarray(self.weights, dtype=float)
            if pts.ndim != 2 or pts.shape[0] != w.shape[0]:
                raise ValueError("empirical points must be (K, d) with matching weights")
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
                raise ValueError("empirical weights must form a probability vector")
            object.__setattr__(self, "points", _readonly(pts))
            object.__setattr__(self, "weights", _readonly(w))
            object.__setattr__(self, "d", pts.shape[1])
        else:
            if self.points is not None or self.weights is not None:
                raise ValueError(f"{self.kind} sampler takes no point list")
            if self.d is None or self.d < 1:
                raise ValueError("sampler dimension d must be >= 1")

    def to_json(self) -> dict:
        out = {"kind": self.kind, "seed": int(self.seed)}
        if self.kind == "empirical":
            out["points"] = self.points.tolist()
            out["weights"] = self.weights.tolist()
        else:
            out["d"] = int(self.d)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "SamplerSpec":
        if "kind" not in obj:
            raise ValueError("sampler JSON is missing field 'kind'")
        if obj["kind"] == "empirical":
            return cls(
                "empirical",
                seed=obj.get("seed", 0),
                points=np.asarray(obj["points"], dtype=float),
                weights=np.asarray(obj["weights"], dtype=float),
            )
        return cls(obj["kind"], d=obj.get("d"), seed=obj.get("seed", 0))


@dataclass(frozen=True)
class Potential:
    """Dual vector phi, one entry per atom of the paired measure."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or not np.all(np.isfinite(v)):
            raise ValueError("potential must be a finite 1-D vector")
        object.__setattr__(self, "values", _readonly(v))

    def as_array(self) -> np.ndarray:
        return self.values

    def to_json(self) -> list:
        return self.values.tolist()


def derive_seed(seed: int, *parts: int) -> int:
    """Deterministic child seed for per-run streams keyed by integer tags."""
    ss = np.random.SeedSequence([int(seed), *[int(p) for p in parts]])
    return int(ss.generate_state(1, np.uint64)[0])


class Sampler:
    """Stateful draw stream over a :class:`SamplerSpec` (single consumer)."""

    def __init__(self, spec: SamplerSpec):
        self.spec = spec
        self._rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(spec.seed))))
        if spec.kind == "empirical":
            self._cum = np.cumsum(spec.weights)

    @property
    def dim(self) -> int:
        return int(self.spec.d)

    def draw(self, n: int) -> np.ndarray:
        if n < 1:
            raise ValueError("draw count must be >= 1")
        spec = self.spec
        if spec.kind == "gaussian-standard":
            return self._rng.standard_normal((n, spec.d))
        if spec.kind == "hypercube-uniform":
            return self._rng.random((n, spec.d))
        # empirical: inverse-CDF on one uniform per draw keeps the stream
        # append-consistent regardless of batch splits
        u = self._rng.random(n)
        idx = np.minimum(np.searchsorted(self._cum, u, side="right"), len(self._cum) - 1)
        return spec.points[idx]


def make_sampler(spec: SamplerSpec) -> Sampler:
    return Sampler(spec)


def draw(sampler: Sampler | SamplerSpec, n: int) -> np.ndarray:
    """Draw ``n`` points. A spec starts a fresh stream; a Sampler continues its own."""
    if isinstance(sampler, SamplerSpec):
        sampler = Sampler(sampler)
    return sampler.draw(n)


def _as_phi(phi, n: int) -> np.ndarray:
    v = phi.values if isinstance(phi, Potential) else np.asarray(phi, dtype=float)
    if v.shape != (n,):
        raise ValueError(f"potential has length {v.shape}, measure has {n} atoms")
    if not np.all(np.isfinite(v)):
        raise ValueError("potential entries must be finite")
    return v


def eval_cost(x, y, spec: CostSpec) -> float:
    """Cost between two points: ``|x - y|_2^p`` or ``|x - y|_inf``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"point dimensions differ: {x.shape} vs {y.shape}")
    d = x - y
    if spec.kind == "sup-norm":
        return float(np.max(np.abs(d)))
    return float(np.linalg.norm(d) ** spec.p)


def cost_matrix(X: np.ndarray, Y: np.ndarray, spec: CostSpec) -> np.ndarray:
    """All pairwise costs, shape (len(X), len(Y))."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"point dimensions differ: {X.shape[1]} vs {Y.shape[1]}")
    diff = X[:, None, :] - Y[None, :, :]
    if spec.kind == "sup-norm":
        return np.abs(diff).max(axis=2)
    sq = np.einsum("mnd,mnd->mn", diff, diff)
    if spec.p == 2.0:
        return sq
    return sq ** (spec.p / 2.0)


def cost_vector(x, atoms: np.ndarray, spec: CostSpec) -> np.ndarray:
    return cost_matrix(np.asarray(x, dtype=float)[None, :], atoms, spec)[0]


def discrete_c_transform(phi, x, nu: DiscreteMeasure, c: CostSpec) -> tuple[float, int]:
    """Value and winning atom of ``max_i phi_i - c(x, y_i)``.

    Ties break to the smallest index; every downstream consumer relies on
    that rule being deterministic.
    """
    v = _as_phi(phi, nu.n_atoms)
    u = v - cost_vector(x, nu.atoms, c)
    winner = int(np.argmax(u))  # argmax returns the first maximizer
    return float(u[winner]), winner


def subgradient_indicator(phi, x, nu: DiscreteMeasure, c: CostSpec) -> np.ndarray:
    """One-hot subgradient of the c-transform at the winning atom."""
    _, winner = discrete_c_transform(phi, x, nu, c)
    p = np.zeros(nu.n_atoms)
    p[winner] = 1.0
    return p
