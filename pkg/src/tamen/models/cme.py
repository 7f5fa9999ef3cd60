"""Chemical master equation on a truncated copy-number box.

``dpsi/dt = A psi`` with ``A = sum_m (J^{z^m} - I) diag(w^m)``, where
``J^{z}`` shifts each species by its stoichiometric change and every
propensity ``w^m`` is a product of one-species factors. Propensities whose
reaction would leave the box are set to zero, which keeps ``e^T A = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import yaml

from .. import tt
from ..tt import TTOperator, TTVector

FACTOR_KINDS = {
    "constant": lambda i, a, b: np.full(i.shape, float(a)),
    "linear": lambda i, a, b: a * i,
    "affine": lambda i, a, b: a + b * i,
    "inverse": lambda i, a, b: a / (b + i),
    "saturating": lambda i, a, b: a * i / (b + i),
}


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Factor:
    species: int  # zero-based
    kind: str
    a: float
    b: float = 0.0

    def __post_init__(self):
        if self.kind not in FACTOR_KINDS:
            raise ModelFormatError(f"unknown propensity factor kind {self.kind!r}")

    def values(self, n: int) -> np.ndarray:
        i = np.arange(n, dtype=float)
        with np.errstate(divide="raise", invalid="raise"):
            return FACTOR_KINDS[self.kind](i, self.a, self.b)


@dataclass(frozen=True)
class Reaction:
    change: tuple
    factors: tuple
    name: str = ""

    def propensity_factors(self, sizes) -> list:
        """Per-species factor vectors, with the box boundary already applied."""
        out = [np.ones(n) for n in sizes]
        for f in self.factors:
            out[f.species] = out[f.species] * f.values(sizes[f.species])
        for k, z in enumerate(self.change):
            n = sizes[k]
            i = np.arange(n)
            out[k] = np.where((i + z >= 0) & (i + z < n), out[k], 0.0)
        return out

    def propensity(self, state) -> float:
        val = 1.0
        for f in self.factors:
            i = np.asarray([state[f.species]], dtype=float)
            val *= float(FACTOR_KINDS[f.kind](i, f.a, f.b)[0])
        return val


@dataclass
class CMEModel:
    reactions: list
    species: int
    name: str = ""
    default_sizes: tuple = ()

    @property
    def d(self):
        return self.species

    def operator(self, sizes=None, eps: float = 1e-13) -> TTOperator:
        return cme_operator(self, sizes or self.default_sizes, eps)

    def sparse_operator(self, sizes=None) -> sp.csr_matrix:
        return cme_operator_sparse(self, sizes or self.default_sizes)


def _parse_factor(raw, d):
    try:
        sp_idx = int(raw["species"])
        kind = str(raw["kind"])
        a = float(raw["a"])
        b = float(raw.get("b", 0.0))
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed propensity factor {raw!r}") from exc
    if not 1 <= sp_idx <= d:
        raise ModelFormatError(f"species {sp_idx} out of range 1..{d}")
    return Factor(sp_idx - 1, kind, a, b)


def model_from_dict(desc: dict) -> CMEModel:
    try:
        d = int(desc["species"])
        raw_reactions = list(desc["reactions"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError("model needs 'species' and 'reactions'") from exc
    if d < 1 or not raw_reactions:
        raise ModelFormatError("model needs at least one species and one reaction")
    reactions = []
    for raw in raw_reactions:
        change = [0] * d
        for key, val in dict(raw.get("change", {})).items():
            k = int(key)
            if not 1 <= k <= d:
                raise ModelFormatError(f"species {k} out of range 1..{d}")
            change[k - 1] = int(val)
        factors = tuple(_parse_factor(f, d) for f in raw.get("factors", []))
        reactions.append(Reaction(tuple(change), factors, str(raw.get("name", ""))))
    sizes = tuple(int(n) for n in desc.get("default_sizes", ()))
    if sizes and len(sizes) != d:
        raise ModelFormatError("default_sizes must list one size per species")
    return CMEModel(reactions, d, str(desc.get("name", "")), sizes)


def load_model(path) -> CMEModel:
    text = Path(path).read_text()
    return model_from_dict(yaml.safe_load(text))


def lambda_phage() -> CMEModel:
    """The bundled five-species lambda-phage switch."""
    text = resources.files("tamen.models").joinpath("data/lambda_phage.yaml").read_text()
    return model_from_dict(yaml.safe_load(text))


def shift_matrix(n: int, z: int) -> np.ndarray:
    """``J^z``: ``(J^z psi)(i) = psi(i - z)`` inside the box."""
    return np.eye(n, k=-z)


def _check_sizes(model, sizes):
    sizes = tuple(int(n) for n in sizes)
    if len(sizes) != model.species or any(n < 1 for n in sizes):
        raise ValueError(f"need {model.species} positive sizes, got {sizes}")
    return sizes


def cme_operator(model: CMEModel, sizes, eps: float = 1e-13) -> TTOperator:
    sizes = _check_sizes(model, sizes)
    terms = []
    for r in model.reactions:
        w = r.propensity_factors(sizes)
        shift = tt.kron_operator([shift_matrix(n, z) * wk[None, :]
                                  for n, z, wk in zip(sizes, r.change, w)])
        diag = tt.kron_operator([np.diag(wk) for wk in w])
        terms.append(tt.op_add(shift, tt.op_scale(diag, -1.0)))
    return tt.op_round(tt.op_sum(terms), eps)


def cme_operator_sparse(model: CMEModel, sizes) -> sp.csr_matrix:
    """The same generator as a sparse matrix (first species fastest)."""
    sizes = _check_sizes(model, sizes)
    N = int(np.prod(sizes))
    A = sp.csr_matrix((N, N))
    for r in model.reactions:
        w = r.propensity_factors(sizes)
        shift = sp.identity(1, format="csr")
        wfull = np.ones(1)
        for n, z, wk in zip(sizes, r.change, w):
            shift = sp.kron(sp.csr_matrix(shift_matrix(n, z)), shift, format="csr")
            wfull = np.kron(wk, wfull)
        A = A + (shift - sp.identity(N, format="csr")) @ sp.diags(wfull)
    return A.tocsr()


def multinomial_initial(sizes, trials: int = 3, p: float = 0.05) -> TTVector:
    """Multinomial distribution of ``trials`` draws over ``d`` species plus a remainder.

    Bond ``k`` carries the partial copy-number sum ``i_1 + ... + i_k``
    (at most ``trials``), so every rank is at most ``trials + 1``.
    """
    sizes = tuple(int(n) for n in sizes)
    d = len(sizes)
    if any(n < trials + 1 for n in sizes):
        raise ValueError(f"every size must be at least {trials + 1} to hold the support")
    q = 1.0 - d * p
    if q < 0:
        raise ValueError("species probabilities exceed one")
    S = trials + 1
    cores = []
    for k, n in enumerate(sizes):
        r0 = 1 if k == 0 else S
        r1 = 1 if k == d - 1 else S
        c = np.zeros((r0, n, r1))
        for s in range(r0):
            for i in range(min(n, trials - s + 1)):
                s1 = s + i
                val = p ** i / math.factorial(i)
                if k == d - 1:
                    rest = trials - s1
                    c[s, i, 0] = val * math.factorial(trials) * q ** rest / math.factorial(rest)
                else:
                    c[s, i, s1] = val
        cores.append(c)
    return TTVector(cores)


def index_vector(sizes, k: int) -> TTVector:
    """``i_k`` on species ``k`` times all-ones elsewhere."""
    return tt.rank_one([np.arange(n, dtype=float) if j == k else np.ones(n)
                        for j, n in enumerate(sizes)])


def index_vectors(sizes) -> list:
    return [index_vector(sizes, k) for k in range(len(sizes))]


def mean_copy_numbers(psi: TTVector, k=None):
    """``<i_k> = (i_k^* psi) / (e^* psi)``; all species when ``k`` is None."""
    sizes = psi.n
    mass = tt.dot(tt.ones(sizes), psi)
    if mass == 0:
        raise ZeroDivisionError("distribution has zero total mass")
    ks = range(len(sizes)) if k is None else [k]
    vals = [float(np.real(tt.dot(index_vector(sizes, j), psi) / mass)) for j in ks]
    return vals if k is None else vals[0]


def dense_means(psi: np.ndarray, sizes) -> list:
    """Mean copy numbers of a dense distribution (first species fastest)."""
    t = np.asarray(psi).reshape(sizes, order="F")
    mass = t.sum()
    out = []
    for k, n in enumerate(sizes):
        axes = tuple(j for j in range(len(sizes)) if j != k)
        out.append(float(np.arange(n) @ t.sum(axis=axes) / mass))
    return out
