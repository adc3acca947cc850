"""Exact enumeration at small N with Monte Carlo over the disorder.

Configurations are indexed by integers: bit i of the index a gives
sigma_i = 1 - 2 * bit, so the overlap of a and b is 1 - 2 popcount(a ^ b) / N.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from .errors import CapacityError, InvalidArgumentError
from .mixture import MixtureSpec
from .rsb import FieldSpec

MAX_N_SINGLE = 20
MAX_N_COUPLED = 12
SNAP_TOL = 1e-9
_CHUNK = 1 << 21
FINITE_SIZE_NOTE = (
    "exact enumeration at small N; finite-size effects can be large and only "
    "qualitative trends are meaningful"
)


@dataclass(frozen=True)
class SimConfig:
    spec: MixtureSpec
    field: FieldSpec = dc_field(default_factory=FieldSpec)
    N: int = 8
    t: float = 1.0
    n_disorder: int = 100
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if not 1 <= self.N:
            raise InvalidArgumentError("N must be >= 1")
        if self.N > MAX_N_SINGLE:
            raise CapacityError(f"N={self.N} exceeds single-system capacity {MAX_N_SINGLE}")
        if not 0.0 <= self.t <= 1.0:
            raise InvalidArgumentError("t must lie in [0, 1]")
        if self.n_disorder < 1:
            raise InvalidArgumentError("n_disorder must be >= 1")
        if self.threads < 1:
            raise InvalidArgumentError("threads must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise InvalidArgumentError("seed must be an unsigned 64-bit integer")

    def require_coupled(self):
        if self.N > MAX_N_COUPLED:
            raise CapacityError(f"N={self.N} exceeds coupled capacity {MAX_N_COUPLED}")

    def to_dict(self):
        return {
            "mixture": self.spec.to_pairs(),
            "field": self.field.to_dict(),
            "N": self.N,
            "t": self.t,
            "n_disorder": self.n_disorder,
            "seed": self.seed,
            "threads": self.threads,
        }


@dataclass
class SimResult:
    estimate: float
    stderr: float
    n_disorder: int
    table: list | None = None
    info: dict = dc_field(default_factory=dict)

    def to_dict(self):
        d = {"estimate": self.estimate, "stderr": self.stderr, "n_disorder": self.n_disorder}
        if self.table is not None:
            d["table"] = self.table
        d.update(self.info)
        return d


# -- configurations ----------------------------------------------------------


@lru_cache(maxsize=8)
def spins(N: int) -> np.ndarray:
    """(2^N, N) array of +-1 spins in index order."""
    a = np.arange(1 << N)
    s = 1 - 2 * ((a[:, None] >> np.arange(N)) & 1)
    s = s.astype(float)
    s.setflags(write=False)
    return s


@lru_cache(maxsize=8)
def popcounts(N: int) -> np.ndarray:
    a = np.arange(1 << N)
    pc = np.zeros(1 << N, dtype=np.int64)
    for i in range(N):
        pc += (a >> i) & 1
    pc.setflags(write=False)
    return pc


def lattice(N: int) -> np.ndarray:
    """Overlap values -1 + 2j/N, j = 0..N."""
    return -1.0 + 2.0 * np.arange(N + 1) / N


def snap_to_lattice(u: float, N: int):
    """Nearest lattice overlap, its Hamming distance and the snap flag."""
    j = int(np.clip(np.rint((u + 1.0) * N / 2.0), 0, N))
    u_lat = -1.0 + 2.0 * j / N
    return u_lat, N - j, abs(u_lat - u) > SNAP_TOL


# -- disorder ----------------------------------------------------------------


def sample_couplings(spec: MixtureSpec, N: int, rng):
    """Independent Gaussian p-tensors, one per power, shape (N,)*p."""
    return {p: rng.standard_normal((N,) * p) for p, w in spec.coeffs if w > 0}


def energies(spec: MixtureSpec, couplings, N: int) -> np.ndarray:
    """H(sigma) = sum_p sqrt(w_p) N^{(1-p)/2} sum g sigma...sigma for every sigma."""
    S = spins(N)
    H = np.zeros(S.shape[0])
    weights = dict(spec.coeffs)
    for p, g in couplings.items():
        r = p // 2
        G = g.reshape(N**r, N**r)
        amp = np.sqrt(weights[p]) * N ** ((1 - p) / 2)
        for start in range(0, S.shape[0], max(1, _CHUNK // N**r)):
            blk = S[start:start + max(1, _CHUNK // N**r)]
            T = blk
            for _ in range(r - 1):
                T = (T[:, :, None] * blk[:, None, :]).reshape(blk.shape[0], -1)
            H[start:start + blk.shape[0]] += amp * np.einsum("ij,ij->i", T @ G, T)
    return H


def _streams(seed, idx):
    return [np.random.default_rng([seed, idx, j]) for j in range(4)]


def sample_correlated_hamiltonians(spec: MixtureSpec, N: int, t: float, rng):
    """H^j = sqrt(t) H^0 + sqrt(1-t) H^{j,ind}, three independent copies.

    ``rng`` is a generator or a sequence of three generators (one per copy).
    """
    if N > MAX_N_SINGLE:
        raise CapacityError(f"N={N} exceeds capacity {MAX_N_SINGLE}")
    if not 0.0 <= t <= 1.0:
        raise InvalidArgumentError("t must lie in [0, 1]")
    gens = rng if isinstance(rng, (list, tuple)) else [rng, rng, rng]
    H0 = energies(spec, sample_couplings(spec, N, gens[0]), N)
    H1 = energies(spec, sample_couplings(spec, N, gens[1]), N)
    H2 = energies(spec, sample_couplings(spec, N, gens[2]), N)
    a, b = np.sqrt(t), np.sqrt(1.0 - t)
    if t == 1.0:
        return H0.copy(), H0.copy()
    return a * H0 + b * H1, a * H0 + b * H2


def _sample_exponents(cfg: SimConfig, idx: int, coupled: bool):
    """Log Gibbs weights -H^j(sigma) + sum_i h_i sigma_i for one disorder draw."""
    g = _streams(cfg.seed, idx)
    h = cfg.field.sample(g[3], cfg.N)
    ext = spins(cfg.N) @ h
    if not coupled:
        H = energies(cfg.spec, sample_couplings(cfg.spec, cfg.N, g[0]), cfg.N)
        return -H + ext
    H1, H2 = sample_correlated_hamiltonians(cfg.spec, cfg.N, cfg.t, g[:3])
    return -H1 + ext, -H2 + ext


def _map(cfg: SimConfig, fn):
    idx = range(cfg.n_disorder)
    if cfg.threads == 1:
        return [fn(i) for i in idx]
    with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
        return list(ex.map(fn, idx))


def _mean_stderr(vals):
    vals = np.asarray(vals, dtype=float)
    n = vals.shape[0]
    mean = np.sum(vals, axis=0) / n
    if n < 2:
        return mean, np.zeros_like(mean)
    return mean, np.std(vals, axis=0, ddof=1) / np.sqrt(n)


# -- single system -----------------------------------------------------------


def log_partition(a) -> float:
    return float(logsumexp(a))


def exact_free_energy(cfg: SimConfig) -> SimResult:
    """(1/N) E log Z_N by enumeration of all 2^N configurations."""
    vals = _map(cfg, lambda i: log_partition(_sample_exponents(cfg, i, False)) / cfg.N)
    mean, se = _mean_stderr(vals)
    return SimResult(float(mean), float(se), cfg.n_disorder, None, {"note": FINITE_SIZE_NOTE})


def gray_code_energies(spec: MixtureSpec, couplings, N: int) -> np.ndarray:
    """Energies via a Gray-code sweep with local-field updates.

    The quadratic part is updated incrementally one spin flip at a time;
    higher powers are added by direct evaluation. Returned in index order.
    """
    weights = dict(spec.coeffs)
    out = np.zeros(1 << N)
    rest = {p: g for p, g in couplings.items() if p != 2}
    if rest:
        out += energies(spec, rest, N)
    if 2 not in couplings:
        return out
    amp = np.sqrt(weights[2]) / np.sqrt(N)
    J = couplings[2] + couplings[2].T
    np.fill_diagonal(J, 0.0)
    sigma = np.ones(N)
    idx = 0
    e = amp * couplings[2].sum()
    field = J @ sigma
    out[0] += e
    for step in range(1, 1 << N):
        i = (step & -step).bit_length() - 1
        # H changes by -2 sigma_i (J sigma)_i amp; the diagonal is invariant
        e -= 2.0 * amp * sigma[i] * field[i]
        sigma[i] = -sigma[i]
        field += 2.0 * sigma[i] * J[:, i]
        idx ^= 1 << i
        out[idx] += e
    return out


# -- coupled system ----------------------------------------------------------


def pair_shell_logsums(a1, a2, N: int) -> np.ndarray:
    """log sum over pairs at each Hamming distance d of exp(a1[s1] + a2[s2])."""
    pc = popcounts(N)
    M = 1 << N
    shift = a1.max() + a2.max()
    b1 = np.exp(a1 - a1.max())
    b2 = np.exp(a2 - a2.max())
    sums = np.zeros(N + 1)
    rows = max(1, _CHUNK // M)
    ids = np.arange(M)
    for start in range(0, M, rows):
        r = ids[start:start + rows]
        D = pc[r[:, None] ^ ids[None, :]]
        W = b1[r, None] * b2[None, :]
        sums += np.bincount(D.ravel(), weights=W.ravel(), minlength=N + 1)
    out = np.full(N + 1, -np.inf)
    ok = sums > 0
    out[ok] = shift + np.log(sums[ok])
    for d in np.flatnonzero(~ok):
        out[d] = _shell_direct(a1, a2, N, d)
    return out


def _shell_direct(a1, a2, N, d):
    pc = popcounts(N)
    ids = np.arange(1 << N)
    terms = []
    for s1 in ids:
        partners = ids[pc[s1 ^ ids] == d]
        terms.append(logsumexp(a1[s1] + a2[partners]))
    return float(logsumexp(terms))


def _coupled_shells(cfg: SimConfig, i: int) -> np.ndarray:
    a1, a2 = _sample_exponents(cfg, i, True)
    return pair_shell_logsums(a1, a2, cfg.N)


def constrained_scan(cfg: SimConfig, us) -> list:
    """p_{u,N} for several u from one pass over the disorder."""
    cfg.require_coupled()
    snaps = [snap_to_lattice(float(u), cfg.N) for u in us]
    shells = np.array(_map(cfg, lambda i: _coupled_shells(cfg, i)))
    out = []
    for u, (u_lat, d, flag) in zip(us, snaps):
        mean, se = _mean_stderr(shells[:, d] / cfg.N)
        out.append(SimResult(float(mean), float(se), cfg.n_disorder, None, {
            "u_requested": float(u), "u_lattice": u_lat, "snapped": bool(flag),
            "note": FINITE_SIZE_NOTE,
        }))
    return out


def constrained_coupled_free_energy(cfg: SimConfig, u: float) -> SimResult:
    """(1/N) E log of the coupled partition function restricted to R_{1,2} = u."""
    return constrained_scan(cfg, [u])[0]


def _overlap_masses(cfg: SimConfig, i: int) -> np.ndarray:
    """Gibbs masses of each lattice overlap, ordered by increasing r."""
    a1, a2 = _sample_exponents(cfg, i, True)
    sh = pair_shell_logsums(a1, a2, cfg.N)
    logz = logsumexp(a1) + logsumexp(a2)
    mass = np.exp(sh - logz)[::-1]
    return mass / mass.sum()


def overlap_distribution(cfg: SimConfig) -> SimResult:
    """E G'_N(R_{1,2} = r) on the lattice, with the mean overlap as estimate."""
    cfg.require_coupled()
    masses = np.array(_map(cfg, lambda i: _overlap_masses(cfg, i)))
    r = lattice(cfg.N)
    mean, se = _mean_stderr(masses)
    m_mean, m_se = _mean_stderr(masses @ r)
    table = [{"r": float(rv), "mass": float(mv), "stderr": float(sv)} for rv, mv, sv in zip(r, mean, se)]
    return SimResult(float(m_mean), float(m_se), cfg.n_disorder, table, {"note": FINITE_SIZE_NOTE})


def mass_near(result: SimResult, center: float, half_width: float) -> float:
    """Total table mass within ``half_width`` of ``center``."""
    return float(sum(row["mass"] for row in result.table if abs(row["r"] - center) <= half_width + 1e-12))
