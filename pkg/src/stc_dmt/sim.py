"""Monte Carlo error rates over the quasi-static Rayleigh channel.

The received block is ``Y = sqrt(g) H X + N``. ``g`` is the SNR ``rho``,
or ``rho / n_t`` when ``drop_nt_normalization`` is off. ``H`` and ``N``
have i.i.d. unit-variance circular complex Gaussian entries.

Randomness is counter based. Trials are grouped into chunks of
``CHUNK_TRIALS`` consecutive indices. Each chunk reads its own Philox
block, keyed by ``(master_seed, snr_index, stream)`` with the chunk number
in the counter. Row ``j`` of chunk ``c`` belongs to trial
``c * CHUNK_TRIALS + j`` and does not depend on how many rows were drawn.
Error counts are integers summed in chunk order. The results are therefore
identical for any worker count and any execution order.

Decoding is exhaustive ML. Codewords are written in an orthonormal real
frame of their span, so the metric ``||y - sqrt(g) G^T c||^2`` reduces to
``c^T Q c - 2 z.c`` with per-trial ``Q`` and ``z``; the minimisation runs
in :func:`stc_dmt.kernels.ml_argmin`.
"""
from __future__ import annotations

import math
import weakref
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .exceptions import EnumerationBudgetExceeded, StatisticalFloorError, ValidationError
from .lattice import FiniteCode, MatrixLattice, box_code_alamouti, realify, spherical_code

CHUNK_TRIALS = 4096
MIN_SLOPE_ERRORS = 20
_U64 = (1 << 64) - 1


# --------------------------------------------------------------------------
# random streams

class CounterStream:
    """Philox stream addressed by ``(master_seed, *tags)`` and a counter.

    Two streams with the same address produce the same numbers; the draw
    order within one stream is sequential.
    """

    def __init__(self, master_seed: int, *tags: int, counter: int = 0):
        words = [int(master_seed) & _U64] + [int(t) for t in tags]
        key = np.random.SeedSequence(words).generate_state(2, dtype=np.uint64)
        ctr = np.array([0, int(counter) & _U64, 0, 0], dtype=np.uint64)
        self.generator = np.random.Generator(np.random.Philox(counter=ctr, key=key))

    def complex_normal(self, shape) -> np.ndarray:
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        z = self.generator.standard_normal(shape + (2,))
        z *= math.sqrt(0.5)
        return z[..., 0] + 1j * z[..., 1]

    def uniform(self, size) -> np.ndarray:
        return self.generator.random(size)


class ZeroStream:
    """Stand-in stream whose Gaussian draws are all zero (noiseless tests)."""

    def complex_normal(self, shape) -> np.ndarray:
        return np.zeros(shape, dtype=complex)

    def uniform(self, size) -> np.ndarray:
        return np.zeros(size)


def sample_channel(n_r: int, n_t: int, stream) -> np.ndarray:
    return stream.complex_normal((n_r, n_t))


def _gain(rho: float, n_t: int, drop_nt_normalization: bool) -> float:
    return float(rho) if drop_nt_normalization else float(rho) / n_t


def transmit(X, H, rho: float, stream, drop_nt_normalization: bool = True) -> np.ndarray:
    """``Y = sqrt(g) H X + N`` with fresh noise drawn from ``stream``."""
    X = np.asarray(X, dtype=complex)
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or X.ndim != 2 or H.shape[1] != X.shape[0]:
        raise ValidationError(f"shape mismatch: H {H.shape} and X {X.shape}")
    if rho < 0:
        raise ValidationError("rho must be nonnegative")
    g = _gain(rho, X.shape[0], drop_nt_normalization)
    return math.sqrt(g) * (H @ X) + stream.complex_normal((H.shape[0], X.shape[1]))


# --------------------------------------------------------------------------
# decoding

@dataclass(frozen=True, eq=False)
class CodeFrame:
    """Codewords as real coordinates in an orthonormal basis of their span."""

    basis: np.ndarray   # (k, n_t, T) complex, orthonormal under Re<A, B>
    coords: np.ndarray  # (N, k)

    @classmethod
    def from_codewords(cls, codewords) -> "CodeFrame":
        cw = np.asarray(codewords, dtype=complex)
        n_words, n_t, t_len = cw.shape
        V = realify(cw)
        _, s, vt = np.linalg.svd(V, full_matrices=False)
        keep = s > 1e-10 * max(float(s[0]) if s.size else 0.0, 1e-300)
        W = vt[keep]
        if W.shape[0] == 0:
            # all-zero code; one dummy direction keeps the shapes valid
            W = np.zeros((1, V.shape[1]))
            W[0, 0] = 1.0
        half = n_t * t_len
        basis = (W[:, :half] + 1j * W[:, half:]).reshape(-1, n_t, t_len)
        return cls(basis, np.ascontiguousarray(V @ W.T))


_frames: "weakref.WeakKeyDictionary[FiniteCode, CodeFrame]" = weakref.WeakKeyDictionary()


def code_frame(code: FiniteCode) -> CodeFrame:
    frame = _frames.get(code)
    if frame is None:
        frame = _frames[code] = CodeFrame.from_codewords(code.codewords)
    return frame


def _metric_terms(frame: CodeFrame, H: np.ndarray, Y: np.ndarray, gain: float):
    """Per-trial ``Q`` and ``z`` for stacks ``H`` (b, n_r, n_t) and ``Y`` (b, n_r, T)."""
    k, n_t, t_len = frame.basis.shape
    b, n_r = H.shape[0], H.shape[1]
    # G_j = H B_j for all j in one matmul: (b, n_r, n_t) @ (n_t, k T)
    hb = H @ frame.basis.transpose(1, 0, 2).reshape(n_t, k * t_len)
    hb = hb.reshape(b, n_r, k, t_len).transpose(0, 2, 1, 3).reshape(b, k, n_r * t_len)
    G = np.concatenate([hb.real, hb.imag], axis=2)
    y = Y.reshape(b, n_r * t_len)
    y = np.concatenate([y.real, y.imag], axis=1)
    Q = gain * (G @ G.transpose(0, 2, 1))
    z = math.sqrt(gain) * np.einsum("bkm,bm->bk", G, y)
    return np.ascontiguousarray(Q), np.ascontiguousarray(z)


def ml_decode(code: FiniteCode, H, Y, rho: float) -> int:
    """Index of ``argmin_X ||Y - sqrt(rho) H X||_F`` over the code; ties go to the smallest index."""
    if len(code) == 1:
        return 0
    frame = code_frame(code)
    H = np.asarray(H, dtype=complex)[None]
    Y = np.asarray(Y, dtype=complex)[None]
    Q, z = _metric_terms(frame, H, Y, float(rho))
    return int(kernels.ml_argmin(Q, z, frame.coords)[0])


# --------------------------------------------------------------------------
# configuration and results

@dataclass(frozen=True)
class ChannelConfig:
    """Channel and run parameters for one error-rate curve.

    With ``target_errors`` set the trial count is adaptive: at least
    ``trials_per_snr``, then whole chunks until the error count reaches
    ``target_errors`` or ``max_trials`` trials ran. ``max_trials``
    defaults to ``1000 * trials_per_snr`` in that case.
    """

    n_t: int
    n_r: int
    T: int
    snr_grid_db: tuple
    r: float = 0.0
    trials_per_snr: int = 10_000
    master_seed: int = 0
    drop_nt_normalization: bool = True
    target_errors: int | None = None
    max_trials: int | None = None
    workers: int = 1
    max_code_size: int = 10**5

    def __post_init__(self):
        grid = tuple(float(v) for v in np.atleast_1d(self.snr_grid_db))
        object.__setattr__(self, "snr_grid_db", grid)
        for name in ("n_t", "n_r", "T"):
            if int(getattr(self, name)) < 1:
                raise ValidationError(f"{name} must be a positive integer")
        if not grid:
            raise ValidationError("snr_grid_db must be nonempty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValidationError("snr_grid_db must be strictly increasing")
        if int(self.trials_per_snr) < 1:
            raise ValidationError("trials_per_snr must be at least 1")
        if self.r < 0:
            raise ValidationError("r must be nonnegative")
        if self.workers < 1:
            raise ValidationError("workers must be at least 1")
        if self.target_errors is not None and self.target_errors < 1:
            raise ValidationError("target_errors must be positive")
        if self.max_trials is not None and self.max_trials < self.trials_per_snr:
            raise ValidationError("max_trials must be at least trials_per_snr")

    @property
    def trial_cap(self) -> int:
        if self.target_errors is None:
            return int(self.trials_per_snr)
        if self.max_trials is not None:
            return int(self.max_trials)
        return 1000 * int(self.trials_per_snr)

    def to_dict(self) -> dict:
        return {
            "n_t": self.n_t, "n_r": self.n_r, "T": self.T, "snr_grid_db": list(self.snr_grid_db),
            "r": self.r, "trials_per_snr": self.trials_per_snr, "master_seed": self.master_seed,
            "drop_nt_normalization": self.drop_nt_normalization, "target_errors": self.target_errors,
            "max_trials": self.max_trials, "max_code_size": self.max_code_size,
        }


@dataclass(frozen=True)
class ErrorPoint:
    rho_db: float
    code_size: int
    errors: int
    trials: int
    p_e: float = field(init=False)

    def __post_init__(self):
        if self.trials < 1 or not 0 <= self.errors <= self.trials:
            raise ValidationError("need trials >= 1 and 0 <= errors <= trials")
        object.__setattr__(self, "p_e", self.errors / self.trials)

    @property
    def stderr(self) -> float:
        p = self.p_e
        return math.sqrt(p * (1 - p) / self.trials)


@dataclass(frozen=True)
class ErrorRateCurve:
    entries: tuple
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def rho_db(self) -> np.ndarray:
        return np.array([e.rho_db for e in self.entries])

    @property
    def p_e(self) -> np.ndarray:
        return np.array([e.p_e for e in self.entries])

    @property
    def errors(self) -> np.ndarray:
        return np.array([e.errors for e in self.entries], dtype=np.int64)

    @property
    def trials(self) -> np.ndarray:
        return np.array([e.trials for e in self.entries], dtype=np.int64)


@dataclass(frozen=True)
class SlopeEstimate:
    slope: float
    window: tuple
    stderr: float
    points: int

    @property
    def d_hat(self) -> float:
        return -self.slope


@dataclass(frozen=True)
class MacResult:
    joint: ErrorRateCurve
    per_user: tuple


# --------------------------------------------------------------------------
# scheme descriptors

@dataclass(frozen=True, eq=False)
class SphericalScheme:
    """``rho^(-rT/k) L(base_radius rho^(rT/k))`` for a lattice ``L``."""

    lattice: MatrixLattice
    base_radius: float = 1.0
    budget: int | None = None
    label: str = "spherical"

    def code(self, rho: float, r: float) -> FiniteCode:
        return spherical_code(self.lattice, rho, r, base_radius=self.base_radius, budget=self.budget)


@dataclass(frozen=True)
class AlamoutiBoxScheme:
    budget: int | None = None
    label: str = "alamouti-box"

    def code(self, rho: float, r: float) -> FiniteCode:
        return box_code_alamouti(rho, r, self.budget)


@dataclass(frozen=True, eq=False)
class FixedCodeScheme:
    """The same codebook at every SNR (a rate-zero scheme)."""

    codewords: np.ndarray
    label: str = "fixed"

    def code(self, rho: float, r: float) -> FiniteCode:
        return FiniteCode(self.codewords, 1.0, float("nan"), "fixed", float(rho), float(r))


def stack_codes(codes: Sequence[FiniteCode], max_size: int = 10**5) -> FiniteCode:
    """Product code of vertically stacked per-user codewords.

    Joint index ``i_1 N_2 ... N_K + ... + i_K`` holds codeword ``i_k`` of
    user ``k`` in block row ``k`` (user 1 most significant).
    """
    codes = list(codes)
    if not codes:
        raise ValidationError("stack_codes needs at least one code")
    shape = codes[0].shape
    if any(c.shape != shape for c in codes):
        raise ValidationError("all stacked codes must share n and T")
    if len(codes) == 1:
        return codes[0]
    sizes = [len(c) for c in codes]
    total = math.prod(sizes)
    if total > max_size:
        raise EnumerationBudgetExceeded(float("nan"), max_size, "stacked code too large")
    K = len(codes)
    blocks = []
    for k, c in enumerate(codes):
        view = [1] * K + list(shape)
        view[k] = sizes[k]
        blocks.append(np.broadcast_to(c.codewords.reshape(view), tuple(sizes) + shape))
    stacked = np.concatenate(blocks, axis=K).reshape(total, K * shape[0], shape[1])
    coords = None
    if all(c.coords is not None for c in codes):
        cparts = []
        for k, c in enumerate(codes):
            view = [1] * K + [c.coords.shape[1]]
            view[k] = sizes[k]
            cparts.append(np.broadcast_to(c.coords.reshape(view), tuple(sizes) + (c.coords.shape[1],)))
        coords = np.concatenate(cparts, axis=K).reshape(total, -1)
    scales = {c.scale for c in codes}
    scale = scales.pop() if len(scales) == 1 else float("nan")
    return FiniteCode(stacked, scale, max(c.source_radius for c in codes), "stacked",
                      codes[0].rho, codes[0].r, coords)


# --------------------------------------------------------------------------
# chunked execution

def _schedule(config: ChannelConfig):
    """Required (chunk, size) pairs and an iterator over the adaptive tail."""
    trials, cap = int(config.trials_per_snr), config.trial_cap
    n_min = -(-trials // CHUNK_TRIALS)
    required = [(c, min(CHUNK_TRIALS, trials - c * CHUNK_TRIALS)) for c in range(n_min)]

    def tail():
        done, c = trials, n_min
        while done < cap:
            size = min(CHUNK_TRIALS, cap - done)
            yield c, size
            done += size
            c += 1

    return required, tail()


def _map(pool, fn, items):
    if pool is None:
        return [fn(c, s) for c, s in items]
    return list(pool.map(lambda item: fn(*item), items))


def _run_point(chunk_fn: Callable[[int, int], np.ndarray], config: ChannelConfig, pool) -> tuple[int, np.ndarray]:
    """Sum ``chunk_fn`` counts over the chunk schedule.

    Column 0 drives early stopping. The stopping chunk is the first one,
    in index order, at which the running count reaches the target.
    Chunks beyond it that a wider wave already computed are discarded, so
    the result does not depend on the worker count.
    """
    required, tail = _schedule(config)
    counts = np.sum(_map(pool, chunk_fn, required), axis=0)
    trials = sum(s for _, s in required)
    if config.target_errors is None:
        return trials, counts
    wave = 2 * config.workers
    while counts[0] < config.target_errors:
        batch = [item for _, item in zip(range(wave), tail)]
        if not batch:
            break
        for (_, size), res in zip(batch, _map(pool, chunk_fn, batch)):
            counts = counts + res
            trials += size
            if counts[0] >= config.target_errors:
                break
    return trials, counts


class _Pool:
    def __init__(self, workers: int):
        self.workers = workers
        self.pool = None

    def __enter__(self):
        if self.workers > 1:
            self.pool = ThreadPoolExecutor(self.workers)
        return self.pool

    def __exit__(self, *exc):
        if self.pool is not None:
            self.pool.shutdown()


class _LinkChunks:
    """Chunk evaluator for one SNR point of a (possibly stacked) code.

    Per trial the normal draws are laid out as ``[H (n_r x n_tx), N (n_r x T)]``
    and the codeword index comes from a separate uniform stream.
    """

    def __init__(self, code: FiniteCode, radices: Sequence[int], n_r: int, gain: float,
                 seed: int, snr_index: int):
        self.code = code
        self.frame = code_frame(code)
        self.radices = tuple(int(v) for v in radices)
        self.n_r = n_r
        self.n_tx, self.T = code.shape
        self.gain = gain
        self.seed = seed
        self.snr_index = snr_index

    def draw(self, chunk: int, size: int):
        n_r, n_tx, T = self.n_r, self.n_tx, self.T
        normals = CounterStream(self.seed, self.snr_index, 0, counter=chunk).complex_normal(
            (size, n_r * (n_tx + T)))
        H = normals[:, : n_r * n_tx].reshape(size, n_r, n_tx)
        N = normals[:, n_r * n_tx:].reshape(size, n_r, T)
        u = CounterStream(self.seed, self.snr_index, 1, counter=chunk).uniform(size)
        idx = np.minimum((u * len(self.code)).astype(np.int64), len(self.code) - 1)
        return H, N, idx

    def __call__(self, chunk: int, size: int) -> np.ndarray:
        H, N, idx = self.draw(chunk, size)
        X = self.code.codewords[idx]
        Y = math.sqrt(self.gain) * (H @ X) + N
        if len(self.code) == 1:
            decoded = np.zeros(size, dtype=np.int64)
        else:
            Q, z = _metric_terms(self.frame, H, Y, self.gain)
            decoded = kernels.ml_argmin(Q, z, self.frame.coords)
        counts = [int(np.count_nonzero(decoded != idx))]
        if len(self.radices) > 1:
            sent, got = idx.copy(), decoded.copy()
            per_user = []
            for radix in reversed(self.radices):
                per_user.append(int(np.count_nonzero(sent % radix != got % radix)))
                sent //= radix
                got //= radix
            counts.extend(reversed(per_user))
        return np.array(counts, dtype=np.int64)


def _simulate(schemes, config: ChannelConfig, label: str):
    K = len(schemes)
    joint, users = [], [[] for _ in range(K)]
    with _Pool(config.workers) as pool:
        for s_idx, db in enumerate(config.snr_grid_db):
            rho = 10.0 ** (db / 10.0)
            per_user_r = config.r / K
            codes = [sc.code(rho, per_user_r) for sc in schemes]
            for c in codes:
                if c.shape != (config.n_t, config.T):
                    raise ValidationError(f"code shape {c.shape} does not match (n_t, T) = ({config.n_t}, {config.T})")
                if len(c) == 1 and config.r > 0:
                    raise ValidationError(f"degenerate code: a single codeword at {db} dB with r={config.r}")
            code = stack_codes(codes, config.max_code_size)
            if len(code) > config.max_code_size:
                raise EnumerationBudgetExceeded(float("nan"), config.max_code_size, "code too large")
            gain = _gain(rho, config.n_t, config.drop_nt_normalization)
            runner = _LinkChunks(code, [len(c) for c in codes], config.n_r, gain, config.master_seed, s_idx)
            trials, counts = _run_point(runner, config, pool)
            joint.append(ErrorPoint(db, len(code), int(counts[0]), trials))
            if K > 1:
                for k in range(K):
                    users[k].append(ErrorPoint(db, len(codes[k]), int(counts[k + 1]), trials))
    return ErrorRateCurve(joint, label), tuple(ErrorRateCurve(u, f"{label} user {k + 1}") for k, u in enumerate(users))


def estimate_error_rate(scheme, config: ChannelConfig) -> ErrorRateCurve:
    """Block error rate of ``scheme`` over the SNR grid of ``config``."""
    return _simulate([scheme], config, getattr(scheme, "label", "code"))[0]


def mac_simulate(schemes: Sequence, config: ChannelConfig) -> MacResult:
    """Joint ML decoding of ``K`` users with independent channels ``H_k``.

    Each user's code is built at multiplexing gain ``r / K``. The joint
    error event is any user wrong; per-user curves count that user's
    block errors over the same trials. ``config.n_t`` is the per-user
    antenna count.
    """
    K = len(schemes)
    if K < 1:
        raise ValidationError("mac_simulate needs at least one user")
    if config.n_r < K:
        raise ValidationError(f"n_r >= K required (receiver antennas at least the user count); got n_r={config.n_r}, K={K}")
    joint, users = _simulate(list(schemes), config, "mac")
    if K == 1:
        users = (joint,)
    return MacResult(joint, users)


class _PairChunks:
    def __init__(self, D: np.ndarray, n_r: int, gain: float, seed: int, snr_index: int):
        self.D = D
        self.n_r = n_r
        self.gain = gain
        self.seed = seed
        self.snr_index = snr_index

    def __call__(self, chunk: int, size: int) -> np.ndarray:
        n_t, T = self.D.shape
        n_r = self.n_r
        normals = CounterStream(self.seed, self.snr_index, 0, counter=chunk).complex_normal(
            (size, n_r * (n_t + T)))
        H = normals[:, : n_r * n_t].reshape(size, n_r, n_t)
        N = normals[:, n_r * n_t:].reshape(size, n_r, T)
        # Y - sqrt(g) H X' = sqrt(g) H (X - X') + N and Y - sqrt(g) H X = N
        wrong = np.sum(np.abs(math.sqrt(self.gain) * (H @ self.D) + N) ** 2, axis=(1, 2))
        right = np.sum(np.abs(N) ** 2, axis=(1, 2))
        return np.array([int(np.count_nonzero(wrong < right))], dtype=np.int64)


def estimate_pairwise_error(X, Xp, n_r: int, rho_grid_db: Sequence[float], trials: int, master_seed: int = 0,
                            *, target_errors: int | None = None, max_trials: int | None = None,
                            workers: int = 1) -> ErrorRateCurve:
    """Probability of preferring ``Xp`` over the transmitted ``X``."""
    X = np.asarray(X, dtype=complex)
    Xp = np.asarray(Xp, dtype=complex)
    if X.shape != Xp.shape or X.ndim != 2:
        raise ValidationError("X and Xp must be matrices of equal shape")
    D = X - Xp
    if not np.any(D):
        raise ValidationError("X and Xp must differ")
    config = ChannelConfig(X.shape[0], n_r, X.shape[1], tuple(rho_grid_db), trials_per_snr=trials,
                           master_seed=master_seed, target_errors=target_errors, max_trials=max_trials,
                           workers=workers)
    entries = []
    with _Pool(workers) as pool:
        for s_idx, db in enumerate(config.snr_grid_db):
            runner = _PairChunks(D, n_r, 10.0 ** (db / 10.0), master_seed, s_idx)
            n, counts = _run_point(runner, config, pool)
            entries.append(ErrorPoint(db, 2, int(counts[0]), n))
    return ErrorRateCurve(entries, "pairwise")


def dmt_slope(curve: ErrorRateCurve, window: tuple[float, float], min_errors: int = MIN_SLOPE_ERRORS) -> SlopeEstimate:
    """OLS slope of ``log10 p_e`` against ``log10 rho`` over the grid points in ``window``."""
    lo, hi = float(window[0]), float(window[1])
    pts = [e for e in curve.entries if lo - 1e-9 <= e.rho_db <= hi + 1e-9]
    if len(pts) < 3:
        raise StatisticalFloorError(f"window {window} holds {len(pts)} grid points; need at least 3",
                                    [e.rho_db for e in pts])
    failing = [e.rho_db for e in pts if e.errors < min_errors]
    if failing:
        raise StatisticalFloorError(f"statistical floor not met: fewer than {min_errors} errors at {failing} dB",
                                    failing)
    x = np.array([e.rho_db for e in pts]) / 10.0
    y = np.log10([e.p_e for e in pts])
    slope, icept = np.polyfit(x, y, 1)
    resid = y - (slope * x + icept)
    sxx = float(np.sum((x - x.mean()) ** 2))
    dof = len(pts) - 2
    stderr = math.sqrt(float(np.sum(resid ** 2)) / dof / sxx) if dof > 0 else 0.0
    return SlopeEstimate(float(slope), (lo, hi), stderr, len(pts))


def synthetic_curve(p_of_rho: Callable[[float], float], grid_db: Sequence[float], trials: int = 10**12,
                    code_size: int = 2) -> ErrorRateCurve:
    """Curve with ``errors = round(p(rho) trials)``; a test fixture for slope fits."""
    entries = []
    for db in grid_db:
        p = p_of_rho(10.0 ** (db / 10.0))
        entries.append(ErrorPoint(float(db), code_size, int(round(p * trials)), trials))
    return ErrorRateCurve(entries, "synthetic")
