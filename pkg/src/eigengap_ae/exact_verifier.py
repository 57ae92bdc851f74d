"""Dense-matrix cross-check of the Grover walk operator.

Builds ``Q = -(I - 2|psi><psi|)(I - 2P)`` explicitly for small dimensions and
checks its spectrum and the time series of the cosine/sine observables by
direct linear algebra.  Nothing here uses the analytic shot model; it is the
independent side of every signal identity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .signal_oracle import AmplitudeOracle, as_generator

__all__ = [
    "ExactModel",
    "Report",
    "build_model",
    "random_model",
    "flag_model",
    "verify_eigenphases",
    "verify_signals",
    "verify_oracle_consistency",
    "flag_overlap",
    "cos_signal",
    "sin_signal",
    "MAX_DIM",
    "TOL",
]

MAX_DIM = 64
TOL = 1e-9


@dataclass(frozen=True)
class ExactModel:
    dim: int
    psi: np.ndarray = field(repr=False)
    proj_diag: np.ndarray = field(repr=False)
    a: float
    Q: np.ndarray = field(repr=False)

    @property
    def lam(self) -> float:
        return math.asin(math.sqrt(min(max(self.a, 0.0), 1.0)))

    @property
    def is_flag(self) -> bool:
        """True when ``P = I (x) |1><1|`` on a trailing flag qubit."""
        if self.dim % 2:
            return False
        return bool(np.array_equal(self.proj_diag, np.arange(self.dim) % 2))

    def reflect_p(self, v):
        return v - 2.0 * self.proj_diag * v

    def reflect_psi(self, v):
        """``(2|psi><psi| - I) v``."""
        return 2.0 * self.psi * np.vdot(self.psi, v) - v

    def evolve(self, t: int) -> np.ndarray:
        v = self.psi.copy()
        for _ in range(t):
            v = self.Q @ v
        return v


@dataclass
class Report:
    name: str
    max_error: float = 0.0
    skipped: bool = False
    notice: str = ""
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.skipped or self.max_error <= TOL

    def record(self, key: str, err: float) -> None:
        self.checks[key] = max(self.checks.get(key, 0.0), float(err))
        self.max_error = max(self.max_error, float(err))


def build_model(dim: int, psi, proj_diag) -> ExactModel:
    if not 2 <= dim <= MAX_DIM:
        raise ValueError(f"dim must lie in [2, {MAX_DIM}], got {dim}")
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    proj = np.asarray(proj_diag).reshape(-1)
    if psi.size != dim or proj.size != dim:
        raise ValueError("psi and proj_diag must have length dim")
    if not np.all((proj == 0) | (proj == 1)):
        raise ValueError("proj_diag entries must be 0 or 1")
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > 1e-12:
        raise ValueError(f"psi is not normalised (norm = {norm!r})")
    proj = proj.astype(float)
    a = float(np.sum(proj * np.abs(psi) ** 2))
    eye = np.eye(dim, dtype=complex)
    Q = -(eye - 2.0 * np.outer(psi, psi.conj())) @ (eye - 2.0 * np.diag(proj))
    return ExactModel(dim=dim, psi=psi, proj_diag=proj, a=min(max(a, 0.0), 1.0), Q=Q)


def _haar_state(dim, rng):
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_model(dim: int, rng=None) -> ExactModel:
    """Haar-random state with a random diagonal projector of rank in ``[1, dim-1]``."""
    rng = as_generator(rng)
    psi = _haar_state(dim, rng)
    rank = int(rng.integers(1, dim))
    proj = np.zeros(dim)
    proj[rng.choice(dim, size=rank, replace=False)] = 1.0
    return build_model(dim, psi, proj)


def flag_model(k: int, lam: float | None = None, rng=None, bad_state=None) -> ExactModel:
    """``sin(lam)|g>|1> + cos(lam)|b>|0>`` on ``k`` register levels plus a flag qubit.

    ``|g>`` is Haar random; ``|b>`` defaults to ``|g>`` (the product form for
    which the flag-qubit X signal is exactly ``sin((4t+2) lam)``).
    """
    rng = as_generator(rng)
    if lam is None:
        lam = float(rng.uniform(0.05, math.pi / 2 - 0.05))
    g = _haar_state(k, rng)
    b = g if bad_state is None else np.asarray(bad_state, dtype=complex) / np.linalg.norm(bad_state)
    psi = np.zeros(2 * k, dtype=complex)
    psi[0::2] = math.cos(lam) * b
    psi[1::2] = math.sin(lam) * g
    psi /= np.linalg.norm(psi)
    proj = np.arange(2 * k) % 2
    return build_model(2 * k, psi, proj)


def verify_eigenphases(model: ExactModel) -> Report:
    """Check the nontrivial eigenvalues are ``exp(+-i arccos(1 - 2a))`` and the rest are ``+-1``."""
    rep = Report("eigenphases")
    if model.a <= 1e-12 or model.a >= 1.0 - 1e-12:
        rep.skipped = True
        rep.notice = f"degenerate amplitude a={model.a:.3g}; two-level subspace collapses"
        return rep

    P = model.proj_diag
    g = P * model.psi
    b = (1.0 - P) * model.psi
    basis = np.column_stack([g / np.linalg.norm(g), b / np.linalg.norm(b)])

    w, V = np.linalg.eig(model.Q)
    overlap = np.sum(np.abs(basis.conj().T @ V) ** 2, axis=0)
    order = np.argsort(-overlap)
    inside, outside = order[:2], order[2:]

    phase = math.acos(1.0 - 2.0 * model.a)
    got = np.sort(np.angle(w[inside]))
    want = np.array([-phase, phase])
    rep.record("nontrivial", np.max(np.abs(np.exp(1j * got) - np.exp(1j * want))))
    rep.record("overlap", 1.0 - float(overlap[inside].min()))
    if outside.size:
        trivial = w[outside]
        rep.record("trivial", np.max(np.minimum(np.abs(trivial - 1.0), np.abs(trivial + 1.0))))
    gap = abs(got[1] - got[0])
    rep.record("eigengap", abs(gap - 4.0 * math.asin(math.sqrt(model.a))))
    return rep


def flag_overlap(model: ExactModel) -> float:
    """``Re<psi_g|psi_b>`` between the register parts of a flag model."""
    g = model.psi[1::2]
    b = model.psi[0::2]
    ng, nb = np.linalg.norm(g), np.linalg.norm(b)
    if ng == 0 or nb == 0:
        return 1.0
    return float(np.real(np.vdot(g / ng, b / nb)))


def _flag_x(model, v):
    swapped = v.reshape(-1, 2)[:, ::-1].reshape(-1)
    return float(np.real(np.vdot(v, swapped)))


def cos_signal(model: ExactModel, m: int) -> float:
    """Dense-matrix mean of the cosine-branch circuit for iteration count ``m``."""
    m = abs(int(m))
    if m == 0:
        return 1.0
    t, odd = divmod(m, 2)
    if odd:
        v = model.evolve(t)
        return float(np.real(np.vdot(v, model.reflect_p(v))))
    w = model.reflect_p(model.evolve(t - 1))
    return float(np.real(np.vdot(w, model.reflect_psi(w))))


def sin_signal(model: ExactModel, m: int) -> float:
    """Dense-matrix mean of the sign-corrected flag-qubit X shot at odd ``m``."""
    if m % 2 == 0:
        raise ValueError("sine signal needs odd m")
    t = (abs(int(m)) - 1) // 2
    val = _flag_x(model, model.evolve(t))
    return -val if m < 0 else val


def verify_signals(model: ExactModel, t_max: int) -> Report:
    """Compare dense expectations with the closed forms for ``t = 0..t_max``."""
    if not 0 <= t_max <= 32:
        raise ValueError("t_max must lie in [0, 32]")
    rep = Report("signals")
    lam = model.lam
    flag = model.is_flag
    c = flag_overlap(model) if flag else None
    if not flag:
        rep.notice = "no flag-qubit structure; sine identity skipped"

    v = model.psi.copy()
    prev = None
    for t in range(t_max + 1):
        if t > 0:
            prev = v
            v = model.Q @ v
        o = float(np.real(np.vdot(v, model.reflect_p(v))))
        rep.record("cos_odd", abs(o - math.cos((4 * t + 2) * lam)))
        echo = float(np.real(np.vdot(v, model.reflect_psi(v))))
        rep.record("echo", abs(echo - math.cos(4 * t * lam)))
        if t >= 1:
            w = model.reflect_p(prev)
            short = float(np.real(np.vdot(w, model.reflect_psi(w))))
            rep.record("echo_short", abs(short - math.cos(4 * t * lam)))
            rep.record("last_reflection", abs(short - echo))
        if flag:
            rep.record("sin_flag", abs(_flag_x(model, v) - c * math.sin((4 * t + 2) * lam)))
    return rep


def verify_oracle_consistency(model: ExactModel, ms, with_sine: bool | None = None) -> Report:
    """Analytic shot means from :class:`AmplitudeOracle` against dense expectations."""
    rep = Report("oracle_consistency")
    oracle = AmplitudeOracle(a=model.a)
    with_sine = model.is_flag if with_sine is None else with_sine
    for m in ms:
        m = int(m)
        rep.record("cos", abs(float(oracle.cos_mean(m)) - cos_signal(model, m)))
        if with_sine and m % 2:
            rep.record("sin", abs(float(oracle.sin_mean(m)) - sin_signal(model, m)))
    return rep
