"""Population games: payoffs, potentials, noisy payoff and free energy.

A state ``rho`` is a 1-D array on the probability simplex. Logarithms are
natural throughout.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    BoundaryStateError,
    DimensionError,
    PayoffEvaluationError,
    PotentialMismatchError,
    StateError,
    UnsupportedOperationError,
    ValidationError,
)

SIMPLEX_TOL = 1e-9
POTENTIAL_CHECK_TOL = 1e-5
POTENTIAL_CHECK_POINTS = 10
FD_HESSIAN_STEP = 1e-5


def check_state(rho, n: Optional[int] = None, tol: float = SIMPLEX_TOL) -> np.ndarray:
    """Return ``rho`` as a float array after checking it lies on the simplex."""
    rho = np.asarray(rho, dtype=float)
    if rho.ndim != 1 or (n is not None and rho.shape[0] != n):
        raise DimensionError(f"state must be a vector of length {n}, got shape {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise StateError("state has non-finite entries")
    if abs(rho.sum() - 1.0) > tol:
        raise StateError(f"state sums to {rho.sum():.12g}, not 1")
    if rho.min() < -tol:
        raise StateError(f"state has negative entry {rho.min():.3e}")
    return rho


def is_interior(rho) -> bool:
    return bool(np.all(np.asarray(rho) > 0.0))


def _require_interior(rho, what="state"):
    if not is_interior(rho):
        k = int(np.argmin(rho))
        raise BoundaryStateError(
            f"{what} must be interior when beta > 0 (rho_{k + 1} = {rho[k]:.3e})"
        )


def check_beta(beta) -> float:
    beta = float(beta)
    if not np.isfinite(beta) or beta < 0:
        raise ValidationError(f"noise level beta must be >= 0, got {beta}")
    return beta


@dataclass(frozen=True, eq=False)
class GameModel:
    """Population game on ``n`` strategies.

    Parameters
    ----------
    n : int
        Number of strategies.
    payoff : callable
        ``rho -> F(rho)``, a length-``n`` array. Must be a pure function.
    matrix : array, optional
        Payoff matrix ``A`` with ``F(rho) = A @ rho``. When given without
        ``payoff`` the payoff is built from it.
    potential : callable, optional
        ``rho -> F_pot(rho)`` with ``dF_pot/drho_i = F_i``. Checked by
        central differences at construction; a mismatch is an error.
    name : str
    labels : sequence of str, optional

    A symmetric ``matrix`` without an explicit potential gets
    ``0.5 * rho @ A @ rho`` and the analytic Hessian ``A``.
    """

    n: int
    payoff: Optional[Callable] = None
    matrix: Optional[np.ndarray] = None
    potential: Optional[Callable] = None
    name: str = "custom"
    labels: Optional[tuple] = None
    potential_hessian: Optional[np.ndarray] = field(default=None, repr=False)
    matrix_payoff: bool = field(default=False, init=False, repr=False)

    def __post_init__(self):
        set_ = object.__setattr__
        if self.n < 2:
            raise ValidationError("a game needs at least 2 strategies")
        if self.matrix is not None:
            a = np.array(self.matrix, dtype=float)
            if a.shape != (self.n, self.n) or not np.all(np.isfinite(a)):
                raise DimensionError(f"payoff matrix must be finite {self.n}x{self.n}")
            a.setflags(write=False)
            set_(self, "matrix", a)
            if self.payoff is None:
                set_(self, "payoff", lambda rho, _a=a: _a @ rho)
                set_(self, "matrix_payoff", True)
            if self.potential is None and np.array_equal(a, a.T):
                set_(self, "potential", lambda rho, _a=a: 0.5 * (rho @ _a @ rho))
                set_(self, "potential_hessian", a)
        if self.payoff is None:
            raise ValidationError("game needs a payoff function or a payoff matrix")
        if self.labels is not None:
            set_(self, "labels", tuple(self.labels))
        if self.potential is not None and self.potential_hessian is None:
            self._check_potential()

    @classmethod
    def from_matrix(cls, a, name="matrix", potential=None, labels=None) -> "GameModel":
        a = np.asarray(a, dtype=float)
        return cls(n=a.shape[0], matrix=a, potential=potential, name=name, labels=labels)

    @property
    def is_potential(self) -> bool:
        return self.potential is not None

    def _check_potential(self):
        rng = np.random.default_rng(20170123)
        h = 1e-6
        for _ in range(POTENTIAL_CHECK_POINTS):
            rho = rng.dirichlet(np.ones(self.n))
            f = self.payoff(rho)
            for i in range(self.n):
                e = np.zeros(self.n)
                e[i] = h
                d = (self.potential(rho + e) - self.potential(rho - e)) / (2 * h)
                if abs(d - f[i]) > POTENTIAL_CHECK_TOL:
                    raise PotentialMismatchError(
                        f"{self.name}: dPotential/drho_{i + 1} = {d:.8g} but "
                        f"F_{i + 1} = {f[i]:.8g} at rho = {np.round(rho, 6).tolist()}"
                    )


def payoff(model: GameModel, rho) -> np.ndarray:
    """Evaluate ``F(rho)``; evaluator failures name the offending strategy."""
    try:
        f = np.asarray(model.payoff(rho), dtype=float)
    except Exception as exc:  # evaluator is user code
        raise PayoffEvaluationError(f"payoff evaluation failed: {exc}") from exc
    if f.shape != (model.n,):
        raise PayoffEvaluationError(f"payoff returned shape {f.shape}, expected ({model.n},)")
    bad = np.flatnonzero(~np.isfinite(f))
    if bad.size:
        raise PayoffEvaluationError(
            f"payoff for strategy {bad[0] + 1} is not finite", strategy=int(bad[0]) + 1
        )
    return f


def noisy_payoff(model: GameModel, rho, beta) -> np.ndarray:
    """``F_i(rho) - beta * log(rho_i)``. With ``beta == 0`` this is ``payoff``."""
    f = payoff(model, rho)
    if beta == 0:
        return f
    _require_interior(rho)
    return f - beta * np.log(rho)


def neg_entropy(rho) -> float:
    """``sum_i rho_i log rho_i`` with ``0 log 0 = 0``."""
    rho = np.asarray(rho, dtype=float)
    pos = rho > 0
    return float(np.sum(rho[pos] * np.log(rho[pos])))


def noisy_potential(model: GameModel, rho, beta) -> float:
    """``F_pot(rho) - beta * sum rho_i log rho_i``."""
    if not model.is_potential:
        raise UnsupportedOperationError(f"game {model.name!r} has no potential")
    base = float(model.potential(rho))
    if beta == 0:
        return base
    _require_interior(rho)
    return base - beta * float(np.sum(rho * np.log(rho)))


def free_energy(model: GameModel, rho, beta) -> float:
    return -noisy_potential(model, rho, beta)


def hessian_noisy_potential(model: GameModel, rho, beta, method: str = "auto") -> np.ndarray:
    """Hessian of the noisy potential, ``Hess F_pot - beta * diag(1/rho)``.

    ``method="auto"`` uses the exact matrix for symmetric matrix games and
    central finite differences (step 1e-5) otherwise; ``"fd"`` forces the
    finite-difference path.
    """
    if not model.is_potential:
        raise UnsupportedOperationError(f"game {model.name!r} has no potential")
    rho = np.asarray(rho, dtype=float)
    if beta > 0:
        _require_interior(rho)
    if method == "auto" and model.potential_hessian is not None:
        hess = np.array(model.potential_hessian, dtype=float)
    elif method in ("auto", "fd"):
        hess = _fd_hessian(model.potential, rho, FD_HESSIAN_STEP)
    else:
        raise ValueError(f"unknown method {method!r}")
    if beta > 0:
        hess[np.diag_indices(model.n)] -= beta / rho
    return hess


def payoff_jacobian(model: GameModel, rho, step: float = 1e-6) -> np.ndarray:
    """``dF_i/drho_j``: the matrix itself for matrix games, central differences otherwise."""
    if model.matrix_payoff:
        return np.array(model.matrix, dtype=float)
    rho = np.asarray(rho, dtype=float)
    jac = np.empty((model.n, model.n))
    for k in range(model.n):
        e = np.zeros(model.n)
        e[k] = step
        jac[:, k] = (payoff(model, rho + e) - payoff(model, rho - e)) / (2 * step)
    return jac


def _fd_hessian(fun, x, h):
    n = x.size
    hess = np.empty((n, n))
    eye = np.eye(n) * h
    for i in range(n):
        for j in range(i, n):
            v = (
                fun(x + eye[i] + eye[j])
                - fun(x + eye[i] - eye[j])
                - fun(x - eye[i] + eye[j])
                + fun(x - eye[i] - eye[j])
            ) / (4 * h * h)
            hess[i, j] = hess[j, i] = v
    return hess


def is_nash(model: GameModel, rho, tol: float = 1e-9):
    """Test the Nash condition; returns ``(ok, (i, j) or None)`` with 0-based indices.

    ``(i, j)`` is a violating pair: strategy ``i`` is used (``rho_i > tol``)
    but ``F_j > F_i + tol``.
    """
    rho = check_state(rho, model.n)
    f = payoff(model, rho)
    best = int(np.argmax(f))
    for i in np.flatnonzero(rho > tol):
        if f[i] < f[best] - tol:
            return False, (int(i), best)
    return True, None


# -- built-in catalog --------------------------------------------------------

def stag_hunt(h: float = 2.0, s: float = 3.0) -> GameModel:
    """Stag Hunt ``[[h, h], [0, s]]``.

    The matrix is not symmetric, but on the simplex ``F_H = h`` and
    ``F_S = s * rho_S`` are the gradient of ``h*rho_H + s/2*rho_S**2``.
    """
    a = np.array([[h, h], [0.0, s]])
    return GameModel.from_matrix(
        a,
        name="stag_hunt",
        potential=lambda rho: h * rho[0] + 0.5 * s * rho[1] ** 2,
        labels=("H", "S"),
    )


def rock_scissors_paper() -> GameModel:
    a = np.array([[0.0, 1.0, -1.0], [-1.0, 0.0, 1.0], [1.0, -1.0, 0.0]])
    return GameModel.from_matrix(a, name="rsp", labels=("r", "s", "p"))


def rock_scissors_paper_modified() -> GameModel:
    a = np.array([[0.0, 2.0, -1.0], [-1.0, 0.0, 2.0], [2.0, -1.0, 0.0]])
    return GameModel.from_matrix(a, name="rsp_modified", labels=("r", "s", "p"))


def example4() -> GameModel:
    a = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 1.0], [0.0, 1.0, 1.0]])
    return GameModel.from_matrix(a, name="example4")


def example5() -> GameModel:
    a = np.array([[0.5, 0.0, 0.0], [0.0, 1.0, 1.0], [0.0, 1.0, 1.0]])
    return GameModel.from_matrix(a, name="example5")


def congestion(n: int = 3) -> GameModel:
    """``A = -I``: concave potential ``-|rho|^2 / 2``."""
    return GameModel.from_matrix(-np.eye(n), name=f"congestion{n}")


BUILTINS = {
    "stag_hunt": stag_hunt,
    "rsp": rock_scissors_paper,
    "rsp_modified": rock_scissors_paper_modified,
    "example4": example4,
    "example5": example5,
}


def builtin(name: str) -> GameModel:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise ValidationError(
            f"unknown builtin game {name!r}; choose from {sorted(BUILTINS)}"
        ) from None
