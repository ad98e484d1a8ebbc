"""The binary structured distribution p(Y, A, C, U) and its ground truth.

Sampled parameterizations satisfy three constraints: the true adjusted
treatment effect is +0.1, the effect estimated while ignoring U appears to
be -0.1 (a built-in Simpson's paradox), and P(U=1) = 0.5 so majority
guessing of U is uninformative. C -> U -> A -> Y ancestral order; the only
randomness is the seeded solver initialization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .seeding import child_rng

__all__ = [
    "ORACLE_TARGET",
    "NAIVE_TARGET",
    "U_MARGINAL_TARGET",
    "PARAM_MARGIN",
    "StructuredParams",
    "StructuredSample",
    "StructuredSolverError",
    "EmptyStratumError",
    "oracle_ate",
    "naive_adjusted_ate",
    "joint_distribution",
    "identification_ate",
    "sample_structured_params",
    "draw_structured",
    "draw_structured_arrays",
    "plug_in_ate",
]

ORACLE_TARGET = 0.1
NAIVE_TARGET = -0.1
U_MARGINAL_TARGET = 0.5
PARAM_MARGIN = 0.05  # probabilities kept inside (0.05, 0.95) for positivity


class StructuredSolverError(RuntimeError):
    """Raised when the constraint solver exhausts its budget."""


class EmptyStratumError(ValueError):
    """An (a, c, u) stratum needed by the identification formula is empty."""

    def __init__(self, a: int, c: int, u: int):
        self.stratum = (a, c, u)
        super().__init__(f"no samples in stratum (a={a}, c={c}, u={u})")


@dataclass(frozen=True)
class StructuredSample:
    """One draw of the structured variables; all fields are 0/1."""

    c: int
    u: int
    a: int
    y: int


@dataclass(frozen=True)
class StructuredParams:
    """The 15 probabilities defining p(Y, A, C, U), plus the solver seed.

    p_u_given_c[c] = P(U=1 | C=c); p_a_given_cu[c, u] = P(A=1 | C=c, U=u);
    p_y_given_acu[a, c, u] = P(Y=1 | A=a, C=c, U=u).
    """

    p_c: float
    p_u_given_c: np.ndarray
    p_a_given_cu: np.ndarray
    p_y_given_acu: np.ndarray
    seed: int = -1

    def __post_init__(self):
        pu = np.asarray(self.p_u_given_c, dtype=np.float64).reshape(2)
        pa = np.asarray(self.p_a_given_cu, dtype=np.float64).reshape(2, 2)
        py = np.asarray(self.p_y_given_acu, dtype=np.float64).reshape(2, 2, 2)
        object.__setattr__(self, "p_u_given_c", pu)
        object.__setattr__(self, "p_a_given_cu", pa)
        object.__setattr__(self, "p_y_given_acu", py)
        values = np.concatenate([[self.p_c], pu.ravel(), pa.ravel(), py.ravel()])
        if np.any(values <= 0.0) or np.any(values >= 1.0):
            raise ValueError("all 15 probabilities must lie strictly inside (0, 1)")

    def u_marginal(self) -> float:
        """P(U=1) = sum_c p(c) * P(U=1|c)."""
        return float(
            (1.0 - self.p_c) * self.p_u_given_c[0] + self.p_c * self.p_u_given_c[1]
        )

    def constraint_report(self, tol: float = 1e-6) -> dict:
        """The three constrained quantities and whether each is within tol."""
        values = {
            "oracle_ate": oracle_ate(self),
            "naive_adjusted_ate": naive_adjusted_ate(self),
            "u_marginal": self.u_marginal(),
        }
        targets = {
            "oracle_ate": ORACLE_TARGET,
            "naive_adjusted_ate": NAIVE_TARGET,
            "u_marginal": U_MARGINAL_TARGET,
        }
        return {
            name: {
                "value": values[name],
                "target": targets[name],
                "ok": abs(values[name] - targets[name]) <= tol,
            }
            for name in values
        }

    def to_text(self) -> str:
        """Flat key=value record with shortest-round-trip decimal values."""
        lines = [f"seed={self.seed}", f"p_c={float(self.p_c)!r}"]
        for c in range(2):
            lines.append(f"p_u_given_c{c}={float(self.p_u_given_c[c])!r}")
        for c in range(2):
            for u in range(2):
                lines.append(f"p_a_given_c{c}u{u}={float(self.p_a_given_cu[c, u])!r}")
        for a in range(2):
            for c in range(2):
                for u in range(2):
                    lines.append(
                        f"p_y_given_a{a}c{c}u{u}={float(self.p_y_given_acu[a, c, u])!r}"
                    )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "StructuredParams":
        fields = {}
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            fields[key] = value
        pu = np.array([float(fields[f"p_u_given_c{c}"]) for c in range(2)])
        pa = np.array(
            [[float(fields[f"p_a_given_c{c}u{u}"]) for u in range(2)] for c in range(2)]
        )
        py = np.array(
            [[[float(fields[f"p_y_given_a{a}c{c}u{u}"]) for u in range(2)]
              for c in range(2)] for a in range(2)]
        )
        return cls(
            p_c=float(fields["p_c"]),
            p_u_given_c=pu,
            p_a_given_cu=pa,
            p_y_given_acu=py,
            seed=int(fields.get("seed", -1)),
        )


def _raw_cu_weights(p_c: float, p_u0: float, p_u1: float) -> np.ndarray:
    marg_c = np.array([1.0 - p_c, p_c])
    pu = np.array([p_u0, p_u1])
    return marg_c[:, None] * np.stack([1.0 - pu, pu], axis=1)


def _raw_oracle(p_c, p_u0, p_u1, pa, py) -> float:
    w = _raw_cu_weights(p_c, p_u0, p_u1)
    return float(((py[1] - py[0]) * w).sum())


def _raw_naive(p_c, p_u0, p_u1, pa, py) -> float:
    w = _raw_cu_weights(p_c, p_u0, p_u1)
    p_c_marg = w.sum(axis=1)
    naive = 0.0
    for c in range(2):
        effect_c = 0.0
        for a in range(2):
            p_a_cu = pa[c] if a == 1 else 1.0 - pa[c]
            weights = p_a_cu * w[c]  # p(a, c, u) over u
            p_y_ac = float((py[a, c] * weights).sum() / weights.sum())
            effect_c += p_y_ac if a == 1 else -p_y_ac
        naive += effect_c * p_c_marg[c]
    return float(naive)


def oracle_ate(params: StructuredParams) -> float:
    """The identification formula evaluated exactly on the parameters.

    sum_{c,u} [P(Y=1|A=1,c,u) - P(Y=1|A=0,c,u)] * p(c, u).
    """
    return _raw_oracle(
        params.p_c, params.p_u_given_c[0], params.p_u_given_c[1],
        params.p_a_given_cu, params.p_y_given_acu,
    )


def naive_adjusted_ate(params: StructuredParams) -> float:
    """The same adjustment done without conditioning on U.

    Marginalizes U out of P(Y=1|A,c) with weights p(u|c,a) proportional to
    p(a|c,u) p(u|c), i.e. what an analyst who only observes (C, A, Y) would
    estimate in the large-sample limit.
    """
    return _raw_naive(
        params.p_c, params.p_u_given_c[0], params.p_u_given_c[1],
        params.p_a_given_cu, params.p_y_given_acu,
    )


def joint_distribution(params: StructuredParams) -> np.ndarray:
    """The full 16-cell joint as an array indexed [c, u, a, y]."""
    joint = np.empty((2, 2, 2, 2))
    w = _raw_cu_weights(params.p_c, params.p_u_given_c[0], params.p_u_given_c[1])
    for c in range(2):
        for u in range(2):
            for a in range(2):
                p_a = params.p_a_given_cu[c, u] if a == 1 else 1.0 - params.p_a_given_cu[c, u]
                p_y1 = params.p_y_given_acu[a, c, u]
                joint[c, u, a, 1] = w[c, u] * p_a * p_y1
                joint[c, u, a, 0] = w[c, u] * p_a * (1.0 - p_y1)
    return joint


def identification_ate(joint: np.ndarray, pool_empty_strata: bool = False):
    """Evaluate the adjustment formula on a (possibly empirical) joint.

    `joint` is indexed [c, u, a, y] and must be nonnegative. When an (a,c,u)
    stratum carries no mass but its (c,u) cell does, the conditional
    P(Y=1|a,c,u) is undefined: with pool_empty_strata the U-pooled
    P(Y=1|a,c) is substituted, otherwise EmptyStratumError is raised.
    Returns (ate, n_pooled).
    """
    joint = np.asarray(joint, dtype=np.float64)
    if joint.shape != (2, 2, 2, 2) or np.any(joint < 0):
        raise ValueError("joint must be a nonnegative [c, u, a, y] array")
    total = joint.sum()
    if total <= 0:
        raise ValueError("joint carries no mass")
    joint = joint / total
    p_cu = joint.sum(axis=(2, 3))
    ate = 0.0
    pooled = 0
    for c in range(2):
        for u in range(2):
            if p_cu[c, u] == 0.0:
                continue
            diff = 0.0
            for a in range(2):
                mass = joint[c, u, a].sum()
                if mass > 0.0:
                    p_y1 = joint[c, u, a, 1] / mass
                else:
                    if not pool_empty_strata:
                        raise EmptyStratumError(a=a, c=c, u=u)
                    pool = joint[c, :, a, :].sum()
                    if pool <= 0.0:
                        raise EmptyStratumError(a=a, c=c, u=u)
                    p_y1 = joint[c, :, a, 1].sum() / pool
                    pooled += 1
                diff += p_y1 if a == 1 else -p_y1
            ate += diff * p_cu[c, u]
    return float(ate), pooled


def _empirical_joint(c, u, a, y, weights=None) -> np.ndarray:
    c = np.asarray(c, dtype=np.int64)
    u = np.asarray(u, dtype=np.int64)
    a = np.asarray(a, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    if weights is None:
        weights = np.ones(c.shape[0])
    cell = ((c * 2 + u) * 2 + a) * 2 + y
    return np.bincount(cell, weights=weights, minlength=16).reshape(2, 2, 2, 2)


def plug_in_ate(samples, weights=None) -> float:
    """Identification-formula estimate from empirical (c, u, a, y) frequencies.

    `samples` is a list of StructuredSample or an (n, 4) array with columns
    (c, u, a, y). Optional `weights` allows feeding exact cell frequencies.
    Raises EmptyStratumError when a needed stratum has no samples; the
    caller decides any fallback.
    """
    if hasattr(samples, "shape"):
        arr = np.asarray(samples, dtype=np.int64)
        c, u, a, y = arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3]
    else:
        if len(samples) == 0:
            raise ValueError("no samples")
        c = np.array([s.c for s in samples], dtype=np.int64)
        u = np.array([s.u for s in samples], dtype=np.int64)
        a = np.array([s.a for s in samples], dtype=np.int64)
        y = np.array([s.y for s in samples], dtype=np.int64)
    ate, _ = identification_ate(_empirical_joint(c, u, a, y, weights))
    return ate


def _u1_for_balance(p_c: float, p_u0: float) -> float:
    """P(U=1|C=1) that makes P(U=1) exactly 0.5 given the other two."""
    return (U_MARGINAL_TARGET - (1.0 - p_c) * p_u0) / p_c


class _SolverState:
    """Mutable view of the 14 free parameters during coordinate descent.

    P(U=1|C=1) is always derived from (p_c, p_u0) so the balance constraint
    holds exactly; only the effect constraints are descended on.
    """

    def __init__(self, p_c, p_u0, pa, py, lo, hi):
        self.values = np.concatenate([[p_c, p_u0], pa.ravel(), py.ravel()])
        self.lo = lo
        self.hi = hi

    def feasible(self, values) -> bool:
        if np.any(values < self.lo) or np.any(values > self.hi):
            return False
        return self.lo < _u1_for_balance(values[0], values[1]) < self.hi

    def gaps(self, values) -> tuple[float, float]:
        p_c, p_u0 = values[0], values[1]
        p_u1 = _u1_for_balance(p_c, p_u0)
        pa = values[2:6].reshape(2, 2)
        py = values[6:14].reshape(2, 2, 2)
        return (
            _raw_oracle(p_c, p_u0, p_u1, pa, py) - ORACLE_TARGET,
            _raw_naive(p_c, p_u0, p_u1, pa, py) - NAIVE_TARGET,
        )


def _coordinate_descent(state: _SolverState, tol: float, max_cycles: int = 3000):
    """Drive both constraint gaps below tol; returns final values or None.

    Each coordinate takes a 1-d Gauss-Newton step (exact for the outcome
    probabilities, where both gaps are affine) with clipping to the box and
    backtracking to keep the analytic P(U=1|C=1) feasible and the squared
    violation non-increasing.
    """
    values = state.values
    g1, g2 = state.gaps(values)
    loss = g1 * g1 + g2 * g2
    # Outcome coordinates first: they carry the affine structure.
    order = list(range(6, 14)) + [2, 3, 4, 5, 0, 1]
    target = max(tol * 1e-3, 1e-13)
    stall = 0
    for _ in range(max_cycles):
        loss_at_cycle_start = loss
        for idx in order:
            if max(abs(g1), abs(g2)) <= target:
                return values
            x = values[idx]
            h = 1e-6 if x + 1e-6 <= state.hi else -1e-6
            probe = values.copy()
            probe[idx] = x + h
            if not state.feasible(probe):
                continue
            p1, p2 = state.gaps(probe)
            s1, s2 = (p1 - g1) / h, (p2 - g2) / h
            denom = s1 * s1 + s2 * s2
            if denom < 1e-18:
                continue
            step = -(g1 * s1 + g2 * s2) / denom
            for _halve in range(40):
                trial = values.copy()
                trial[idx] = min(max(x + step, state.lo), state.hi)
                if state.feasible(trial):
                    t1, t2 = state.gaps(trial)
                    trial_loss = t1 * t1 + t2 * t2
                    if trial_loss < loss:
                        values, g1, g2, loss = trial, t1, t2, trial_loss
                        break
                step *= 0.5
        if max(abs(g1), abs(g2)) <= target:
            return values
        if loss >= loss_at_cycle_start * (1.0 - 1e-12):
            stall += 1
            if stall >= 5:
                break
        else:
            stall = 0
    if max(abs(g1), abs(g2)) <= tol:
        return values
    return None


def sample_structured_params(seed: int, tol: float = 1e-6) -> StructuredParams:
    """Draw a random parameterization satisfying the three constraints.

    Initializes all 15 probabilities uniformly inside (0.05, 0.95), pins
    P(U=1|C=1) analytically so P(U=1) = 0.5 holds exactly, then runs
    projected coordinate descent on the squared violations of the other two
    constraints until both are within tol. Deterministic given (seed, tol);
    raises StructuredSolverError with diagnostics if the restart budget runs
    out rather than returning an unconstrained draw.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    rng = child_rng("structured-params", seed)
    lo, hi = PARAM_MARGIN, 1.0 - PARAM_MARGIN
    max_restarts = 200
    history = []
    for restart in range(max_restarts):
        draw = lo + (hi - lo) * rng.random(15)
        p_c, p_u0 = float(draw[0]), float(draw[1])
        # draw[2] is the raw P(U=1|C=1) slot; the balance constraint replaces it
        p_u1 = _u1_for_balance(p_c, p_u0)
        if not (lo < p_u1 < hi):
            history.append(f"restart {restart}: analytic P(U=1|C=1)={p_u1:.4f} infeasible")
            continue
        state = _SolverState(p_c, p_u0, draw[3:7].reshape(2, 2), draw[7:15].reshape(2, 2, 2), lo, hi)
        solution = _coordinate_descent(state, tol)
        if solution is None:
            history.append(f"restart {restart}: descent stalled above tol")
            continue
        params = StructuredParams(
            p_c=float(solution[0]),
            p_u_given_c=np.array(
                [solution[1], _u1_for_balance(float(solution[0]), float(solution[1]))]
            ),
            p_a_given_cu=solution[2:6].reshape(2, 2),
            p_y_given_acu=solution[6:14].reshape(2, 2, 2),
            seed=seed,
        )
        report = params.constraint_report(tol)
        if all(entry["ok"] for entry in report.values()):
            return params
        history.append(f"restart {restart}: constraint report failed: {report}")
    raise StructuredSolverError(
        "constraint solver failed for seed %d (tol %g) after %d restarts:\n%s"
        % (seed, tol, max_restarts, "\n".join(history[-10:]))
    )


def draw_structured_arrays(params: StructuredParams, n: int, seed: int):
    """Vectorized ancestral samples; returns (c, u, a, y) int64 arrays."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    rng = child_rng("structured-draw", seed)
    r = rng.random((n, 4))
    c = (r[:, 0] < params.p_c).astype(np.int64)
    u = (r[:, 1] < params.p_u_given_c[c]).astype(np.int64)
    a = (r[:, 2] < params.p_a_given_cu[c, u]).astype(np.int64)
    y = (r[:, 3] < params.p_y_given_acu[a, c, u]).astype(np.int64)
    return c, u, a, y


def draw_structured(params: StructuredParams, n: int, seed: int) -> list[StructuredSample]:
    """i.i.d. ancestral samples of (C, U, A, Y), deterministic given seed."""
    c, u, a, y = draw_structured_arrays(params, n, seed)
    return [StructuredSample(int(c[i]), int(u[i]), int(a[i]), int(y[i])) for i in range(n)]
