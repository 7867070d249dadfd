"""Fixed-step simulation of a plant coupled to its cubic observer.

The truth plant integrates ``dx/dt = A x + f_u + D f_g + f_L`` with its
own delay lists; the observer integrates

    dw/dt = G w + J y + (I - E C)(f_u + f_L(xhat))
            - ((y - C xhat)' theta (y - C xhat)) N (y - C xhat)

against the *design* model's expressions and delays, reconstructing
``xhat = w + E y`` from the measured output.  Truth and design model may
differ; that mismatch is exactly what the cubic term is there to absorb.

The integrator is classical RK4 on the joint state ``[x; w]``.  Every
delay must be an integer multiple of the step ``h``.  Delayed inputs come
from the analytic drive expressions evaluated exactly at the shifted stage
times; delayed outputs come from a ring buffer of past grid samples,
linearly interpolated at half-step stage times.  Before ``t = 0`` the
drive is evaluated analytically (or zeroed) and the output history is
frozen at ``y(0)`` (or zeroed), per the prehistory policy.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

import numpy as np

from .exprlang import EvalEnv, Expr, ExprEvalError, evaluate, parse_input_signal
from .model import ConfigError, ObserverParams, PlantModel, validate

__all__ = [
    "SimulationError",
    "SimConfig",
    "SimResult",
    "HistoryBuffer",
    "simulate",
    "cumulative_error",
    "ComparisonReport",
    "compare_cubic_linear",
    "StudyReport",
    "example_study",
    "write_trajectory_csv",
    "input_signals",
    "DEFAULT_INPUT_SIGNAL",
]

_DIV_TOL = 1e-9


class SimulationError(RuntimeError):
    """Integration failed (non-finite state or expression blow-up)."""


# Default drive for the bundled study and the simulate command.  The example
# plant couples x1*x2 through the unknown-input channel and the mismatched
# variant is locally unstable at the origin, so a unit-amplitude drive pushes
# either plant into finite-time escape well before t = 20.  This amplitude
# keeps both trajectories bounded over the study horizon with margin to spare
# while still exciting the model mismatch visibly.
DEFAULT_INPUT_SIGNAL = "0.0003*sin(t)"


def input_signals(text: str, n_u: int) -> tuple[Expr, ...]:
    """Parse one drive expression in ``t`` and replicate it per channel."""
    e = parse_input_signal(text)
    return (e,) * n_u


@dataclass
class SimConfig:
    """One simulation request.

    ``input_signal`` holds one expression in ``t`` per input channel.
    ``prehistory`` is ``"analytic"`` (drive evaluated at negative times,
    output history frozen at its initial value) or ``"zero"``.
    """

    h: float
    t_end: float
    x0: np.ndarray
    xhat0: np.ndarray
    input_signal: tuple[Expr, ...]
    prehistory: str = "analytic"
    cubic_enabled: bool = True

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float).ravel()
        self.xhat0 = np.asarray(self.xhat0, dtype=float).ravel()
        self.input_signal = tuple(self.input_signal)
        if not self.h > 0:
            raise ConfigError("h: step must be positive")
        if self.t_end < self.h:
            raise ConfigError("t_end: must be at least one step")
        if self.prehistory not in ("analytic", "zero"):
            raise ConfigError(f"prehistory: unknown policy {self.prehistory!r}")


@dataclass(eq=False)
class SimResult:
    """Grid trajectories of one run; ``jo`` is the running integral of
    ``|x - xhat|^2`` (trapezoid rule on the grid)."""

    t: np.ndarray
    x: np.ndarray
    xhat: np.ndarray
    w: np.ndarray
    y: np.ndarray
    jo: np.ndarray


class HistoryBuffer:
    """Ring buffer of past grid samples of a vector signal.

    ``depth`` is the largest lookback in steps.  ``sample(k)`` returns the
    stored grid sample; indices before the start of the run fall back to
    the prehistory policy (``"hold"`` freezes the initial sample,
    ``"zero"`` returns zeros).  ``value_at(q)`` linearly interpolates at a
    fractional grid index, which is how half-step stage times are served.
    """

    def __init__(self, dim: int, depth: int, initial: np.ndarray, policy: str = "hold"):
        if depth < 0:
            raise ValueError("depth must be nonnegative")
        if policy not in ("hold", "zero"):
            raise ValueError(f"unknown prehistory policy {policy!r}")
        self.dim = dim
        self.depth = depth
        self.policy = policy
        self._data = np.zeros((depth + 1, dim))
        self._initial = np.asarray(initial, dtype=float).copy()
        self._latest = -1

    def push(self, k: int, value: np.ndarray) -> None:
        if k != self._latest + 1:
            raise ValueError(f"samples must be pushed in order (got {k}, expected {self._latest + 1})")
        self._data[k % (self.depth + 1)] = value
        self._latest = k

    def sample(self, k: int) -> np.ndarray:
        if k < 0:
            if self.policy == "zero":
                return np.zeros(self.dim)
            return self._initial
        if k > self._latest or k < self._latest - self.depth:
            raise ValueError(
                f"sample {k} outside the retained window "
                f"[{self._latest - self.depth}, {self._latest}]"
            )
        return self._data[k % (self.depth + 1)]

    def value_at(self, q: float) -> np.ndarray:
        k = int(np.floor(q))
        frac = q - k
        if frac < 1e-9:
            return self.sample(k)
        if frac > 1.0 - 1e-9:
            return self.sample(k + 1)
        return (1.0 - frac) * self.sample(k) + frac * self.sample(k + 1)


def _delay_steps(delays, h: float, label: str) -> list[int]:
    out = []
    for i, d in enumerate(delays):
        k = int(round(d / h))
        if abs(d - k * h) > _DIV_TOL * max(1.0, abs(d)):
            raise ConfigError(
                f"{label}[{i}]: delay {d:g} is not an integer multiple of step {h:g}"
            )
        out.append(k)
    return out


def simulate(truth: PlantModel, design: PlantModel, obs: ObserverParams,
             cfg: SimConfig) -> SimResult:
    """Integrate plant and observer jointly over ``[0, t_end]``.

    ``truth`` generates the states and measurements; ``design`` supplies
    the expressions and delays the observer believes in.  The stored
    estimate satisfies ``xhat = w + E y`` at every grid point, and
    ``w(0) = xhat0 - E y(0)``.
    """
    for label, plant in (("truth", truth), ("design", design)):
        report = validate(plant, obs)
        if report:
            names = ", ".join(v.name for v in report)
            raise ValueError(f"{label} model failed validation: {names}")
    if truth.n != design.n or truth.n_y != design.n_y or truth.n_u != design.n_u:
        raise ValueError("truth and design models must share n, n_u, n_y")
    n, n_y, n_u = truth.n, truth.n_y, truth.n_u
    if cfg.x0.shape != (n,):
        raise ConfigError(f"x0: expected {n} entries, got {cfg.x0.shape}")
    if cfg.xhat0.shape != (n,):
        raise ConfigError(f"xhat0: expected {n} entries, got {cfg.xhat0.shape}")
    if len(cfg.input_signal) != n_u:
        raise ConfigError(
            f"input_signal: expected {n_u} expressions, got {len(cfg.input_signal)}"
        )

    h = cfg.h
    steps = int(round(cfg.t_end / h))
    delta_truth = _delay_steps(truth.delta, h, "delta")
    tau_truth = _delay_steps(truth.tau, h, "tau")
    delta_design = _delay_steps(design.delta, h, "delta")
    tau_design = _delay_steps(design.tau, h, "tau")
    max_tau = max(tau_truth + tau_design, default=0)

    A_t, C_t, D_t = truth.A, truth.C, truth.D
    G, J, E, N, theta = obs.G, obs.J, obs.E, obs.N, obs.theta
    C_d = design.C
    T_d = np.eye(n) - E @ C_d
    cubic_on = cfg.cubic_enabled

    analytic_pre = cfg.prehistory == "analytic"
    u_exprs = cfg.input_signal

    def u_vec(t: float) -> np.ndarray:
        if t < 0 and not analytic_pre:
            return np.zeros(n_u)
        env = EvalEnv(t=t)
        return np.array([evaluate(e, env) for e in u_exprs])

    x0 = cfg.x0
    y0 = C_t @ x0
    w0 = cfg.xhat0 - E @ y0
    ybuf = HistoryBuffer(n_y, max_tau, y0, "hold" if analytic_pre else "zero")
    ybuf.push(0, y0)

    def make_env(x_like: np.ndarray, t: float, stage_pos: float,
                 delta_steps: list[int], tau_steps: list[int],
                 y_now: np.ndarray) -> EvalEnv:
        # stage_pos is the absolute stage position in grid units (k, k+0.5, k+1);
        # working in grid units keeps delayed lookups exact in floating point
        ucache: dict[int, np.ndarray] = {}
        ycache: dict[int, np.ndarray] = {}

        def u_at(slot: int) -> np.ndarray:
            if slot not in ucache:
                lag = 0.0 if slot == 0 else delta_steps[slot - 1] * h
                ucache[slot] = u_vec(t - lag)
            return ucache[slot]

        def y_at(slot: int) -> np.ndarray:
            if slot == 0:
                return y_now
            lag = tau_steps[slot - 1]
            if lag == 0:
                return y_now
            if slot not in ycache:
                ycache[slot] = ybuf.value_at(stage_pos - lag)
            return ycache[slot]

        return EvalEnv(x=x_like, u_at=u_at, y_at=y_at, t=t)

    def eval_vec(exprs, env: EvalEnv) -> np.ndarray:
        return np.array([evaluate(e, env) for e in exprs])

    def deriv(k: int, stage_offset: float, z: np.ndarray) -> np.ndarray:
        t = (k + stage_offset) * h
        x = z[:n]
        w = z[n:]
        y_now = C_t @ x
        env_t = make_env(x, t, k + stage_offset, delta_truth, tau_truth, y_now)
        dx = A_t @ x + eval_vec(truth.f_u, env_t) + D_t @ eval_vec(truth.f_g, env_t) \
            + eval_vec(truth.f_L, env_t)
        xhat = w + E @ y_now
        env_d = make_env(xhat, t, k + stage_offset, delta_design, tau_design, y_now)
        dw = G @ w + J @ y_now + T_d @ (eval_vec(design.f_u, env_d)
                                        + eval_vec(design.f_L, env_d))
        if cubic_on:
            err = y_now - C_d @ xhat
            dw = dw - float(err @ theta @ err) * (N @ err)
        return np.concatenate([dx, dw])

    t_grid = np.arange(steps + 1) * h
    xs = np.empty((steps + 1, n))
    ws = np.empty((steps + 1, n))
    ys = np.empty((steps + 1, n_y))
    xs[0], ws[0], ys[0] = x0, w0, y0

    z = np.concatenate([x0, w0])
    for k in range(steps):
        try:
            k1 = deriv(k, 0.0, z)
            k2 = deriv(k, 0.5, z + 0.5 * h * k1)
            k3 = deriv(k, 0.5, z + 0.5 * h * k2)
            k4 = deriv(k, 1.0, z + h * k3)
        except ExprEvalError as exc:
            raise SimulationError(
                f"expression evaluation failed near t = {k * h:.6g}: {exc}"
            ) from exc
        z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(z)):
            raise SimulationError(
                f"state became non-finite at t = {(k + 1) * h:.6g} (step {k + 1})"
            )
        xs[k + 1] = z[:n]
        ws[k + 1] = z[n:]
        ys[k + 1] = C_t @ z[:n]
        ybuf.push(k + 1, ys[k + 1])

    xhats = ws + ys @ E.T
    result = SimResult(t=t_grid, x=xs, xhat=xhats, w=ws, y=ys,
                       jo=np.zeros(steps + 1))
    result.jo = cumulative_error(result)
    return result


def cumulative_error(result: SimResult) -> np.ndarray:
    """Running integral of ``|x - xhat|^2`` by the trapezoid rule."""
    g = np.sum((result.x - result.xhat) ** 2, axis=1)
    dt = np.diff(result.t)
    jo = np.zeros_like(g)
    jo[1:] = np.cumsum(0.5 * dt * (g[:-1] + g[1:]))
    return jo


@dataclass(eq=False)
class ComparisonReport:
    """End-time error integrals of a cubic run against its linear twin."""

    jo_cubic: float
    jo_linear: float
    ratio: float
    cubic: SimResult
    linear: SimResult


def compare_cubic_linear(truth: PlantModel, design: PlantModel,
                         obs: ObserverParams, cfg: SimConfig) -> ComparisonReport:
    """Run the same scenario with the cubic term enabled and disabled."""
    cubic = simulate(truth, design, obs, replace(cfg, cubic_enabled=True))
    linear = simulate(truth, design, obs, replace(cfg, cubic_enabled=False))
    jo_c = float(cubic.jo[-1])
    jo_l = float(linear.jo[-1])
    if jo_l > 0:
        ratio = jo_c / jo_l
    else:
        ratio = 1.0 if jo_c == 0 else np.inf
    return ComparisonReport(jo_cubic=jo_c, jo_linear=jo_l, ratio=ratio,
                            cubic=cubic, linear=linear)


@dataclass(eq=False)
class StudyReport:
    nominal: ComparisonReport
    uncertain: ComparisonReport
    files: tuple[str, ...] = ()


def example_study(out_dir=None, h: float = 0.01, t_end: float = 20.0) -> StudyReport:
    """Run the bundled example: nominal and mismatched plant, cubic vs linear.

    Four simulations with ``x(0) = 0``, ``xhat(0) = (-5, -5)``, drive
    :data:`DEFAULT_INPUT_SIGNAL`.  With ``out_dir`` set, writes one trajectory
    CSV per run plus a ``summary.txt`` of the end-time error integrals and
    ratios.
    """
    from .model import example_system

    ex = example_system()
    cfg = SimConfig(
        h=h,
        t_end=t_end,
        x0=np.zeros(2),
        xhat0=np.array([-5.0, -5.0]),
        input_signal=input_signals(DEFAULT_INPUT_SIGNAL, ex.nominal.n_u),
    )
    nominal = compare_cubic_linear(ex.nominal, ex.nominal, ex.observer, cfg)
    uncertain = compare_cubic_linear(ex.uncertain, ex.nominal, ex.observer, cfg)
    files: tuple[str, ...] = ()
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        paths = []
        for name, res in (
            ("nominal_cubic", nominal.cubic),
            ("nominal_linear", nominal.linear),
            ("uncertain_cubic", uncertain.cubic),
            ("uncertain_linear", uncertain.linear),
        ):
            path = os.path.join(out_dir, f"{name}.csv")
            write_trajectory_csv(res, path)
            paths.append(path)
        summary = os.path.join(out_dir, "summary.txt")
        with open(summary, "w", newline="\n") as fh:
            fh.write(f"jo_cubic_nominal={nominal.jo_cubic:.12g}\n")
            fh.write(f"jo_linear_nominal={nominal.jo_linear:.12g}\n")
            fh.write(f"ratio_nominal={nominal.ratio:.12g}\n")
            fh.write(f"jo_cubic_uncertain={uncertain.jo_cubic:.12g}\n")
            fh.write(f"jo_linear_uncertain={uncertain.jo_linear:.12g}\n")
            fh.write(f"ratio_uncertain={uncertain.ratio:.12g}\n")
        paths.append(summary)
        files = tuple(paths)
    return StudyReport(nominal=nominal, uncertain=uncertain, files=files)


def write_trajectory_csv(result: SimResult, path) -> None:
    """Write ``t, x*, xhat*, y*, Jo`` with 13 significant digits and LF endings."""
    n = result.x.shape[1]
    n_y = result.y.shape[1]
    header = (
        ["t"]
        + [f"x{i + 1}" for i in range(n)]
        + [f"xhat{i + 1}" for i in range(n)]
        + [f"y{i + 1}" for i in range(n_y)]
        + ["Jo"]
    )
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for k in range(result.t.size):
            row = (
                [result.t[k]]
                + list(result.x[k])
                + list(result.xhat[k])
                + list(result.y[k])
                + [result.jo[k]]
            )
            fh.write(",".join(f"{v:.12e}" for v in row) + "\n")
