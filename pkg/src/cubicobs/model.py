"""Plant, observer, and certificate data model with JSON persistence.

A configuration document is a single JSON object:

.. code-block:: json

    {
      "n": 2, "n_u": 1, "n_y": 1, "n_g": 1,
      "A": [[-2, -10], [0, -1]], "C": [[1, 0]], "D": [[-1], [1]],
      "delta": [1.0], "tau": [],
      "f_u": ["u1@1", "u1"],
      "f_g": ["x2*x1"],
      "f_L": ["x1*cos(u1)", "sin(x2)"],
      "lipschitz": {"gamma": 1.0},
      "observer": {"G": "...", "J": "...", "E": "...", "N": "...",
                   "theta": "...", "alpha": 1.0},
      "certificate": {"P": "...", "beta": 100.0}
    }

Matrices are row-major arrays of arrays.  ``f_u`` entries may reference only
input/output variables; the state enters through ``f_g`` and ``f_L``.
``lipschitz`` is either ``{"gamma": g}`` with ``g > 0`` (classical Lipschitz
bound for the design-model nonlinearity) or ``{"rho": r, "a": a, "b": b}``
(one-sided Lipschitz constant plus quadratic inner-boundedness constants).
``observer`` and ``certificate`` are optional.  A certificate block stores
``{"P", "beta"}`` or ``{"P", "mu1", "mu2"}`` only: margins are always
recomputed from the matrices, never trusted from a file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

import numpy as np

from .exprlang import (
    Expr,
    ExprError,
    SignalDims,
    parse,
    unparse,
    variables,
)
from .numlin import as_matrix, definiteness_margin

if TYPE_CHECKING:  # pragma: no cover - only for annotations
    from .cert import EquilibriumVerdict

__all__ = [
    "ConfigError",
    "PlantModel",
    "Lipschitz",
    "OneSidedLipschitz",
    "LipschitzSpec",
    "ObserverParams",
    "Certificate",
    "SystemConfig",
    "Violation",
    "validate",
    "example_system",
    "ExampleSystem",
    "load_config",
    "save_config",
    "config_to_dict",
    "config_from_dict",
]

_SYM_TOL = 1e-9


class ConfigError(ValueError):
    """Configuration violates the schema; the message names the offending field."""


def _eq_arrays(a: np.ndarray, b: np.ndarray) -> bool:
    return a.shape == b.shape and np.array_equal(a, b)


@dataclass(eq=False)
class PlantModel:
    """State equation data: ``dx/dt = A x + f_u + D f_g + f_L``.

    ``f_u`` collects the known input-driven terms (it may not reference the
    state), ``f_g`` is the unknown-input nonlinearity entering through the
    channel matrix ``D``, and ``f_L`` is the bounded-nonlinearity part that
    the observer replicates.  ``delta`` and ``tau`` are the input and output
    delay lists that the expressions index by slot.
    """

    A: np.ndarray
    C: np.ndarray
    D: np.ndarray
    n_u: int
    delta: tuple[float, ...] = ()
    tau: tuple[float, ...] = ()
    f_u: tuple[Expr, ...] = ()
    f_g: tuple[Expr, ...] = ()
    f_L: tuple[Expr, ...] = ()

    def __post_init__(self):
        self.A = as_matrix(self.A, "A")
        self.C = as_matrix(self.C, "C")
        self.D = as_matrix(self.D, "D")
        self.delta = tuple(float(d) for d in self.delta)
        self.tau = tuple(float(d) for d in self.tau)
        self.f_u = tuple(self.f_u)
        self.f_g = tuple(self.f_g)
        self.f_L = tuple(self.f_L)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def n_y(self) -> int:
        return self.C.shape[0]

    @property
    def n_g(self) -> int:
        return self.D.shape[1]

    def dims(self) -> SignalDims:
        return SignalDims(
            n=self.n,
            n_u=self.n_u,
            n_y=self.n_y,
            n_delta=len(self.delta),
            n_tau=len(self.tau),
        )

    def __eq__(self, other):
        if not isinstance(other, PlantModel):
            return NotImplemented
        return (
            _eq_arrays(self.A, other.A)
            and _eq_arrays(self.C, other.C)
            and _eq_arrays(self.D, other.D)
            and self.n_u == other.n_u
            and self.delta == other.delta
            and self.tau == other.tau
            and self.f_u == other.f_u
            and self.f_g == other.f_g
            and self.f_L == other.f_L
        )


@dataclass(frozen=True)
class Lipschitz:
    """Classical Lipschitz bound: ``|f_L(a) - f_L(b)| <= gamma |a - b|``."""

    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")


@dataclass(frozen=True)
class OneSidedLipschitz:
    """One-sided Lipschitz constant ``rho`` with quadratic inner-boundedness
    constants ``a``, ``b``."""

    rho: float
    a: float
    b: float


LipschitzSpec = Lipschitz | OneSidedLipschitz


@dataclass(eq=False)
class ObserverParams:
    """Gains of the cubic observer.

    The observer integrates ``dw/dt = G w + J y + (I - E C)(f_u + f_L(xhat))
    - ((y - C xhat)' theta (y - C xhat)) N (y - C xhat)`` and reconstructs
    ``xhat = w + E y``.
    """

    G: np.ndarray
    J: np.ndarray
    E: np.ndarray
    N: np.ndarray
    theta: np.ndarray
    alpha: float = 1.0

    def __post_init__(self):
        self.G = as_matrix(self.G, "G")
        self.J = as_matrix(self.J, "J")
        self.E = as_matrix(self.E, "E")
        self.N = as_matrix(self.N, "N")
        self.theta = as_matrix(self.theta, "theta")
        self.alpha = float(self.alpha)

    def __eq__(self, other):
        if not isinstance(other, ObserverParams):
            return NotImplemented
        return (
            _eq_arrays(self.G, other.G)
            and _eq_arrays(self.J, other.J)
            and _eq_arrays(self.E, other.E)
            and _eq_arrays(self.N, other.N)
            and _eq_arrays(self.theta, other.theta)
            and self.alpha == other.alpha
        )


@dataclass(eq=False)
class Certificate:
    """Lyapunov certificate: ``P`` plus multiplier(s).

    Exactly one of ``beta`` (Lipschitz case) or ``mu1``/``mu2`` (one-sided
    case) is set.  ``lmi_margin``, ``n_margin``, and ``equilibrium`` are
    filled in by the verification routines; they are never persisted, so a
    loaded certificate carries no stale claims.
    """

    P: np.ndarray
    beta: float | None = None
    mu1: float | None = None
    mu2: float | None = None
    lmi_margin: float | None = None
    n_margin: float | None = None
    equilibrium: "EquilibriumVerdict | None" = None

    def __post_init__(self):
        self.P = as_matrix(self.P, "P")
        has_beta = self.beta is not None
        has_mu = self.mu1 is not None or self.mu2 is not None
        if has_beta and has_mu:
            raise ValueError("certificate carries beta or mu1/mu2, not both")
        if not has_beta and (self.mu1 is None or self.mu2 is None):
            raise ValueError("certificate needs beta, or both mu1 and mu2")

    def multipliers(self) -> tuple[float, ...]:
        if self.beta is not None:
            return (float(self.beta),)
        return (float(self.mu1), float(self.mu2))

    def __eq__(self, other):
        if not isinstance(other, Certificate):
            return NotImplemented
        return (
            _eq_arrays(self.P, other.P)
            and self.beta == other.beta
            and self.mu1 == other.mu1
            and self.mu2 == other.mu2
        )


@dataclass(eq=False)
class SystemConfig:
    """One configuration document: plant, bound type, optional observer and
    certificate."""

    plant: PlantModel
    lipschitz: LipschitzSpec
    observer: ObserverParams | None = None
    certificate: Certificate | None = None

    def __eq__(self, other):
        if not isinstance(other, SystemConfig):
            return NotImplemented
        return (
            self.plant == other.plant
            and self.lipschitz == other.lipschitz
            and self.observer == other.observer
            and self.certificate == other.certificate
        )


# --- validation ----------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    name: str
    message: str


def _check_expr_refs(exprs, dims: SignalDims, label: str, out: list[Violation]):
    for i, e in enumerate(exprs):
        for ref in variables(e):
            ok = True
            if ref.kind == "x":
                ok = 1 <= ref.index <= dims.n and ref.slot == 0
            elif ref.kind == "u":
                ok = 1 <= ref.index <= dims.n_u and 0 <= ref.slot <= dims.n_delta
            else:
                ok = 1 <= ref.index <= dims.n_y and 0 <= ref.slot <= dims.n_tau
            if not ok:
                out.append(
                    Violation(
                        f"{label}-ref-range",
                        f"{label}[{i}] references {unparse(ref)} outside the model dimensions",
                    )
                )


def validate(plant: PlantModel, observer: ObserverParams | None = None) -> list[Violation]:
    """Check dimensions and invariants; an empty report means valid."""
    out: list[Violation] = []
    n = plant.A.shape[0]
    if plant.A.shape[1] != n:
        out.append(Violation("A-square", f"A must be square, got {plant.A.shape}"))
    if plant.C.shape[1] != n:
        out.append(Violation("C-dims", f"C must have {n} columns, got {plant.C.shape}"))
    if plant.D.shape[0] != n:
        out.append(Violation("D-dims", f"D must have {n} rows, got {plant.D.shape}"))
    if plant.n_u < 0:
        out.append(Violation("n_u-nonneg", "n_u must be nonnegative"))
    for i, d in enumerate(plant.delta):
        if d < 0:
            out.append(Violation("delta-nonneg", f"delta[{i}] must be nonnegative"))
    for i, d in enumerate(plant.tau):
        if d < 0:
            out.append(Violation("tau-nonneg", f"tau[{i}] must be nonnegative"))
    if len(plant.f_u) != n:
        out.append(Violation("f_u-len", f"f_u must have {n} components"))
    if len(plant.f_g) != plant.n_g:
        out.append(Violation("f_g-len", f"f_g must have {plant.n_g} components"))
    if len(plant.f_L) != n:
        out.append(Violation("f_L-len", f"f_L must have {n} components"))
    for i, e in enumerate(plant.f_u):
        for ref in variables(e):
            if ref.kind == "x":
                out.append(
                    Violation("f_u-state-ref", f"f_u[{i}]: f_u must not reference state")
                )
                break
    dims = plant.dims()
    _check_expr_refs(plant.f_u, dims, "f_u", out)
    _check_expr_refs(plant.f_g, dims, "f_g", out)
    _check_expr_refs(plant.f_L, dims, "f_L", out)

    if observer is None:
        return out

    n_y = plant.C.shape[0]
    if observer.G.shape != (n, n):
        out.append(Violation("G-dims", f"G must be {n}x{n}, got {observer.G.shape}"))
    if observer.J.shape != (n, n_y):
        out.append(Violation("J-dims", f"J must be {n}x{n_y}, got {observer.J.shape}"))
    if observer.E.shape != (n, n_y):
        out.append(Violation("E-dims", f"E must be {n}x{n_y}, got {observer.E.shape}"))
    if observer.N.shape != (n, n_y):
        out.append(Violation("N-dims", f"N must be {n}x{n_y}, got {observer.N.shape}"))
    if observer.theta.shape != (n_y, n_y):
        out.append(
            Violation("theta-dims", f"theta must be {n_y}x{n_y}, got {observer.theta.shape}")
        )
    else:
        asym = float(np.max(np.abs(observer.theta - observer.theta.T)))
        if asym > _SYM_TOL:
            out.append(
                Violation("theta-symmetry", f"theta must be symmetric (asymmetry {asym:.2e})")
            )
        elif definiteness_margin(-observer.theta) > _SYM_TOL:
            out.append(Violation("theta-psd", "theta must be positive semidefinite"))
    if not observer.alpha > 0:
        out.append(Violation("alpha-positive", "alpha must be positive"))
    return out


# --- built-in example ----------------------------------------------------

@dataclass(eq=False)
class ExampleSystem:
    """The bundled two-state demonstration: nominal and perturbed plants
    sharing one certified observer."""

    nominal: PlantModel
    uncertain: PlantModel
    observer: ObserverParams
    certificate: Certificate
    lipschitz: Lipschitz

    def nominal_config(self) -> SystemConfig:
        return SystemConfig(self.nominal, self.lipschitz, self.observer, self.certificate)

    def uncertain_config(self) -> SystemConfig:
        return SystemConfig(self.uncertain, self.lipschitz, self.observer, self.certificate)


def example_system() -> ExampleSystem:
    """Built-in two-state system with an unknown-input channel and a
    certified cubic observer.

    The nominal plant has a one-second input delay; the perturbed variant
    changes the drift matrix and stretches the delay to two seconds while
    keeping the same expressions, so the pair exercises observer robustness
    against model mismatch.  The stored ``P`` certifies the Lipschitz-case
    feasibility block for ``gamma = 1`` with multiplier ``beta = 100``, and
    ``N`` is the cubic gain ``-alpha P^{-1} C' theta`` for that ``P``.
    """
    dims = SignalDims(n=2, n_u=1, n_y=1, n_delta=1, n_tau=0)
    f_u = (parse("u1@1", dims), parse("u1", dims))
    f_g = (parse("x2*x1", dims),)
    f_L = (parse("x1*cos(u1)", dims), parse("sin(x2)", dims))
    nominal = PlantModel(
        A=[[-2.0, -10.0], [0.0, -1.0]],
        C=[[1.0, 0.0]],
        D=[[-1.0], [1.0]],
        n_u=1,
        delta=(1.0,),
        tau=(),
        f_u=f_u,
        f_g=f_g,
        f_L=f_L,
    )
    uncertain = PlantModel(
        A=[[-0.9, -8.9], [1.1, 0.1]],
        C=[[1.0, 0.0]],
        D=[[-1.0], [1.0]],
        n_u=1,
        delta=(2.0,),
        tau=(),
        f_u=f_u,
        f_g=f_g,
        f_L=f_L,
    )
    P = np.array([[59.0535, 1.7898], [1.7898, 17.8858]])
    C = nominal.C
    theta = np.eye(1)
    alpha = 1.0
    N = -alpha * np.linalg.solve(P, C.T @ theta)
    observer = ObserverParams(
        G=[[-10.0, 0.0], [1.0, -11.0]],
        J=[[0.0], [9.0]],
        E=[[1.0], [-1.0]],
        N=N,
        theta=theta,
        alpha=alpha,
    )
    certificate = Certificate(P=P, beta=100.0)
    return ExampleSystem(nominal, uncertain, observer, certificate, Lipschitz(gamma=1.0))


# --- JSON persistence ----------------------------------------------------

def _need(d: dict, key: str, path: str = "") -> Any:
    if key not in d:
        raise ConfigError(f"{path}{key}: missing required key")
    return d[key]


def _as_int(v, path: str) -> int:
    if not isinstance(v, int) or isinstance(v, bool):
        raise ConfigError(f"{path}: must be an integer")
    return v


def _as_number(v, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}: must be a number")
    return float(v)


def _as_mat(v, rows: int, cols: int, path: str) -> np.ndarray:
    if not isinstance(v, list) or len(v) != rows:
        raise ConfigError(f"{path}: must be a {rows}x{cols} array of arrays")
    out = np.empty((rows, cols))
    for i, row in enumerate(v):
        if not isinstance(row, list) or len(row) != cols:
            raise ConfigError(f"{path}[{i}]: must be an array of {cols} numbers")
        for j, entry in enumerate(row):
            out[i, j] = _as_number(entry, f"{path}[{i}][{j}]")
    if not np.all(np.isfinite(out)):
        raise ConfigError(f"{path}: entries must be finite")
    return out


def _as_exprs(v, count: int, dims: SignalDims, path: str) -> tuple[Expr, ...]:
    if not isinstance(v, list) or len(v) != count:
        raise ConfigError(f"{path}: must be a list of {count} expression strings")
    out = []
    for i, text in enumerate(v):
        if not isinstance(text, str):
            raise ConfigError(f"{path}[{i}]: must be a string")
        try:
            out.append(parse(text, dims))
        except ExprError as exc:
            raise ConfigError(f"{path}[{i}]: {exc}") from exc
    return tuple(out)


def config_from_dict(doc: dict) -> SystemConfig:
    """Build a :class:`SystemConfig` from a parsed JSON object."""
    if not isinstance(doc, dict):
        raise ConfigError("document: must be a JSON object")
    n = _as_int(_need(doc, "n"), "n")
    n_u = _as_int(_need(doc, "n_u"), "n_u")
    n_y = _as_int(_need(doc, "n_y"), "n_y")
    n_g = _as_int(_need(doc, "n_g"), "n_g")
    if n < 1:
        raise ConfigError("n: must be at least 1")
    if n_y < 1:
        raise ConfigError("n_y: must be at least 1")
    if n_u < 0 or n_g < 0:
        raise ConfigError("n_u/n_g: must be nonnegative")

    A = _as_mat(_need(doc, "A"), n, n, "A")
    C = _as_mat(_need(doc, "C"), n_y, n, "C")
    D = _as_mat(_need(doc, "D"), n, n_g, "D")

    def delays(key: str) -> tuple[float, ...]:
        v = _need(doc, key)
        if not isinstance(v, list):
            raise ConfigError(f"{key}: must be a list of numbers")
        out = []
        for i, entry in enumerate(v):
            d = _as_number(entry, f"{key}[{i}]")
            if d < 0:
                raise ConfigError(f"{key}[{i}]: delay must be nonnegative")
            out.append(d)
        return tuple(out)

    delta = delays("delta")
    tau = delays("tau")
    dims = SignalDims(n=n, n_u=n_u, n_y=n_y, n_delta=len(delta), n_tau=len(tau))

    f_u = _as_exprs(_need(doc, "f_u"), n, dims, "f_u")
    for i, e in enumerate(f_u):
        for ref in variables(e):
            if ref.kind == "x":
                raise ConfigError(f"f_u[{i}]: f_u must not reference state")
    f_g = _as_exprs(_need(doc, "f_g"), n_g, dims, "f_g")
    f_L = _as_exprs(_need(doc, "f_L"), n, dims, "f_L")

    plant = PlantModel(A=A, C=C, D=D, n_u=n_u, delta=delta, tau=tau,
                       f_u=f_u, f_g=f_g, f_L=f_L)

    lip = _need(doc, "lipschitz")
    if not isinstance(lip, dict):
        raise ConfigError("lipschitz: must be an object")
    if "gamma" in lip:
        gamma = _as_number(lip["gamma"], "lipschitz.gamma")
        if gamma <= 0:
            raise ConfigError("lipschitz.gamma: must be positive")
        spec: LipschitzSpec = Lipschitz(gamma=gamma)
    elif {"rho", "a", "b"} <= lip.keys():
        spec = OneSidedLipschitz(
            rho=_as_number(lip["rho"], "lipschitz.rho"),
            a=_as_number(lip["a"], "lipschitz.a"),
            b=_as_number(lip["b"], "lipschitz.b"),
        )
    else:
        raise ConfigError('lipschitz: provide {"gamma"} or {"rho", "a", "b"}')

    observer = None
    if "observer" in doc and doc["observer"] is not None:
        obs = doc["observer"]
        if not isinstance(obs, dict):
            raise ConfigError("observer: must be an object")
        theta = (
            _as_mat(obs["theta"], n_y, n_y, "observer.theta")
            if "theta" in obs
            else np.eye(n_y)
        )
        Nmat = (
            _as_mat(obs["N"], n, n_y, "observer.N")
            if "N" in obs
            else np.zeros((n, n_y))
        )
        alpha = _as_number(obs["alpha"], "observer.alpha") if "alpha" in obs else 1.0
        observer = ObserverParams(
            G=_as_mat(_need(obs, "G", "observer."), n, n, "observer.G"),
            J=_as_mat(_need(obs, "J", "observer."), n, n_y, "observer.J"),
            E=_as_mat(_need(obs, "E", "observer."), n, n_y, "observer.E"),
            N=Nmat,
            theta=theta,
            alpha=alpha,
        )

    certificate = None
    if "certificate" in doc and doc["certificate"] is not None:
        crt = doc["certificate"]
        if not isinstance(crt, dict):
            raise ConfigError("certificate: must be an object")
        P = _as_mat(_need(crt, "P", "certificate."), n, n, "certificate.P")
        if "beta" in crt:
            certificate = Certificate(P=P, beta=_as_number(crt["beta"], "certificate.beta"))
        elif {"mu1", "mu2"} <= crt.keys():
            certificate = Certificate(
                P=P,
                mu1=_as_number(crt["mu1"], "certificate.mu1"),
                mu2=_as_number(crt["mu2"], "certificate.mu2"),
            )
        else:
            raise ConfigError('certificate: provide {"P", "beta"} or {"P", "mu1", "mu2"}')

    return SystemConfig(plant=plant, lipschitz=spec, observer=observer,
                        certificate=certificate)


def config_to_dict(cfg: SystemConfig) -> dict:
    """Inverse of :func:`config_from_dict` (margins are not serialized)."""
    plant = cfg.plant
    doc: dict[str, Any] = {
        "n": plant.n,
        "n_u": plant.n_u,
        "n_y": plant.n_y,
        "n_g": plant.n_g,
        "A": plant.A.tolist(),
        "C": plant.C.tolist(),
        "D": plant.D.tolist(),
        "delta": list(plant.delta),
        "tau": list(plant.tau),
        "f_u": [unparse(e) for e in plant.f_u],
        "f_g": [unparse(e) for e in plant.f_g],
        "f_L": [unparse(e) for e in plant.f_L],
    }
    if isinstance(cfg.lipschitz, Lipschitz):
        doc["lipschitz"] = {"gamma": cfg.lipschitz.gamma}
    else:
        doc["lipschitz"] = {
            "rho": cfg.lipschitz.rho,
            "a": cfg.lipschitz.a,
            "b": cfg.lipschitz.b,
        }
    if cfg.observer is not None:
        obs = cfg.observer
        doc["observer"] = {
            "G": obs.G.tolist(),
            "J": obs.J.tolist(),
            "E": obs.E.tolist(),
            "N": obs.N.tolist(),
            "theta": obs.theta.tolist(),
            "alpha": obs.alpha,
        }
    if cfg.certificate is not None:
        crt = cfg.certificate
        block: dict[str, Any] = {"P": crt.P.tolist()}
        if crt.beta is not None:
            block["beta"] = crt.beta
        else:
            block["mu1"] = crt.mu1
            block["mu2"] = crt.mu2
        doc["certificate"] = block
    return doc


def load_config(path) -> SystemConfig:
    """Load and validate a configuration file."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return config_from_dict(doc)


def save_config(cfg: SystemConfig, path) -> None:
    """Write ``cfg`` as JSON; a save/load round trip is structurally exact."""
    with open(path, "w") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2)
        fh.write("\n")
