"""Experiment drivers: convergence-rate scans, log-log slope fits, the
mixture divergence scans, the bound audit and the invariant self-test."""
from __future__ import annotations

import io
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from math import log, sqrt

import numpy as np

from .convolution import ROUTES, convolve_pair, nfold_sequence, nfold_symmetric
from .counterexamples import MixtureDensity, PointMass, mixture_family, mixture_power
from .entropy_bound import (
    balancing_t,
    non_gaussianity_upper,
    pointwise_bound_check,
    relent_upper,
    truncated_rhs,
)
from .errors import DegenerateFit, NotCentered, QcltError, RouteUnavailable, SpecError
from .fock import (
    DiagonalState,
    covariance,
    first_moments,
    hs_distance,
    moment,
    relative_entropy,
    trace_distance,
    truncate,
)
from .gaussian import ThermalSpec, thermal_fock, uncertainty_check
from .phase_space import max_char_modulus, polar_grid
from .states import parse_state, random_dense, random_diagonal

log_ = logging.getLogger(__name__)

METRICS = ("trace", "relent", "hs")
CSV_COLUMNS = ("n", "trace_dist", "relent", "hs_dist", "sqrt_n_scaled", "n_scaled", "wall_ms")
DEFAULT_GRID = tuple(2 ** j for j in range(4, 13))
GNUPLOT = """# usage: gnuplot -e "csv='{csv}'" {name}
set datafile separator ','
set logscale xy
set xlabel 'n'
set key top right
plot csv every ::1 using 1:2 with linespoints title 'trace distance', \\
     csv every ::1 using 1:3 with linespoints title 'relative entropy', \\
     csv every ::1 using 1:5 with linespoints title 'sqrt(n) trace', \\
     csv every ::1 using 1:6 with linespoints title 'n relent'
"""


def worker_count() -> int:
    env = os.environ.get("QCLT_THREADS", "")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise SpecError(f"QCLT_THREADS must be an integer, got {env!r}") from exc
    return os.cpu_count() or 1


def parse_n_grid(text: str) -> list:
    """'16:4096:x2' (geometric), '16:64:+16' (arithmetic) or '16,32,64'."""
    try:
        if ":" in text:
            lo, hi, step = text.split(":")
            lo, hi = int(lo), int(hi)
            out = [lo]
            if step.startswith("x"):
                f = int(step[1:])
                if f < 2:
                    raise SpecError("geometric factor must be at least 2")
                while out[-1] * f <= hi:
                    out.append(out[-1] * f)
            else:
                d = int(step.lstrip("+"))
                if d < 1:
                    raise SpecError("arithmetic step must be positive")
                while out[-1] + d <= hi:
                    out.append(out[-1] + d)
            return out
        return [int(x) for x in text.split(",")]
    except ValueError as exc:
        raise SpecError(f"cannot parse n-grid {text!r}") from exc


# ------------------------------------------------------------ rate scans

@dataclass
class ScanConfig:
    state_spec: str
    n_grid: list = field(default_factory=lambda: list(DEFAULT_GRID))
    metrics: tuple = ("trace", "relent")
    route: str = "diagonal"
    cutoff: int = 64
    grid_radius: float | None = None
    grid_step: float | None = None
    seed: int = 0
    out: str | None = None
    timing: bool = True

    def __post_init__(self):
        self.n_grid = [int(n) for n in self.n_grid]
        if not self.n_grid or any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise SpecError("n-grid must be nonempty and strictly increasing")
        if self.n_grid[0] < 1:
            raise SpecError("n must be positive")
        self.metrics = tuple(self.metrics)
        if not self.metrics or any(m not in METRICS for m in self.metrics):
            raise SpecError(f"metrics must be a nonempty subset of {METRICS}")
        if self.route not in ROUTES:
            raise RouteUnavailable(f"unknown route {self.route!r}")
        if self.cutoff < 8:
            raise SpecError("cutoff must be at least 8")

    def header(self) -> str:
        d = asdict(self)
        d.pop("out")
        d.pop("timing")
        return json.dumps(d, sort_keys=True)


@dataclass
class RateScanRecord:
    n: int
    trace_dist: float
    relent: float
    hs_dist: float
    wall_ms: int = 0

    def __post_init__(self):
        self.n = int(self.n)
        self.trace_dist = float(self.trace_dist)
        self.relent = float(self.relent)
        self.hs_dist = float(self.hs_dist)
        self.wall_ms = int(self.wall_ms)

    @property
    def sqrt_n_scaled(self) -> float:
        return sqrt(self.n) * self.trace_dist

    @property
    def n_scaled(self) -> float:
        return self.n * self.relent

    def row(self) -> str:
        vals = (self.n, self.trace_dist, self.relent, self.hs_dist,
                self.sqrt_n_scaled, self.n_scaled, self.wall_ms)
        return ",".join(repr(v) if isinstance(v, float) else str(v) for v in vals)


def _metrics(out, ref, wanted) -> tuple:
    nan = float("nan")
    t = trace_distance(out, ref) if "trace" in wanted else nan
    r = relative_entropy(out, ref) if "relent" in wanted else nan
    h = hs_distance(out, ref) if "hs" in wanted else nan
    return t, r, h


def _reference(rho, K: int):
    """Gaussification of the input state, realized at cutoff K with its
    geometric continuation so that tails are accounted for."""
    if np.max(np.abs(first_moments(rho))) > 1e-8:
        raise NotCentered("rate scans need a centered input state")
    gamma = covariance(rho)
    nu = sqrt(max(float(np.linalg.det(gamma)), 1.0))
    if np.max(np.abs(gamma - nu * np.eye(2))) > 1e-9 * nu:
        raise RouteUnavailable("rate scans compare against thermal Gaussifications only")
    th = ThermalSpec.from_nu(nu)
    ref = thermal_fock(th, K, tol=1.0)
    return ref


def _mixture_records(w, cfg: ScanConfig) -> list:
    def job(n):
        t0 = time.perf_counter()
        P = mixture_power(w, n, cfg.cutoff)
        tr = P.trace_dist() if "trace" in cfg.metrics else float("nan")
        rel = P.relent() if "relent" in cfg.metrics else float("nan")
        hs = P.hs_dist() if "hs" in cfg.metrics else float("nan")
        ms = int(round(1000 * (time.perf_counter() - t0))) if cfg.timing else 0
        return RateScanRecord(n, tr, rel, hs, ms)

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        return list(pool.map(job, cfg.n_grid))


def rate_scan(cfg: ScanConfig) -> list:
    """rho^{box n} against the fixed Gaussification of rho along the grid."""
    res = parse_state(cfg.state_spec, cutoff=cfg.cutoff if cfg.state_spec.startswith("thermal") else None)
    if res.density is not None:
        return _mixture_records(res.density, cfg)
    rho = res.state
    if cfg.route == "oracle":
        K = None
    else:
        K = cfg.cutoff
    if cfg.route == "diagonal":
        ref = _reference(rho, K)
        records = []
        # grid points share doubling work, so each point is timed from the previous one
        prev = time.perf_counter()
        for n, out in nfold_sequence(rho, cfg.n_grid, "diagonal", K):
            vals = _metrics(out, ref, cfg.metrics)
            now = time.perf_counter()
            records.append(RateScanRecord(n, *vals, int(round(1000 * (now - prev))) if cfg.timing else 0))
            prev = now
        return records
    grid = None
    if cfg.route == "char" and not isinstance(rho, DiagonalState):
        grid = polar_grid(K, cfg.grid_radius)

    def job(n):
        t0 = time.perf_counter()
        out = nfold_symmetric(rho, n, cfg.route, K, grid=grid)
        ref = _reference(rho, out.K)
        vals = _metrics(out, ref, cfg.metrics)
        ms = int(round(1000 * (time.perf_counter() - t0))) if cfg.timing else 0
        return RateScanRecord(n, *vals, ms)

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        return list(pool.map(job, cfg.n_grid))


def records_csv(records, cfg: ScanConfig | None = None) -> str:
    buf = io.StringIO()
    if cfg is not None:
        buf.write(f"# config: {cfg.header()}\n")
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for r in records:
        buf.write(r.row() + "\n")
    return buf.getvalue()


def write_csv(records, path, cfg: ScanConfig | None = None, plot: bool = True) -> None:
    with open(path, "w") as fh:
        fh.write(records_csv(records, cfg))
    if plot:
        name = os.path.splitext(os.path.basename(str(path)))[0] + ".gp"
        gp = os.path.join(os.path.dirname(str(path)) or ".", name)
        with open(gp, "w") as fh:
            fh.write(GNUPLOT.format(csv=os.path.basename(str(path)), name=name))


# ------------------------------------------------------------ fits

def slope_fit(x, y=None, window=None, metric: str = "relent"):
    """Least-squares slope of ln y against ln x, with its standard error.

    Either pass arrays x, y or a list of RateScanRecord and a metric name.
    """
    if y is None:
        recs = list(x)
        attr = {"trace": "trace_dist", "relent": "relent", "hs": "hs_dist"}.get(metric, metric)
        x = [r.n for r in recs]
        y = [getattr(r, attr) for r in recs]
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if window is not None:
        x, y = x[window[0]: window[1]], y[window[0]: window[1]]
    if x.size < 4:
        raise DegenerateFit("need at least four points")
    if not np.all(np.isfinite(y)) or np.any(y <= 1e-14) or np.any(x <= 0):
        raise DegenerateFit("values must be finite and above 1e-14")
    lx, ly = np.log(x), np.log(y)
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ coef
    dof = lx.size - 2
    s2 = float(resid @ resid) / dof
    se = sqrt(s2 / float(np.sum((lx - lx.mean()) ** 2)))
    return float(coef[0]), se


def top_decade_ratio(records, attr: str) -> float:
    """max/min of a scaled metric over the records with n in the top decade."""
    nmax = max(r.n for r in records)
    vals = [getattr(r, attr) for r in records if r.n * 10 >= nmax]
    return max(vals) / min(vals)


# ------------------------------------------------------------ counterexamples

def increasing_verdict(values, tol: float = 0.01) -> bool:
    """True iff each value exceeds its predecessor up to the relative slack
    and the sequence ends strictly above where it began."""
    v = list(values)
    if len(v) < 2 or not all(np.isfinite(v)):
        return False
    steps = all(b > a * (1 - tol) for a, b in zip(v, v[1:]))
    return bool(steps and v[-1] > v[0])


def counterexample_scan(kind: str, theta: float = 0.5, n_grid=None, cutoff: int = 1024,
                        density=None, timing: bool = True):
    """Scaled distance of rho^{box n} from rho_G for a mixture family.
    Returns (records, verdict)."""
    if kind not in ("trace", "relent"):
        raise SpecError("kind must be trace or relent")
    w = density if density is not None else mixture_family(kind, theta)
    n_grid = list(n_grid) if n_grid is not None else [2 ** j for j in range(6, 13)]
    cfg = ScanConfig(f"mixture:kind={kind},theta={theta}", n_grid, ("trace", "relent", "hs"),
                     "char", max(cutoff, 8), timing=timing)
    records = _mixture_records(w, cfg)
    attr = "sqrt_n_scaled" if kind == "trace" else "n_scaled"
    return records, increasing_verdict([getattr(r, attr) for r in records])


# ------------------------------------------------------------ bound audit

def _audit_states(seed: int, count: int, cutoff: int):
    rng = np.random.default_rng(seed)
    for i in range(count):
        if i % 2 == 0:
            yield "diagonal", random_diagonal(rng, cutoff)
        else:
            yield "dense", random_dense(rng, cutoff)


def _round(x: float) -> float:
    return float(f"{x:.12g}")


def audit_entry(label: str, rho) -> dict:
    ng = non_gaussianity_upper(rho)
    det = ng.detail
    entry = {"kind": label, "d": _round(ng.d_g), "bound": _round(ng.bound),
             "margin": _round(det.margin), "holds": bool(ng.holds),
             "epsilon": _round(det.epsilon)}
    # pointwise and truncated checks in the frame where the reference is thermal
    gamma = covariance(rho)
    nu = sqrt(max(float(np.linalg.det(gamma)), 1.0))
    if np.max(np.abs(gamma - nu * np.eye(2))) <= 1e-9 * nu and nu > 1:
        th = ThermalSpec.from_nu(nu)
        pw, _ = pointwise_bound_check(rho, th)
        ts = [0.0, 1.0, 2.0, 5.0, balancing_t(det.epsilon, 1)]
        tr = [truncated_rhs(rho, th, t) for t in ts]
        entry["pointwise_margin"] = _round(pw)
        entry["truncated_holds"] = all(bool(r.holds) for r in tr)
        entry["truncated_margin"] = _round(min(r.rhs - r.divergence for r in tr))
    return entry, det.constants


def bound_audit(seed: int = 42, count: int = 50, cutoff: int = 16, states=None) -> dict:
    """Run the relative-entropy bound and the non-Gaussianity corollary over
    seeded random states (or the given (label, state) pairs)."""
    if count < 1:
        raise SpecError("count must be at least 1")
    pairs = list(states) if states is not None else list(_audit_states(seed, count, cutoff))
    entries, failures = [], []
    worst, worst_consts = None, None
    for i, (label, rho) in enumerate(pairs):
        e, consts = audit_entry(label, rho)
        e["index"] = i
        entries.append(e)
        bad = (not e["holds"]) or e.get("pointwise_margin", 0.0) < -1e-8 \
            or not e.get("truncated_holds", True)
        if bad:
            failures.append(i)
        if worst is None or e["margin"] < worst["margin"]:
            worst, worst_consts = e, consts
    return {
        "seed": seed,
        "count": len(pairs),
        "cutoff": cutoff,
        "failures": failures,
        "worst_margin": worst["margin"],
        "worst_index": worst["index"],
        "constants": {k: _round(v) for k, v in worst_consts.as_dict().items()},
        "entries": entries,
    }


def audit_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


# ------------------------------------------------------------ self-test

def _check(name, fn):
    t0 = time.perf_counter()
    try:
        ok, detail = fn()
    except QcltError as exc:
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return {"name": name, "ok": bool(ok), "detail": detail, "seconds": round(time.perf_counter() - t0, 3)}


def _suite_states(seed: int = 7, count: int = 10, K: int = 12):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        out.append(random_diagonal(rng, K) if i % 2 == 0 else random_dense(rng, K))
    return out


def _moments_monotone():
    worst = np.inf
    for rho in _suite_states(count=20):
        for k1, k2 in [(1, 2), (2, 3), (2, 4), (3, 4)]:
            m1 = moment(rho, k1).value
            m2 = moment(rho, k2).value
            worst = min(worst, m2 ** (k1 / k2) + 1e-9 - m1)
    return worst >= 0, f"min slack {worst:.3e}"


def _truncation_tail():
    worst = np.inf
    eq = 0.0
    for rho in _suite_states(count=10):
        for n in range(1, rho.K):
            sig, kept = truncate(rho, n)
            for s in (2, 3, 4):
                worst = min(worst, n ** (-s / 2) * moment(rho, s).value - (1 - kept))
            if isinstance(rho, DiagonalState):
                # for a diagonal state the truncation error has a closed form
                from .fock import as_dense
                d = trace_distance(as_dense(rho), as_dense(sig, rho.K))
                eq = max(eq, abs(d - 2 * (1 - kept)))
    return worst >= 0 and eq <= 1e-10, f"min slack {worst:.3e}, equality gap {eq:.1e}"


def _uncertainty():
    worst = np.inf
    for rho in _suite_states(count=20):
        worst = min(worst, uncertainty_check(covariance(rho)))
    return worst >= -1e-9, f"min eigenvalue {worst:.3e}"


def _char_below_one():
    worst = 0.0
    for rho in _suite_states(count=6, K=8):
        worst = max(worst, max_char_modulus(rho, (0.1, 5.0), 200))
    return worst < 1.0, f"max |chi| {worst:.6f}"


def _wigner_positive():
    from .convolution import wigner_positivity_probe
    from .states import number_state, superposition

    worst = np.inf
    pairs = [(number_state(1), number_state(1)), (number_state(2), number_state(0)),
             (superposition(0, 3), superposition(0, 3))]
    pairs += [(r, r) for r in _suite_states(count=4, K=6)]
    for a, b in pairs:
        worst = min(worst, wigner_positivity_probe(convolve_pair(a, b, 0.5, cutoff=a.K + b.K)))
    return worst >= -1e-7, f"min W {worst:.3e}"


def _covariance_additive():
    from .fock import center

    worst = 0.0
    st = [center(r)[0] for r in _suite_states(count=6, K=6)]
    for a, b in zip(st, st[1:]):
        for eta in (0.5, 0.3):
            K = a.K + b.K
            out = convolve_pair(a, b, eta, cutoff=K)
            g = eta * covariance(a) + (1 - eta) * covariance(b)
            worst = max(worst, float(np.max(np.abs(covariance(out) - g))))
    return worst <= 1e-8, f"max deviation {worst:.2e}"


def _pinsker():
    worst = np.inf
    ref = DiagonalState(np.full(9, 1 / 9))
    for a in _suite_states(count=10, K=8):
        worst = min(worst, relative_entropy(a, ref) - trace_distance(a, ref) ** 2 / 2)
    recs = rate_scan(ScanConfig("fock:1", [4, 8, 16, 32], ("trace", "relent"), cutoff=64, timing=False))
    for r in recs:
        worst = min(worst, r.relent - r.trace_dist ** 2 / 2)
    return worst >= -1e-9, f"min slack {worst:.3e}"


def _determinism():
    cfg = ScanConfig("fock:1", [16, 32, 64], ("trace", "relent", "hs"), cutoff=64, timing=False)
    a = records_csv(rate_scan(cfg), cfg)
    b = records_csv(rate_scan(cfg), cfg)
    r1 = audit_json(bound_audit(3, 4, 8))
    r2 = audit_json(bound_audit(3, 4, 8))
    return a == b and r1 == r2, "csv and audit reruns identical" if a == b and r1 == r2 else "reruns differ"


SELFTEST = (
    ("moment monotonicity", _moments_monotone),
    ("truncation tail", _truncation_tail),
    ("uncertainty relation", _uncertainty),
    ("char modulus below one", _char_below_one),
    ("wigner positivity of convolutions", _wigner_positive),
    ("covariance additivity", _covariance_additive),
    ("pinsker consistency", _pinsker),
    ("determinism", _determinism),
)


def selftest() -> list:
    return [_check(name, fn) for name, fn in SELFTEST]


__all__ = [
    "ScanConfig", "RateScanRecord", "rate_scan", "records_csv", "write_csv", "slope_fit",
    "top_decade_ratio", "counterexample_scan", "increasing_verdict", "bound_audit", "audit_json",
    "audit_entry", "selftest", "parse_n_grid", "worker_count", "CSV_COLUMNS", "DEFAULT_GRID",
]
