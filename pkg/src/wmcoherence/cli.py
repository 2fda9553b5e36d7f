"""Command-line front end.

    wmcoherence run      --config configs/published.toml --out out/
    wmcoherence compare  --config ... --channel gaussian --channel oracle
    wmcoherence validate [--config ...]
    wmcoherence spectrum out/correlation.csv --out spec/

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 validation failure. Errors are also reported as one JSON record on
stderr (and as error.json in the output directory when it exists).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys as _sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, dynamics, gaussian, grid, observables, oracle
from .dynamics import Method
from .model import HarmonicSurface, TwoStateSystem, published_system

if _sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VALIDATION = 0, 2, 3, 4
CHANNELS = ("gaussian", "grid", "oracle")
# |delta c| above this marks the divergence time in compare reports
DIVERGENCE_LEVEL = 0.1


class ConfigError(ValueError):
    pass


def _num(x):
    # 17 significant digits, round-trip exact; JSON has no inf/nan literals
    x = float(x)
    if not math.isfinite(x):
        return str(x)
    return float(f"{x:.17g}")


@dataclass
class RunConfig:
    system: TwoStateSystem = field(default_factory=published_system)
    method: str = "moyal"
    channels: list = field(default_factory=lambda: ["gaussian"])
    dt: float | None = None
    total_time: float = 8 * 2 * math.pi / 0.004
    grid_spec: grid.GridSpec = field(default_factory=grid.GridSpec)
    grid_orders: tuple = grid.DEFAULT_ORDERS
    parallel: bool = False
    window: str = "hann"
    tau: float = math.inf
    zero_pad: int = 8
    out_dir: str = "out"
    sample_every: int = 1
    snapshot_every: int = 0

    def __post_init__(self):
        try:
            self.method = Method.parse(self.method).value
        except ValueError as exc:
            raise ConfigError(f"unknown method {self.method!r}") from exc
        self.channels = list(self.channels)
        for ch in self.channels:
            if ch not in CHANNELS:
                raise ConfigError(f"unknown channel {ch!r}; expected one of {CHANNELS}")
        if not self.channels:
            raise ConfigError("at least one channel is required")
        if self.dt is not None and not (math.isfinite(self.dt) and self.dt > 0):
            raise ConfigError("dt must be positive")
        if not (math.isfinite(self.total_time) and self.total_time > 0):
            raise ConfigError("total_time must be positive")
        if self.window not in ("rect", "hann"):
            raise ConfigError("window must be 'rect' or 'hann'")
        if not self.tau > 0:
            raise ConfigError("tau must be positive")
        if int(self.zero_pad) < 2:
            raise ConfigError("zero_pad must be at least 2")
        self.zero_pad = int(self.zero_pad)
        if int(self.sample_every) < 1 or int(self.snapshot_every) < 0:
            raise ConfigError("sample_every must be >= 1 and snapshot_every >= 0")
        self.grid_orders = tuple(int(o) for o in self.grid_orders)
        if self.grid_orders not in grid.STENCIL_ORDERS:
            raise ConfigError(f"grid orders must be one of {grid.STENCIL_ORDERS}")

    def to_dict(self) -> dict:
        return {
            "system": self.system.to_dict(),
            "run": {
                "method": self.method,
                "channels": list(self.channels),
                "dt": self.dt,
                "total_time": self.total_time,
                "sample_every": self.sample_every,
                "snapshot_every": self.snapshot_every,
                "out_dir": self.out_dir,
            },
            "grid": {**self.grid_spec.to_dict(), "orders": list(self.grid_orders),
                     "parallel": self.parallel},
            "spectrum": {"window": self.window, "tau": self.tau, "zero_pad": self.zero_pad},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        doc = dict(doc)
        known = {"system", "run", "grid", "spectrum"}
        extra = set(doc) - known
        if extra:
            raise ConfigError(f"unknown config sections: {sorted(extra)}")
        try:
            system = TwoStateSystem.from_dict(doc["system"]) if "system" in doc else published_system()
            run = dict(doc.get("run", {}))
            g = dict(doc.get("grid", {}))
            orders = g.pop("orders", grid.DEFAULT_ORDERS)
            parallel = bool(g.pop("parallel", False))
            if "np" in g:
                g["np_"] = g.pop("np")
            spec = grid.GridSpec(**g)
            sp = dict(doc.get("spectrum", {}))
            tau = sp.pop("tau", math.inf)
            kwargs = {k: run[k] for k in ("method", "channels", "dt", "total_time", "sample_every",
                                            "snapshot_every", "out_dir") if k in run}
            unknown = set(run) - set(kwargs)
            if unknown:
                raise ConfigError(f"unknown run keys: {sorted(unknown)}")
            return cls(system=system, grid_spec=spec, grid_orders=orders, parallel=parallel,
                       tau=math.inf if tau is None else float(tau), **sp, **kwargs)
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc


def load_config(path) -> RunConfig:
    """Read a TOML or JSON config file."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".json":
            doc = json.loads(raw)
        else:
            doc = tomllib.loads(raw.decode())
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return RunConfig.from_dict(doc)


def spectrum_period(sys: TwoStateSystem, method) -> tuple:
    """(period, expected line spacing) of the spectrum for a method."""
    if Method.parse(method) is Method.MOYAL_EXACT:
        freq = sys.surface2.freq
    else:
        freq = sys.avg_freq
    return 2.0 * math.pi / freq, freq


def _grid_step(cfg: RunConfig, method) -> tuple:
    """(dt, nsteps) for a grid run: the stability bound unless dt is set,
    shortened so the steps end exactly at total_time."""
    if Method.parse(method) is Method.SEMICLASSICAL_LINEARIZED:
        raise ConfigError("the grid channel has no linearized variant")
    if cfg.dt is not None:
        return cfg.dt, int(math.ceil(cfg.total_time / cfg.dt - 1e-9))
    bound = grid.stable_dt(cfg.grid_spec, cfg.system, method)
    n = int(math.ceil(cfg.total_time / bound))
    return cfg.total_time / n, n


def _gaussian_step(cfg: RunConfig) -> tuple:
    dt = dynamics.DEFAULT_DT if cfg.dt is None else cfg.dt
    return dt, int(math.ceil(cfg.total_time / dt - 1e-9))


def channel_series(cfg: RunConfig, channel: str, method, dt: float, nsteps: int, every: int = 1,
                   out: Path | None = None):
    """c(t) from one channel on the samples k*every*dt, k = 0..nsteps//every.

    Returns (CorrelationSeries, extra) where extra is the parameter
    trajectory, the last grid snapshot or None.
    """
    sys = cfg.system
    method = Method.parse(method)
    g0 = gaussian.ground_state_coherence(sys)
    if channel == "gaussian":
        traj = dynamics.propagate(g0, sys, dt, nsteps, method)
        if traj.degenerate:
            raise dynamics.DegenerateState(
                f"state lost normalizability at step {traj.degenerate[0]}", traj.degenerate[0])
        series = observables.correlation_series(traj)
        keep = slice(None, None, every)
        return observables.CorrelationSeries(series.times[keep], series.values[keep],
                                             method.value, "gaussian"), traj
    if channel == "oracle":
        if method is not Method.MOYAL_EXACT:
            raise ConfigError("the oracle channel is exact quantum dynamics only (method moyal)")
        times = dt * np.arange(0, nsteps + 1, every)
        return observables.CorrelationSeries(times, oracle.correlation(sys, times), "moyal", "oracle"), None
    if channel == "grid":
        if method is Method.SEMICLASSICAL_LINEARIZED:
            raise ConfigError("the grid channel has no linearized variant")
        if nsteps % every:
            raise ConfigError("grid runs need nsteps to be a multiple of sample_every")
        g0_grid = grid.discretize(g0, cfg.grid_spec)
        times, vals, worst = [], [], [0.0]

        def record(s):
            times.append(s.t)
            vals.append(grid.grid_trace(s))
            worst[0] = max(worst[0], s.meta["boundary_ratio"])
            k = int(round(s.t / dt))
            if out is not None and cfg.snapshot_every and k % cfg.snapshot_every == 0:
                stem = out / f"snapshot_{k:08d}"
                s.to_csv(stem.with_suffix(".csv"))
                s.write_sidecar(stem.with_suffix(".json"), sys)

        last = grid.propagate_grid(g0_grid, sys, dt, nsteps, method, every, cfg.parallel,
                                   callback=record, orders=cfg.grid_orders)[-1]
        if worst[0] > grid.VALID_BOUNDARY:
            raise grid.DomainTooSmall(
                f"field reached the boundary (ratio {worst[0]:.3g} > {grid.VALID_BOUNDARY:g})")
        last.meta["worst_boundary_ratio"] = worst[0]
        return observables.CorrelationSeries(times, vals, method.value, "grid"), last
    raise ConfigError(f"unknown channel {channel!r}")


def spectrum_report(series, sys, method, window, tau, zero_pad) -> tuple:
    """Spectrum over whole periods of the expected line spacing plus a peak table."""
    period, expected = spectrum_period(sys, method)
    try:
        series = observables.truncate_to_periods(series, period)
    except ValueError:
        pass
    sp = observables.spectrum(series, window=window, tau=tau, zero_pad=zero_pad)
    peaks = observables.find_peaks(sp)
    table = {
        "window": window,
        "tau": _num(tau),
        "zero_pad": zero_pad,
        "duration": _num(series.times[-1] - series.times[0] + series.dt),
        "bin_width": _num(sp.bin_width),
        "expected_spacing": _num(expected),
        "peaks": [{"omega": _num(w), "intensity": _num(s)} for w, s in peaks],
        "strongest": _num(max(peaks, key=lambda p: p[1])[0]) if peaks else None,
    }
    try:
        mean, dev = observables.peak_spacing(peaks)
        table.update(spacing=_num(mean), spacing_max_deviation=_num(dev),
                     spacing_error_bins=_num(abs(mean - expected) / sp.bin_width))
    except observables.TooFewPeaks:
        table.update(spacing=None, spacing_max_deviation=None, spacing_error_bins=None)
    return sp, table


def _write_json(path: Path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _manifest(cfg: RunConfig, command: str, outputs: list, extra: dict | None = None) -> dict:
    doc = {"version": __version__, "command": command, "config": cfg.to_dict(),
           "outputs": sorted(outputs)}
    if extra:
        doc.update(extra)
    return doc


def cmd_run(cfg: RunConfig, out: Path) -> int:
    method = Method.parse(cfg.method)
    channel = cfg.channels[0]
    dt, nsteps = _grid_step(cfg, method) if channel == "grid" else _gaussian_step(cfg)
    series, extra = channel_series(cfg, channel, method, dt, nsteps, cfg.sample_every, out)
    outputs = ["correlation.csv", "spectrum.csv", "peaks.json"]
    series.to_csv(out / "correlation.csv")
    if isinstance(extra, dynamics.ParameterTrajectory):
        extra.to_csv(out / "trajectory.csv")
        outputs.append("trajectory.csv")
    if isinstance(extra, grid.PhaseSpaceGrid):
        extra.to_csv(out / "final_snapshot.csv")
        extra.write_sidecar(out / "final_snapshot.json", cfg.system)
        outputs += ["final_snapshot.csv", "final_snapshot.json"]
    if not np.all(np.isfinite(series.values)):
        raise FloatingPointError("non-finite correlation values")
    sp, table = spectrum_report(series, cfg.system, method, cfg.window, cfg.tau, cfg.zero_pad)
    sp.to_csv(out / "spectrum.csv")
    _write_json(out / "peaks.json", table)
    _write_json(out / "manifest.json", _manifest(
        cfg, "run", outputs + ["manifest.json"],
        {"effective": {"channel": channel, "dt": _num(dt), "nsteps": nsteps}}))
    print(f"{channel}/{method.value}: {nsteps} steps of dt={dt:.6g}, {len(table['peaks'])} peaks")
    if table["spacing"] is not None:
        print(f"peak spacing {table['spacing']:.6g} (expected {table['expected_spacing']:.6g}, "
              f"off by {table['spacing_error_bins']:.3g} bins of {table['bin_width']:.3g})")
    else:
        print("peak spacing: fewer than 3 peaks")
    return EXIT_OK


def _tolerance(a: tuple, b: tuple) -> float:
    # grid comparisons are limited by discretization, others by roundoff
    return 1e-3 if "grid" in (a[0], b[0]) else 1e-6


def compare_series(sa, sb) -> dict:
    """Max and RMS differences and the first time |delta c| exceeds DIVERGENCE_LEVEL."""
    if len(sa.times) != len(sb.times) or np.max(np.abs(sa.times - sb.times)) > 1e-9 * max(1.0, sa.times[-1]):
        raise observables.ChannelMismatch("series are sampled on different times")
    diff = np.abs(sa.values - sb.values)
    scale = max(np.max(np.abs(sa.values)), np.max(np.abs(sb.values)))
    over = np.nonzero(diff > DIVERGENCE_LEVEL)[0]
    return {
        "max_abs": _num(diff.max()),
        "rms_abs": _num(np.sqrt(np.mean(diff ** 2))),
        "max_relative": _num(diff.max() / scale),
        "divergence_time": _num(sa.times[over[0]]) if len(over) else None,
    }


def cmd_compare(cfg: RunConfig, out: Path, entries: list) -> int:
    if len(entries) < 2:
        raise ConfigError("compare needs at least two channel/method combinations")
    use_grid = any(ch == "grid" for ch, _ in entries)
    if use_grid:
        grid_method = next(m for ch, m in entries if ch == "grid")
        dt, nsteps = _grid_step(cfg, grid_method)
    else:
        dt, nsteps = _gaussian_step(cfg)
    every = cfg.sample_every
    series = {e: channel_series(cfg, e[0], e[1], dt, nsteps, every)[0] for e in entries}
    pairs = []
    ok = True
    for i, a in enumerate(entries):
        for b in entries[i + 1:]:
            rep = compare_series(series[a], series[b])
            tol = _tolerance(a, b)
            rep.update(a=f"{a[0]}:{a[1]}", b=f"{b[0]}:{b[1]}", tolerance=tol,
                       passed=rep["max_relative"] < tol)
            ok &= rep["passed"]
            pairs.append(rep)
    doc = _manifest(cfg, "compare", ["compare.json"],
                    {"effective": {"dt": _num(dt), "nsteps": nsteps}, "pairs": pairs, "passed": ok})
    _write_json(out / "compare.json", doc)
    for rep in pairs:
        div = rep["divergence_time"]
        print(f"{rep['a']} vs {rep['b']}: max {rep['max_abs']:.3e} rms {rep['rms_abs']:.3e} "
              f"rel {rep['max_relative']:.3e} tol {rep['tolerance']:g} "
              f"{'pass' if rep['passed'] else 'FAIL'}"
              + (f" diverges at t={div:.6g}" if div is not None else ""))
    return EXIT_OK if ok else EXIT_VALIDATION


# --- built-in invariant suite -------------------------------------------------

def _identical_partner(sys: TwoStateSystem) -> TwoStateSystem:
    s1 = sys.surface1
    return TwoStateSystem(s1, HarmonicSurface(s1.mass, s1.freq, s1.q_eq, sys.surface2.energy), sys.hbar)


def check_recurrence(sys: TwoStateSystem, moyal_scale: float = 1.0, tol: float = 1e-5) -> tuple:
    """|c| returns to 1 after one and two upper-surface periods."""
    period = sys.surface2.period
    n = int(math.ceil(period))
    dt = period / n
    traj = dynamics.propagate(gaussian.ground_state_coherence(sys), sys, dt, 2 * n,
                              Method.MOYAL_EXACT, moyal_scale=moyal_scale)
    devs = []
    for k in (n, 2 * n):
        st = traj.states[k]
        devs.append(abs(abs(gaussian.trace(st)) - 1.0) if st.is_normalizable() else math.inf)
    return max(devs) < tol, f"max ||c(kT2)| - 1| = {max(devs):.3g} (tol {tol:g})"


def u_period_maxima(sys: TwoStateSystem, periods: int = 5, dt: float = 1.0):
    """Largest |u| in each period of the average-potential motion (semiclassical)."""
    period = 2.0 * math.pi / sys.avg_freq
    n = int(math.ceil(periods * period / dt))
    traj = dynamics.propagate(gaussian.ground_state_coherence(sys), sys, dt, n, Method.SEMICLASSICAL)
    u = np.abs(traj.column("u"))
    idx = np.minimum((traj.times // period).astype(int), periods - 1)
    return np.array([u[idx == k].max() for k in range(periods)])


def v_bound(sys: TwoStateSystem, q0: float, p0: float = 0.0) -> float:
    """Bound on |v| = |Q1 - Q2|/hbar from the two oscillation amplitudes."""
    amp = [math.hypot(q0 - s.q_eq, p0 / (s.mass * s.freq)) for s in (sys.surface1, sys.surface2)]
    return (amp[0] + amp[1] + abs(sys.surface1.q_eq - sys.surface2.q_eq)) / sys.hbar


def check_secularity(sys: TwoStateSystem) -> tuple:
    """Exact v stays bounded while the semiclassical u grows period by period."""
    g0 = gaussian.ground_state_coherence(sys)
    period = sys.surface2.period
    n = int(math.ceil(2 * period))
    traj = dynamics.propagate(g0, sys, 2 * period / n, n, Method.MOYAL_EXACT)
    vmax = float(np.max(np.abs(traj.column("v"))))
    bound = v_bound(sys, g0.Q, g0.P)
    bounded = vmax <= bound * (1 + 1e-9)
    if sys.omega_pp == 0.0:
        return bounded, f"sup|v| {vmax:.4g} <= {bound:.4g}; no secular term for identical curvatures"
    maxima = u_period_maxima(sys)
    growing = bool(np.all(np.diff(maxima) > 0))
    return bounded and growing, (f"sup|v| {vmax:.4g} <= {bound:.4g}; semiclassical per-period "
                                 f"max|u| {np.array2string(maxima, precision=3)}")


def check_trace_quadrature(sys: TwoStateSystem, tol: float = 1e-6) -> tuple:
    """Closed-form trace vs. trapezoid quadrature of the sampled state."""
    cases = [
        (gaussian.ground_state_coherence(sys),
         grid.GridSpec(q_min=-1.0, q_max=3.0, p_min=-40.0, p_max=40.0, nq=256, np_=256)),
        (oracle.coherence_at(sys, 0.1 * sys.surface2.period), grid.GridSpec(nq=256, np_=256)),
    ]
    errs = []
    for st, spec in cases:
        exact = gaussian.trace(st)
        try:
            num = grid.grid_trace(grid.discretize(st, spec))
        except grid.DomainTooSmall:
            return False, "state does not fit the quadrature domain"
        errs.append(abs(num - exact) / abs(exact))
    return max(errs) < tol, f"max relative error {max(errs):.3g} (tol {tol:g})"


def rk4_ratios(sys: TwoStateSystem, t_end: float = 1000.0, steps=(40.0, 20.0, 10.0)) -> list:
    """Successive ratios of the endpoint (Q, P, u, v) error under dt halving."""
    g0 = gaussian.ground_state_coherence(sys)
    ref = dynamics.analytic_exact_params(sys, g0.Q, g0.P, t_end)
    errs = []
    for dt in steps:
        n = int(round(t_end / dt))
        st = dynamics.propagate(g0, sys, dt, n, Method.MOYAL_EXACT).states[-1]
        errs.append(max(abs(x - y) for x, y in zip((st.Q, st.P, st.u, st.v), ref)))
    return [errs[i] / errs[i + 1] for i in range(len(errs) - 1)]


def p_stencil_ratios(sys: TwoStateSystem, t: float = 500.0, sizes=(256, 512, 1024)) -> list:
    """Successive ratios of the max rhs error of the (4, 2) stencils when
    only Delta p is refined (q is resolved finely enough not to matter)."""
    st = oracle.coherence_at(sys, t)
    rate = dynamics.exact_rhs(st, sys)
    errs = []
    for n in sizes:
        spec = grid.GridSpec(q_min=st.Q - 1.2, q_max=st.Q + 1.2, p_min=st.P - 25.0,
                             p_max=st.P + 25.0, nq=2048, np_=n)
        q, p = spec.q[:, None], spec.p[None, :]
        f = gaussian.evaluate(st, q, p)
        rhs = grid.pde_rhs(grid.PhaseSpaceGrid(spec, f), sys, "moyal", orders=(4, 2))
        x, y = q - st.Q, p - st.P
        # analytic d rho/dt: parameter rates plus the moving center
        dlog = (-rate.a * x * x - rate.b * y * y + rate.c * x * y + rate.u * x + rate.v * y + rate.w
                - rate.Q * (-2.0 * st.a * x + st.c * y + st.u)
                - rate.P * (-2.0 * st.b * y + st.c * x + st.v))
        errs.append(np.abs(rhs - dlog * f)[4:-4, 4:-4].max())
    return [errs[i] / errs[i + 1] for i in range(len(errs) - 1)]


def check_stencil_orders() -> tuple:
    """Convergence orders are properties of the discretization; they are
    measured on the reference system, whose dynamics exercises every term."""
    ref = published_system()
    rk = rk4_ratios(ref)
    pr = p_stencil_ratios(ref)
    ok = all(12 <= r <= 20 for r in rk) and 3.5 <= pr[-1] <= 4.5
    return ok, (f"RK4 ratios {', '.join(f'{r:.2f}' for r in rk)} in [12, 20]; "
                f"p-stencil ratio {pr[-1]:.2f} in [3.5, 4.5]")


def check_degeneracy(sys: TwoStateSystem) -> tuple:
    """With equal curvatures the semiclassical dynamics is exact."""
    target = sys if sys.omega_pp == 0.0 else _identical_partner(sys)
    g0 = gaussian.ground_state_coherence(target)
    n = 2000
    ex = dynamics.propagate(g0, target, 1.0, n, Method.MOYAL_EXACT)
    sc = dynamics.propagate(g0, target, 1.0, n, Method.SEMICLASSICAL)
    diff = max(abs(gaussian.trace(a) - gaussian.trace(b)) for a, b in zip(ex.states, sc.states))
    return diff < 1e-12, f"max |c_exact - c_sc| = {diff:.3g} on identical curvatures"


def validation_table(sys: TwoStateSystem, moyal_scale: float = 1.0) -> list:
    checks = [
        ("recurrence", lambda: check_recurrence(sys, moyal_scale)),
        ("boundedness/secularity", lambda: check_secularity(sys)),
        ("trace quadrature", lambda: check_trace_quadrature(sys)),
        ("stencil order", check_stencil_orders),
        ("exact = semiclassical when omega''=0", lambda: check_degeneracy(sys)),
    ]
    rows = []
    for name, fn in checks:
        try:
            ok, detail = fn()
        except (ArithmeticError, ValueError) as exc:
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        rows.append({"check": name, "passed": bool(ok), "detail": detail})
    return rows


def cmd_validate(cfg: RunConfig, out: Path | None, moyal_scale: float = 1.0) -> int:
    rows = validation_table(cfg.system, moyal_scale)
    width = max(len(r["check"]) for r in rows)
    for r in rows:
        print(f"{r['check']:<{width}}  {'PASS' if r['passed'] else 'FAIL'}  {r['detail']}")
    ok = all(r["passed"] for r in rows)
    if out is not None:
        _write_json(out / "validate.json", _manifest(cfg, "validate", ["validate.json"],
                                                     {"checks": rows, "passed": ok,
                                                      "moyal_scale": moyal_scale}))
    return EXIT_OK if ok else EXIT_VALIDATION


def cmd_spectrum(cfg: RunConfig, out: Path, source: Path, period: float | None) -> int:
    try:
        series = observables.CorrelationSeries.from_csv(source, method=cfg.method)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read correlation file {source}: {exc}") from exc
    if period is not None:
        series = observables.truncate_to_periods(series, period)
    sp = observables.spectrum(series, window=cfg.window, tau=cfg.tau, zero_pad=cfg.zero_pad)
    peaks = observables.find_peaks(sp)
    sp.to_csv(out / "spectrum.csv")
    table = {"window": cfg.window, "tau": _num(cfg.tau), "zero_pad": cfg.zero_pad,
             "bin_width": _num(sp.bin_width),
             "peaks": [{"omega": _num(w), "intensity": _num(s)} for w, s in peaks]}
    try:
        mean, dev = observables.peak_spacing(peaks)
        table.update(spacing=_num(mean), spacing_max_deviation=_num(dev))
    except observables.TooFewPeaks:
        table.update(spacing=None, spacing_max_deviation=None)
    _write_json(out / "peaks.json", table)
    print(f"{len(peaks)} peaks, bin width {sp.bin_width:.4g}"
          + (f", spacing {table['spacing']:.6g}" if table["spacing"] is not None else ""))
    return EXIT_OK


# --- argument handling ----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML or JSON run configuration (default: published system)")
    common.add_argument("--method", action="append", choices=[m.value for m in Method],
                        help="dynamics; compare accepts it more than once")
    common.add_argument("--channel", action="append", choices=CHANNELS,
                        help="c(t) source; compare accepts it more than once")
    common.add_argument("--out", help="output directory")
    common.add_argument("--dt", type=float)
    common.add_argument("--steps", type=int, help="number of steps (overrides total_time)")
    common.add_argument("--window", choices=("rect", "hann"))
    common.add_argument("--tau", type=float, help="damping time (inf for none)")
    common.add_argument("--zero-pad", type=int)

    ap = argparse.ArgumentParser(prog="wmcoherence",
                                 description="Electronic coherence dynamics in phase space")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="propagate one channel and write all outputs")
    sub.add_parser("compare", parents=[common], help="compare c(t) across channels or methods")
    v = sub.add_parser("validate", parents=[common], help="run the invariant suite")
    v.add_argument("--moyal-scale", type=float, default=1.0,
                   help="multiplier of the hbar^2 term (developer fault injection; -1 flips its sign)")
    s = sub.add_parser("spectrum", parents=[common], help="spectrum from an existing c(t) CSV")
    s.add_argument("input", help="correlation CSV written by run")
    s.add_argument("--period", type=float, help="truncate to whole multiples of this period first")
    return ap


def _effective_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    updates = {}
    if args.method and args.command != "compare":
        if len(args.method) > 1:
            raise ConfigError("--method may be repeated only for compare")
        updates["method"] = args.method[0]
    if args.channel and args.command != "compare":
        if len(args.channel) > 1:
            raise ConfigError("--channel may be repeated only for compare")
        updates["channels"] = args.channel
    for key in ("dt", "window", "tau", "zero_pad"):
        val = getattr(args, key)
        if val is not None:
            updates[key] = val
    if args.out:
        updates["out_dir"] = args.out
    if updates:
        cfg = dataclasses.replace(cfg, **updates)
    if args.steps is not None:
        if args.steps < 1:
            raise ConfigError("--steps must be positive")
        dt = cfg.dt
        if dt is None:
            if cfg.channels[0] == "grid" or (args.channel and "grid" in args.channel):
                raise ConfigError("--steps with the grid channel needs an explicit --dt")
            dt = dynamics.DEFAULT_DT
        cfg = dataclasses.replace(cfg, dt=dt, total_time=args.steps * dt)
    return cfg


def _compare_entries(args, cfg: RunConfig) -> list:
    channels = args.channel or cfg.channels
    methods = args.method or [cfg.method]
    return [(ch, Method.parse(m).value) for ch in channels for m in methods]


def _error(code: int, exc: Exception, out: Path | None) -> int:
    record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(record), file=_sys.stderr)
    if out is not None and out.is_dir():
        _write_json(out / "error.json", record)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = None
    try:
        cfg = _effective_config(args)
        if args.command != "validate" or args.out:
            out = Path(cfg.out_dir)
            try:
                out.mkdir(parents=True, exist_ok=True)
            except OSError as exc:
                raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
        if args.command == "run":
            return cmd_run(cfg, out)
        if args.command == "compare":
            return cmd_compare(cfg, out, _compare_entries(args, cfg))
        if args.command == "validate":
            return cmd_validate(cfg, out, args.moyal_scale)
        return cmd_spectrum(cfg, out, Path(args.input), args.period)
    except ConfigError as exc:
        return _error(EXIT_CONFIG, exc, out)
    except (ArithmeticError, grid.DomainTooSmall, gaussian.NonNormalizable,
            observables.ChannelMismatch) as exc:
        return _error(EXIT_NUMERIC, exc, out)


if __name__ == "__main__":
    _sys.exit(main())
