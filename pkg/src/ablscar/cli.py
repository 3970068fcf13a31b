"""Batch front-end: configuration, pipeline stages, CSV/JSON emission and a
reproducible run manifest.

Usage::

    ablscar SUBCOMMAND [--config PATH] [--out DIR] [--threads N] [--stage NAME]

Subcommands are the pipeline stages ``orbit``, ``stability``, ``quantize``,
``field``, ``exact-scan``, ``exact-state``, ``husimi``, ``compare``,
``report`` plus ``all`` (every stage in order).  ``--stage NAME`` with
``all`` stops the pipeline after stage NAME; without a subcommand it runs
that single stage.

Every stage writes its files into the output directory and records them
(with sha256 checksums) in ``manifest.json``.  A stage is skipped when the
manifest already holds its outputs for the same configuration key and all
checksums still match.  A single-stage command whose upstream stage has not
been run (or was run with a different configuration) fails with a
:class:`DependencyError` naming the missing stage.  The process exits with
status 0 only if every acceptance check executed by the command passed.
File formats are documented in FORMATS.md.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import __version__
from . import acceptance as acc
from . import analysis as an
from . import exactqm as ex
from . import semiclassics as sc
from .classical import find_bell_orbit, poincare_section
from .model import SystemParams, symmetric_to_landau_phase
from .variation import monodromy_classify, periodic_solutions


class ConfigError(ValueError):
    """Invalid configuration file; the message names the offending field path."""


class DependencyError(RuntimeError):
    """A stage was requested before the stage it depends on."""

    def __init__(self, stage: str, required: str, reason: str = "has not been run"):
        self.stage, self.required = stage, required
        super().__init__(f"stage '{stage}' requires the output of stage '{required}', which "
                         f"{reason}; run `ablscar {required}` first (or `ablscar all`)")


# ---------------------------------------------------------------- config

@dataclass
class SystemSection:
    hbar: float = 1.0
    mass: float = 1.0
    charge: float = 1.0
    B: float = 1.0
    omega0: float = 2.0
    d: float = 10.0


@dataclass
class OrbitSection:
    energy: float = 92.55           # energy of the exported orbit / stability data
    bracket: Optional[list] = None  # launch-angle bracket [lo, hi]; null = automatic
    n_samples: int = 2001           # arclength samples per arc
    n_export: int = 201             # points per arc written to orbit.csv
    poincare_seeds: int = 6
    poincare_bounces: int = 40


@dataclass
class QuantizeSection:
    n_values: list = field(default_factory=lambda: [66, 67, 68, 69])
    eta: float = 0.0
    E_start: float = 92.5
    tol: float = 1e-9


@dataclass
class FieldSection:
    nx: int = 101
    ny: int = 161
    y_max: float = 8.0
    nu_max: float = 0.15            # boundary-layer half-width, in units of d/sqrt(hbar)
    focal_mask: float = 0.01        # fraction of orbit length masked around focal points


@dataclass
class ExactSection:
    E_range: list = field(default_factory=lambda: [86.0, 100.0])
    J: int = 110
    N: int = 70


@dataclass
class HusimiSection:
    sigma: Optional[float] = None   # coherent-state width; null = magnetic length
    n_y: int = 81
    n_p: int = 81


@dataclass
class CompareSection:
    threshold: float = 3.0
    reference: str = "circle"
    profile_nx: int = 401
    parity_nx: int = 101
    parity_ny: int = 161


@dataclass
class AcceptanceSection:
    criteria: list = field(default_factory=lambda: list(range(1, 10)))


@dataclass
class RunConfig:
    system: SystemSection = dataclasses.field(default_factory=SystemSection)
    orbit: OrbitSection = dataclasses.field(default_factory=OrbitSection)
    quantize: QuantizeSection = dataclasses.field(default_factory=QuantizeSection)
    field: FieldSection = dataclasses.field(default_factory=FieldSection)
    exact: ExactSection = dataclasses.field(default_factory=ExactSection)
    husimi: HusimiSection = dataclasses.field(default_factory=HusimiSection)
    compare: CompareSection = dataclasses.field(default_factory=CompareSection)
    acceptance: AcceptanceSection = dataclasses.field(default_factory=AcceptanceSection)
    output_dir: str = "run"
    seed: int = 0

    @property
    def params(self) -> SystemParams:
        s = self.system
        return SystemParams(hbar=s.hbar, mass=s.mass, charge=s.charge, B=s.B,
                            omega0=s.omega0, d=s.d,
                            energy_window=tuple(self.exact.E_range))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_SCALARS = {float: (int, float), int: (int,), str: (str,)}


def _coerce(value, tp, path):
    """Validate ``value`` against the annotation string ``tp``."""
    optional = tp.startswith("Optional[")
    base = tp[len("Optional["):-1] if optional else tp
    if value is None:
        if optional:
            return None
        raise ConfigError(f"{path}: value is required")
    if base == "list":
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {type(value).__name__}")
        return list(value)
    py = {"float": float, "int": int, "str": str}[base]
    if isinstance(value, bool) or not isinstance(value, _SCALARS[py]):
        raise ConfigError(f"{path}: expected {base}, got {type(value).__name__}")
    return py(value)


def _build(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping")
    known = {f.name: f for f in fields(cls)}
    for k in data:
        if k not in known:
            where = f"{path}.{k}" if path else k
            raise ConfigError(f"unknown key '{where}'")
    kw = {}
    for name, f in known.items():
        if name not in data:
            continue
        sub = f"{path}.{name}" if path else name
        if dataclasses.is_dataclass(f.default_factory if f.default_factory is not dataclasses.MISSING
                                    else None):
            kw[name] = _build(f.default_factory, data[name] or {}, sub)
        else:
            kw[name] = _coerce(data[name], str(f.type), sub)
    return cls(**kw)


def _validate(cfg: RunConfig):
    def need(cond, path, msg):
        if not cond:
            raise ConfigError(f"{path}: {msg}")
    need(cfg.system.hbar > 0, "system.hbar", "must be positive")
    need(cfg.system.mass > 0, "system.mass", "must be positive")
    need(cfg.system.d > 0, "system.d", "must be positive")
    need(cfg.system.omega0 >= 0, "system.omega0", "must be non-negative")
    need(cfg.orbit.energy > 0, "orbit.energy", "must be positive")
    need(cfg.orbit.bracket is None or len(cfg.orbit.bracket) == 2, "orbit.bracket",
         "must be null or [lo, hi]")
    need(len(cfg.quantize.n_values) > 0 and all(isinstance(n, int) and not isinstance(n, bool)
                                                for n in cfg.quantize.n_values),
         "quantize.n_values", "must be a non-empty list of integers")
    need(len(cfg.exact.E_range) == 2 and cfg.exact.E_range[0] < cfg.exact.E_range[1],
         "exact.E_range", "must be [E_lo, E_hi] with E_lo < E_hi")
    need(cfg.exact.J >= 4 and cfg.exact.N >= 2, "exact", "basis sizes too small")
    need(cfg.husimi.sigma is None or cfg.husimi.sigma > 0, "husimi.sigma", "must be positive")
    need(cfg.compare.reference in ("circle", "disc"), "compare.reference",
         "must be 'circle' or 'disc'")
    need(all(k in acc.CRITERIA for k in cfg.acceptance.criteria), "acceptance.criteria",
         "entries must be in 1..9")
    for sec, keys in (("field", ("nx", "ny")), ("husimi", ("n_y", "n_p")),
                      ("compare", ("profile_nx", "parity_nx", "parity_ny"))):
        for k in keys:
            need(getattr(getattr(cfg, sec), k) >= 3, f"{sec}.{k}", "must be >= 3")


def config_from_dict(data: Optional[dict]) -> RunConfig:
    """Validated :class:`RunConfig` from a (possibly partial) mapping."""
    cfg = _build(RunConfig, data or {}, "")
    _validate(cfg)
    return cfg


def load_config(path) -> RunConfig:
    """Read a YAML config file; defaults fill absent keys, unknown keys are rejected."""
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse config {path}: {e}") from e
    return config_from_dict(data)


def dump_config(cfg: RunConfig) -> str:
    """Canonical YAML text; ``load_config`` of it returns an equal config."""
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=None)


# ---------------------------------------------------------------- output

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    return repr(float(v))


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_csv(path: Path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    return header, rows


def write_json(path: Path, obj):
    with open(path, "w") as fh:
        json.dump(acc._jsonable(obj), fh, indent=1, sort_keys=False)
        fh.write("\n")


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------- stages

STAGE_ORDER = ["orbit", "stability", "quantize", "field", "exact-scan", "exact-state",
               "husimi", "compare", "report"]

# stage -> (upstream stages, config sections entering its cache key)
STAGES = {
    "orbit": ((), ("system", "orbit", "seed")),
    "stability": (("orbit",), ()),
    "quantize": ((), ("system", "orbit.n_samples", "quantize")),
    "field": (("quantize",), ("field",)),
    "exact-scan": ((), ("system", "exact")),
    "exact-state": (("quantize", "exact-scan"), ("field", "husimi.sigma", "compare")),
    "husimi": (("exact-state",), ("husimi",)),
    "compare": (("quantize", "exact-scan"), ("field", "husimi.sigma", "compare")),
    "report": (("compare",), ("acceptance",)),
}

# acceptance criteria evaluated by each stage (intersected with the config list)
STAGE_CRITERIA = {"quantize": (1, 2, 9), "compare": (3, 4, 5, 6, 7),
                  "report": tuple(range(1, 10))}


def _section(cfg: RunConfig, dotted: str):
    obj = cfg.to_dict()
    for part in dotted.split("."):
        obj = obj[part]
    return obj


def stage_key(cfg: RunConfig, stage: str) -> str:
    """Checksum of the config subsections a stage (and its upstream) depends on."""
    deps, secs = STAGES[stage]
    payload = {"sections": {s: _section(cfg, s) for s in secs},
               "upstream": {d: stage_key(cfg, d) for d in deps}}
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


class Run:
    """State of one output directory: config, manifest and stage products."""

    def __init__(self, cfg: RunConfig, out: Path, threads: int = 1, log=None):
        self.cfg = cfg
        self.out = Path(out)
        self.threads = max(1, int(threads))
        self.params = cfg.params
        self.log = log or (lambda msg: print(msg, file=sys.stderr))
        self.out.mkdir(parents=True, exist_ok=True)
        self.manifest_path = self.out / "manifest.json"
        self.manifest = self._load_manifest()
        self._family = None
        self._abl = None
        self._exact = None
        self.checks = {}
        self.results = {}   # per-stage summary data echoed into the manifest

    # -- manifest bookkeeping
    def _load_manifest(self):
        if self.manifest_path.exists():
            try:
                m = json.loads(self.manifest_path.read_text())
                if isinstance(m, dict) and "stages" in m:
                    return m
            except json.JSONDecodeError:
                pass
        return {"stages": {}}

    def is_current(self, stage: str) -> bool:
        rec = self.manifest["stages"].get(stage)
        if not rec or rec.get("key") != stage_key(self.cfg, stage):
            return False
        for rel, digest in rec["outputs"].items():
            p = self.out / rel
            if not p.exists() or sha256(p) != digest:
                return False
        return True

    def require(self, stage: str):
        for dep in STAGES[stage][0]:
            rec = self.manifest["stages"].get(dep)
            if not rec:
                raise DependencyError(stage, dep)
            if not self.is_current(dep):
                raise DependencyError(stage, dep, "is stale (config changed or files modified)")

    def write_manifest(self):
        files = {}
        for p in sorted(self.out.rglob("*")):
            if p.is_file() and p != self.manifest_path:
                files[str(p.relative_to(self.out))] = sha256(p)
        summary = {str(k): v for k, v in sorted(self.checks.items())}
        self.manifest.update({
            "artifact": "ablscar",
            "version": __version__,
            "config": self.cfg.to_dict(),
            "files": files,
            "acceptance": {"executed": summary,
                           "all_passed": all(summary.values()) if summary else None},
        })
        write_json(self.manifest_path, self.manifest)

    # -- shared products
    @property
    def family(self):
        if self._family is None:
            self._family = sc.BellOrbitFamily(self.params, self.cfg.orbit.n_samples)
        return self._family

    def abl_states(self):
        """ABL states rebuilt from quantize/energies.csv (orbit data recomputed at
        the stored energies)."""
        if self._abl is None:
            _, rows = read_csv(self.out / "quantize" / "energies.csv")
            fc = self.cfg.field
            out = []
            for r in rows:
                n, eta, E, res = int(r[0]), float(r[1]), float(r[2]), float(r[6])
                out.append(sc.ABLState(n=n, eta=eta, m=None, E=E, point=self.family(E),
                                       params=self.params, residual=res,
                                       nu_max=fc.nu_max * self.params.d / np.sqrt(self.params.hbar),
                                       focal_mask=fc.focal_mask))
            self._abl = out
        return self._abl

    def exact_states(self):
        if self._exact is None:
            data = np.load(self.out / "exact-scan" / "exact_states.npz")
            gb = ex.GalerkinBasis(self.params, int(data["J"]), int(data["N"]))
            states = []
            masks = {p: gb.parity_mask(p) for p in (1, -1)}
            for E, par, vec in zip(data["energies"], data["parities"], data["coeffs"]):
                c = np.zeros(gb.J * gb.N, complex)
                c[masks[int(par)]] = vec[:int(masks[int(par)].sum())]
                states.append(ex.ExactState(float(E), self.params, "galerkin",
                                            c.reshape(gb.J, gb.N), int(par), gb))
            self._exact = states
        return self._exact

    def context(self, report=None) -> acc.BenchmarkContext:
        ctx = acc.BenchmarkContext(params=self.params, n_values=tuple(self.cfg.quantize.n_values),
                                   E_start=self.cfg.quantize.E_start,
                                   E_range=tuple(self.cfg.exact.E_range), J=self.cfg.exact.J,
                                   N=self.cfg.exact.N, sigma=self.cfg.husimi.sigma,
                                   reference=self.cfg.compare.reference,
                                   threshold=self.cfg.compare.threshold)
        ctx.__dict__["family"] = self.family
        ctx.__dict__["abl_states"] = self.abl_states()
        if report is not None:
            ctx.__dict__["report"] = report
        return ctx

    def run_checks(self, stage, ctx):
        wanted = [k for k in STAGE_CRITERIA.get(stage, ()) if k in self.cfg.acceptance.criteria]
        results = [acc.CRITERIA[k](ctx) for k in wanted]
        for r in results:
            self.checks[r.number] = bool(r.passed)
            self.log(f"  criterion {r.number} ({r.name}): {'PASS' if r.passed else 'FAIL'}")
        return results

    def map(self, fn, items):
        items = list(items)
        if self.threads == 1 or len(items) <= 1:
            return [fn(i) for i in items]
        with ThreadPoolExecutor(self.threads) as pool:
            return list(pool.map(fn, items))

    def grid(self):
        fc = self.cfg.field
        x = np.linspace(0.0, self.params.d, fc.nx)
        y = np.linspace(-fc.y_max, fc.y_max, fc.ny)
        return x, y

    # -- driver
    def run_stage(self, stage: str, force: bool = False):
        if not force and self.is_current(stage):
            self.log(f"[{stage}] up to date (cached)")
            rec = self.manifest["stages"][stage]
            rec["cached"] = True
            for k, v in rec.get("acceptance", {}).items():
                self.checks[int(k)] = v
            return rec
        self.require(stage)
        self.log(f"[{stage}] running")
        d = self.out / stage
        d.mkdir(exist_ok=True)
        t0 = time.perf_counter()
        written = STAGE_FUNCS[stage](self, d)
        elapsed = time.perf_counter() - t0
        stage_checks = {str(k): self.checks[k] for k in STAGE_CRITERIA.get(stage, ())
                        if k in self.checks}
        rec = {"key": stage_key(self.cfg, stage),
               "outputs": {str(p.relative_to(self.out)): sha256(p) for p in written},
               "elapsed_s": round(elapsed, 3), "cached": False,
               "acceptance": stage_checks}
        if stage in self.results:
            rec["results"] = self.results.pop(stage)
        self.manifest["stages"][stage] = rec
        self.write_manifest()
        self.log(f"[{stage}] done in {elapsed:.1f} s")
        return rec


def _stage_orbit(run: Run, d: Path):
    cfg, p = run.cfg, run.params
    o = find_bell_orbit(cfg.orbit.energy, p, cfg.orbit.bracket, cfg.orbit.n_samples)
    rows = []
    for i, arc in enumerate(o.arcs):
        idx = np.unique(np.linspace(0, len(arc.s) - 1, cfg.orbit.n_export).round().astype(int))
        for j in idx:
            rows.append((i, arc.s[j], arc.t[j], arc.r[j, 0], arc.r[j, 1], arc.v[j, 0], arc.v[j, 1],
                         arc.kappa[j]))
    write_csv(d / "orbit.csv", ["arc", "s", "t", "x", "y", "vx", "vy", "kappa"], rows)
    # Poincare section: seeds drawn reproducibly inside the energy ellipse
    rng = np.random.default_rng(cfg.seed)
    E, m = cfg.orbit.energy, p.mass
    ym = np.sqrt(2 * E / (m * p.omega0 ** 2)) if p.omega0 > 0 else p.d
    pm = np.sqrt(2 * m * E)
    seeds = []
    while len(seeds) < cfg.orbit.poincare_seeds:
        y0, p0 = rng.uniform(-0.9, 0.9, 2)
        if y0 ** 2 + p0 ** 2 < 0.81:
            seeds.append((y0 * ym, p0 * pm))
    secs = poincare_section(E, p, seeds, cfg.orbit.poincare_bounces)
    prow = [(k, j, y, py) for k, pts in enumerate(secs) for j, (y, py) in enumerate(pts)]
    write_csv(d / "poincare.csv", ["seed", "bounce", "y", "p_y"], prow)
    by, bp = o.birkhoff(p)
    write_json(d / "orbit.json", {
        "energy": o.energy, "period": o.period, "length": o.length, "area": o.area,
        "launch_angle": o.launch_angle, "birkhoff_point": [by, bp],
        "reflections": [{"wall": r.wall, "position": list(r.position), "theta": r.theta}
                        for r in o.reflections]})
    return [d / "orbit.csv", d / "poincare.csv", d / "orbit.json"]


def _stage_stability(run: Run, d: Path):
    cfg, p = run.cfg, run.params
    o = find_bell_orbit(cfg.orbit.energy, p, cfg.orbit.bracket, cfg.orbit.n_samples)
    mono = monodromy_classify(o, p.eB)
    flo = periodic_solutions(o, mono, p.eB)
    w_drift = max(float(np.max(np.abs(flo.wronskian(i) - flo.w)) / abs(flo.w))
                  for i in range(len(flo.pairs)))
    ok_census, census = acc.focal_census_check(flo.census, p.d)
    write_json(d / "stability.json", {
        "energy": o.energy, "M": mono.M, "trace": mono.trace, "det_M": float(np.linalg.det(mono.M)),
        "eigenvalues": [[float(np.real(v)), float(np.imag(v))] for v in mono.eigenvalues],
        "classification": mono.classification, "Lambda": mono.Lambda, "lambda": mono.lam,
        "lyapunov_rate": mono.lambda_T, "period": o.period, "alpha": flo.census.alpha,
        "wronskian": [float(np.real(flo.w)), float(np.imag(flo.w))],
        "wronskian_drift": w_drift, "focal_census_layout_ok": ok_census, "focal_census": census})
    rows = [(k, fp.arc, fp.s, fp.position[0], fp.position[1])
            for k, fp in enumerate(flo.census.points)]
    write_csv(d / "focal_points.csv", ["index", "arc", "s", "x", "y"], rows)
    run.results["stability"] = {
        "energy": o.energy, "trace": mono.trace, "Lambda": mono.Lambda, "lambda": mono.lam,
        "classification": mono.classification, "alpha": flo.census.alpha,
        "focal_points": [list(map(float, fp.position)) for fp in flo.census.points]}
    return [d / "stability.json", d / "focal_points.csv"]


def _stage_quantize(run: Run, d: Path):
    cfg, p = run.cfg, run.params
    q = cfg.quantize
    ns = sorted(q.n_values)
    # the lowest n seeds the others through the level spacing 2 pi hbar / T
    first = sc.quantize_unstable(ns[0], q.eta, p, run.family, E_start=q.E_start, tol=q.tol)
    spacing = 2 * np.pi * p.hbar / first.point.orbit.period

    def solve(n):
        fam = sc.BellOrbitFamily(p, cfg.orbit.n_samples)
        return sc.quantize_unstable(n, q.eta, p, fam, E_start=first.E + (n - ns[0]) * spacing,
                                    tol=q.tol)
    states = [first] + run.map(solve, ns[1:])
    rows = [(s.n, s.eta, s.E, s.point.action, s.point.lam, s.point.alpha, s.residual)
            for s in states]
    write_csv(d / "energies.csv", ["n", "eta", "E", "action", "lambda", "alpha", "residual"], rows)
    states_info = []
    for s in states:
        dg = sc.ehrenfest_diagnostics(s.point.orbit, s.point.mono, p, s.point.floquet)
        states_info.append({"n": s.n, "eta": s.eta, "E": s.E, "action": s.point.action,
                            "Lambda": s.point.mono.Lambda, "alpha": s.point.alpha,
                            "period": dg.T, "t_Ehr": dg.t_Ehr, "N_ph": dg.N_ph})
    run.results["quantize"] = {"states": states_info}
    run._abl = None
    run.run_checks("quantize", run.context())
    return [d / "energies.csv"]


def _stage_field(run: Run, d: Path):
    x, y = run.grid()
    X, Y = np.meshgrid(x, y)
    g = symmetric_to_landau_phase(X, Y, run.params)

    def assemble(st):
        return sc.assemble_field(st, X, Y) * g
    fields_ = run.map(assemble, run.abl_states())
    out = []
    for st, F in zip(run.abl_states(), fields_):
        path = d / f"abl_field_n{st.n}.csv"
        _write_field(path, X, Y, F)
        out.append(path)
    return out


def _write_field(path, X, Y, F):
    rows = zip(X.ravel(), Y.ravel(), F.real.ravel(), F.imag.ravel(), np.abs(F).ravel())
    write_csv(path, ["x", "y", "re_psi", "im_psi", "abs_psi"], rows)


def _stage_exact_scan(run: Run, d: Path):
    cfg, p = run.cfg, run.params
    gb = ex.GalerkinBasis(p, cfg.exact.J, cfg.exact.N)

    def block(par):
        H, S = gb.matrices(par)
        from scipy.linalg import eigh
        return eigh(H, S, subset_by_value=tuple(cfg.exact.E_range))
    blocks = dict(zip((1, -1), run.map(block, (1, -1))))
    Es, Ps, Vs = [], [], []
    for par in (1, -1):
        ev, V = blocks[par]
        for k in range(len(ev)):
            Es.append(float(ev[k]))
            Ps.append(par)
            Vs.append(V[:, k])
    order = np.argsort(Es, kind="stable")
    width = max(len(v) for v in Vs) if Vs else 0
    C = np.zeros((len(Vs), width), complex)
    for row, i in enumerate(order):
        C[row, :len(Vs[i])] = Vs[i]
    E = np.array(Es)[order]
    P = np.array(Ps, dtype=int)[order]
    np.savez(d / "exact_states.npz", energies=E, parities=P, coeffs=C,
             J=cfg.exact.J, N=cfg.exact.N)
    write_csv(d / "spectrum.csv", ["index", "E", "parity"],
              [(i, e, pp) for i, (e, pp) in enumerate(zip(E, P))])
    run._exact = None
    return [d / "exact_states.npz", d / "spectrum.csv"]


def _matches(run: Run):
    cfg = run.cfg
    abl = sorted(run.abl_states(), key=lambda s: s.n)
    tests, windows, matches = an.match_scars(abl, run.exact_states(), run.params,
                                             cfg.husimi.sigma, cfg.compare.threshold,
                                             cfg.compare.reference)
    return abl, tests, windows, matches


def _stage_exact_state(run: Run, d: Path):
    abl, tests, windows, matches = _matches(run)
    exact = run.exact_states()
    x, y = run.grid()
    X, Y = np.meshgrid(x, y)
    rows, out = [], []
    for st, win, idx in zip(abl, windows, matches):
        if idx is None:
            rows.append((st.n, None, None, None, None, len(win)))
            continue
        es = exact[idx]
        rows.append((st.n, idx, es.energy, es.parity, tests[idx].ratio, len(win)))
        path = d / f"exact_field_n{st.n}.csv"
        _write_field(path, X, Y, es.on_grid(x, y))
        out.append(path)
    write_csv(d / "scar_states.csv", ["n", "index", "E", "parity", "scar_ratio", "n_in_window"],
              rows)
    return [d / "scar_states.csv"] + out


def _stage_husimi(run: Run, d: Path):
    cfg, p = run.cfg, run.params
    _, rows = read_csv(run.out / "exact-state" / "scar_states.csv")
    exact = run.exact_states()
    sigma = p.l_B if cfg.husimi.sigma is None else cfg.husimi.sigma
    jobs = [(int(r[0]), exact[int(r[1])]) for r in rows if r[1] != ""]

    def compute(job):
        n, es = job
        ym = np.sqrt(2 * es.energy / (p.mass * p.omega0 ** 2)) if p.omega0 > 0 else p.d
        pm = np.sqrt(2 * p.mass * es.energy)
        return an.husimi_map(lambda yy: es.wall_derivative(yy),
                             np.linspace(-ym, ym, cfg.husimi.n_y),
                             np.linspace(-pm, pm, cfg.husimi.n_p), sigma, p.hbar, es.energy, p)
    out = []
    for (n, es), hm in zip(jobs, run.map(compute, jobs)):
        path = d / f"husimi_n{n}.csv"
        acc_mask = hm.accessible()
        rows_ = [(yy, pp, hm.H[j, i], acc_mask[j, i])
                 for j, pp in enumerate(hm.p) for i, yy in enumerate(hm.y)]
        write_csv(path, ["y", "p_y", "husimi", "accessible"], rows_)
        out.append(path)
    circ = an.energy_circle(jobs[0][1].energy, p) if jobs else None
    if circ is not None:
        path = d / "energy_circle.csv"
        write_csv(path, ["y", "p_y"], zip(*circ))
        out.append(path)
    return out


def _stage_compare(run: Run, d: Path):
    cfg = run.cfg
    rep = an.compare_report(run.abl_states(), run.exact_states(), run.params, cfg.husimi.sigma,
                            cfg.compare.threshold, cfg.compare.reference, cfg.compare.profile_nx,
                            parity_grid=(cfg.compare.parity_nx, cfg.compare.parity_ny),
                            provenance={"exact_solver": "galerkin", "J": cfg.exact.J,
                                        "N": cfg.exact.N})
    write_json(d / "comparison.json", rep.to_dict())
    cols = ["n", "E_abl", "E_exact", "spacing", "rel_error", "scar_ratio", "n_scarred_in_window",
            "peak_offset_sigma", "profile_correlation", "parity_abl", "parity_exact",
            "parity_expected"]
    write_csv(d / "comparison.csv", cols,
              [tuple(getattr(r, c) for c in cols) for r in rep.records])
    run.run_checks("compare", run.context(rep))
    return [d / "comparison.json", d / "comparison.csv"]


def load_report(path: Path) -> an.ComparisonReport:
    data = json.loads(Path(path).read_text())
    recs = []
    for r in data["records"]:
        r = dict(r)
        for k in ("husimi_peak", "birkhoff_point"):
            if r.get(k) is not None:
                r[k] = tuple(r[k])
        recs.append(an.ComparisonRecord(**r))
    return an.ComparisonReport(recs, data["exact_scars"], data["spacings_equal"],
                               data["criteria"], data.get("gaps", []), data.get("provenance", {}))


def _stage_report(run: Run, d: Path):
    rep = load_report(run.out / "compare" / "comparison.json")
    results = run.run_checks("report", run.context(rep))
    write_json(d / "acceptance.json", [r.to_dict() for r in results])
    lines = ["criterion,name,passed"]
    lines += [f"{r.number},{r.name},{int(r.passed)}" for r in results]
    (d / "acceptance.csv").write_text("\n".join(lines) + "\n")
    return [d / "acceptance.json", d / "acceptance.csv"]


STAGE_FUNCS = {"orbit": _stage_orbit, "stability": _stage_stability, "quantize": _stage_quantize,
               "field": _stage_field, "exact-scan": _stage_exact_scan,
               "exact-state": _stage_exact_state, "husimi": _stage_husimi,
               "compare": _stage_compare, "report": _stage_report}


# ---------------------------------------------------------------- entry

def run_command(subcommand: str, cfg: RunConfig, out=None, threads: int = 1,
                stage: Optional[str] = None, log=None) -> dict:
    """Execute a subcommand and return the manifest (a dict, also written to
    ``<out>/manifest.json``)."""
    if subcommand not in STAGE_ORDER + ["all"]:
        raise ValueError(f"unknown subcommand '{subcommand}'")
    if stage is not None and stage not in STAGE_ORDER:
        raise ValueError(f"unknown stage '{stage}'")
    run = Run(cfg, Path(out or cfg.output_dir), threads, log)
    (run.out / "config.yaml").write_text(dump_config(cfg))
    if subcommand == "all":
        last = STAGE_ORDER.index(stage) if stage else len(STAGE_ORDER) - 1
        todo = STAGE_ORDER[:last + 1]
    else:
        if stage is not None and stage != subcommand:
            raise ValueError(f"--stage {stage} conflicts with subcommand '{subcommand}'")
        todo = [subcommand]
    t0 = time.perf_counter()
    run.checks = {}
    done = []
    try:
        for st in todo:
            run.run_stage(st)
            done.append(st)
    finally:
        # the manifest is written even when a stage fails, so that every file
        # in the directory (config.yaml included) stays accounted for
        run.manifest["command"] = {"subcommand": subcommand, "stages": todo,
                                   "completed": done,
                                   "elapsed_s": round(time.perf_counter() - t0, 3)}
        run.write_manifest()
    return run.manifest


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ablscar", description=__doc__.split("\n\n")[0])
    ap.add_argument("subcommand", nargs="?", choices=STAGE_ORDER + ["all"],
                    help="pipeline stage to run, or 'all'")
    ap.add_argument("--config", type=Path, default=None, help="YAML run configuration")
    ap.add_argument("--out", type=Path, default=None, help="output directory")
    ap.add_argument("--threads", type=int, default=1, help="worker threads per stage")
    ap.add_argument("--stage", choices=STAGE_ORDER, default=None,
                    help="with 'all': stop after this stage; alone: run this stage")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    sub = args.subcommand or args.stage
    if sub is None:
        build_parser().print_usage(sys.stderr)
        print("ablscar: error: a subcommand or --stage is required", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        man = run_command(sub, cfg, args.out, args.threads,
                          args.stage if args.subcommand else None)
    except (ConfigError, DependencyError, ValueError) as e:
        print(f"ablscar: error: {e}", file=sys.stderr)
        return 2
    executed = man["acceptance"]["executed"]
    if executed:
        bad = [k for k, v in executed.items() if not v]
        print(f"acceptance: {len(executed) - len(bad)}/{len(executed)} passed"
              + (f" (failed: {', '.join(bad)})" if bad else ""), file=sys.stderr)
        return 0 if not bad else 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
