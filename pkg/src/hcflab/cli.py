"""Command line entry point: ``python -m hcflab {check, evolve, compare}``.

Runs are described by flat ``key = value`` config files (``#`` starts a
comment); ``--preset`` supplies a base configuration and ``--set`` overrides
single keys.  Exit codes: 0 pass, 1 tolerance failure, 2 blow-up, 3 config
or input error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import chern, energy, hodge, verify
from .fields import MetricField
from .flow import VARIANTS, FlowSpec, evolve
from .kernels import to_grid_first
from .lattice import BACKENDS, Lattice
from .metrics import flat, hermitian_perturbation, kahler_potential

EXIT_OK, EXIT_TOL, EXIT_BLOWUP, EXIT_CONFIG = 0, 1, 2, 3

GENERATORS = ("flat", "kahler_potential", "hermitian_perturbation")
MAGIC = "HCFSNAP1"
CSV_FIELDS = ("step", "t", "dt", "sup_omega", "sup_T", "sup_nabla_T", "sup_nabla_omega",
              "volume", "F_value", "static_tensor", "static_scalar")


class ConfigError(ValueError):
    """Invalid configuration or unreadable input."""


@dataclass(frozen=True)
class RunConfig:
    """Everything a command needs; see ``PRESETS`` for typical values."""

    n: int = 2
    N: int = 16
    backend: str = "spectral"
    variant: str = "HCF"
    generator: str = "hermitian_perturbation"
    seed: int = 0
    amplitude: float = 0.05
    bandwidth: int = 1
    scale: float = 1.0
    safety: float = 0.1
    cfl: float = 0.2
    t_max: float = 1.0
    max_steps: int = 100_000
    stop_threshold: float = 1e6
    eps0: float = 1e-8
    dt_min: float = 1e-12
    static_tol: float = 1e-9
    output_interval: float | None = None
    second_torsion: bool = False
    stop_on_static: bool = True
    csv: str = ""
    snapshot_dir: str = ""
    snapshot_stride: int = 1
    probe_seed: int = 1
    evolution_N: int = 8
    evolution_dt: float = 1e-4
    evolution_amplitude: float = 0.02

    def validate(self):
        if not 1 <= self.n <= 3:
            raise ConfigError("n must be in 1..3")
        if self.N < 8 or self.N % 2:
            raise ConfigError("N must be even and >= 8")
        if self.evolution_N < 8 or self.evolution_N % 2:
            raise ConfigError("evolution_N must be even and >= 8")
        if self.backend not in BACKENDS:
            raise ConfigError(f"backend must be one of {BACKENDS}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}")
        if self.generator not in GENERATORS:
            raise ConfigError(f"generator must be one of {GENERATORS}")
        if not 0.0 <= self.amplitude < 1.0:
            raise ConfigError("amplitude must lie in [0, 1)")
        if not 1 <= self.bandwidth < min(self.N, self.evolution_N) // 2:
            raise ConfigError("bandwidth must be at least 1 and below N/2 (and evolution_N/2)")
        if not self.scale > 0.0:
            raise ConfigError("scale must be positive")
        if self.snapshot_stride < 1:
            raise ConfigError("snapshot_stride must be >= 1")
        if not 0.0 <= self.evolution_amplitude < 1.0:
            raise ConfigError("evolution_amplitude must lie in [0, 1)")
        if not self.evolution_dt > 0.0:
            raise ConfigError("evolution_dt must be positive")
        try:
            self.flow_spec()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def flow_spec(self) -> FlowSpec:
        return FlowSpec(variant=self.variant, safety=self.safety, cfl=self.cfl,
                        t_max=self.t_max, max_steps=self.max_steps,
                        stop_threshold=self.stop_threshold, eps0=self.eps0,
                        dt_min=self.dt_min, static_tol=self.static_tol,
                        output_interval=self.output_interval,
                        second_torsion=self.second_torsion,
                        stop_on_static=self.stop_on_static)

    def lattice(self, N: int | None = None) -> Lattice:
        return Lattice(self.n, self.N if N is None else N, self.backend)

    def metric(self, N: int | None = None, amplitude: float | None = None) -> MetricField:
        """Initial metric from the configured generator."""
        lat = self.lattice(N)
        amp = self.amplitude if amplitude is None else amplitude
        try:
            if self.generator == "flat":
                return flat(lat, self.scale)
            make = kahler_potential if self.generator == "kahler_potential" else hermitian_perturbation
            return make(lat, self.seed, amp, self.bandwidth)
        except ValueError as exc:
            raise ConfigError(f"generator failed: {exc}") from exc


PRESETS = {
    "flat": {"generator": "flat"},
    "stability": {"generator": "hermitian_perturbation", "seed": 7, "amplitude": 0.01,
                  "bandwidth": 1, "variant": "HCF_normalized", "cfl": 0.3, "t_max": 50.0,
                  "output_interval": 0.05},
    "kahler": {"generator": "kahler_potential", "seed": 3, "amplitude": 0.05, "bandwidth": 1,
               "variant": "HCF", "max_steps": 100, "output_interval": 0.01},
}


# -- config parsing -----------------------------------------------------------

_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_value(key: str, text: str):
    kind = _TYPES[key]
    text = text.strip()
    if kind == "bool":
        low = text.lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {text!r}")
    if kind == "int":
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {text!r}") from None
    if kind in ("float", "float | None"):
        if kind != "float" and text.lower() in ("none", ""):
            return None
        try:
            value = float(text)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {text!r}") from None
        if not math.isfinite(value):
            raise ConfigError(f"{key}: must be finite")
        return value
    return text


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines into a dict of typed values."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = _parse_value(key, value)
    return out


def load_config(path: str | None = None, preset: str | None = None,
                overrides: list[str] | None = None) -> RunConfig:
    """Assemble a validated :class:`RunConfig` from preset, file and overrides."""
    values = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}")
        values.update(PRESETS[preset])
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        values.update(parse_config_text(text))
    for item in overrides or []:
        values.update(parse_config_text(item))
    return replace(RunConfig(), **values).validate()


# -- output writers ---------------------------------------------------------

def format_float(x) -> str:
    """Shortest round-trip decimal of a float64."""
    return repr(float(x))


def write_csv(path: str | Path, rows: list) -> None:
    lines = [",".join(CSV_FIELDS)]
    for r in rows:
        lines.append(",".join(str(r[k]) if k == "step" else format_float(r[k]) for k in CSV_FIELDS))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_csv(path: str | Path) -> list[dict]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    head = lines[0].split(",")
    return [{k: (int(v) if k == "step" else float(v)) for k, v in zip(head, ln.split(","))}
            for ln in lines[1:]]


def write_snapshot(path: str | Path, g: np.ndarray, *, n: int, N: int, t: float, step: int,
                   backend: str = "", variant: str = "") -> None:
    """Write ``g`` (grid-first ``(N,)*2n + (n, n)``) in the ``HCFSNAP1`` format.

    A magic line and a one-line JSON header precede the raw little-endian
    float64 real/imaginary pairs.
    """
    data = np.ascontiguousarray(g, dtype="<c16")
    header = {"n": n, "N": N, "t": float(t), "step": int(step), "backend": backend,
              "variant": variant,
              "fields": [{"name": "g", "shape": list(data.shape), "offset": 0,
                          "dtype": "complex128-le"}]}
    with open(path, "wb") as fh:
        fh.write((MAGIC + "\n").encode("utf-8"))
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
        fh.write(data.tobytes())


def read_snapshot(path: str | Path) -> tuple[dict, np.ndarray]:
    with open(path, "rb") as fh:
        if fh.readline().decode("utf-8").rstrip("\n") != MAGIC:
            raise ConfigError(f"{path}: not an {MAGIC} snapshot")
        header = json.loads(fh.readline().decode("utf-8"))
        blob = fh.read()
    f = header["fields"][0]
    count = math.prod(f["shape"])
    arr = np.frombuffer(blob, dtype="<c16", count=count, offset=16 * f["offset"])
    return header, arr.reshape(f["shape"])


def snapshot_paths(directory: str | Path) -> list[Path]:
    return sorted(Path(directory).glob("snap_*.hcf"))


# -- commands -----------------------------------------------------------------

@dataclass
class CheckLine:
    name: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.tolerance)

    def format(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name:<28s} residual={self.residual:.3e} tol={self.tolerance:.0e}"


def run_checks(cfg: RunConfig, corrupt_q2: bool = False, skip=(), evolution: bool = True):
    """Yield :class:`CheckLine` results for every identity and oracle."""
    g = cfg.metric()
    pkg = chern.compute_package(g)

    def want(name):
        return name not in skip

    if want("tformula"):
        yield CheckLine("tformula", chern.check_torsion_cyclic(pkg), 1e-8)
    if want("bianchi"):
        b1, b2 = chern.check_bianchi(g)
        yield CheckLine("bianchi_first", b1, 1e-8)
        yield CheckLine("bianchi_second", b2, 1e-8)
    if want("psform"):
        yield CheckLine("psform", chern.check_ps_relation(pkg), 1e-8)
    if want("q_trace") or want("q_psd"):
        coeffs = list(energy.Q_COEFFS)
        if corrupt_q2:
            coeffs[1] = -coeffs[1]
        qp = energy.compute_q(g, pkg, tuple(coeffs))
        if want("q_trace"):
            yield CheckLine("q_trace", energy.trace_identity_residual(g, qp), 1e-10)
        if want("q_psd"):
            m1, m3 = energy.min_q_eigenvalues(g, qp)
            yield CheckLine("q_psd", max(0.0, -m1, -m3), 1e-12)
    if want("hodgedecomp"):
        yield CheckLine("hodgedecomp", hodge.check_hodgedecomp(g, pkg), 1e-8)
    if want("hcfcc"):
        yield CheckLine("hcfcc", hodge.check_hcf_form_equation(g, pkg), 1e-8)
    probe = verify.VariationProbe.random(g, cfg.probe_seed)
    for q in verify.QUANTITIES:
        if want(q):
            yield CheckLine(f"variation:{q}", verify.check_variation(q, probe)[2], 1e-6)
    fields_ = verify.IbpFields.random(g.lattice, cfg.probe_seed)
    for lemma in verify.IBP_LEMMAS:
        if want(lemma):
            yield CheckLine(f"ibp:{lemma}", verify.check_ibp(lemma, g, fields_), 1e-8)
    if not evolution:
        return
    g8 = cfg.metric(cfg.evolution_N, cfg.evolution_amplitude)
    for which in verify.EVOLUTIONS:
        if not want(f"evolution_{which}"):
            continue
        yield CheckLine(f"evolution_{which}", verify.check_evolution(which, g8, cfg.evolution_dt),
                        1e-3)
        errs, order = verify.evolution_order(which, g8)
        # a vanishing residual has no measurable order; report it as passing
        shortfall = 0.0 if max(errs) == 0.0 else (math.inf if math.isnan(order)
                                                   else max(0.0, 1.8 - order))
        yield CheckLine(f"evolution_{which}_order", shortfall, 0.0)


def cmd_check(cfg: RunConfig, corrupt_q2: bool = False, skip=(), evolution: bool = True,
              out=None) -> int:
    out = out or sys.stdout
    first = None
    for line in run_checks(cfg, corrupt_q2, skip, evolution):
        print(line.format(), file=out, flush=True)
        if not line.passed and first is None:
            first = line.name
    if first is not None:
        print(f"check failed: first failing lemma {first}", file=out)
        return EXIT_TOL
    print("check passed", file=out)
    return EXIT_OK


def cmd_evolve(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    g0 = cfg.metric()
    snap_dir = Path(cfg.snapshot_dir) if cfg.snapshot_dir else None
    if snap_dir is not None:
        snap_dir.mkdir(parents=True, exist_ok=True)
        for old in snapshot_paths(snap_dir):
            old.unlink()
    count = {"seen": 0, "written": 0, "last": None}

    def save(state):
        k = count["seen"]
        count["seen"] += 1
        if snap_dir is None or k % cfg.snapshot_stride:
            return
        _write_state(snap_dir, count["written"], state, cfg)
        count["written"] += 1
        count["last"] = state.step

    try:
        result = evolve(g0, cfg.flow_spec(), on_output=save)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if snap_dir is not None and count["last"] != result.final.step:
        _write_state(snap_dir, count["written"], result.final, cfg)
    if cfg.csv:
        write_csv(cfg.csv, result.trajectory)
    fin = result.final
    print(f"outcome={result.outcome} steps={fin.step} t={format_float(fin.t)} "
          f"sup_omega={format_float(fin.diag['sup_omega'])} sup_T={format_float(fin.diag['sup_T'])}",
          file=out)
    return EXIT_BLOWUP if result.outcome == "blowup" else EXIT_OK


def _write_state(directory: Path, index: int, state, cfg: RunConfig):
    write_snapshot(directory / f"snap_{index:05d}.hcf", to_grid_first(np.asarray(state.G), 2),
                   n=cfg.n, N=cfg.N, t=state.t, step=state.step, backend=cfg.backend,
                   variant=cfg.variant)


def compare_series(dir_a: str | Path, dir_b: str | Path) -> list[tuple[float, float]]:
    """``(t, sup|g_a - g_b|)`` for matching snapshots of two series."""
    pa, pb = snapshot_paths(dir_a), snapshot_paths(dir_b)
    if not pa or not pb:
        raise ConfigError("snapshot series is empty")
    if len(pa) != len(pb):
        raise ConfigError(f"series lengths differ: {len(pa)} vs {len(pb)}")
    out = []
    for a, b in zip(pa, pb):
        ha, ga = read_snapshot(a)
        hb, gb = read_snapshot(b)
        if ga.shape != gb.shape:
            raise ConfigError(f"shape mismatch at {a.name}: {ga.shape} vs {gb.shape}")
        if abs(ha["t"] - hb["t"]) > 1e-12 * max(1.0, abs(ha["t"])):
            raise ConfigError(f"time mismatch at {a.name}: {ha['t']} vs {hb['t']}")
        out.append((ha["t"], float(np.max(np.abs(ga - gb)))))
    return out


def cmd_compare(dir_a, dir_b, tol: float | None = None, out=None) -> int:
    out = out or sys.stdout
    diffs = compare_series(dir_a, dir_b)
    for t, d in diffs:
        print(f"t={format_float(t)} sup_diff={d:.6e}", file=out)
    worst = max(d for _, d in diffs)
    print(f"max_sup_diff={worst:.6e}", file=out)
    if tol is not None and worst > tol:
        print(f"compare failed: {worst:.3e} > {tol:.1e}", file=out)
        return EXIT_TOL
    return EXIT_OK


# -- argparse -----------------------------------------------------------------

def _snapshot_dir(arg: str) -> str:
    """Accept a snapshot directory or a config file naming one."""
    p = Path(arg)
    if p.is_dir():
        return str(p)
    cfg = load_config(arg)
    if not cfg.snapshot_dir:
        raise ConfigError(f"{arg}: no snapshot_dir configured")
    return cfg.snapshot_dir


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="python -m hcflab", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", nargs="?", help="key = value config file")
        p.add_argument("--preset", choices=sorted(PRESETS))
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override one config key (repeatable)")

    pc = sub.add_parser("check", help="run the identity and variational suites")
    common(pc)
    pc.add_argument("--corrupt-q2-sign", action="store_true",
                    help="debug: flip the sign of the Q2 weight in the energy suite")
    pc.add_argument("--skip", default="", help="comma-separated check names to leave out")
    pc.add_argument("--no-evolution", action="store_true",
                    help="leave out the evolution-equation checks")

    pe = sub.add_parser("evolve", help="run the flow, writing CSV diagnostics and snapshots")
    common(pe)

    pm = sub.add_parser("compare", help="sup-norm differences of two snapshot series")
    pm.add_argument("a", help="snapshot directory or config file")
    pm.add_argument("b", help="snapshot directory or config file")
    pm.add_argument("--tol", type=float, default=None, help="fail if any difference exceeds this")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "compare":
            return cmd_compare(_snapshot_dir(args.a), _snapshot_dir(args.b), args.tol)
        cfg = load_config(args.config, args.preset, args.overrides)
        if args.command == "check":
            skip = tuple(s for s in args.skip.split(",") if s)
            return cmd_check(cfg, args.corrupt_q2_sign, skip, not args.no_evolution)
        return cmd_evolve(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
