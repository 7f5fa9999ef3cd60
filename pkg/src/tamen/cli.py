"""Command-line driver: ``tamen run-convection | run-cme | run-custom``.

Settings are merged in increasing priority from built-in defaults, an
optional YAML config file (flat keys), ``TAMEN_<KEY>`` environment
variables and command-line flags. Exit status: 0 on success, 1 on a
configuration or I/O error, 2 if any interval failed to converge.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from . import tt, ttio
from .models.cme import ModelFormatError
from .integrator import (
    IntegratorConfig,
    InvariantSpec,
    exp_uniform_intervals,
    propagate,
)

log = logging.getLogger("tamen")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NONCONVERGED = 2

BASE_COLUMNS = ["step", "t_end", "sweeps", "residual", "max_rank", "mass_drift", "norm_drift"]


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    experiment: str
    eps: float = 1e-5
    eta: float = 1e3
    rho: int = 4
    cheb_points: int = 32
    r_max: int = 512
    max_sweeps: int = 10
    steps: int = 20
    interval: float = 0.05
    grid: str = "uniform"
    rate: float = 0.05
    levels: int = 8
    sizes: list = field(default_factory=list)
    model: str | None = None
    conserve_norm: bool = False
    constraints: list = field(default_factory=list)
    seed: int = 0
    out: str = "run.csv"
    snapshots_every: int = 0
    snapshot_dir: str | None = None
    operator: str | None = None
    initial: str | None = None
    constraint_files: list = field(default_factory=list)

    def validate(self):
        for name in ("eps", "interval", "rate"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.eta > 1:
            raise ConfigError(f"eta must exceed 1, got {self.eta}")
        for name in ("rho", "cheb_points", "steps", "r_max", "max_sweeps", "levels"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1, got {getattr(self, name)}")
        if self.snapshots_every < 0:
            raise ConfigError("snapshots_every must be nonnegative")
        if self.grid not in ("uniform", "exp-uniform"):
            raise ConfigError(f"grid must be 'uniform' or 'exp-uniform', got {self.grid!r}")
        unknown = set(self.constraints) - {"mass", "index"}
        if unknown:
            raise ConfigError(f"unknown constraints {sorted(unknown)}")
        if self.experiment == "custom" and not (self.operator and self.initial):
            raise ConfigError("run-custom needs both operator and initial")
        return self

    def intervals(self):
        if self.grid == "exp-uniform":
            return exp_uniform_intervals(self.steps, self.rate)
        return [self.interval] * self.steps

    def integrator(self):
        return IntegratorConfig(eps=self.eps, eta=self.eta, rho=self.rho, I=self.cheb_points,
                                max_sweeps=self.max_sweeps, r_max=self.r_max, seed=self.seed)


DEFAULTS = {
    "convection": dict(eta=1e3, rho=4, cheb_points=32, interval=0.05, levels=8,
                       conserve_norm=True, constraints=["mass"]),
    "cme": dict(eta=10.0, rho=3, cheb_points=80, grid="exp-uniform",
                constraints=["mass", "index"]),
    "custom": dict(eta=10.0, rho=4, cheb_points=16),
}

_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key, value):
    kind = _FIELD_TYPES[key]
    try:
        if kind == "float":
            return float(value)
        if kind == "int":
            return int(value)
        if kind == "bool":
            if isinstance(value, str):
                low = value.strip().lower()
                if low in ("1", "true", "yes", "on"):
                    return True
                if low in ("0", "false", "no", "off"):
                    return False
                raise ValueError(value)
            return bool(value)
        if kind == "list":
            if isinstance(value, str):
                return [v.strip() for v in value.split(",") if v.strip()]
            return list(value)
        return None if value is None else str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value for {key}: {value!r}") from exc


def load_config(experiment, path=None, env=None, overrides=None) -> RunConfig:
    values = dict(DEFAULTS[experiment])
    if path:
        try:
            raw = yaml.safe_load(Path(path).read_text()) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file {path} is not valid YAML: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a mapping of flat keys")
        values.update({str(k).replace("-", "_"): v for k, v in raw.items()})
    env = os.environ if env is None else env
    for key in _FIELD_TYPES:
        name = "TAMEN_" + key.upper()
        if name in env:
            values[key] = env[name]
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = set(values) - set(_FIELD_TYPES)
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    values.pop("experiment", None)
    cfg = RunConfig(experiment, **{k: _coerce(k, v) for k, v in values.items()})
    if experiment == "cme" and cfg.sizes:
        cfg.sizes = [_coerce_int(s) for s in cfg.sizes]
    return cfg.validate()


def _coerce_int(s):
    try:
        return int(s)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid size {s!r}") from exc


# -- CSV ---------------------------------------------------------------------

def csv_header(n_means: int = 0) -> list:
    return BASE_COLUMNS + [f"mean_i{k + 1}" for k in range(n_means)] + ["wall_seconds"]


def _sci(v) -> str:
    return f"{float(v):.15e}"


def emit_csv_row(step, t_end, report, mass_drift, norm_drift, means=(), wall=0.0) -> list:
    """One CSV record; integers stay integers, reals get 15 significant digits."""
    return ([str(int(step)), _sci(t_end), str(int(report.sweeps)), _sci(report.residual),
             str(int(report.max_rank)), _sci(abs(mass_drift)), _sci(abs(norm_drift))]
            + [_sci(m) for m in means] + [_sci(wall)])


def snapshot_io(path, x=None):
    """Write ``x`` to ``path`` when given, otherwise read a train from ``path``."""
    if x is not None:
        ttio.save_vector(path, x)
        return x
    return ttio.load_vector(path)


# -- experiments -------------------------------------------------------------

def _build_convection(cfg):
    from .models.convection import ConvectionModel

    m = ConvectionModel(cfg.levels)
    cons = [m.mass_vector] if "mass" in cfg.constraints else []
    return m.operator, m.initial, cons, [], m.mass_vector, False


def _build_cme(cfg):
    from .models import cme

    model = cme.load_model(cfg.model) if cfg.model else cme.lambda_phage()
    sizes = tuple(cfg.sizes) if cfg.sizes else tuple(model.default_sizes)
    if not sizes:
        raise ConfigError("sizes must be given for this model")
    A = model.operator(sizes)
    psi0 = cme.multinomial_initial(sizes)
    e = tt.ones(sizes)
    cons = [e] if "mass" in cfg.constraints else []
    extra = cme.index_vectors(sizes) if "index" in cfg.constraints else []
    return A, psi0, cons, extra, e, True


def _build_custom(cfg):
    A = ttio.load_operator(cfg.operator)
    x0 = ttio.load_vector(cfg.initial)
    cons = [ttio.load_vector(p) for p in cfg.constraint_files]
    e = tt.ones(x0.n)
    if "mass" in cfg.constraints:
        cons = [e] + cons
    return A, x0, cons, [], e, False


BUILDERS = {"convection": _build_convection, "cme": _build_cme, "custom": _build_custom}


def run(cfg: RunConfig) -> int:
    from .models.cme import mean_copy_numbers

    A, x0, cons, extra, mass_vec, with_means = BUILDERS[cfg.experiment](cfg)
    out = Path(cfg.out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    snap_dir = Path(cfg.snapshot_dir) if cfg.snapshot_dir else out.parent / (out.stem + "_snapshots")
    if cfg.snapshots_every:
        snap_dir.mkdir(parents=True, exist_ok=True)
    inv = InvariantSpec(cons, cfg.conserve_norm, tt.norm(x0), extra)
    mass0 = tt.dot(mass_vec, x0)
    norm0 = tt.norm(x0)
    n_means = x0.d if with_means else 0
    status = EXIT_OK
    # open the output first so an unwritable path fails before the run
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(csv_header(n_means))
        traj = propagate(A, None, x0, cfg.intervals(), inv, cfg.integrator())
        wall = 0.0
        for j, st in enumerate(traj.steps, start=1):
            u = st.state
            mass = tt.dot(mass_vec, u)
            md = abs(mass - mass0) / abs(mass0) if mass0 != 0 else abs(mass)
            nd = abs(tt.norm(u) - norm0) / norm0
            means = mean_copy_numbers(u) if with_means else ()
            wall += st.report.wall_time
            writer.writerow(emit_csv_row(j, st.t_end, st.report, md, nd, means, wall))
            if cfg.snapshots_every and j % cfg.snapshots_every == 0:
                snapshot_io(snap_dir / f"step_{j:05d}.ttv", u)
            if not st.report.converged:
                status = EXIT_NONCONVERGED
    if traj.aborted:
        log.error("run aborted: %s", traj.error)
        status = EXIT_NONCONVERGED
    return status


def _parser():
    p = argparse.ArgumentParser(prog="tamen", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("run-convection", "run-cme", "run-custom"):
        s = sub.add_parser(name)
        s.add_argument("--config", help="YAML file with flat keys")
        s.add_argument("--eps", type=float)
        s.add_argument("--eta", type=float)
        s.add_argument("--rho", type=int)
        s.add_argument("--cheb-points", type=int, dest="cheb_points")
        s.add_argument("--steps", type=int)
        s.add_argument("--interval", type=float)
        s.add_argument("--levels", type=int)
        s.add_argument("--sizes", help="comma separated species sizes")
        s.add_argument("--seed", type=int)
        s.add_argument("--out")
        s.add_argument("--snapshots-every", type=int, dest="snapshots_every")
        s.add_argument("--snapshot-dir", dest="snapshot_dir")
        s.add_argument("--r-max", type=int, dest="r_max")
        s.add_argument("--max-sweeps", type=int, dest="max_sweeps")
        s.add_argument("--grid", choices=["uniform", "exp-uniform"])
        s.add_argument("--constraints", help="comma separated: mass, index")
        norm = s.add_mutually_exclusive_group()
        norm.add_argument("--conserve-norm", action="store_true", default=None, dest="conserve_norm")
        norm.add_argument("--no-conserve-norm", action="store_false", dest="conserve_norm")
        s.add_argument("--model", help="reaction network description (run-cme)")
        s.add_argument("--operator", help="TTO1 operator file (run-custom)")
        s.add_argument("--initial", help="TTV1 initial state file (run-custom)")
        s.add_argument("--constraint-file", action="append", dest="constraint_files")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    experiment = args.command.split("-", 1)[1]
    overrides = {k: v for k, v in vars(args).items()
                 if k not in ("command", "config", "verbose")}
    try:
        cfg = load_config(experiment, args.config, overrides=overrides)
        return run(cfg)
    except (ConfigError, ModelFormatError, ttio.TTFormatError, tt.TTShapeError,
            yaml.YAMLError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
