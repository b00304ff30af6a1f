"""YAML run configuration: parsing, validation, presets, serialization.

A configuration file is the reproducibility unit: it is copied verbatim
into the output directory of every run.  Sections:

    run_name   identifier used for the output folder
    domain     dim 1: {cells, length}; dim 2: {nx, ny, lx, ly}
    time       {T, steps}
    physics    {tau, gamma}
    potential  {kind, c1, eps_yosida, beta_hat, pi_hat}
    solver     {scheme, newton_tol, newton_max_iter, interior_safeguard}
    initial    named preset (constant / tanh-profile / random-seeded) or csv
    control    slab sources for `simulate`
    optimization  cost weights, targets, box bounds, optimizer options
    output     {directory, snapshot_stride}

Structural validation distinguishes malformed input (ConfigError, exit 1)
from data failing the standing assumptions such as the mean-value
condition (ValidationError, exit 2, raised later by the solvers).
"""

import copy
from dataclasses import dataclass

import numpy as np
import yaml

from .control import BoxBounds, ControlPair, ControlProblem, CostSpec, OptimizerOptions
from .errors import ConfigError
from .forward import Physics, Problem, SolverOptions, TimeGrid
from .mesh import build_interval, build_rectangle
from .potentials import PotentialPair, make_potential
from .spaces import PairField


@dataclass
class RunConfig:
    """Normalized configuration dictionary plus typed accessors."""

    data: dict

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        return cls(_normalize(raw))

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    # -- builders ----------------------------------------------------------

    def build_mesh(self):
        dom = self.data["domain"]
        if dom["dim"] == 1:
            return build_interval(dom["cells"], dom["length"])
        return build_rectangle(dom["nx"], dom["ny"], dom["lx"], dom["ly"])

    def build_pair(self) -> PotentialPair:
        pot = self.data["potential"]
        spec = make_potential(
            pot["kind"], c1=pot["c1"],
            beta_hat=pot.get("beta_hat"), pi_hat=pot.get("pi_hat"),
        )
        return PotentialPair.same(spec)

    def build_options(self) -> SolverOptions:
        sol = self.data["solver"]
        return SolverOptions(
            scheme=sol["scheme"],
            newton_tol=sol["newton_tol"],
            newton_max_iter=sol["newton_max_iter"],
            eps_yosida=self.data["potential"]["eps_yosida"],
            interior_safeguard=sol["interior_safeguard"],
        )

    def build_problem(self) -> Problem:
        t = self.data["time"]
        p = self.data["physics"]
        return Problem.create(
            self.build_mesh(),
            self.build_pair(),
            self.build_options(),
            Physics(tau=p["tau"], gamma=p["gamma"]),
            TimeGrid(T=t["T"], N=t["steps"]),
        )

    def build_initial(self, mesh) -> PairField:
        ini = self.data["initial"]
        x = mesh.bulk_nodes[:, 0]
        kind = ini["preset"]
        if kind == "constant":
            values = np.full(mesh.n_bulk, float(ini["value"]))
        elif kind == "tanh-profile":
            values = ini["amplitude"] * np.tanh((x - ini["center"]) / ini["width"])
        elif kind == "random-seeded":
            rng = np.random.default_rng(ini["seed"])
            values = rng.uniform(-ini["amplitude"], ini["amplitude"], mesh.n_bulk)
        elif kind == "csv":
            values = _load_field_csv(ini["path"], mesh.n_bulk)
        else:
            raise ConfigError(f"unknown initial-condition preset {kind!r}")
        return PairField.from_bulk(mesh, values)

    def build_controls(self, mesh, grid) -> ControlPair:
        ctl = self.data.get("control")
        if ctl is None:
            raise ConfigError("configuration has no [control] section")
        u = _control_slabs(ctl["u"], grid.N, mesh.n_bulk)
        ug = _control_slabs(ctl["uG"], grid.N, mesh.n_boundary)
        return ControlPair(u, ug)

    def build_control_problem(self):
        opt = self.data.get("optimization")
        if opt is None:
            raise ConfigError("configuration has no [optimization] section")
        problem = self.build_problem()
        mesh, grid = problem.mesh, problem.grid
        cost_spec = CostSpec(
            alphas=tuple(opt["alphas"]),
            phiQ=_target(opt["targets"].get("phiQ"), grid.N + 1, mesh.n_bulk),
            phiS=_target(opt["targets"].get("phiS"), grid.N + 1, mesh.n_boundary),
            phiO=_target(opt["targets"].get("phiO"), 1, mesh.n_bulk),
            phiG=_target(opt["targets"].get("phiG"), 1, mesh.n_boundary),
        )
        box = BoxBounds(
            u_min=opt["box"]["u_min"], u_max=opt["box"]["u_max"],
            uG_min=opt["box"]["uG_min"], uG_max=opt["box"]["uG_max"],
            M_prime=opt["m_prime"],
        )
        cp = ControlProblem(problem, self.build_initial(mesh), cost_spec, box)
        oo = opt["optimizer"]
        pg_opts = OptimizerOptions(
            armijo_c1=oo["armijo_c1"], backtrack=oo["backtrack"],
            initial_step=oo["initial_step"], max_iter=oo["max_iter"],
            tol=oo["tol"], bb_warm_start=oo["bb_warm_start"],
        )
        u0 = ControlPair(
            np.full((grid.N, mesh.n_bulk), float(opt["u0"])),
            np.full((grid.N, mesh.n_boundary), float(opt["u0"])),
        )
        return cp, u0, pg_opts

    @property
    def run_name(self) -> str:
        return self.data["run_name"]

    @property
    def output(self) -> dict:
        return self.data["output"]


def _require(section, key, caster, where):
    if key not in section:
        raise ConfigError(f"missing key {key!r} in section [{where}]")
    try:
        return caster(section[key])
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad value for {where}.{key}: {err}") from err


def _normalize(raw: dict) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError("configuration root must be a mapping")
    out = {"run_name": str(raw.get("run_name", "run"))}

    dom = raw.get("domain")
    if not isinstance(dom, dict):
        raise ConfigError("missing [domain] section")
    dim = _require(dom, "dim", int, "domain")
    if dim == 1:
        out["domain"] = {
            "dim": 1,
            "cells": _require(dom, "cells", int, "domain"),
            "length": _require(dom, "length", float, "domain"),
        }
        if out["domain"]["cells"] < 1 or out["domain"]["length"] <= 0:
            raise ConfigError("domain needs cells >= 1 and length > 0")
    elif dim == 2:
        out["domain"] = {
            "dim": 2,
            "nx": _require(dom, "nx", int, "domain"),
            "ny": _require(dom, "ny", int, "domain"),
            "lx": _require(dom, "lx", float, "domain"),
            "ly": _require(dom, "ly", float, "domain"),
        }
        if min(out["domain"]["nx"], out["domain"]["ny"]) < 1:
            raise ConfigError("domain needs nx, ny >= 1")
        if min(out["domain"]["lx"], out["domain"]["ly"]) <= 0:
            raise ConfigError("domain sides must be positive")
    else:
        raise ConfigError(f"dim must be 1 or 2, got {dim}")

    tsec = raw.get("time")
    if not isinstance(tsec, dict):
        raise ConfigError("missing [time] section")
    out["time"] = {
        "T": _require(tsec, "T", float, "time"),
        "steps": _require(tsec, "steps", int, "time"),
    }
    if out["time"]["T"] <= 0 or out["time"]["steps"] < 1:
        raise ConfigError("time needs T > 0 and steps >= 1")

    ph = raw.get("physics")
    if not isinstance(ph, dict):
        raise ConfigError("missing [physics] section")
    out["physics"] = {
        "tau": _require(ph, "tau", float, "physics"),
        "gamma": _require(ph, "gamma", float, "physics"),
    }
    if out["physics"]["tau"] <= 0:
        raise ConfigError("standing assumption violated: tau must be positive")
    if out["physics"]["gamma"] <= 0:
        raise ConfigError("standing assumption violated: gamma must be positive")

    pot = raw.get("potential", {})
    kind = str(pot.get("kind", "regular"))
    if kind not in ("regular", "logarithmic", "custom"):
        raise ConfigError(f"unknown potential kind {kind!r}")
    out["potential"] = {
        "kind": kind,
        "c1": float(pot.get("c1", 2.0)),
        "eps_yosida": float(pot.get("eps_yosida", 0.0)),
    }
    if kind == "custom":
        for key in ("beta_hat", "pi_hat"):
            if key not in pot:
                raise ConfigError(f"custom potential needs {key} coefficients")
            out["potential"][key] = [float(c) for c in pot[key]]
    if not 0.0 <= out["potential"]["eps_yosida"] < 1.0:
        raise ConfigError("eps_yosida must be 0 or inside (0, 1)")

    sol = raw.get("solver", {})
    out["solver"] = {
        "scheme": str(sol.get("scheme", "fully-implicit")),
        "newton_tol": float(sol.get("newton_tol", 1e-10)),
        "newton_max_iter": int(sol.get("newton_max_iter", 50)),
        "interior_safeguard": float(sol.get("interior_safeguard", 1e-8)),
    }
    if out["solver"]["scheme"] not in ("fully-implicit", "convex-splitting"):
        raise ConfigError(f"unknown scheme {out['solver']['scheme']!r}")

    ini = raw.get("initial", {"preset": "constant", "value": 0.0})
    preset = str(ini.get("preset", "constant"))
    norm_ini = {"preset": preset}
    if preset == "constant":
        norm_ini["value"] = float(ini.get("value", 0.0))
    elif preset == "tanh-profile":
        norm_ini["amplitude"] = float(ini.get("amplitude", 0.5))
        norm_ini["center"] = float(ini.get("center", 0.5))
        norm_ini["width"] = float(ini.get("width", 0.1))
    elif preset == "random-seeded":
        norm_ini["seed"] = int(ini.get("seed", 0))
        norm_ini["amplitude"] = float(ini.get("amplitude", 0.1))
    elif preset == "csv":
        norm_ini["path"] = str(ini["path"])
    else:
        raise ConfigError(f"unknown initial-condition preset {preset!r}")
    out["initial"] = norm_ini

    if "control" in raw:
        ctl = raw["control"]
        out["control"] = {
            "u": _control_spec(ctl.get("u", 0.0)),
            "uG": _control_spec(ctl.get("uG", 0.0)),
        }

    if "optimization" in raw:
        opt = raw["optimization"]
        alphas = opt.get("alphas", [1, 0, 1, 0, 0.1, 0.1])
        if len(alphas) != 6:
            raise ConfigError("optimization.alphas needs exactly 6 entries")
        alphas = [float(a) for a in alphas]
        if any(a < 0 for a in alphas):
            raise ConfigError("standing assumption violated: cost weights must be >= 0")
        targets = opt.get("targets", {})
        box = opt.get("box", {})
        oo = opt.get("optimizer", {})
        out["optimization"] = {
            "alphas": alphas,
            "targets": {
                key: _target_spec(targets.get(key))
                for key in ("phiQ", "phiS", "phiO", "phiG")
            },
            "box": {
                "u_min": float(box.get("u_min", -1.0)),
                "u_max": float(box.get("u_max", 1.0)),
                "uG_min": float(box.get("uG_min", -1.0)),
                "uG_max": float(box.get("uG_max", 1.0)),
            },
            "m_prime": float(opt.get("m_prime", 1.0e3)),
            "u0": float(opt.get("u0", 0.0)),
            "optimizer": {
                "max_iter": int(oo.get("max_iter", 200)),
                "tol": float(oo.get("tol", 1e-6)),
                "armijo_c1": float(oo.get("armijo_c1", 1e-4)),
                "backtrack": float(oo.get("backtrack", 0.5)),
                "initial_step": float(oo.get("initial_step", 1.0)),
                "bb_warm_start": bool(oo.get("bb_warm_start", False)),
            },
        }

    outsec = raw.get("output", {})
    out["output"] = {
        "directory": str(outsec.get("directory", "out")),
        "snapshot_stride": int(outsec.get("snapshot_stride", 0)),
    }
    return out


def _control_spec(value):
    if isinstance(value, str):
        return {"csv": value}
    return float(value)


def _control_slabs(spec, n_slabs, width):
    if isinstance(spec, dict) and "csv" in spec:
        arr = _load_table_csv(spec["csv"])
        if arr.shape == (1, width):
            return np.repeat(arr, n_slabs, axis=0)
        if arr.shape != (n_slabs, width):
            raise ConfigError(
                f"control CSV has shape {arr.shape}, expected ({n_slabs}, {width})"
            )
        return arr
    return np.full((n_slabs, width), float(spec))


def _target_spec(value):
    if value is None:
        return 0.0
    if isinstance(value, str):
        return {"csv": value}
    if isinstance(value, dict):
        if "csv" in value:
            return {"csv": str(value["csv"])}
        if value.get("preset") == "constant":
            return float(value.get("value", 0.0))
        raise ConfigError(f"unknown target specification {value!r}")
    return float(value)


def _target(spec, n_rows, width):
    if isinstance(spec, dict) and "csv" in spec:
        arr = _load_table_csv(spec["csv"])
        if arr.shape == (1, width):
            return np.repeat(arr, n_rows, axis=0) if n_rows > 1 else arr[0]
        if n_rows == 1 and arr.shape == (n_rows, width):
            return arr[0]
        if arr.shape != (n_rows, width):
            raise ConfigError(
                f"target CSV has shape {arr.shape}, expected ({n_rows}, {width})"
            )
        return arr
    return float(spec)


def _load_field_csv(path, width):
    arr = _load_table_csv(path)
    if arr.shape != (1, width):
        raise ConfigError(f"field CSV has shape {arr.shape}, expected (1, {width})")
    return arr[0]


def _load_table_csv(path):
    try:
        return np.atleast_2d(np.loadtxt(path, delimiter=",", ndmin=2))
    except OSError as err:
        raise ConfigError(f"cannot read CSV {path}: {err}") from err
    except ValueError as err:
        raise ConfigError(f"cannot parse CSV {path}: {err}") from err


def load_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    except yaml.YAMLError as err:
        raise ConfigError(f"cannot parse config {path}: {err}") from err
    return RunConfig.from_dict(raw or {})


def save_config(cfg: RunConfig, path):
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=False)


# ---------------------------------------------------------------------------
# Shipped presets
# ---------------------------------------------------------------------------

PRESETS = {
    "default": {
        "run_name": "default",
        "domain": {"dim": 1, "cells": 32, "length": 1.0},
        "time": {"T": 0.5, "steps": 25},
        "physics": {"tau": 1.0, "gamma": 1.0},
        "potential": {"kind": "regular"},
        "initial": {"preset": "tanh-profile", "amplitude": 0.4, "center": 0.5, "width": 0.15},
        "control": {"u": 0.1, "uG": 0.05},
        "optimization": {
            "alphas": [1.0, 0.5, 1.0, 0.5, 0.5, 0.5],
            "targets": {"phiQ": 0.2, "phiS": 0.2, "phiO": 0.2, "phiG": 0.2},
            "box": {"u_min": -1.0, "u_max": 1.0, "uG_min": -1.0, "uG_max": 1.0},
            "optimizer": {"max_iter": 400, "tol": 1.0e-6},
        },
        "output": {"directory": "out", "snapshot_stride": 5},
    },
    "logarithmic": {
        "run_name": "logarithmic",
        "domain": {"dim": 1, "cells": 48, "length": 1.0},
        "time": {"T": 0.4, "steps": 20},
        "physics": {"tau": 1.0, "gamma": 1.0},
        "potential": {"kind": "logarithmic", "c1": 2.0},
        "initial": {"preset": "tanh-profile", "amplitude": 0.3, "center": 0.5, "width": 0.2},
        "control": {"u": 0.2, "uG": 0.1},
        "optimization": {
            "alphas": [1.0, 0.0, 1.0, 0.0, 0.5, 0.5],
            "targets": {"phiQ": 0.1, "phiS": 0.0, "phiO": 0.1, "phiG": 0.0},
            "box": {"u_min": -0.4, "u_max": 0.4, "uG_min": -0.4, "uG_max": 0.4},
            "optimizer": {"max_iter": 400, "tol": 1.0e-6},
        },
        "output": {"directory": "out", "snapshot_stride": 5},
    },
    "rectangle": {
        "run_name": "rectangle",
        "domain": {"dim": 2, "nx": 8, "ny": 8, "lx": 1.0, "ly": 1.0},
        "time": {"T": 0.25, "steps": 10},
        "physics": {"tau": 1.0, "gamma": 1.0},
        "potential": {"kind": "regular"},
        "initial": {"preset": "random-seeded", "seed": 3, "amplitude": 0.3},
        "control": {"u": 0.1, "uG": 0.05},
        "optimization": {
            "alphas": [1.0, 0.5, 1.0, 0.5, 0.5, 0.5],
            "targets": {"phiQ": 0.1, "phiS": 0.1, "phiO": 0.1, "phiG": 0.1},
            "box": {"u_min": -1.0, "u_max": 1.0, "uG_min": -1.0, "uG_max": 1.0},
            "optimizer": {"max_iter": 200, "tol": 1.0e-6},
        },
        "output": {"directory": "out", "snapshot_stride": 5},
    },
    "coarse": {
        "run_name": "coarse",
        "domain": {"dim": 1, "cells": 16, "length": 1.0},
        "time": {"T": 0.5, "steps": 8},
        "physics": {"tau": 1.0, "gamma": 1.0},
        "potential": {"kind": "regular"},
        "initial": {"preset": "constant", "value": 0.2},
        "control": {"u": 0.1, "uG": 0.1},
        "optimization": {
            "alphas": [1.0, 0.0, 1.0, 0.0, 0.5, 0.5],
            "targets": {"phiQ": 0.1, "phiS": 0.0, "phiO": 0.1, "phiG": 0.0},
            "box": {"u_min": -1.0, "u_max": 1.0, "uG_min": -1.0, "uG_max": 1.0},
            "optimizer": {"max_iter": 200, "tol": 1.0e-6},
        },
        "output": {"directory": "out", "snapshot_stride": 2},
    },
}


def preset_config(name: str) -> RunConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    return RunConfig.from_dict(copy.deepcopy(PRESETS[name]))
