"""Scenario configuration and orchestration of the check suites.

A scenario is an INI file.  Sections and keys (defaults in brackets):

``[scenario]``
    ``name`` [file stem], ``checks`` [inputs, weinstein, twist, curvature],
    ``samples`` [64], ``seed`` [0], ``tol_scale`` [1.0]
``[fiber]`` / ``[base]``
    ``model`` (catalog name, required unless noted below); every other key is
    passed to the model factory as a keyword (``c0``, ``k``, ``lam``,
    ``radius``, ``scal``, ``alpha``, ``action``)
``[splitting]``
    ``kind`` [canonical] one of canonical, enlarged, composite;
    ``base_split`` [none] ``COORDINATE(i)`` or ``TWISTOR``, required unless canonical
``[hermitian]``
    ``profile`` [Z_INV]
``[csck]``
    ``negative_control`` [none] base scalar curvature for the control run
``[tolerances]``
    ``<check id or id prefix> = <float>`` replaces the tolerance of matching records

With the ``csck`` check the base is derived from the fiber and ``[base]`` is ignored.
"""

from __future__ import annotations

import ast
import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .checks import CheckReport, record
from .curvature import LAPLACIAN_CONVENTION, csck_scenario, curvature_suite
from .fields import Field
from .foliation import (
    CALIBRATED_KAPPA,
    Foliation,
    OrthogonalSplitting,
    calibrate_kappa,
    foliation_suite,
)
from .forms import lift
from .hermitian import (
    abc_geometric_pair,
    conformal_balanced,
    omega_phi,
    parse_profile,
    positivity_margin,
    solution_family,
)
from .kaehler import MODEL_FACTORIES, ModelInstance, build_model
from .weinstein import (
    BaseData,
    FiberData,
    WeinsteinStructure,
    build_local_weinstein,
    enlarged_splitting,
    multi_ruled_tg_residual,
    twist_suite,
    twistor_splitting,
    verify_weinstein,
)

__all__ = [
    "CHECK_SUITES",
    "ConfigError",
    "RunResult",
    "ScenarioConfig",
    "bundled_path",
    "bundled_scenarios",
    "load_config",
    "parse_config",
    "run",
]

CHECK_SUITES = ("inputs", "weinstein", "twist", "curvature", "hermitian", "multi_foliation", "csck")
SPLITTING_KINDS = ("canonical", "enlarged", "composite")
DEFAULT_CHECKS = ("inputs", "weinstein", "twist", "curvature")
POSITIVITY_FLOOR = 1e-12
SCENARIO_DIR = Path(__file__).with_name("scenarios")


class ConfigError(ValueError):
    """Malformed or inconsistent scenario configuration."""


@dataclass(frozen=True)
class ModelRef:
    name: str
    params: dict = field(default_factory=dict)

    def build(self) -> ModelInstance:
        try:
            return build_model(self.name, **self.params)
        except TypeError as exc:
            raise ConfigError(f"bad parameters for {self.name}: {exc}") from None


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    fiber: ModelRef
    base: ModelRef | None = None
    checks: tuple[str, ...] = DEFAULT_CHECKS
    samples: int = 64
    seed: int = 0
    tol_scale: float = 1.0
    splitting: str = "canonical"
    base_split: str | None = None
    profile: str = "Z_INV"
    negative_control: float | None = None
    tolerances: dict = field(default_factory=dict)

    def with_overrides(self, seed: int | None = None, samples: int | None = None,
                       tol_scale: float | None = None) -> ScenarioConfig:
        kw = dict(self.__dict__)
        if seed is not None:
            kw["seed"] = seed
        if samples is not None:
            kw["samples"] = samples
        if tol_scale is not None:
            kw["tol_scale"] = self.tol_scale * tol_scale
        return _validated(ScenarioConfig(**kw))

    def as_dict(self) -> dict:
        out = {k: v for k, v in self.__dict__.items() if k not in ("fiber", "base")}
        out["checks"] = list(self.checks)
        out["fiber"] = {"model": self.fiber.name, **self.fiber.params}
        out["base"] = None if self.base is None else {"model": self.base.name, **self.base.params}
        return out


def _value(text: str):
    low = text.strip().lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return ast.literal_eval(text.strip())
    except (ValueError, SyntaxError):
        return text.strip()


def _model_ref(parser: configparser.ConfigParser, section: str, required: bool) -> ModelRef | None:
    if not parser.has_section(section):
        if required:
            raise ConfigError(f"missing [{section}] section")
        return None
    items = dict(parser.items(section))
    name = items.pop("model", None)
    if name is None:
        raise ConfigError(f"[{section}] needs a model")
    if name not in MODEL_FACTORIES:
        raise ConfigError(f"[{section}] unknown model {name!r}; known: {', '.join(sorted(MODEL_FACTORIES))}")
    return ModelRef(name, {k: _value(v) for k, v in sorted(items.items())})


def _validated(cfg: ScenarioConfig) -> ScenarioConfig:
    unknown = [c for c in cfg.checks if c not in CHECK_SUITES]
    if unknown:
        raise ConfigError(f"unknown checks {unknown}; known: {', '.join(CHECK_SUITES)}")
    if cfg.samples < 1:
        raise ConfigError("samples must be at least 1")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    if not cfg.tol_scale > 0:
        raise ConfigError("tol_scale must be positive")
    bad = {k: v for k, v in cfg.tolerances.items() if not (isinstance(v, float) and v > 0)}
    if bad:
        raise ConfigError(f"tolerances must be positive numbers: {bad}")
    if cfg.splitting not in SPLITTING_KINDS:
        raise ConfigError(f"splitting kind {cfg.splitting!r} not in {SPLITTING_KINDS}")
    if cfg.splitting != "canonical" and cfg.base_split is None:
        raise ConfigError(f"splitting kind {cfg.splitting} needs base_split")
    if "multi_foliation" in cfg.checks and cfg.splitting == "canonical":
        raise ConfigError("multi_foliation needs an enlarged or composite splitting")
    if "csck" not in cfg.checks and cfg.base is None:
        raise ConfigError("missing [base] section")
    try:
        parse_profile(cfg.profile)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def parse_config(text: str, name: str = "scenario") -> ScenarioConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable config: {exc}") from None
    sc = parser["scenario"] if parser.has_section("scenario") else {}
    try:
        checks = tuple(c.strip() for c in sc.get("checks", ", ".join(DEFAULT_CHECKS)).split(",") if c.strip())
        tolerances = {k: float(v) for k, v in parser.items("tolerances")} if parser.has_section("tolerances") else {}
        sp = parser["splitting"] if parser.has_section("splitting") else {}
        neg = parser.get("csck", "negative_control", fallback=None)
        cfg = ScenarioConfig(
            name=sc.get("name", name),
            fiber=_model_ref(parser, "fiber", True),
            base=_model_ref(parser, "base", False),
            checks=checks,
            samples=int(sc.get("samples", 64)),
            seed=int(sc.get("seed", 0)),
            tol_scale=float(sc.get("tol_scale", 1.0)),
            splitting=sp.get("kind", "canonical"),
            base_split=sp.get("base_split"),
            profile=parser.get("hermitian", "profile", fallback="Z_INV"),
            negative_control=None if neg is None else float(neg),
            tolerances=tolerances,
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    return _validated(cfg)


def load_config(path: str | Path) -> ScenarioConfig:
    p = Path(path)
    if not p.exists():
        candidate = bundled_path(str(path))
        if candidate is None:
            raise ConfigError(f"no such config: {path}")
        p = candidate
    return parse_config(p.read_text(), p.stem)


def bundled_scenarios() -> list[str]:
    return sorted(p.stem for p in SCENARIO_DIR.glob("*.cfg"))


def bundled_path(name: str) -> Path | None:
    stem = Path(name).stem
    p = SCENARIO_DIR / f"{stem}.cfg"
    return p if p.exists() else None


# -- orchestration -------------------------------------------------------------

@dataclass
class RunResult:
    config: ScenarioConfig
    report: CheckReport
    flags: dict

    @property
    def passed(self) -> bool:
        return self.report.passed


def base_splitting(spec: str, model: ModelInstance) -> OrthogonalSplitting:
    """``COORDINATE(i)``: the i-th complex coordinate line; ``TWISTOR``: twistor lines of CP^3."""
    s = spec.strip().upper()
    if s == "TWISTOR":
        return twistor_splitting(model)
    m = re.fullmatch(r"COORDINATE\((\d+)\)", s)
    if m is None:
        raise ConfigError(f"unknown base_split {spec!r}")
    i, d = int(m.group(1)), model.pkg.dim
    if not 0 <= i < d // 2 or d < 4:
        raise ConfigError(f"COORDINATE({i}) needs a base of complex dimension > max(1, {i})")
    cols = np.zeros((d, 2))
    cols[2 * i, 0] = cols[2 * i + 1, 1] = 1.0
    frame = Field(lambda c: c.const(cols), d, 0, f"coordinate {i}")
    return OrthogonalSplitting.from_frame(model.pkg.g, frame, 2, f"coordinate{i}")


def _inputs(ws: WeinsteinStructure, pts) -> CheckReport:
    return ws.base.verify(ws.base_part(pts)).extend(ws.fiber.verify(ws.fiber_part(pts)))


def _hermitian(ws: WeinsteinStructure, pts, profile_text: str) -> CheckReport:
    phi = parse_profile(profile_text)
    rep = conformal_balanced(ws, pts)
    form = omega_phi(ws, phi, pts)
    rep.add(record("hermitian.omega_phi_positive", f"Omega_phi(., I.) > 0 for phi = {phi.name}",
                   positivity_margin(ws, form, pts), POSITIVITY_FLOOR, pts, signed=True, comparator=">=",
                   reduce="min"))
    A, B = solution_family(phi, ws.m, ws.n)
    return rep.extend(abc_geometric_pair(ws, A, B, pts))


def _multi_foliation(ws: WeinsteinStructure, pts, cfg: ScenarioConfig, flags: dict) -> CheckReport:
    base_model = ws.base.model
    bsplit = base_splitting(cfg.base_split, base_model)
    bpts = ws.base_part(pts)
    brep = foliation_suite(base_model.pkg, bsplit, bpts, prefix="base_split")
    rep = CheckReport().extend(brep.residuals)
    bf = brep.flags
    flags["base_split"] = bf
    enl = enlarged_splitting(ws, bsplit, pts)
    kappa = CALIBRATED_KAPPA
    if not bf["holomorphic"]:
        cal = calibrate_kappa(ws.pkg, enl, pts)
        kappa = cal.kappa
        rep.add(
            record("calibration.kappa_blocks", "mixed and pure block normalisations agree",
                   np.full(len(pts), abs(cal.mixed - cal.pure)), 1e-6, pts),
            record("calibration.kappa_frozen", "fitted kappa equals the frozen constant",
                   np.full(len(pts), abs(cal.kappa - CALIBRATED_KAPPA)), 1e-6, pts),
        )
    expect = {"conformal": True, "homothetic": bf["homothetic"], "totally_geodesic": bf["totally_geodesic"],
              "holomorphic": bf["holomorphic"], "integrable_I": bf["integrable_I"]}
    frep = foliation_suite(ws.pkg, enl, pts, 1e-8, kappa=kappa, prefix="enlarged", expect=expect)
    rep.extend(frep.residuals)
    flags["enlarged"] = frep.flags
    lee = Foliation(ws.pkg, enl).theta - ws.theta - lift(Foliation(base_model.pkg, bsplit).theta, ws.dim, 0)
    lee_rec = record("enlarged.lee_form", "theta_enlarged = theta + pi^* theta_M", lee.values(pts), 1e-8, pts)
    rep.add(lee_rec if bf["conformal"] else lee_rec.as_diagnostic("base splitting not conformal"))
    tg = record("enlarged.multi_ruled", "eta_{D+}(horizontal lift of D-^M) = 0",
                multi_ruled_tg_residual(ws, enl, bsplit, pts), 1e-8, pts)
    rep.add(tg if bf["totally_geodesic"] else tg.as_diagnostic("base splitting not totally geodesic"))
    rep.metadata["kappa"] = kappa
    return rep


def _apply_tolerances(rep: CheckReport, cfg: ScenarioConfig) -> CheckReport:
    keys = sorted(cfg.tolerances, key=len, reverse=True)
    out = []
    for r in rep.records:
        key = next((k for k in keys if r.check_id == k or r.check_id.startswith(k + ".")), None)
        if key is not None:
            r = type(r)(**{**r.__dict__, "tolerance": cfg.tolerances[key]})
        out.append(r.scaled(cfg.tol_scale))
    return CheckReport(out, rep.metadata)


def run(cfg: ScenarioConfig) -> RunResult:
    """Build the instance named by ``cfg`` and run its check suites in order."""
    meta = {"scenario": cfg.name, "seed": cfg.seed, "samples": cfg.samples, "laplacian_convention": LAPLACIAN_CONVENTION,
            "iota_sign": 1, "kappa": CALIBRATED_KAPPA, "tol_scale": cfg.tol_scale, "config": cfg.as_dict()}
    rep = CheckReport(metadata=meta)
    flags: dict = {}
    fiber_model = cfg.fiber.build()
    if "csck" in cfg.checks:
        res = csck_scenario(fiber_model, samples=cfg.samples, seed=cfg.seed)
        rep.extend(res.report)
        meta.update(csck_c=res.c, csck_target_scal=res.expected_scal)
        if cfg.negative_control is not None:
            ctrl = csck_scenario(fiber_model, base_scal_override=cfg.negative_control, samples=cfg.samples, seed=cfg.seed)
            rep.add(ctrl.report["csck.negative_control"])
        ws, pts = res.ws, res.points
    else:
        ws = build_local_weinstein(BaseData.of(cfg.base.build()), FiberData.of(fiber_model))
        pts = ws.sample(cfg.samples, cfg.seed)
    meta.update(m=ws.m, n=ws.n, dim=ws.dim)

    for check in cfg.checks:
        if check == "inputs":
            rep.extend(_inputs(ws, pts))
        elif check == "weinstein":
            wrep, frep = verify_weinstein(ws, pts, kappa=CALIBRATED_KAPPA)
            rep.extend(wrep)
            flags["canonical"] = frep.flags
        elif check == "twist":
            trep = twist_suite(ws, pts, seed=cfg.seed)
            rep.extend(trep)
            meta["iota_sign"] = trep.metadata["iota_sign"]
        elif check == "curvature":
            rep.extend(curvature_suite(ws, pts))
        elif check == "hermitian":
            rep.extend(_hermitian(ws, pts, cfg.profile))
        elif check == "multi_foliation":
            mrep = _multi_foliation(ws, pts, cfg, flags)
            rep.extend(mrep)
            meta["kappa"] = mrep.metadata["kappa"]
    return RunResult(cfg, _apply_tolerances(rep, cfg), flags)
