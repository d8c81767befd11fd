"""Plain-text configuration files (INI sections) for the CLI and harness."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field


from .errors import InputError
from .learners import LearnerConfig
from .sim import KERNELS, DgpConfig, Rho0Spec

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


class ConfigError(InputError):
    """A configuration file could not be parsed or validated."""


def _read_ini(path: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        # configparser messages carry file/line context
        raise ConfigError(f"config parse error: {exc}") from exc
    return parser


def _get_bool(section, key, default):
    raw = section.get(key, None)
    if raw is None:
        return default
    raw = raw.strip().lower()
    if raw in _TRUE:
        return True
    if raw in _FALSE:
        return False
    raise ConfigError(f"field '{key}': expected a boolean, got {raw!r}")


def _get_typed(section, key, cast, default):
    raw = section.get(key, None)
    if raw is None:
        return default
    try:
        return cast(raw)
    except ValueError as exc:
        raise ConfigError(f"field '{key}': {exc}") from exc


def _split_list(raw: str):
    return [item.strip() for item in raw.split(",") if item.strip()]


def _parse_kernel(name: str, key: str) -> str:
    if name not in KERNELS:
        raise ConfigError(f"field '{key}': unknown kernel {name!r}, expected one of {KERNELS}")
    return name


def parse_dgp_section(section) -> DgpConfig:
    try:
        n = int(section["n"])
    except KeyError as exc:
        raise ConfigError("field 'n' is required") from exc
    beta1_raw = section.get("beta1", "").strip()
    rho0_raw = section.get("rho0", "none")
    try:
        rho0 = Rho0Spec.parse(rho0_raw)
    except Exception as exc:
        raise ConfigError(f"field 'rho0': {exc}") from exc
    return DgpConfig(
        n=n,
        q=_get_typed(section, "q", int, 128),
        kernel_x=_parse_kernel(section.get("kernel_x", "constant"), "kernel_x"),
        kernel_y=_parse_kernel(section.get("kernel_y", "constant"), "kernel_y"),
        beta2=_get_typed(section, "beta2", float, -1.0),
        beta1=float(beta1_raw) if beta1_raw else None,
        rho0=rho0,
        seed=_get_typed(section, "seed", int, 0),
        w_noise=_get_bool(section, "w_noise", True),
    )


def parse_learner_section(section) -> LearnerConfig:
    if section is None:
        return LearnerConfig()
    return LearnerConfig(
        residual_ridge=_get_typed(section, "residual.ridge", float, 1e-3),
        intensity_ridge=_get_typed(section, "intensity.ridge", float, 1e-3),
        time_bins=_get_typed(section, "intensity.time_bins", int, 8),
        max_iter=_get_typed(section, "intensity.max_iter", int, 50),
        tol=_get_typed(section, "intensity.tol", float, 1e-8),
        lambda_cap=_get_typed(section, "caps.lambda", float, 50.0),
        g_cap_mult=_get_typed(section, "caps.g", float, 10.0),
        intensity_features=section.get("intensity.features", "historical").strip(),
    )


def load_dataset_config(path: str) -> DgpConfig:
    parser = _read_ini(path)
    if not parser.has_section("dataset"):
        raise ConfigError("config needs a [dataset] section")
    return parse_dgp_section(parser["dataset"])


_VALID_TESTS = ("xlct_sup", "xlct_endpoint", "cox_hr")


@dataclass(frozen=True)
class ExperimentSpec:
    """Sweep definition: the cross product of the sweep lists forms the cells."""

    name: str
    reps: int
    alpha: float
    k: int
    base_seed: int
    tests: tuple
    n_values: tuple
    kernel_x_values: tuple
    kernel_y_values: tuple
    beta2_values: tuple
    rho0_values: tuple
    q: int = 128
    w_noise: bool = True
    match_kernels: bool = False  # pair kernel_x = kernel_y instead of crossing them
    learners: LearnerConfig = field(default_factory=LearnerConfig)

    def __post_init__(self):
        if self.reps < 1:
            raise ConfigError("reps must be at least 1")
        for t in self.tests:
            if t not in _VALID_TESTS:
                raise ConfigError(f"field 'tests': unknown test {t!r}")

    def _kernel_pairs(self):
        if self.match_kernels:
            return [(k, k) for k in self.kernel_x_values]
        return [(kx, ky) for kx in self.kernel_x_values
                for ky in self.kernel_y_values]

    def cells(self):
        for n in self.n_values:
            for kx, ky in self._kernel_pairs():
                for b2 in self.beta2_values:
                    for rho in self.rho0_values:
                        yield DgpConfig(
                            n=n, q=self.q, kernel_x=kx, kernel_y=ky,
                            beta2=b2, rho0=rho, w_noise=self.w_noise,
                        )


def load_experiment_spec(path: str) -> ExperimentSpec:
    parser = _read_ini(path)
    if not parser.has_section("experiment"):
        raise ConfigError("config needs an [experiment] section")
    exp = parser["experiment"]
    sweep = parser["sweep"] if parser.has_section("sweep") else {}
    dgp = parser["dgp"] if parser.has_section("dgp") else {}
    learners = parse_learner_section(
        parser["learners"] if parser.has_section("learners") else None
    )
    tests = tuple(_split_list(exp.get("tests", "xlct_sup")))

    def sweep_list(key, cast, default):
        raw = sweep.get(key, None) if sweep else None
        if raw is None:
            return default
        try:
            return tuple(cast(item) for item in _split_list(raw))
        except Exception as exc:
            raise ConfigError(f"field '{key}': {exc}") from exc

    kernel_cast = lambda s: _parse_kernel(s, "sweep kernel")
    return ExperimentSpec(
        name=exp.get("name", "experiment"),
        reps=_get_typed(exp, "reps", int, 200),
        alpha=_get_typed(exp, "alpha", float, 0.05),
        k=_get_typed(exp, "k", int, 5),
        base_seed=_get_typed(exp, "base_seed", int, 0),
        tests=tests,
        n_values=sweep_list("n", int, (500,)),
        kernel_x_values=sweep_list("kernel_x", kernel_cast, ("constant",)),
        kernel_y_values=sweep_list("kernel_y", kernel_cast, ("constant",)),
        beta2_values=sweep_list("beta2", float, (-1.0,)),
        rho0_values=sweep_list("rho0", Rho0Spec.parse, (Rho0Spec("none"),)),
        q=_get_typed(dgp, "q", int, 128) if dgp else 128,
        w_noise=_get_bool(dgp, "w_noise", True) if dgp else True,
        match_kernels=_get_bool(sweep, "match_kernels", False) if sweep else False,
        learners=learners,
    )
