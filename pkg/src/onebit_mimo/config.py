"""Experiment configuration: strict schema, hashing, round-tripping.

Configs are YAML (JSON works too, being a YAML subset) with a top-level
``master_seed`` and an ``experiments`` list.  Unknown keys are rejected
with their full key path; value errors report the path and what was
expected.  Every experiment gets an effective seed: an explicit ``seed``
key wins, otherwise one is derived from the master seed and the
experiment name by hashing, so renaming or reordering experiments never
silently reuses streams.

A run manifest (the JSON the CLI writes next to its outputs) embeds the
original config and the effective master seed; ``parse_config`` accepts
manifests transparently, which is what makes replay-from-manifest
byte-identical.
"""

import hashlib
import json
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import yaml

from .analysis import CollisionSpec
from .detectors import NmlConfig
from .model import Constellation, make_constellation
from .sim import (
    ChanestSweepConfig,
    CsiModel,
    MulticellConfig,
    SweepConfig,
)

__all__ = [
    "ConfigError",
    "SerExperiment",
    "ChanestExperiment",
    "CollisionExperiment",
    "MulticellExperiment",
    "ParsedConfig",
    "parse_config",
    "parse_config_data",
    "config_to_dict",
    "experiment_to_dict",
    "config_hash",
    "derive_seed",
]

EXPERIMENT_TYPES = (
    "ser_sweep",
    "chanest_sweep",
    "collision_check",
    "multicell_sweep",
)

_NAME_CHARS = set(
    "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-"
)


class ConfigError(ValueError):
    """Schema violation; the message starts with the offending key path."""


@dataclass(frozen=True)
class SerExperiment:
    name: str
    config: SweepConfig
    kind: str = "ser_sweep"


@dataclass(frozen=True)
class ChanestExperiment:
    name: str
    config: ChanestSweepConfig
    kind: str = "chanest_sweep"


@dataclass(frozen=True)
class CollisionExperiment:
    name: str
    spec: CollisionSpec
    trials: int
    seed: int
    kind: str = "collision_check"


@dataclass(frozen=True)
class MulticellExperiment:
    name: str
    config: MulticellConfig
    d_grid_m: Tuple[float, ...]
    detectors: Tuple[str, ...]
    trials: int
    seed: int
    kind: str = "multicell_sweep"


Experiment = Union[
    SerExperiment, ChanestExperiment, CollisionExperiment, MulticellExperiment
]


@dataclass(frozen=True)
class ParsedConfig:
    master_seed: int
    experiments: Tuple[Experiment, ...]


def derive_seed(master_seed: int, name: str) -> int:
    """Stable per-experiment seed from the master seed and the name."""
    digest = hashlib.sha256(
        ("%d:%s" % (master_seed, name)).encode("utf-8")
    ).digest()
    return int.from_bytes(digest[:8], "big")


def _fail(path: str, message: str):
    raise ConfigError("%s: %s" % (path, message))


def _require_mapping(value, path: str) -> dict:
    if not isinstance(value, dict):
        _fail(path, "expected a mapping, got %s" % type(value).__name__)
    return value


def _reject_unknown(d: dict, path: str, allowed):
    for key in d:
        if key not in allowed:
            _fail("%s.%s" % (path, key), "unknown key")


def _get(d: dict, path: str, key: str, kinds, required=True, default=None):
    if key not in d:
        if required:
            _fail("%s.%s" % (path, key), "missing required key")
        return default
    value = d[key]
    if kinds is int:
        if isinstance(value, bool) or not isinstance(value, int):
            _fail("%s.%s" % (path, key), "expected an integer")
    elif kinds is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            _fail("%s.%s" % (path, key), "expected a number")
        value = float(value)
    elif kinds is str:
        if not isinstance(value, str):
            _fail("%s.%s" % (path, key), "expected a string")
    elif kinds is list:
        if not isinstance(value, list):
            _fail("%s.%s" % (path, key), "expected a list")
    elif kinds is dict:
        if not isinstance(value, dict):
            _fail("%s.%s" % (path, key), "expected a mapping")
    return value


def _number_list(d: dict, path: str, key: str) -> Tuple[float, ...]:
    raw = _get(d, path, key, list)
    out = []
    for i, v in enumerate(raw):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            _fail("%s.%s[%d]" % (path, key, i), "expected a number")
        out.append(float(v))
    return tuple(out)


def _string_list(d: dict, path: str, key: str) -> Tuple[str, ...]:
    raw = _get(d, path, key, list)
    out = []
    for i, v in enumerate(raw):
        if not isinstance(v, str):
            _fail("%s.%s[%d]" % (path, key, i), "expected a string")
        out.append(v)
    return tuple(out)


def _parse_constellation(d: dict, path: str) -> Constellation:
    d = _require_mapping(d, path)
    _reject_unknown(d, path, ("kind", "order"))
    kind = _get(d, path, "kind", str)
    order = _get(d, path, "order", int)
    try:
        return make_constellation(kind, order)
    except ValueError as exc:
        _fail(path, str(exc))


def _parse_nml(d, path: str) -> NmlConfig:
    if d is None:
        return NmlConfig()
    d = _require_mapping(d, path)
    allowed = ("kappa", "epsilon", "max_iterations", "candidate_ratio")
    _reject_unknown(d, path, allowed)
    defaults = NmlConfig()
    try:
        return NmlConfig(
            kappa=_get(d, path, "kappa", float, False, defaults.kappa),
            epsilon=_get(d, path, "epsilon", float, False, defaults.epsilon),
            max_iterations=_get(
                d, path, "max_iterations", int, False, defaults.max_iterations
            ),
            candidate_ratio=_get(
                d, path, "candidate_ratio", float, False,
                defaults.candidate_ratio,
            ),
        )
    except ValueError as exc:
        _fail(path, str(exc))


def _parse_csi(d, path: str) -> CsiModel:
    if d is None:
        return CsiModel()
    d = _require_mapping(d, path)
    _reject_unknown(d, path, ("kind", "nmse"))
    try:
        return CsiModel(
            kind=_get(d, path, "kind", str),
            nmse=_get(d, path, "nmse", float, False, 0.0),
        )
    except ValueError as exc:
        _fail(path, str(exc))


def _effective_seed(d: dict, path: str, master_seed: int, name: str) -> int:
    seed = _get(d, path, "seed", int, False)
    if seed is None:
        return derive_seed(master_seed, name)
    if not 0 <= seed < 2**64:
        _fail("%s.seed" % path, "must fit in an unsigned 64-bit int")
    return seed


_COMMON_KEYS = ("name", "type", "seed")


def _parse_ser(d: dict, path: str, name: str, seed: int) -> SerExperiment:
    allowed = _COMMON_KEYS + (
        "k", "n_r", "constellation", "snr_grid_db", "detectors",
        "trials_per_point", "csi", "nml",
    )
    _reject_unknown(d, path, allowed)
    try:
        cfg = SweepConfig(
            k=_get(d, path, "k", int),
            n_r=_get(d, path, "n_r", int),
            constellation=_parse_constellation(
                _get(d, path, "constellation", dict),
                "%s.constellation" % path,
            ),
            snr_grid_db=_number_list(d, path, "snr_grid_db"),
            detectors=_string_list(d, path, "detectors"),
            trials_per_point=_get(d, path, "trials_per_point", int),
            master_seed=seed,
            csi_model=_parse_csi(d.get("csi"), "%s.csi" % path),
            nml=_parse_nml(d.get("nml"), "%s.nml" % path),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        _fail(path, str(exc))
    return SerExperiment(name=name, config=cfg)


def _parse_chanest(d: dict, path: str, name: str,
                   seed: int) -> ChanestExperiment:
    allowed = _COMMON_KEYS + (
        "k", "t", "snr_grid_db", "estimators", "draws_per_point", "nml",
    )
    _reject_unknown(d, path, allowed)
    try:
        cfg = ChanestSweepConfig(
            k=_get(d, path, "k", int),
            t=_get(d, path, "t", int),
            snr_grid_db=_number_list(d, path, "snr_grid_db"),
            estimators=_string_list(d, path, "estimators"),
            draws_per_point=_get(d, path, "draws_per_point", int),
            master_seed=seed,
            nml=_parse_nml(d.get("nml"), "%s.nml" % path),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        _fail(path, str(exc))
    return ChanestExperiment(name=name, config=cfg)


def _parse_collision(d: dict, path: str, name: str,
                     seed: int) -> CollisionExperiment:
    allowed = _COMMON_KEYS + ("k", "n_r", "p", "sigma2", "trials")
    _reject_unknown(d, path, allowed)
    trials = _get(d, path, "trials", int)
    if trials < 1:
        _fail("%s.trials" % path, "must be >= 1")
    try:
        spec = CollisionSpec(
            k=_get(d, path, "k", int),
            n_r=_get(d, path, "n_r", int),
            p=_get(d, path, "p", float),
            sigma2=_get(d, path, "sigma2", float),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        _fail(path, str(exc))
    return CollisionExperiment(name=name, spec=spec, trials=trials, seed=seed)


def _parse_multicell(d: dict, path: str, name: str,
                     seed: int) -> MulticellExperiment:
    allowed = _COMMON_KEYS + (
        "d_grid_m", "detectors", "trials", "n_cells", "cell_radius_m", "k",
        "n_r", "tx_power_dbm", "pathloss_const_db", "pathloss_slope_db",
        "bandwidth_hz", "noise_density_dbm_hz", "noise_figure_db",
        "min_dist_m", "coordinated_halfwidth_m", "constellation", "nml",
    )
    _reject_unknown(d, path, allowed)
    trials = _get(d, path, "trials", int)
    if trials < 1:
        _fail("%s.trials" % path, "must be >= 1")
    defaults = MulticellConfig()
    kwargs = dict(
        n_cells=_get(d, path, "n_cells", int, False, defaults.n_cells),
        cell_radius_m=_get(
            d, path, "cell_radius_m", float, False, defaults.cell_radius_m
        ),
        k=_get(d, path, "k", int, False, defaults.k),
        n_r=_get(d, path, "n_r", int, False, defaults.n_r),
        tx_power_dbm=_get(
            d, path, "tx_power_dbm", float, False, defaults.tx_power_dbm
        ),
        pathloss_const_db=_get(
            d, path, "pathloss_const_db", float, False,
            defaults.pathloss_const_db,
        ),
        pathloss_slope_db=_get(
            d, path, "pathloss_slope_db", float, False,
            defaults.pathloss_slope_db,
        ),
        bandwidth_hz=_get(
            d, path, "bandwidth_hz", float, False, defaults.bandwidth_hz
        ),
        noise_density_dbm_hz=_get(
            d, path, "noise_density_dbm_hz", float, False,
            defaults.noise_density_dbm_hz,
        ),
        noise_figure_db=_get(
            d, path, "noise_figure_db", float, False,
            defaults.noise_figure_db,
        ),
        min_dist_m=_get(
            d, path, "min_dist_m", float, False, defaults.min_dist_m
        ),
        coordinated_halfwidth_m=_get(
            d, path, "coordinated_halfwidth_m", float, False,
            defaults.coordinated_halfwidth_m,
        ),
        nml=_parse_nml(d.get("nml"), "%s.nml" % path),
    )
    if "constellation" in d:
        kwargs["constellation"] = _parse_constellation(
            d["constellation"], "%s.constellation" % path
        )
    try:
        cfg = MulticellConfig(**kwargs)
    except ConfigError:
        raise
    except ValueError as exc:
        _fail(path, str(exc))
    detectors_used = _string_list(d, path, "detectors")
    if not set(detectors_used).issubset(("ML", "NML1", "NML2", "ZF")):
        _fail("%s.detectors" % path, "unknown detector name")
    return MulticellExperiment(
        name=name,
        config=cfg,
        d_grid_m=_number_list(d, path, "d_grid_m"),
        detectors=tuple(detectors_used),
        trials=trials,
        seed=seed,
    )


_PARSERS = {
    "ser_sweep": _parse_ser,
    "chanest_sweep": _parse_chanest,
    "collision_check": _parse_collision,
    "multicell_sweep": _parse_multicell,
}


def parse_config_data(data, override_seed: Optional[int] = None
                      ) -> ParsedConfig:
    """Validate an already-loaded config (or manifest) structure."""
    data = _require_mapping(data, "<root>")
    if "artifact_version" in data and "config" in data:
        inner = _require_mapping(data["config"], "<root>.config")
        seed = data.get("master_seed")
        if override_seed is None and isinstance(seed, int):
            override_seed = seed
        return parse_config_data(inner, override_seed)
    _reject_unknown(data, "<root>", ("master_seed", "experiments"))
    master_seed = _get(data, "<root>", "master_seed", int, False, 0)
    if override_seed is not None:
        master_seed = override_seed
    if not 0 <= master_seed < 2**64:
        _fail("<root>.master_seed", "must fit in an unsigned 64-bit int")
    raw_experiments = _get(data, "<root>", "experiments", list, False, [])
    experiments = []
    seen = set()
    for i, raw in enumerate(raw_experiments):
        path = "experiments[%d]" % i
        raw = _require_mapping(raw, path)
        name = _get(raw, path, "name", str)
        if not name or not set(name).issubset(_NAME_CHARS):
            _fail(
                "%s.name" % path,
                "must be nonempty and use only [A-Za-z0-9_-]",
            )
        if name in seen:
            _fail("%s.name" % path, "duplicate experiment name %r" % name)
        seen.add(name)
        etype = _get(raw, path, "type", str)
        if etype not in _PARSERS:
            _fail(
                "%s.type" % path,
                "must be one of %s" % (EXPERIMENT_TYPES,),
            )
        seed = _effective_seed(raw, path, master_seed, name)
        experiments.append(_PARSERS[etype](raw, path, name, seed))
    return ParsedConfig(
        master_seed=master_seed, experiments=tuple(experiments)
    )


def parse_config(path: str, override_seed: Optional[int] = None
                 ) -> ParsedConfig:
    """Load and validate a YAML config file or a run manifest."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError("<root>: not valid YAML (%s)" % exc)
    return parse_config_data(data, override_seed)


def _constellation_dict(c: Constellation) -> dict:
    return {"kind": c.kind, "order": c.order}


def _nml_dict(n: NmlConfig) -> dict:
    return {
        "kappa": n.kappa,
        "epsilon": n.epsilon,
        "max_iterations": n.max_iterations,
        "candidate_ratio": n.candidate_ratio,
    }


def experiment_to_dict(exp: Experiment) -> dict:
    """Serialize one experiment to the same schema ``parse_config`` reads.

    The effective seed is materialized, so a serialize/parse round trip
    is exact even under a different master seed.
    """
    if isinstance(exp, SerExperiment):
        cfg = exp.config
        out = {
            "name": exp.name,
            "type": exp.kind,
            "seed": cfg.master_seed,
            "k": cfg.k,
            "n_r": cfg.n_r,
            "constellation": _constellation_dict(cfg.constellation),
            "snr_grid_db": list(cfg.snr_grid_db),
            "detectors": list(cfg.detectors),
            "trials_per_point": cfg.trials_per_point,
            "csi": {"kind": cfg.csi_model.kind, "nmse": cfg.csi_model.nmse},
            "nml": _nml_dict(cfg.nml),
        }
    elif isinstance(exp, ChanestExperiment):
        cfg = exp.config
        out = {
            "name": exp.name,
            "type": exp.kind,
            "seed": cfg.master_seed,
            "k": cfg.k,
            "t": cfg.t,
            "snr_grid_db": list(cfg.snr_grid_db),
            "estimators": list(cfg.estimators),
            "draws_per_point": cfg.draws_per_point,
            "nml": _nml_dict(cfg.nml),
        }
    elif isinstance(exp, CollisionExperiment):
        out = {
            "name": exp.name,
            "type": exp.kind,
            "seed": exp.seed,
            "k": exp.spec.k,
            "n_r": exp.spec.n_r,
            "p": exp.spec.p,
            "sigma2": exp.spec.sigma2,
            "trials": exp.trials,
        }
    elif isinstance(exp, MulticellExperiment):
        cfg = exp.config
        out = {
            "name": exp.name,
            "type": exp.kind,
            "seed": exp.seed,
            "d_grid_m": list(exp.d_grid_m),
            "detectors": list(exp.detectors),
            "trials": exp.trials,
            "n_cells": cfg.n_cells,
            "cell_radius_m": cfg.cell_radius_m,
            "k": cfg.k,
            "n_r": cfg.n_r,
            "tx_power_dbm": cfg.tx_power_dbm,
            "pathloss_const_db": cfg.pathloss_const_db,
            "pathloss_slope_db": cfg.pathloss_slope_db,
            "bandwidth_hz": cfg.bandwidth_hz,
            "noise_density_dbm_hz": cfg.noise_density_dbm_hz,
            "noise_figure_db": cfg.noise_figure_db,
            "min_dist_m": cfg.min_dist_m,
            "coordinated_halfwidth_m": cfg.coordinated_halfwidth_m,
            "constellation": _constellation_dict(cfg.constellation),
            "nml": _nml_dict(cfg.nml),
        }
    else:
        raise TypeError("unknown experiment type %r" % type(exp).__name__)
    return out


def config_to_dict(parsed: ParsedConfig) -> dict:
    return {
        "master_seed": parsed.master_seed,
        "experiments": [experiment_to_dict(e) for e in parsed.experiments],
    }


def config_hash(exp: Experiment) -> str:
    """Twelve hex chars identifying an experiment's full configuration."""
    canonical = json.dumps(
        experiment_to_dict(exp), sort_keys=True, separators=(",", ":")
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]
