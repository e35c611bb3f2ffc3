"""Run configuration: one JSON schema validated on load.

Unknown keys anywhere in the document are rejected, and the index block
must pass admissibility.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ConfigError
from .index import IndexParams, check_admissible


@dataclass
class Tolerances:
    ode_tol: float = 1e-11
    rank_threshold: float = 1e-4
    quad_refinement: int = 2

    @classmethod
    def from_dict(cls, blob: dict) -> "Tolerances":
        _reject_unknown(blob, {"ode_tol", "rank_threshold", "quad_refinement"},
                        "tolerances")
        return cls(**blob)

    def to_dict(self) -> dict:
        return {"ode_tol": self.ode_tol, "rank_threshold": self.rank_threshold,
                "quad_refinement": self.quad_refinement}


@dataclass
class GridSettings:
    nontrap_n_r: int = 401
    nontrap_n_theta: int = 401
    wavepacket_n: int = 1024
    wavepacket_box: float = 7.0
    wavepacket_eps: float = 1.0 / 64.0
    asym_n: int = 96
    asym_box: float = 60.0
    cap_quad_n_theta1: int = 32
    cap_quad_n_azimuth: int = 64

    @classmethod
    def from_dict(cls, blob: dict) -> "GridSettings":
        known = {"nontrap_n_r", "nontrap_n_theta", "wavepacket_n", "wavepacket_box",
                 "wavepacket_eps", "asym_n", "asym_box", "cap_quad_n_theta1",
                 "cap_quad_n_azimuth"}
        _reject_unknown(blob, known, "grids")
        return cls(**blob)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("nontrap_n_r", "nontrap_n_theta", "wavepacket_n", "wavepacket_box",
                 "wavepacket_eps", "asym_n", "asym_box", "cap_quad_n_theta1",
                 "cap_quad_n_azimuth")}


@dataclass
class RunConfig:
    index: IndexParams = field(default_factory=IndexParams)
    tolerances: Tolerances = field(default_factory=Tolerances)
    grids: GridSettings = field(default_factory=GridSettings)
    seed: int = 0
    out_dir: str = "reports"
    delta_list: tuple = (1e-2, 5e-3, 2.5e-3)

    @classmethod
    def from_dict(cls, blob: dict) -> "RunConfig":
        known = {"index", "tolerances", "grids", "seed", "out_dir", "delta_list"}
        _reject_unknown(blob, known, "config")
        kwargs = {}
        if "index" in blob:
            try:
                kwargs["index"] = IndexParams.from_json_dict(blob["index"])
            except (TypeError, ValueError) as exc:
                raise ConfigError(str(exc)) from exc
        if "tolerances" in blob:
            kwargs["tolerances"] = Tolerances.from_dict(blob["tolerances"])
        if "grids" in blob:
            kwargs["grids"] = GridSettings.from_dict(blob["grids"])
        if "seed" in blob:
            kwargs["seed"] = int(blob["seed"])
        if "out_dir" in blob:
            kwargs["out_dir"] = str(blob["out_dir"])
        if "delta_list" in blob:
            kwargs["delta_list"] = tuple(float(v) for v in blob["delta_list"])
        cfg = cls(**kwargs)
        violations = check_admissible(cfg.index)
        if violations:
            raise ConfigError("inadmissible index parameters: " + "; ".join(violations))
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                blob = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(blob, dict):
            raise ConfigError("config root must be a JSON object")
        return cls.from_dict(blob)

    def to_dict(self) -> dict:
        return {
            "index": self.index.to_json_dict(),
            "tolerances": self.tolerances.to_dict(),
            "grids": self.grids.to_dict(),
            "seed": self.seed,
            "out_dir": self.out_dir,
            "delta_list": list(self.delta_list),
        }


def _reject_unknown(blob: dict, known: set, where: str) -> None:
    if not isinstance(blob, dict):
        raise ConfigError(f"{where} block must be a JSON object")
    unknown = set(blob) - known
    if unknown:
        raise ConfigError(f"unknown {where} keys: {sorted(unknown)}")
