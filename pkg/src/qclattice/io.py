"""File formats: datasets, models, run configuration, CSV tables and SVG plots.

Every file carries a format tag.  Floats are written with 17 significant
digits so that reading a file back gives bit-identical values.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .data import E0_CO, E0_LI, DataInstance, TrainingSet
from .lattice import Configuration, ConfigurationError
from .model import CircuitParams, Layer, MeasurementOperator, param_count
from .optimizers import OptimizerSettings
from .surrogate import SurrogateSpec
from .training import DEFAULT_MAX_DONORS, Tolerances, default_optimizer_settings

DATASET_FORMAT = "qclattice-dataset/1"
MODEL_FORMAT = "qclattice-model/1"
RUN_CONFIG_FORMAT = "qclattice-run/1"


class FormatError(ValueError):
    """Malformed input file; the message names the file and line."""


def fmt(x: float) -> str:
    """Shortest decimal that reads back to exactly the same double."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot serialise non-finite value {x!r}")
    return repr(x)


def _json_value(v) -> str:
    """Compact JSON with floats as ``fmt``; dict key order is kept."""
    if isinstance(v, bool) or v is None:
        return json.dumps(v)
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return json.dumps(v, ensure_ascii=False)
    if isinstance(v, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_json_value(x)}" for k, x in v.items()) + "}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_json_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialise {type(v).__name__}")


def dumps(v) -> str:
    return _json_value(v)


def _write_text(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8", newline="\n")


# datasets -------------------------------------------------------------------


def instance_record(inst: DataInstance) -> dict:
    return {
        "id": inst.id,
        "config": inst.config.to_signs(),
        "energy": float(inst.energy),
        "moments": [float(m) for m in inst.moments],
        "converged": bool(inst.converged),
        "source": inst.source,
        "provenance": inst.provenance,
    }


def instance_from_record(rec: dict) -> DataInstance:
    return DataInstance(
        id=str(rec["id"]),
        config=Configuration.parse(rec["config"]),
        energy=float(rec["energy"]),
        moments=tuple(float(m) for m in rec.get("moments", ())),
        converged=bool(rec.get("converged", True)),
        source=str(rec.get("source", "import")),
        provenance=str(rec.get("provenance", "")),
    )


def format_dataset(instances: Iterable[DataInstance], n_sites: int,
                   oracle: SurrogateSpec | None = None, provenance: str = "") -> str:
    header = {"format": DATASET_FORMAT, "n_sites": n_sites,
              "oracle": oracle.to_dict() if oracle is not None else None,
              "provenance": provenance}
    lines = [dumps(header)]
    seen = set()
    for inst in instances:
        if inst.config.n_sites != n_sites:
            raise ValueError(f"instance {inst.id} has {inst.config.n_sites} sites, header says {n_sites}")
        if inst.id in seen:
            raise ValueError(f"duplicate instance id {inst.id}")
        seen.add(inst.id)
        lines.append(dumps(instance_record(inst)))
    return "\n".join(lines) + "\n"


def write_dataset(path, instances: Iterable[DataInstance], n_sites: int,
                  oracle: SurrogateSpec | None = None, provenance: str = "") -> None:
    _write_text(path, format_dataset(instances, n_sites, oracle, provenance))


@dataclass
class Dataset:
    n_sites: int
    instances: TrainingSet
    oracle: SurrogateSpec | None = None
    provenance: str = ""


def parse_dataset(text: str, name: str = "<dataset>") -> Dataset:
    lines = text.splitlines()
    if not lines:
        raise FormatError(f"{name}: empty file")

    def load(i: int):
        try:
            return json.loads(lines[i])
        except json.JSONDecodeError as exc:
            raise FormatError(f"{name}:{i + 1}: invalid JSON ({exc.msg})") from None

    header = load(0)
    if not isinstance(header, dict) or header.get("format") != DATASET_FORMAT:
        raise FormatError(f"{name}:1: expected a header with format {DATASET_FORMAT!r}")
    try:
        n = int(header["n_sites"])
        oracle = SurrogateSpec.from_dict(header["oracle"]) if header.get("oracle") else None
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{name}:1: bad header ({exc})") from None
    ts = TrainingSet()
    for i in range(1, len(lines)):
        if not lines[i].strip():
            continue
        rec = load(i)
        try:
            inst = instance_from_record(rec)
        except (KeyError, TypeError, ValueError, ConfigurationError) as exc:
            raise FormatError(f"{name}:{i + 1}: bad record ({exc})") from None
        if inst.config.n_sites != n:
            raise FormatError(f"{name}:{i + 1}: {inst.config.n_sites} sites, header says {n}")
        try:
            ts.add(inst)
        except ValueError as exc:
            raise FormatError(f"{name}:{i + 1}: {exc}") from None
    return Dataset(n, ts, oracle, str(header.get("provenance", "")))


def read_dataset(path) -> Dataset:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"{path}: {exc.strerror}") from None
    return parse_dataset(text, str(path))


# models ---------------------------------------------------------------------


def format_model(p: CircuitParams, m: MeasurementOperator | None = None) -> str:
    m = m or MeasurementOperator.default(p.n_sites)
    doc = {
        "format": MODEL_FORMAT,
        "n_sites": p.n_sites,
        "measurement": m.ops,
        "layers": [
            {"theta": layer.theta, "theta_zz": layer.theta_zz, "phi": layer.phi}
            for layer in p.layers
        ],
        "scale": p.scale,
    }
    return dumps(doc) + "\n"


def parse_model(text: str, name: str = "<model>") -> tuple[CircuitParams, MeasurementOperator]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{name}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise FormatError(f"{name}: expected format {MODEL_FORMAT!r}")
    try:
        n = int(doc["n_sites"])
        layers = tuple(
            Layer(np.array(layer["theta"], dtype=np.float64),
                  np.array(layer["theta_zz"], dtype=np.float64),
                  np.array(layer["phi"], dtype=np.float64))
            for layer in doc["layers"]
        )
        p = CircuitParams(n, layers, float(doc["scale"]))
        x = p.to_vector()
        if len(layers) != 2 or x.size != param_count(n):
            raise ValueError(f"{x.size} numbers for {n} sites")
        p = CircuitParams.from_vector(x, n)
        m = MeasurementOperator.parse(doc["measurement"])
        if len(m) != n:
            raise ValueError("measurement operator length does not match n_sites")
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{name}: bad model ({exc})") from None
    return p, m


def write_model(path, p: CircuitParams, m: MeasurementOperator | None = None) -> None:
    _write_text(path, format_model(p, m))


def read_model(path) -> tuple[CircuitParams, MeasurementOperator]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"{path}: {exc.strerror}") from None
    return parse_model(text, str(path))


# run configuration ----------------------------------------------------------


@dataclass
class RunConfig:
    """Everything ``train`` needs besides the dataset."""

    seed: int = 0
    tolerances: Tolerances = field(default_factory=Tolerances)
    optimizer: OptimizerSettings = field(default_factory=default_optimizer_settings)
    n_starts: int = 1
    max_donors: int | None = DEFAULT_MAX_DONORS
    e0_li: float = E0_LI
    e0_co: float = E0_CO
    measurement: str | None = None
    oracle: SurrogateSpec | None = None
    test_dataset: str | None = None

    def to_dict(self) -> dict:
        return {
            "format": RUN_CONFIG_FORMAT,
            "seed": self.seed,
            "tolerances": asdict(self.tolerances),
            "optimizer": asdict(self.optimizer),
            "n_starts": self.n_starts,
            "max_donors": self.max_donors,
            "e0_li": self.e0_li,
            "e0_co": self.e0_co,
            "measurement": self.measurement,
            "oracle": self.oracle.to_dict() if self.oracle else None,
            "test_dataset": self.test_dataset,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        fmt_tag = d.pop("format", RUN_CONFIG_FORMAT)
        if fmt_tag != RUN_CONFIG_FORMAT:
            raise ValueError(f"expected format {RUN_CONFIG_FORMAT!r}, got {fmt_tag!r}")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown run settings: {sorted(unknown)}")
        base = cls()
        tol = {**asdict(base.tolerances), **d.pop("tolerances", {})}
        opt = {**asdict(base.optimizer), **d.pop("optimizer", {})}
        oracle = d.pop("oracle", None)
        return cls(
            tolerances=Tolerances(**tol),
            optimizer=OptimizerSettings(**opt),
            oracle=SurrogateSpec.from_dict(oracle) if oracle else None,
            **d,
        )


def read_run_config(path) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise FormatError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    try:
        return RunConfig.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_run_config(path, cfg: RunConfig) -> None:
    _write_text(path, dumps(cfg.to_dict()) + "\n")


# CSV ------------------------------------------------------------------------


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    return str(v)


def format_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    _write_text(path, format_csv(header, rows))


def read_csv(path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


# SVG ------------------------------------------------------------------------

_W, _H, _PAD = 480, 360, 50


def _scale(lo: float, hi: float, a: float, b: float):
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    return lambda v: a + (v - lo) * (b - a) / (hi - lo)


def _svg(body: list[str], title: str, xlabel: str, ylabel: str, xr, yr) -> str:
    head = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD}" y2="{_H - _PAD}" stroke="black"/>',
        f'<line x1="{_PAD}" y1="{_PAD}" x2="{_PAD}" y2="{_H - _PAD}" stroke="black"/>',
        f'<text x="{_W / 2:.1f}" y="20" text-anchor="middle" font-size="14">{_esc(title)}</text>',
        f'<text x="{_W / 2:.1f}" y="{_H - 10}" text-anchor="middle" font-size="12">{_esc(xlabel)}</text>',
        f'<text x="15" y="{_H / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 15 {_H / 2:.1f})">{_esc(ylabel)}</text>',
        f'<text x="{_PAD}" y="{_H - _PAD + 15}" font-size="10">{xr[0]:.4g}</text>',
        f'<text x="{_W - _PAD}" y="{_H - _PAD + 15}" text-anchor="end" font-size="10">{xr[1]:.4g}</text>',
        f'<text x="{_PAD - 4}" y="{_H - _PAD}" text-anchor="end" font-size="10">{yr[0]:.4g}</text>',
        f'<text x="{_PAD - 4}" y="{_PAD + 4}" text-anchor="end" font-size="10">{yr[1]:.4g}</text>',
    ]
    return "\n".join(head + body + ["</svg>"]) + "\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _range(v) -> tuple[float, float]:
    v = np.asarray(v, dtype=np.float64)
    return (float(v.min()), float(v.max())) if v.size else (0.0, 1.0)


def svg_scatter(x, y, title="", xlabel="", ylabel="", diagonal=True) -> str:
    """Scatter plot, optionally with the y = x line."""
    lo = min(_range(x)[0], _range(y)[0])
    hi = max(_range(x)[1], _range(y)[1])
    sx = _scale(lo, hi, _PAD, _W - _PAD)
    sy = _scale(lo, hi, _H - _PAD, _PAD)
    body = []
    if diagonal:
        body.append(f'<line x1="{sx(lo):.2f}" y1="{sy(lo):.2f}" x2="{sx(hi):.2f}" y2="{sy(hi):.2f}" '
                    'stroke="grey" stroke-dasharray="4 3"/>')
    body += [f'<circle cx="{sx(a):.2f}" cy="{sy(b):.2f}" r="3" fill="steelblue"/>' for a, b in zip(x, y)]
    return _svg(body, title, xlabel, ylabel, (lo, hi), (lo, hi))


def svg_line(x, y, title="", xlabel="", ylabel="") -> str:
    xr, yr = _range(x), _range(y)
    sx = _scale(*xr, _PAD, _W - _PAD)
    sy = _scale(*yr, _H - _PAD, _PAD)
    pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
    body = [f'<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="2"/>']
    body += [f'<circle cx="{sx(a):.2f}" cy="{sy(b):.2f}" r="3" fill="steelblue"/>' for a, b in zip(x, y)]
    return _svg(body, title, xlabel, ylabel, xr, yr)


def svg_histogram(labels: Sequence[str], values: Sequence[float], title="", xlabel="", ylabel="") -> str:
    """Bar chart with one bar per label."""
    n = max(len(values), 1)
    top = max([float(v) for v in values] + [1e-300])
    sy = _scale(0.0, top, _H - _PAD, _PAD)
    width = (_W - 2 * _PAD) / n
    body = []
    for i, (lab, v) in enumerate(zip(labels, values)):
        x0 = _PAD + i * width
        body.append(f'<rect x="{x0 + 0.1 * width:.2f}" y="{sy(v):.2f}" width="{0.8 * width:.2f}" '
                    f'height="{sy(0.0) - sy(v):.2f}" fill="steelblue"/>')
        body.append(f'<text x="{x0 + width / 2:.2f}" y="{_H - _PAD + 28}" text-anchor="middle" '
                    f'font-size="10">{_esc(str(lab))}</text>')
    return _svg(body, title, xlabel, ylabel, (0.0, float(n)), (0.0, top))
