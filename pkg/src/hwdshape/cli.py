"""Command-line experiment driver.

Exit codes: 0 success, 2 invalid specification, 3 designer non-convergence
(artifacts written so far are kept).
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import Link, ber_upper_bound, error_floor, throughput_lower_bound
from .constellation import make_constellation, write_csv
from .design import DesignError, write_result_json, write_trace_csv
from .noise import ChannelState, DistortionProfile
from .simulator import (SCHEMES, LinkConfig, Scheme, design_scheme, ebno_to_alpha, run_link,
                        sweep, write_sweep_csv)

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED = 0, 2, 3
OUTPUT_ENV = "HWDSHAPE_OUTPUT_DIR"


class SpecError(ValueError):
    def __init__(self, errors: dict[str, str]):
        super().__init__("; ".join(f"{k}: {v}" for k, v in errors.items()))
        self.errors = errors


def parse_grid(text) -> list[float]:
    """``"0:5:50"`` (inclusive start:step:stop), ``"0,10,20"`` or a single number."""
    if isinstance(text, (int, float)):
        return [float(text)]
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    text = str(text).strip()
    if ":" in text:
        start, step, stop = (float(v) for v in text.split(":"))
        if step <= 0 or stop < start:
            raise ValueError(f"bad range {text!r}")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 12) for k in range(n)]
    return [float(v) for v in text.split(",") if v.strip()]


@dataclass
class ExperimentSpec:
    """Everything needed to reproduce one run.

    NS and GS use the ``m_u``-point set; PS and HS use the ``m_nu``-point set
    with rate floor log2(m_u).
    """

    scheme: str = "all"
    m_u: int = 8
    m_nu: int = 32
    kind: str = "QAM"
    kappa_t: float = 0.01
    kappa_r: float = 0.12
    kappa_tilde_I_ratio: float = 0.25
    rho_eta: float = 0.9
    sigma_w2: float = 1.0
    channel: str = "awgn"
    rayleigh_lambda: float = 1.0
    ebno: list[float] = field(default_factory=lambda: [30.0])
    kappa: list[float] | None = None
    trials: int = 100_000
    block_size: int = 1 << 15
    seed: int = 0
    workers: int = 1
    redesign: bool = True
    output: str | None = None

    def validate(self) -> ExperimentSpec:
        err = {}
        names = self.scheme_names()
        if not names:
            err["scheme"] = f"expected 'all' or a comma list of {SCHEMES}"
        for name, M in (("m_u", self.m_u), ("m_nu", self.m_nu)):
            if M not in (2, 4, 8, 16, 32, 64):
                err[name] = "must be one of 2, 4, 8, 16, 32, 64"
        if self.m_nu < self.m_u:
            err["m_nu"] = "must be >= m_u"
        if self.kind.upper() not in ("QAM", "PSK", "PAM"):
            err["kind"] = "must be QAM, PSK or PAM"
        if self.channel not in ("awgn", "rayleigh"):
            err["channel"] = "must be awgn or rayleigh"
        if not self.ebno or not all(math.isfinite(v) for v in self.ebno):
            err["ebno"] = "grid must be non-empty and finite"
        if self.kappa is not None and (not self.kappa or min(self.kappa) < 0):
            err["kappa"] = "grid must be non-empty and non-negative"
        if self.kappa is not None and len(self.kappa) > 1 and len(self.ebno) > 1:
            err["kappa"] = "sweep either ebno or kappa, not both"
        if self.trials < 1:
            err["trials"] = "must be >= 1"
        if self.workers < 1:
            err["workers"] = "must be >= 1"
        try:
            self.profile()
        except ValueError as exc:
            err["profile"] = str(exc)
        if err:
            raise SpecError(err)
        return self

    def scheme_names(self) -> list[str]:
        if self.scheme == "all":
            return list(SCHEMES)
        names = [s.strip() for s in self.scheme.split(",")]
        return names if all(n in SCHEMES for n in names) else []

    def profile(self) -> DistortionProfile:
        p = DistortionProfile(self.kappa_t, self.kappa_r, self.kappa_tilde_I_ratio,
                              self.rho_eta, self.sigma_w2)
        if self.kappa is not None and len(self.kappa) == 1 and self.kappa[0] != p.kappa:
            p = _profile_at(p, self.kappa[0])
        return p

    def schemes(self) -> list[Scheme]:
        small = make_constellation(self.kind, self.m_u)
        big = make_constellation(self.kind, self.m_nu)
        R = math.log2(self.m_u)
        return [Scheme(n, small if n in ("ns", "gs") else big, R) for n in self.scheme_names()]

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("output")
        d.pop("workers")  # results do not depend on the worker count
        return d

    def manifest(self) -> dict:
        params = self.to_dict()
        body = json.dumps({"parameters": params, "version": __version__}, sort_keys=True)
        return {"parameters": params, "seed": self.seed, "version": __version__,
                "hash": hashlib.sha256(body.encode()).hexdigest()[:16]}


def _profile_at(p: DistortionProfile, kappa: float) -> DistortionProfile:
    if p.kappa == 0:
        return DistortionProfile(kappa * 0.01 / 0.13, kappa * 0.12 / 0.13, p.kappa_tilde_I_ratio,
                                 p.rho_eta, p.sigma_w2)
    return p.with_kappa(kappa)


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentSpec)}


def _coerce(key: str, value):
    t = _FIELD_TYPES[key]
    if key in ("ebno", "kappa"):
        return None if value in (None, "", "none") else parse_grid(value)
    if t == "bool":
        return value if isinstance(value, bool) else str(value).lower() in ("1", "true", "yes")
    if t == "int":
        return int(value)
    if t == "float":
        return float(value)
    return None if value is None else str(value)


def spec_from_mapping(data: dict) -> ExperimentSpec:
    err, kw = {}, {}
    for k, v in data.items():
        key = k.replace("-", "_")
        if key not in _FIELD_TYPES:
            err[k] = "unknown field"
            continue
        try:
            kw[key] = _coerce(key, v)
        except (TypeError, ValueError) as exc:
            err[k] = f"cannot parse {v!r}: {exc}"
    if err:
        raise SpecError(err)
    return ExperimentSpec(**kw).validate()


def load_spec(path) -> ExperimentSpec:
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SpecError({"file": f"invalid JSON: {exc}"}) from None
    else:
        data = {}
        for n, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SpecError({f"line {n}": "expected key=value"})
            k, v = line.split("=", 1)
            data[k.strip()] = v.strip()
    return spec_from_mapping(data)


def output_dir(spec_out: str | None) -> Path:
    out = Path(spec_out or os.environ.get(OUTPUT_ENV, "results"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _link_config(spec: ExperimentSpec) -> LinkConfig:
    return LinkConfig(make_constellation(spec.kind, spec.m_u), profile=spec.profile(),
                      channel_kind=spec.channel, rayleigh_lambda=spec.rayleigh_lambda,
                      ebno_db=spec.ebno[0], trials=spec.trials, seed=spec.seed,
                      block_size=spec.block_size, workers=spec.workers)


def execute(spec: ExperimentSpec, simulate: bool = True) -> int:
    """Run the sweep described by ``spec`` and write CSV, design JSON and manifest."""
    out = output_dir(spec.output)
    manifest = spec.manifest()
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if spec.kappa is not None and len(spec.kappa) > 1:
        axis, values = "kappa", spec.kappa
    else:
        axis, values = "ebno_db", spec.ebno
    rows = sweep(_link_config(spec), axis, values, spec.schemes(), redesign=spec.redesign,
                 simulate=simulate)
    write_sweep_csv(rows, out / "sweep.csv", manifest["hash"])
    designs = [dict(axis_value=r.axis_value, **r.design.to_json()) if r.design is not None
               else dict(axis_value=r.axis_value, scheme=r.scheme, status=r.status) for r in rows]
    (out / "designs.json").write_text(json.dumps(designs, indent=2, sort_keys=True) + "\n")
    bad = [r for r in rows if r.status != "ok"]
    if bad:
        _error({"error": "non_convergence",
                "points": [dict(axis_value=r.axis_value, scheme=r.scheme, status=r.status) for r in bad]})
        return EXIT_NONCONVERGED
    return EXIT_OK


def _error(record: dict) -> None:
    print(json.dumps(record, sort_keys=True), file=sys.stderr)


# ---------------------------------------------------------------- argparse

def _add_common(p: argparse.ArgumentParser, grid: bool = False) -> None:
    p.add_argument("--m-u", type=int, default=8, help="order carrying the target rate")
    p.add_argument("--m-nu", type=int, default=None, help="order of the shaped set (default 4*m_u)")
    p.add_argument("--kind", default="QAM")
    p.add_argument("--ebno", default="30", help="EbNo in dB" + (", grid a:step:b or list" if grid else ""))
    p.add_argument("--alpha", type=float, default=None, help="channel gain alpha (overrides --ebno)")
    p.add_argument("--kappa", default=None, help="total distortion level" + (" (grid allowed)" if grid else ""))
    p.add_argument("--kappa-t", type=float, default=0.01)
    p.add_argument("--kappa-r", type=float, default=0.12)
    p.add_argument("--kappa-tilde-i-ratio", type=float, default=0.25)
    p.add_argument("--rho-eta", type=float, default=0.9)
    p.add_argument("--sigma-w2", type=float, default=1.0)
    p.add_argument("--out", default=None, help=f"output directory (default ${OUTPUT_ENV} or ./results)")


def _spec_from_args(a, scheme: str) -> ExperimentSpec:
    m_nu = a.m_nu if a.m_nu is not None else min(4 * a.m_u, 64)
    data = dict(scheme=scheme, m_u=a.m_u, m_nu=m_nu, kind=a.kind, ebno=a.ebno, kappa=a.kappa,
                kappa_t=a.kappa_t, kappa_r=a.kappa_r, kappa_tilde_I_ratio=a.kappa_tilde_i_ratio,
                rho_eta=a.rho_eta, sigma_w2=a.sigma_w2, output=a.out)
    for k in ("trials", "seed", "workers", "channel", "rayleigh_lambda", "block_size"):
        if getattr(a, k, None) is not None:
            data[k] = getattr(a, k)
    if getattr(a, "no_redesign", False):
        data["redesign"] = False
    return spec_from_mapping(data)


def _point(spec: ExperimentSpec, a, scheme_name: str):
    sch = next(s for s in spec.schemes() if s.name == scheme_name)
    prof = spec.profile()
    alpha = a.alpha if a.alpha is not None else ebno_to_alpha(spec.ebno[0], sch.rate_floor, prof.sigma_w2)
    return sch, prof, Link.from_profile(prof, ChannelState(1.0, alpha))


def _cmd_design(a, name: str) -> int:
    spec = _spec_from_args(a, name)
    sch, prof, link = _point(spec, a, name)
    r = design_scheme(sch, link)
    out = output_dir(spec.output)
    write_result_json(r, out / f"design_{name}.json")
    write_trace_csv(r, out / f"design_{name}_trace.csv")
    write_csv(sch.constellation.with_priors(r.priors), out / f"design_{name}_constellation.csv")
    print(json.dumps(r.to_json(), sort_keys=True))
    return EXIT_OK if r.converged else EXIT_NONCONVERGED


def _cmd_bound(a) -> int:
    spec = _spec_from_args(a, a.scheme)
    sch, prof, link = _point(spec, a, a.scheme)
    r = design_scheme(sch, link)
    c = sch.constellation.with_priors(r.priors)
    print(json.dumps({"scheme": a.scheme, "alpha": link.alpha,
                      "ber_bound": ber_upper_bound(c, link, r.shaping),
                      "throughput_bound": throughput_lower_bound(c, link, r.shaping)}, sort_keys=True))
    return EXIT_OK


def _cmd_floor(a) -> int:
    spec = _spec_from_args(a, a.scheme)
    sch, prof, link = _point(spec, a, a.scheme)
    r = design_scheme(sch, link)
    c = sch.constellation.with_priors(r.priors)
    print(json.dumps({"scheme": a.scheme, "floor": error_floor(c, prof, 1.0, r.shaping)}, sort_keys=True))
    return EXIT_OK


def _cmd_simulate(a) -> int:
    spec = _spec_from_args(a, a.scheme)
    sch, prof, link = _point(spec, a, a.scheme)
    r = design_scheme(sch, link)
    ebno_db = 10 * math.log10(link.alpha / (sch.rate_floor * prof.sigma_w2))
    cfg = dataclasses.replace(_link_config(spec), constellation=sch.constellation.with_priors(r.priors),
                              shaping=r.shaping, rate_for_scaling=sch.rate_floor, ebno_db=ebno_db)
    res = run_link(cfg)
    print(json.dumps(dataclasses.asdict(res), sort_keys=True))
    return EXIT_OK


def _cmd_sweep(a) -> int:
    return execute(_spec_from_args(a, a.scheme), simulate=not a.bounds_only)


def _cmd_run(a) -> int:
    spec = load_spec(a.spec)
    if a.out:
        spec.output = a.out
    return execute(spec, simulate=not a.bounds_only)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hwdshape", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("ps", "gs", "hs"):
        p = sub.add_parser(f"design-{name}", help=f"{name.upper()} design at one operating point")
        _add_common(p)
        p.set_defaults(func=lambda a, n=name: _cmd_design(a, n))
    for cmd, fn, hlp in (("bound", _cmd_bound, "BER bound and throughput bound"),
                         ("floor", _cmd_floor, "high-SNR error floor"),
                         ("simulate", _cmd_simulate, "Monte-Carlo BER at one point")):
        p = sub.add_parser(cmd, help=hlp)
        _add_common(p)
        p.add_argument("--scheme", choices=SCHEMES, default="ns")
        if cmd == "simulate":
            p.add_argument("--trials", type=int, default=100_000)
            p.add_argument("--seed", type=int, default=0)
            p.add_argument("--workers", type=int, default=1)
        p.set_defaults(func=fn)
    p = sub.add_parser("sweep", help="design and simulate over an EbNo or kappa grid")
    _add_common(p, grid=True)
    p.add_argument("--scheme", default="all", help="all or a comma list of ns,gs,ps,hs")
    p.add_argument("--channel", choices=("awgn", "rayleigh"), default="awgn")
    p.add_argument("--rayleigh-lambda", type=float, default=None)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--block-size", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-redesign", action="store_true", help="reuse the first grid point's designs")
    p.add_argument("--bounds-only", action="store_true", help="skip Monte-Carlo simulation")
    p.set_defaults(func=_cmd_sweep)
    p = sub.add_parser("run", help="execute a key=value or JSON experiment file")
    p.add_argument("spec")
    p.add_argument("--out", default=None)
    p.add_argument("--bounds-only", action="store_true")
    p.set_defaults(func=_cmd_run)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SpecError as exc:
        _error({"error": "invalid_spec", "fields": exc.errors})
        return EXIT_INVALID
    except FileNotFoundError as exc:
        _error({"error": "invalid_spec", "fields": {"file": str(exc)}})
        return EXIT_INVALID
    except DesignError as exc:
        _error({"error": "design_failed", "message": str(exc)})
        return EXIT_NONCONVERGED


if __name__ == "__main__":
    sys.exit(main())
