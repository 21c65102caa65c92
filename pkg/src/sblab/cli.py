"""Command-line front end: ``sblab <subcommand> --config run.json``.

Each run writes one result file (``<subcommand>.csv`` or ``.json``) whose
content depends only on the config, plus ``<subcommand>.manifest.json`` with
timestamps and library versions.  Exit codes: 0 ok, 2 config error, 3
numerical failure; errors are reported as one JSON object on stderr.
"""

import argparse
import csv
from datetime import datetime, timezone
import hashlib
import io
import json
import os
import sys
import tempfile
import time

import jsonschema
import numpy as np
import scipy
from threadpoolctl import threadpool_limits

from . import __version__
from .errors import NumericalError, SBLabError, ValidationError
from .fockoracle import (
    DYNAMIC,
    STATIC,
    Profile,
    assemble,
    build_grid,
    eigendecompose,
    ground_state,
    revival_horizon,
    survival_oracle,
    tmatrix_oracle,
)
from .levelshift import level_shift, resonance
from .model import ModelParams
from .quadrature import QuadratureConfig
from .scattering import REFERENCE_SUPPORTS, WavePacket, kernel_profile, transition_lorentzian

COMMANDS = ("resonance", "survival", "tmatrix", "kernel", "groundstate", "mourre")
DEFAULT_FORMAT = {
    "resonance": "json",
    "survival": "csv",
    "tmatrix": "json",
    "kernel": "csv",
    "groundstate": "csv",
    "mourre": "json",
}
DEFAULT_PROFILE = {"groundstate": STATIC, "mourre": DYNAMIC}
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

_number = {"type": "number"}
_positive = {"type": "number", "exclusiveMinimum": 0}


def _obj(properties, required=()):
    return {
        "type": "object",
        "additionalProperties": False,
        "properties": properties,
        "required": list(required),
    }


PACKET_SCHEMA = _obj(
    {
        "type": {"const": "bump"},
        "support": {"type": "array", "items": _number, "minItems": 2, "maxItems": 2},
        "amplitude": _number,
    },
    required=("type", "support"),
)

CONFIG_SCHEMA = _obj(
    {
        "params": _obj(
            {"e0": _number, "e1": _number, "m": _number, "lambda_uv": _number,
             "g": {"type": "number", "minimum": 0}},
            required=("e1", "m", "lambda_uv"),
        ),
        "profile": {"enum": ["static", "dynamic", "custom"]},
        "custom_profile": _obj(
            {"M": {"type": "integer", "minimum": 2}, "N_max": {"type": "integer", "minimum": 1},
             "k_max": _positive},
            required=("M", "N_max", "k_max"),
        ),
        "quadrature": _obj(
            {"abs_tol": _positive, "rel_tol": _positive,
             "max_subdivisions": {"type": "integer", "minimum": 1},
             "truncation_threshold": _positive}
        ),
        "packets": {"type": "object", "additionalProperties": PACKET_SCHEMA},
        "survival": _obj(
            {"t_max": _positive, "n_times": {"type": "integer", "minimum": 2},
             "method": {"enum": ["residue", "quadrature"]}}
        ),
        "kernel": _obj(
            {"r_min": _positive, "r_max": _positive, "n": {"type": "integer", "minimum": 2}}
        ),
        "groundstate": _obj(
            {"g_values": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1}}
        ),
        "tmatrix": _obj({"eta": _positive, "gs_norm_sq": _positive}),
        "mourre": _obj(
            {"z": _number,
             "eps": {"type": "array", "items": _positive, "minItems": 1},
             "probe_M": {"type": "integer", "minimum": 2}}
        ),
    },
    required=("params",),
)


class ConfigError(SBLabError):
    def __init__(self, message, pointer=""):
        super().__init__(message)
        self.pointer = pointer


def _pointer(path):
    return "/" + "/".join(str(p) for p in path)


def validate_config(cfg):
    """Raise :class:`ConfigError` with a JSON pointer to the first offending key."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(map(str, e.absolute_path)))
    if not errors:
        return
    err = errors[0]
    path = list(err.absolute_path)
    if err.validator == "additionalProperties" and isinstance(err.instance, dict):
        allowed = set(err.schema.get("properties", {}))
        extra = sorted(set(err.instance) - allowed)
        if extra:
            path.append(extra[0])
    raise ConfigError(err.message, _pointer(path))


def config_hash(cfg):
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    validate_config(cfg)
    return cfg


def _params(cfg):
    try:
        return ModelParams.from_dict(cfg["params"])
    except ValidationError as exc:
        raise ConfigError(str(exc), "/params") from exc


def _quad(cfg):
    return QuadratureConfig.from_dict(cfg["quadrature"]) if "quadrature" in cfg else None


def _profile(cfg, override):
    name = override or cfg.get("profile")
    if name is None:
        return None
    if name == "static":
        return STATIC
    if name == "dynamic":
        return DYNAMIC
    custom = cfg.get("custom_profile")
    if custom is None:
        raise ConfigError("profile 'custom' needs a custom_profile block", "/custom_profile")
    return Profile("custom", custom["M"], custom["N_max"], float(custom["k_max"]))


def _packets(cfg):
    spec = cfg.get("packets")
    if spec is None:
        spec = {k: {"type": "bump", "support": list(v)} for k, v in REFERENCE_SUPPORTS.items()}
    out = {}
    for name in sorted(spec):
        try:
            out[name] = WavePacket.from_dict(spec[name])
        except ValidationError as exc:
            raise ConfigError(str(exc), _pointer(["packets", name])) from exc
    return out


def _oracle(params, profile):
    H = assemble(params, build_grid(profile.M, profile.k_max), profile.N_max)
    dec = eigendecompose(H)
    return H, dec


# -- subcommands: each returns (header, rows) for CSV and a dict for JSON --


def cmd_resonance(cfg, profile):
    params = _params(cfg)
    res = resonance(params, _quad(cfg))
    data = res.to_json()
    data["g"] = params.g
    data["gamma_plus0"] = [res.level_shift.gamma_plus0.real, res.level_shift.gamma_plus0.imag]
    rows = [(k, json.dumps(data[k])) for k in sorted(data)]
    return ("key", "value"), rows, data


def cmd_survival(cfg, profile):
    from .dynamics import survival_quadrature, survival_residue

    params = _params(cfg)
    opts = cfg.get("survival", {})
    res = resonance(params, _quad(cfg))
    method = opts.get("method", "residue")
    n = opts.get("n_times", 101)
    oracle = None
    if profile is not None:
        H, dec = _oracle(params, profile)
        t_end = min(opts.get("t_max", 30.0), revival_horizon(H.field, params))
    else:
        t_end = opts.get("t_max", 10.0)
    times = np.linspace(0.0, t_end, n)
    if method == "residue":
        analytic = np.atleast_1d(survival_residue(times, res))
    else:
        analytic = np.array([survival_quadrature(t, res, config=_quad(cfg)) for t in times])
    if profile is not None:
        oracle = np.array(survival_oracle(H, times, decomposition=dec).amplitudes)
    header = ("t", "analytic_re", "analytic_im", "oracle_re", "oracle_im", "abs_err")
    rows = []
    for i, t in enumerate(times):
        a = complex(analytic[i])
        if oracle is None:
            rows.append((float(t), a.real, a.imag, "", "", ""))
        else:
            o = complex(oracle[i])
            rows.append((float(t), a.real, a.imag, o.real, o.imag, abs(a - o)))
    data = {
        "method": method,
        "oracle": None if profile is None else profile.name,
        "columns": list(header),
        "rows": [list(r) for r in rows],
    }
    return header, rows, data


def cmd_tmatrix(cfg, profile):
    params = _params(cfg)
    quad = _quad(cfg)
    opts = cfg.get("tmatrix", {})
    ls = level_shift(params, quad)
    gs_norm_sq = opts.get("gs_norm_sq", 1.0)
    lam0 = params.e0 - params.g ** 2 * ls.gamma0_gs
    if profile is not None:
        H, dec = _oracle(params, profile)
        lam0, psi0 = ground_state(H, dec)
    header = ("packet", "support_a", "support_b", "tp_re", "tp_im", "oracle_re", "oracle_im", "rel_err")
    rows, out = [], {}
    for name, pk in _packets(cfg).items():
        tp = transition_lorentzian(pk, pk, ls, lam0, gs_norm_sq, params, quad)
        entry = {"support": list(pk.support), "T_P": [tp.real, tp.imag]}
        row = [name, pk.support[0], pk.support[1], tp.real, tp.imag, "", "", ""]
        if profile is not None:
            to = tmatrix_oracle(H, psi0, pk, pk, eta=opts.get("eta"), lambda0_num=lam0,
                                decomposition=dec, config=quad).value
            rel = abs(to - tp) / abs(tp) if tp != 0 else float("nan")
            entry["T_oracle"] = [to.real, to.imag]
            entry["rel_err"] = rel
            row[5:] = [to.real, to.imag, rel]
        out[name] = entry
        rows.append(tuple(row))
    data = {"lambda0": lam0, "gs_norm_sq": gs_norm_sq,
            "oracle": None if profile is None else profile.name, "packets": out}
    return header, rows, data


def cmd_kernel(cfg, profile):
    params = _params(cfg)
    opts = cfg.get("kernel", {})
    n = opts.get("n", 400)
    r_max = opts.get("r_max", 6.0)
    r_min = opts.get("r_min", r_max / n)
    if not r_min < r_max:
        raise ConfigError("kernel r_min must be below r_max", "/kernel")
    ls = level_shift(params, _quad(cfg))
    lam0 = params.e0 - params.g ** 2 * ls.gamma0_gs
    table = kernel_profile(np.linspace(r_min, r_max, n), ls, lam0, 1.0, params)
    header = ("r", "re", "im", "abs")
    rows = [tuple(float(x) for x in row) for row in table]
    data = {"lambda0": lam0, "columns": list(header), "rows": [list(r) for r in rows]}
    return header, rows, data


def cmd_groundstate(cfg, profile):
    params = _params(cfg)
    gs = cfg.get("groundstate", {}).get("g_values", [0.02, 0.04, 0.08])
    gamma0 = level_shift(params, _quad(cfg)).gamma0_gs
    grid = build_grid(profile.M, profile.k_max)
    header = ("g", "lambda0_num", "minus_g2_gamma0", "residual")
    rows = []
    for g in gs:
        H = assemble(params.with_g(g), grid, profile.N_max)
        lam, _ = ground_state(H)
        approx = -g * g * gamma0
        rows.append((float(g), lam, approx, abs(lam - approx)))
    data = {"profile": profile.name, "columns": list(header), "rows": [list(r) for r in rows]}
    return header, rows, data


def cmd_mourre(cfg, profile):
    from .mourre import mourre_constant, weighted_resolvent_probe

    params = _params(cfg)
    if profile.N_max != 1:
        raise ConfigError("mourre needs a one-boson profile (N_max = 1)", "/profile")
    opts = cfg.get("mourre", {})
    report = mourre_constant(params, build_grid(profile.M, profile.k_max), profile)
    probe_grid = build_grid(opts.get("probe_M", 400), profile.k_max)
    try:
        probe = weighted_resolvent_probe(params, probe_grid, profile, z=opts.get("z"),
                                         eps_list=opts.get("eps", [0.2, 0.1, 0.05]))
    except ValidationError as exc:
        raise ConfigError(str(exc), "/mourre") from exc
    header = ("eps", "weighted", "unweighted")
    rows = list(probe.rows())
    data = {"report": report.to_json(), "probe": probe.to_json()}
    return header, rows, data


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


def _csv_cell(x):
    if isinstance(x, float):
        return repr(x)
    return x


def render(fmt, header, rows, data, meta):
    if fmt == "json":
        payload = dict(meta)
        payload["result"] = data
        return json.dumps(payload, sort_keys=True, indent=2, allow_nan=True) + "\n"
    buf = io.StringIO()
    for key in sorted(meta):
        buf.write(f"# {key}={meta[key]}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_csv_cell(x) for x in row])
    return buf.getvalue()


def atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _threads():
    raw = os.environ.get("SBLAB_THREADS")
    if raw is None or raw == "":
        return None
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise ConfigError(f"SBLAB_THREADS must be a positive integer, got {raw!r}")
    return n


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON run configuration")
    common.add_argument("--out", default=".", help="output directory (created if missing)")
    common.add_argument("--profile", choices=["static", "dynamic"],
                        help="Fock-space oracle profile; omitted means analytic only where allowed")
    common.add_argument("--format", choices=["csv", "json"], help="result format")
    parser = argparse.ArgumentParser(prog="sblab", description="Massive spin-boson resonance toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def _fail(kind, message, code, pointer=None):
    err = {"error": kind, "message": message}
    if pointer is not None:
        err["pointer"] = pointer
    sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
    return code


def run(args):
    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    try:
        threads = _threads()
        cfg = load_config(args.config)
        profile = _profile(cfg, args.profile) or DEFAULT_PROFILE.get(args.command)
        fmt = args.format or DEFAULT_FORMAT[args.command]
        with threadpool_limits(limits=threads):
            header, rows, data = HANDLERS[args.command](cfg, profile)
    except ConfigError as exc:
        return _fail("config", str(exc), EXIT_CONFIG, exc.pointer)
    except ValidationError as exc:
        return _fail("config", str(exc), EXIT_CONFIG)
    except (NumericalError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return _fail("numeric", str(exc), EXIT_NUMERIC)
    digest = config_hash(cfg)
    meta = {
        "command": args.command,
        "config_hash": digest,
        "profile": profile.name if profile is not None else "none",
        "version": __version__,
    }
    os.makedirs(args.out, exist_ok=True)
    result_name = f"{args.command}.{fmt}"
    atomic_write(os.path.join(args.out, result_name), render(fmt, header, rows, data, meta))
    manifest = dict(meta)
    manifest.update(
        result=result_name,
        started=started.isoformat(),
        finished=datetime.now(timezone.utc).isoformat(),
        elapsed_s=time.perf_counter() - t0,
        threads=threads,
        numpy=np.__version__,
        scipy=scipy.__version__,
        python=sys.version.split()[0],
    )
    atomic_write(os.path.join(args.out, f"{args.command}.manifest.json"),
                 json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
