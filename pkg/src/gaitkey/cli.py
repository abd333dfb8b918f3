"""Command-line front end and the binary helper-data container.

Helper file layout (all integers little-endian)::

    magic "IECO" | u16 version | u8 phi | u16 gamma | u16 n | u16 k
    u64 rp_seed | u32 N | u32 K | u32 count | count * u32 reliable index
    n locked points | key locker            (each: 16B nonce, u32 bits, packed ct)
    u32 CRC-32 of everything above

Exit codes: 0 success, 1 reject, 2 input error, 3 corrupt helper,
4 template dimension mismatch.
"""

from __future__ import annotations

import argparse
import json
import secrets
import struct
import sys
import zlib
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import evaluation as ev
from .cohort import CALIBRATED, CohortModel, omega_distances
from .gf_bch import bch_construct
from .ieco import HELPER_VERSION, HelperData, eco_generate, ieco_generate, ieco_reproduce
from .locker import DEFAULT_GAMMA, LockedPoint, pack_bits
from .template import SymbolString, enroll_string, reproduce_string

MAGIC = b"IECO"
_HEADER = struct.Struct("<4sHBHHH")
_PIPELINE = struct.Struct("<QIII")
_CRC = struct.Struct("<I")

EXIT_OK = 0
EXIT_REJECT = 1
EXIT_INPUT = 2
EXIT_CORRUPT = 3
EXIT_DIMENSION = 4


class HelperFormatError(ValueError):
    """Helper file fails its checksum, is truncated, or has an unknown layout."""


class InputError(ValueError):
    pass


class DimensionError(ValueError):
    pass


# -- container -----------------------------------------------------------------

def serialize_helper(h: HelperData) -> bytes:
    parts = [
        _HEADER.pack(MAGIC, h.version, h.phi, h.gamma, h.n, h.k),
        _PIPELINE.pack(h.rp_seed, h.N, h.K, len(h.reliable_indices)),
        struct.pack(f"<{len(h.reliable_indices)}I", *h.reliable_indices),
    ]
    parts.extend(p.to_bytes() for p in h.points)
    parts.append(h.key_locker.to_bytes())
    body = b"".join(parts)
    return body + _CRC.pack(zlib.crc32(body))


def parse_helper(buf: bytes) -> HelperData:
    if len(buf) < _HEADER.size + _PIPELINE.size + _CRC.size:
        raise HelperFormatError("helper file is truncated")
    body, (crc,) = buf[: -_CRC.size], _CRC.unpack(buf[-_CRC.size :])
    if zlib.crc32(body) != crc:
        raise HelperFormatError("helper file checksum mismatch")
    magic, version, phi, gamma, n, k = _HEADER.unpack_from(body, 0)
    if magic != MAGIC:
        raise HelperFormatError(f"bad magic {magic!r}")
    if version != HELPER_VERSION:
        raise HelperFormatError(f"unsupported helper version {version}")
    off = _HEADER.size
    rp_seed, N, K, count = _PIPELINE.unpack_from(body, off)
    off += _PIPELINE.size
    try:
        indices = struct.unpack_from(f"<{count}I", body, off)
        off += 4 * count
        points = []
        for _ in range(n):
            p, off = LockedPoint.from_bytes(body, off)
            points.append(p)
        key_locker, off = LockedPoint.from_bytes(body, off)
    except (struct.error, ValueError) as exc:
        raise HelperFormatError(str(exc)) from exc
    if off != len(body):
        raise HelperFormatError(f"{len(body) - off} trailing bytes after key locker")
    try:
        return HelperData(
            points=tuple(points),
            key_locker=key_locker,
            n=n,
            k=k,
            phi=phi,
            gamma=gamma,
            rp_seed=rp_seed,
            N=N,
            K=K,
            reliable_indices=tuple(indices),
            version=version,
        )
    except ValueError as exc:
        raise HelperFormatError(str(exc)) from exc


def read_helper(path) -> HelperData:
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read helper file: {exc}") from exc
    return parse_helper(buf)


def read_templates(path, expect_N: int | None = None) -> np.ndarray:
    """CSV, one template per row."""
    try:
        T = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read templates from {path}: {exc}") from exc
    if T.size == 0:
        raise InputError("template file is empty")
    if not np.all(np.isfinite(T)):
        raise InputError("templates contain non-finite values")
    if expect_N is not None and T.shape[1] != expect_N:
        raise DimensionError(f"templates have dimension {T.shape[1]}, helper expects N={expect_N}")
    return T


def key_hex(bits) -> str:
    return pack_bits(bits).hex()


# -- commands ----------------------------------------------------------------------

def _rng(seed):
    return None if seed is None else np.random.default_rng(seed)


def _emit(text: str, out) -> None:
    if out is None:
        print(text)
    else:
        Path(out).write_text(text + "\n")


def cmd_enroll(args) -> int:
    T = read_templates(args.templates)
    if T.shape[0] < 2:
        raise InputError("enrollment needs at least 2 templates")
    if args.phi * args.n > T.shape[1] - 1:
        raise DimensionError(f"phi*n = {args.phi * args.n} exceeds K = {T.shape[1] - 1} for N = {T.shape[1]}")
    code = _code(args.n, args.k)
    rng = _rng(args.seed)
    rp_seed = secrets.randbits(64) if rng is None else int(rng.integers(0, 2**63))
    s, meta = enroll_string(T, rp_seed, args.phi, args.n)
    kappa, helper = ieco_generate(s, code, args.gamma, rng, meta=meta)
    Path(args.helper).write_bytes(serialize_helper(helper))
    _emit(key_hex(kappa), args.out)
    return EXIT_OK


def cmd_reproduce(args) -> int:
    helper = read_helper(args.helper)
    T = read_templates(args.templates, expect_N=helper.N)
    s_prime = reproduce_string(T, helper.meta, helper.phi)
    kappa = ieco_reproduce(s_prime, helper)
    if kappa is None:
        print("rejected", file=sys.stderr)
        return EXIT_REJECT
    _emit(key_hex(kappa), args.out)
    return EXIT_OK


def _code(n: int, k: int):
    try:
        return bch_construct(n, k)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _tsv(header, rows) -> str:
    lines = ["\t".join(header)]
    lines += ["\t".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _write_reports(out, name: str, summary: dict, tables: dict[str, str]) -> None:
    """JSON summary plus TSV tables into directory ``out`` (stdout if None)."""
    text = json.dumps(summary, indent=2, sort_keys=True)
    if out is None:
        print(text)
        for tname, body in tables.items():
            print(f"# {tname}")
            print(body, end="")
        return
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    (d / f"{name}.json").write_text(text + "\n")
    for tname, body in tables.items():
        (d / f"{tname}.tsv").write_text(body)


def _seed(args) -> int:
    return secrets.randbits(63) if args.seed is None else args.seed


def _cohort(args) -> CohortModel:
    model = replace(CALIBRATED, num_users=args.users, seed=_seed(args))
    if args.intra_sigma is not None:
        model = replace(model, intra_sigma=args.intra_sigma)
    if args.zeta is not None:
        model = replace(model, zeta=args.zeta)
    if args.eta is not None:
        model = replace(model, eta=args.eta)
    return model


def cmd_simulate(args) -> int:
    if not args.bit_level and (args.zeta is not None or args.eta is not None):
        raise InputError("--zeta/--eta drive bit-level cohorts; add --bit-level")
    if args.bit_level and args.intra_sigma is not None:
        raise InputError("--intra-sigma has no effect with --bit-level")
    if args.users < 2:
        raise InputError("--users must be >= 2")
    if args.trials < 1 or args.impostor_trials < 1:
        raise InputError("--trials and --impostor-trials must be >= 1")
    try:
        model = _cohort(args)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    for k in args.k:
        _code(args.n, k)
    rows = ev.simulate_far_frr(
        model,
        ks=tuple(args.k),
        n=args.n,
        phi=args.phi,
        genuine_per_user=args.trials,
        impostor_per_user=args.impostor_trials,
        gamma=args.gamma,
        bit_level=args.bit_level,
        enrollments_per_user=args.enrollments,
        workers=args.workers,
    )
    summary = {
        "cohort": asdict(model),
        "n": args.n,
        "phi": args.phi,
        "gamma": args.gamma,
        "enrollments_per_user": args.enrollments,
        "rows": [asdict(r) for r in rows],
    }
    header = ["n", "k", "t", "FAR%", "FRR%", "genuine", "impostor"]
    table = _tsv(header, [(args.n, r.k, r.t, float(r.far), float(r.frr), r.genuine_attempts, r.impostor_attempts) for r in rows])
    _write_reports(args.out, "simulate", _jsonable(summary), {"far_frr": table})
    return EXIT_OK


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _analyze_formulas(args, rng):
    code = _code(args.n, args.k)
    zetas = args.zeta_grid
    etas = args.eta_grid
    phis = args.phi_grid
    intra = [ev.analyze_intra(z, p, code, args.trials, rng) for z in zetas for p in phis]
    inter = [ev.analyze_inter(e, p, code, args.trials, rng) for e in etas for p in phis]
    limit = {str(e): ev.verify_limit_behavior(e) for e in etas}
    cols = ["param", "phi", "analytic", "empirical", "sigma", "within"]
    tab = lambda rs: _tsv(cols, [(r.param, r.phi, r.analytic, r.empirical, r.sigma, int(r.within())) for r in rs])
    summary = {
        "trials": args.trials,
        "intra": [asdict(r) for r in intra],
        "inter": [asdict(r) for r in inter],
        "limit": limit,
    }
    limit_rows = [(e, p, v) for e, vals in limit.items() for p, v in vals]
    return summary, {
        "eq_intra": tab(intra),
        "eq_inter": tab(inter),
        "limit": _tsv(["eta", "phi", "p_match"], limit_rows),
    }


def _analyze_unlinkability(args, rng):
    model = _cohort(args)
    mated, nonmated, _ = ev.unlinkability_scores(model, seeds_per_user=args.trials, phi=args.phi, n=args.n)
    rep = ev.unlinkability(mated, nonmated)
    summary = {"D_sys": rep.global_score, "mated": int(mated.size), "nonmated": int(nonmated.size)}
    rows = zip(rep.bin_centers.tolist(), rep.local_scores.tolist(), rep.mated_density.tolist(), rep.nonmated_density.tolist())
    return summary, {"unlinkability": _tsv(["score", "D", "mated_density", "nonmated_density"], rows)}


def _analyze_histograms(args, rng):
    model = _cohort(args)
    code = _code(args.n, args.k)
    omega_intra, omega_inter = omega_distances(model, probes=args.trials, phi=args.phi, n=args.n)
    cw_intra, cw_inter = ev.codeword_distances(model, code, phi=args.phi, probes=args.trials, gamma=args.gamma)
    tables, summary = {}, {}
    for name, (a, b) in {"omega": (omega_intra, omega_inter), "codeword": (cw_intra, cw_inter)}.items():
        edges = np.linspace(0.0, 1.0, 51)
        h_a = np.histogram(a, bins=edges)[0]
        h_b = np.histogram(b, bins=edges)[0]
        centers = 0.5 * (edges[1:] + edges[:-1])
        tables[f"hist_{name}"] = _tsv(["distance", "intra", "inter"], zip(centers.tolist(), h_a.tolist(), h_b.tolist()))
        summary[name] = {
            "intra_mean": float(np.mean(a)),
            "intra_std": float(np.std(a)),
            "inter_mean": float(np.mean(b)),
            "inter_std": float(np.std(b)),
        }
    return summary, tables


def _analyze_attack(args, rng):
    code = _code(args.n, args.k)
    rows = []
    for trial in range(args.trials):
        s_syms = rng.integers(0, 1 << args.phi, code.n)
        s = SymbolString(s_syms, args.phi)
        m, points = eco_generate(s, code, args.gamma, rng)
        eco = ev.attack_eco_with_key(m, points, args.phi, code, args.gamma)
        eco_correct = sum(int(s_syms[i] == v) for i, v in eco.recovered.items())
        kappa, helper = ieco_generate(s, code, args.gamma, rng)
        ieco = ev.attack_ieco_with_key(kappa, helper, args.budget, rng, code)
        ieco_correct = sum(int(s_syms[i] == v) for i, v in ieco.claimed.items())
        rows.append(
            (trial, len(eco.recovered), eco_correct, eco.unlock_calls, ieco.guesses, ieco.successes, len(ieco.claimed), ieco_correct)
        )
    header = ["trial", "eco_recovered", "eco_correct", "eco_unlock_calls", "ieco_guesses", "ieco_successes", "ieco_claimed", "ieco_claims_correct"]
    arr = np.array([r[1:] for r in rows], dtype=np.float64)
    summary = {
        "n": code.n,
        "k": code.k,
        "phi": args.phi,
        "trials": args.trials,
        "budget": args.budget,
        "eco_recovered_fraction": float(arr[:, 1].sum() / (code.n * len(rows))),
        "ieco_successes": int(arr[:, 4].sum()),
        "ieco_claim_accuracy": float(arr[:, 6].sum() / max(arr[:, 5].sum(), 1)),
        "chance_accuracy": 1.0 / ((1 << args.phi) - 1),
    }
    return summary, {"attack": _tsv(header, rows)}


ANALYZERS = {
    "formulas": _analyze_formulas,
    "unlinkability": _analyze_unlinkability,
    "histograms": _analyze_histograms,
    "attack": _analyze_attack,
}


def cmd_analyze(args) -> int:
    seed = _seed(args)
    args.seed = seed
    try:
        summary, tables = ANALYZERS[args.mode](args, np.random.default_rng(seed))
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    summary = {"mode": args.mode, "seed": seed, **summary}
    _write_reports(args.out, args.mode, _jsonable(summary), tables)
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------

def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gaitkey", description="IECO key binding from gait templates")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, n=255, k=131):
        sp.add_argument("--phi", type=int, default=2, help="symbol size in bits")
        sp.add_argument("--n", type=int, default=n, help="BCH code length")
        sp.add_argument("--gamma", type=int, default=DEFAULT_GAMMA, help="locker security parameter")
        sp.add_argument("--seed", type=int, default=None, help="seed for reproducible runs (default: OS entropy)")
        return sp

    e = common(sub.add_parser("enroll", help="bind a fresh key to enrollment templates"))
    e.add_argument("--k", type=int, default=131)
    e.add_argument("--templates", required=True, help="CSV, one template per row")
    e.add_argument("--helper", required=True, help="helper file to write")
    e.add_argument("--out", default=None, help="write the key (hex) here instead of stdout")
    e.set_defaults(func=cmd_enroll)

    r = sub.add_parser("reproduce", help="recover the key from probe templates")
    r.add_argument("--templates", required=True)
    r.add_argument("--helper", required=True)
    r.add_argument("--out", default=None)
    r.set_defaults(func=cmd_reproduce)

    s = common(sub.add_parser("simulate", help="FAR/FRR over a synthetic cohort"))
    s.add_argument("--k", type=_int_list, default=[115, 123, 131, 139, 147], help="comma-separated code dimensions")
    s.add_argument("--users", type=int, default=20)
    s.add_argument("--trials", type=int, default=40, help="genuine attempts per user")
    s.add_argument("--impostor-trials", type=int, default=400, help="impostor attempts per user")
    s.add_argument("--enrollments", type=int, default=1, help="enrollments per user and code")
    s.add_argument("--bit-level", action="store_true", help="draw strings from --zeta/--eta instead of templates")
    s.add_argument("--zeta", type=float, default=None)
    s.add_argument("--eta", type=float, default=None)
    s.add_argument("--intra-sigma", type=float, default=None)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", default=None, help="report directory (default: stdout)")
    s.set_defaults(func=cmd_simulate)

    a = common(sub.add_parser("analyze", help="formula checks, unlinkability, histograms, attacks"))
    a.add_argument("mode", choices=sorted(ANALYZERS))
    a.add_argument("--k", type=int, default=131)
    a.add_argument("--trials", type=int, default=None, help="mode-specific repetition count")
    a.add_argument("--users", type=int, default=20)
    a.add_argument("--zeta", type=float, default=None)
    a.add_argument("--eta", type=float, default=None)
    a.add_argument("--intra-sigma", type=float, default=None)
    a.add_argument("--zeta-grid", type=_float_list, default=[0.01, 0.05, 0.1])
    a.add_argument("--eta-grid", type=_float_list, default=[0.5, 0.7, 0.9])
    a.add_argument("--phi-grid", type=_int_list, default=[1, 2, 3, 4])
    a.add_argument("--budget", type=int, default=1000, help="IECO attack guesses per enrollment")
    a.add_argument("--out", default=None, help="report directory (default: stdout)")
    a.set_defaults(func=cmd_analyze)
    return p


_DEFAULT_TRIALS = {"formulas": 100_000, "unlinkability": 100, "histograms": 10, "attack": 5}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "mode", None) and args.trials is None:
        args.trials = _DEFAULT_TRIALS[args.mode]
    try:
        return args.func(args)
    except HelperFormatError as exc:
        print(f"corrupt helper file: {exc}", file=sys.stderr)
        return EXIT_CORRUPT
    except DimensionError as exc:
        print(f"dimension mismatch: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    except (InputError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
