"""Command-line interface: ``knnanomaly <command> [options]``.

Every command reads its inputs, calls the library with the resolved options
and writes its outputs plus a ``*.manifest.json`` recording the full
configuration, input digests and package version. Options may also come from
a ``--config`` file of ``key = value`` lines; flags given on the command line
win. Exit status is 0 on success, 2 on a usage error and 1 when the data or
the numerics fail.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .density import SupportBounds, boundary_correct, estimate_density
from .divergence import GaussianSummary, bhattacharyya, kl_divergence, windowed_bhattacharyya
from .detection import detect_series, detect_windows, scan_statistic, threshold_from_training
from .entropy import beta_entropy_closed_form, gaussian_entropy_closed_form
from .evaluation import convergence_sweep, qq_against_normal, roc_curve
from .ingest import (
    MeasurementMatrix,
    align_ground_truth,
    make_rssi_fixture,
    parse_raw,
    read_truth,
    remove_local_means,
    synchronize,
    write_raw,
    write_truth,
)
from .io import OutputSet, density_csv, density_sidecar, file_digest, points_csv, read_column, read_points
from .pipeline import (
    DEFAULT_GRID_SIZE,
    density_on_common_grid,
    entropy_pipeline,
    normalization_constant,
    split_density,
    temporal_detection,
)
from .synthetic import (
    ANOMALY_KINDS,
    AnomalySpec,
    MixtureSpec,
    gen_beta,
    gen_gaussian,
    gen_mixture,
    inject_anomalies,
    mixture_entropy,
)

__all__ = ["RunConfig", "parse_config_text", "format_config_text", "build_parser", "main"]

# options naming input files; checked for existence before running
INPUT_OPTIONS = ("data", "reference", "eval", "normal", "test", "matrix", "scores", "truth", "values", "raw")


@dataclass
class RunConfig:
    """Options shared by every command."""

    seed: int = 0
    k: Optional[int] = None
    split_fraction: float = 0.5
    alpha: float = 0.05
    window_len: Optional[int] = None
    grid_size: Optional[int] = None
    output_dir: str = "."

    def to_text(self) -> str:
        return format_config_text(asdict(self))

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        values = parse_config_text(text)
        names = {f.name for f in fields(cls)}
        unknown = set(values) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**values)


def _parse_value(raw: str):
    raw = raw.strip()
    if raw.lower() in ("none", "null", ""):
        return None
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        pass
    if raw.lower() in ("true", "false"):
        return raw.lower() == "true"
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "'\"":
        return raw[1:-1]
    return raw


def parse_config_text(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment, values are JSON when they parse."""
    out = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line or (line.startswith("[") and line.endswith("]")):
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ValueError(f"config line {line_no}: expected key = value")
        out[key.strip().replace("-", "_")] = _parse_value(value)
    return out


def format_config_text(values: dict) -> str:
    lines = []
    for key in sorted(values):
        v = values[key]
        lines.append(f"{key} = {'none' if v is None else json.dumps(v)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- helpers


class DataError(Exception):
    """Input data or numerics prevented the command from completing."""


def _bounds(args, dim: int) -> Optional[SupportBounds]:
    if getattr(args, "bounds", None) is None:
        return None
    lo, hi = args.bounds
    return SupportBounds.box(lo, hi, dim)


def _output(args, default_name: str) -> Path:
    path = Path(args.output) if args.output else Path(default_name)
    return path if path.is_absolute() else Path(args.output_dir) / path


def _sibling(path: Path, suffix: str) -> Path:
    return path.with_name(path.stem + suffix)


def _resolved(args) -> dict:
    out = {}
    for key, value in vars(args).items():
        if key in ("func", "config"):
            continue
        out[key] = str(value) if isinstance(value, Path) else value
    return out


def _finish(args, outputs: OutputSet, main_path: Path, result=None, echo=False) -> int:
    config = _resolved(args)
    manifest = {
        "package": "knnanomaly",
        "version": __version__,
        "command": args.command,
        "config": config,
        "config_text": format_config_text({k: v for k, v in config.items() if k != "command"}),
        "inputs": {
            name: {"path": str(getattr(args, name)), "sha256": file_digest(getattr(args, name))}
            for name in INPUT_OPTIONS
            if getattr(args, name, None)
        },
        "outputs": [str(p) for p in outputs.paths] + [str(_sibling(main_path, ".manifest.json"))],
    }
    if result is not None:
        manifest["result"] = result
    outputs.add_json(_sibling(main_path, ".manifest.json"), manifest)
    outputs.commit()
    if echo and result is not None:
        print(json.dumps(result, indent=2, sort_keys=True))
    return 0


def _entropy_truth(args) -> float:
    if args.dist == "gaussian":
        return args.dim * gaussian_entropy_closed_form(args.sigma2)
    if args.dist == "beta":
        return args.dim * beta_entropy_closed_form(args.beta_a, args.beta_b)
    return mixture_entropy(MixtureSpec(args.p, args.beta_a, args.beta_b), args.dim)


def _generator(args):
    if args.dist == "gaussian":
        mu = args.mu if len(args.mu) > 1 else args.mu[0]
        return lambda n, seed: gen_gaussian(n, args.dim, mu, args.sigma2, seed)
    if args.dist == "beta":
        return lambda n, seed: gen_beta(n, args.dim, args.beta_a, args.beta_b, seed)
    spec = MixtureSpec(args.p, args.beta_a, args.beta_b)
    return lambda n, seed: gen_mixture(n, spec, args.dim, seed)


# ---------------------------------------------------------------- commands


def cmd_generate(args) -> int:
    out = OutputSet()
    path = _output(args, "data.csv")
    if args.dist == "rssi":
        records, truth = make_rssi_fixture(args.sensors, args.instants, tuple(args.motion),
                                           args.noise_sd, args.motion_sd, seed=args.seed)
        tmp = _sibling(path, ".raw.tmp")
        try:
            write_raw(records, tmp)
            out.add_text(path, tmp.read_text())
        finally:
            tmp.unlink(missing_ok=True)
        out.add_text(_sibling(path, ".truth.csv"), "".join(f"{int(t)}\n" for t in truth))
        result = {"records": len(records), "sensors": args.sensors, "instants": args.instants,
                  "motion_instants": int(truth.sum())}
    else:
        data = _generator(args)(args.n, args.seed)
        out.add_text(path, points_csv(data.points, [f"x{j}" for j in range(data.dim)] if args.header else None))
        result = {"generator": data.provenance, "n": len(data), "dim": data.dim}
    return _finish(args, out, path, result)


def cmd_inject(args) -> int:
    data = read_points(args.data, args.header)
    spec = AnomalySpec(args.kind, args.fraction, args.magnitude, args.seed)
    modified, truth = inject_anomalies(data, spec)
    path = _output(args, "injected.csv")
    out = OutputSet()
    out.add_text(path, points_csv(modified.points, [f"x{j}" for j in range(data.dim)] if args.header else None))
    out.add_text(_sibling(path, ".truth.csv"), "".join(f"{int(t)}\n" for t in truth))
    return _finish(args, out, path, {"n_modified": int(np.count_nonzero(truth)), "kind": spec.kind})


def cmd_density(args) -> int:
    grid_size = args.grid_size or DEFAULT_GRID_SIZE
    if args.data:
        data = read_points(args.data, args.header)
        est, normalizer = split_density(data, args.split_fraction, args.seed, args.k,
                                        _bounds(args, data.dim), args.renormalize, grid_size)
    elif args.reference and args.eval:
        ref = read_points(args.reference, args.header)
        pts = read_points(args.eval, args.header)
        bounds = _bounds(args, ref.dim)
        est = estimate_density(pts, ref, args.k)
        if bounds is not None:
            est = boundary_correct(est, ref, bounds)
        normalizer = 1.0
        renorm = ref.dim == 1 if args.renormalize is None else args.renormalize
        if renorm:
            if ref.dim != 1:
                raise DataError("renormalization is only available in 1-D")
            normalizer = normalization_constant(ref, est.k, bounds, grid_size)
            est = type(est)(est.eval_points, est.values / normalizer, est.k, est.m_ref, est.dim,
                            est.corrected, True, est.radii, est.saturated)
    else:
        raise UsageError("density needs --data, or both --reference and --eval")
    path = _output(args, "density.csv")
    out = OutputSet()
    out.add_text(path, density_csv(est, args.header))
    sidecar = density_sidecar(est, normalizer=normalizer)
    out.add_json(_sibling(path, ".json"), sidecar)
    return _finish(args, out, path, sidecar)


def cmd_entropy(args) -> int:
    _require(args, "data")
    data = read_points(args.data, args.header)
    res = entropy_pipeline(data, args.split_fraction, args.seed, args.k, _bounds(args, data.dim),
                           args.renormalize, args.grid_size or DEFAULT_GRID_SIZE)
    path = _output(args, "entropy.json")
    out = OutputSet()
    result = res.to_dict()
    out.add_json(path, result)
    return _finish(args, out, path, result, echo=True)


def cmd_detect(args) -> int:
    truth_raw = read_truth(args.truth) if args.truth else None
    if args.matrix:
        matrix = MeasurementMatrix.from_csv(args.matrix)
        n = matrix.n_instants
        truth = None
        if truth_raw is not None:
            offset = args.boundary if args.truth_offset is None else args.truth_offset
            truth = align_ground_truth(truth_raw, n - args.boundary, offset)
        report = temporal_detection(matrix.values, args.boundary, args.alpha, truth, args.seed,
                                    args.corrected, args.two_sided, fraction=args.split_fraction,
                                    k=args.k, grid_size=args.grid_size or DEFAULT_GRID_SIZE)
    elif args.scores:
        scores = read_column(args.scores, args.header)
        if not 2 <= args.boundary < scores.size:
            raise DataError(f"boundary {args.boundary} leaves no test scores among {scores.size}")
        truth = None
        if truth_raw is not None:
            offset = args.boundary if args.truth_offset is None else args.truth_offset
            truth = align_ground_truth(truth_raw, scores.size - args.boundary, offset)
        threshold = threshold_from_training(scores[:args.boundary], args.alpha)
        report = detect_series(scores[args.boundary:], threshold, truth,
                               indices=np.arange(args.boundary, scores.size), two_sided=args.two_sided)
    else:
        raise UsageError("detect needs --matrix or --scores")
    path = _output(args, "detect.json")
    out = OutputSet()
    result = report.to_dict()
    out.add_json(path, result)
    out.add_text(_sibling(path, ".csv"), points_csv(report.table(), ["index", "score", "flag", "truth"]))
    if report.ground_truth is not None:
        scan = scan_statistic(report.scores, report.ground_truth)
        table = np.column_stack([report.indices, scan])
        out.add_text(_sibling(path, ".scan.csv"), points_csv(table, ["instant", "scaled_score", "truth"]))
    summary = {key: result[key] for key in ("n_flagged", "false_alarm", "detection") if key in result}
    summary["threshold"] = report.threshold.value
    return _finish(args, out, path, summary, echo=True)


def _pair(args):
    _require(args, "normal", "test")
    a = read_points(args.normal, args.header)
    b = read_points(args.test, args.header)
    if a.dim != b.dim:
        raise DataError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return a, b


def cmd_bhatt(args) -> int:
    a, b = _pair(args)
    whole = bhattacharyya(GaussianSummary.from_samples(a.points), GaussianSummary.from_samples(b.points))
    result = {"whole_set_distance": whole}
    path = _output(args, "bhatt.csv")
    out = OutputSet()
    if a.dim == 1:
        grid, pa, pb, k = density_on_common_grid(a, b, args.split_fraction, args.seed, args.k,
                                                 args.grid_size, _bounds(args, 1))
        window = args.window_len or k
        profile = windowed_bhattacharyya(pa, pb, grid, window, args.stride)
        out.add_text(path, points_csv(np.column_stack([profile.window_starts, profile.distances]),
                                      ["window_start", "distance"]))
        result.update(profile.metadata())
        result["k"] = k
        result["max_distance"] = float(profile.distances.max())
        result["median_distance"] = float(np.median(profile.distances))
        if args.threshold is not None:
            result["flagged_windows"] = detect_windows(profile, args.threshold)
    else:
        out.add_text(path, points_csv(np.array([[whole]]), ["whole_set_distance"]))
    return _finish(args, out, path, result, echo=True)


def cmd_kl(args) -> int:
    a, b = _pair(args)
    if a.dim != 1:
        raise DataError("KL divergence on a common grid is 1-D only")
    grid, pa, pb, k = density_on_common_grid(a, b, args.split_fraction, args.seed, args.k,
                                             args.grid_size, _bounds(args, 1))
    kl = kl_divergence(pa, pb, grid)
    result = {"kl": kl.value, "n_floored": kl.n_floored, "grid_size": grid.size, "k": k}
    path = _output(args, "kl.json")
    out = OutputSet()
    out.add_json(path, result)
    return _finish(args, out, path, result, echo=True)


def cmd_roc(args) -> int:
    _require(args, "scores")
    table = np.loadtxt(args.scores, delimiter=",", skiprows=1 if args.header else 0, ndmin=2)
    if table.shape[1] != 2:
        raise DataError(f"{args.scores}: expected two columns (score, label)")
    curve = roc_curve(table[:, 0], table[:, 1] != 0)
    path = _output(args, "roc.csv")
    out = OutputSet()
    out.add_text(path, points_csv(np.column_stack([curve.thresholds, curve.false_alarm, curve.detection]),
                                  ["threshold", "false_alarm", "detection"]))
    return _finish(args, out, path, {"auc": curve.auc, "n_thresholds": int(curve.thresholds.size)}, echo=True)


def cmd_qq(args) -> int:
    _require(args, "values")
    qq = qq_against_normal(read_column(args.values, args.header))
    path = _output(args, "qq.csv")
    out = OutputSet()
    out.add_text(path, points_csv(np.column_stack([qq.normal_quantiles, qq.sample_quantiles]),
                                  ["normal_quantile", "sample_quantile"]))
    return _finish(args, out, path, {"correlation": qq.correlation, "n": int(qq.sample_quantiles.size)},
                   echo=True)


def cmd_sweep(args) -> int:
    make = _generator(args)
    bounds = _bounds(args, args.dim)
    grid_size = args.grid_size or DEFAULT_GRID_SIZE

    def estimate(size, seed):
        res = entropy_pipeline(make(size, seed), args.split_fraction, seed, args.k, bounds,
                               None, grid_size)
        return (res.corrected if args.corrected else res.plug_in).value

    with ThreadPoolExecutor(max_workers=args.threads) as pool:
        rows = convergence_sweep(estimate, args.sizes, args.realizations, _entropy_truth(args),
                                 args.seed, executor=pool)
    cols = ["size", "mean", "variance", "ci_lower", "ci_upper", "true_value"]
    table = np.array([[r.as_record()[c] for c in cols] for r in rows])
    path = _output(args, "sweep.csv")
    out = OutputSet()
    out.add_text(path, points_csv(table, cols))
    return _finish(args, out, path, {"rows": [r.as_record() for r in rows]})


def cmd_ingest(args) -> int:
    _require(args, "raw")
    records = parse_raw(args.raw)
    if not records:
        raise DataError(f"{args.raw}: no records")
    times = np.array([r.timestamp for r in records])
    start = np.ceil(times.min()) if args.start is None else args.start
    stop = np.floor(times.max()) if args.stop is None else args.stop
    grid = np.arange(start, stop + args.step / 2, args.step)
    matrix = synchronize(records, grid)
    if args.detrend_window:
        matrix = remove_local_means(matrix, args.detrend_window)
    path = _output(args, "matrix.csv")
    tmp = _sibling(path, ".matrix.tmp")
    out = OutputSet()
    try:
        matrix.to_csv(tmp)
        out.add_text(path, tmp.read_text())
    finally:
        tmp.unlink(missing_ok=True)
    return _finish(args, out, path, matrix.manifest())


# ---------------------------------------------------------------- parser


class UsageError(Exception):
    """Options are inconsistent; reported like an argparse error."""


def _require(args, *names):
    missing = [n for n in names if not getattr(args, n, None)]
    if missing:
        raise UsageError(f"{args.command} requires " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _common(p: argparse.ArgumentParser):
    g = p.add_argument_group("run options")
    g.add_argument("--seed", type=int, default=0, help="master seed for every random choice")
    g.add_argument("--config", help="file of key = value defaults; flags override it")
    g.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker cap (results do not depend on it)")
    g.add_argument("--header", action="store_true", help="CSV inputs/outputs carry a header line")
    g.add_argument("-o", "--output", help="main output file")
    g.add_argument("--output-dir", default=".", help="directory for relative output paths")


def _estimation(p: argparse.ArgumentParser):
    p.add_argument("--k", type=int, help="neighbour rank (default ceil(sqrt(M)))")
    p.add_argument("--fraction", dest="split_fraction", type=float, default=0.5,
                   help="evaluation share of the split")
    p.add_argument("--grid-size", type=int, help="grid cells for renormalization or resampling")
    p.add_argument("--bounds", type=float, nargs=2, metavar=("LO", "HI"),
                   help="box support [LO, HI]^d; enables boundary correction")


def _distribution(p: argparse.ArgumentParser, choices):
    p.add_argument("--dist", choices=choices, default=choices[0])
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--mu", type=float, nargs="+", default=[0.0], help="Gaussian mean (scalar or per coordinate)")
    p.add_argument("--sigma2", type=float, default=1.0, help="Gaussian variance")
    p.add_argument("--beta-a", type=float, default=4.0)
    p.add_argument("--beta-b", type=float, default=4.0)
    p.add_argument("--p", type=float, default=0.8, help="Beta share of the mixture")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="knnanomaly", description="k-NN entropy anomaly detection")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)

    p = sub.add_parser("generate", help="draw a synthetic dataset or RSSI log")
    _common(p)
    _distribution(p, ["gaussian", "beta", "mixture", "rssi"])
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--sensors", type=int, default=14)
    p.add_argument("--instants", type=int, default=200)
    p.add_argument("--motion", type=int, nargs=2, default=[120, 140], metavar=("FIRST", "LAST"))
    p.add_argument("--noise-sd", type=float, default=1.0)
    p.add_argument("--motion-sd", type=float, default=6.0)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("inject", help="corrupt a dataset and write its truth mask")
    _common(p)
    p.add_argument("--data")
    p.add_argument("--kind", choices=ANOMALY_KINDS, default="extreme")
    p.add_argument("--fraction", type=float, default=0.05)
    p.add_argument("--magnitude", type=float, default=10.0)
    p.set_defaults(func=cmd_inject)

    p = sub.add_parser("density", help="k-NN density at evaluation points")
    _common(p)
    _estimation(p)
    p.add_argument("--data", help="sample to split into reference and evaluation parts")
    p.add_argument("--reference")
    p.add_argument("--eval")
    p.add_argument("--renormalize", action=argparse.BooleanOptionalAction, default=None,
                   help="rescale to unit integral (default: on in 1-D)")
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("entropy", help="plug-in and bias-corrected entropy")
    _common(p)
    _estimation(p)
    p.add_argument("--data")
    p.add_argument("--renormalize", action=argparse.BooleanOptionalAction, default=None)
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("detect", help="threshold per-instant entropies or precomputed scores")
    _common(p)
    _estimation(p)
    p.add_argument("--matrix", help="measurement matrix CSV from `ingest`")
    p.add_argument("--scores", help="single-column score CSV")
    p.add_argument("--truth", help="0/1 ground truth, one row per instant")
    p.add_argument("--truth-offset", type=int, help="truth rows to skip (default: --boundary)")
    p.add_argument("--boundary", type=int, default=50, help="number of leading normal instants")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--two-sided", action="store_true")
    p.add_argument("--corrected", action=argparse.BooleanOptionalAction, default=True,
                   help="use bias-corrected entropies")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("bhatt", help="whole-set and windowed Bhattacharyya distances")
    _common(p)
    _estimation(p)
    p.add_argument("--normal")
    p.add_argument("--test")
    p.add_argument("--window", dest="window_len", type=int, help="grid points per window (default k)")
    p.add_argument("--stride", type=int, help="window step (default: window length)")
    p.add_argument("--threshold", type=float, help="report windows above this distance")
    p.set_defaults(func=cmd_bhatt)

    p = sub.add_parser("kl", help="KL divergence of --normal from --test on a common grid")
    _common(p)
    _estimation(p)
    p.add_argument("--normal")
    p.add_argument("--test")
    p.set_defaults(func=cmd_kl)

    p = sub.add_parser("roc", help="ROC curve from score,label rows")
    _common(p)
    p.add_argument("--scores")
    p.set_defaults(func=cmd_roc)

    p = sub.add_parser("qq", help="q-q diagnostic against the standard normal")
    _common(p)
    p.add_argument("--values")
    p.set_defaults(func=cmd_qq)

    p = sub.add_parser("sweep", help="entropy convergence over sample sizes")
    _common(p)
    _estimation(p)
    _distribution(p, ["gaussian", "beta", "mixture"])
    p.add_argument("--sizes", type=int, nargs="+", default=[400, 2000, 10000])
    p.add_argument("--realizations", type=int, default=20)
    p.add_argument("--corrected", action=argparse.BooleanOptionalAction, default=False)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("ingest", help="raw RSSI log to synchronous detrended matrix")
    _common(p)
    p.add_argument("--raw")
    p.add_argument("--step", type=float, default=1.0, help="grid spacing in seconds")
    p.add_argument("--start", type=float)
    p.add_argument("--stop", type=float)
    p.add_argument("--detrend-window", type=int, default=51, help="local-mean window (0 disables)")
    p.set_defaults(func=cmd_ingest)
    return parser


def _parse(parser, argv):
    args = parser.parse_args(argv)
    if args.config:
        if not os.path.exists(args.config):
            parser.error(f"config file not found: {args.config}")
        try:
            values = parse_config_text(Path(args.config).read_text())
        except ValueError as exc:
            parser.error(str(exc))
        unknown = set(values) - set(vars(args)) - {"command"}
        if unknown:
            parser.error(f"unknown config keys: {sorted(unknown)}")
        values.pop("command", None)
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        subparser.set_defaults(**values)
        args = parser.parse_args(argv)
    for name in INPUT_OPTIONS:
        path = getattr(args, name, None)
        if path and not os.path.exists(path):
            parser.error(f"--{name}: file not found: {path}")
    return args


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _parse(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"knnanomaly {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (DataError, ValueError, RuntimeError, OSError, np.linalg.LinAlgError) as exc:
        print(f"knnanomaly {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
