"""Command-line entry point: ``igdts <command> ...``.

Every command writes its outputs through a temporary file that is renamed into
place on success, so a failed run leaves no partial files behind. Failures exit
nonzero with a single-line diagnostic; a missing input file exits with code 2.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from igdts.config import CONFIG_ENV, KEYS, Config, ConfigError, describe_keys, load_config
from igdts.evaluation import summarize
from igdts.imaging import (
    GroundTruth,
    frame_index,
    image_to_gray,
    list_sequence,
    load_sequence,
    parse_ground_truth,
    save_gray,
    write_overlay,
)
from igdts.regression import RegressionProblem, d_igdts, d_lad, d_lss, d_ols, igdts_fit
from igdts.slope import LambdaSequence
from igdts.synth import MOTION_PRESETS, synth_regression, synth_sequence
from igdts.tracker import track_sequence

log = logging.getLogger("igdts")

EXIT_FAILURE = 1
EXIT_MISSING = 2
DEMO_LAMBDAS = (0.01, 0.1)
TRUTH_COLOR = (0, 200, 0)
TRACK_COLOR = (230, 30, 30)


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_FAILURE):
        super().__init__(message)
        self.code = code


def _require_file(path) -> Path:
    path = Path(path)
    if not path.is_file():
        raise CliError(f"file not found: {path}", EXIT_MISSING)
    return path


def _require_dir(path) -> Path:
    path = Path(path)
    if not path.is_dir():
        raise CliError(f"directory not found: {path}", EXIT_MISSING)
    return path


def atomic_write(path, data) -> Path:
    """Write ``data`` (str or bytes) to ``path`` via a temp file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": "", "encoding": "utf-8"})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    return path


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _num(v) -> str:
    return repr(float(v))


def _config(args) -> Config:
    try:
        cfg = load_config(getattr(args, "config", None))
    except FileNotFoundError as exc:
        raise CliError(str(exc), EXIT_MISSING) from None
    overrides = {}
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise CliError(f"--set expects key=value, got {item!r}")
        k, v = (s.strip() for s in item.split("=", 1))
        if k not in KEYS:
            raise CliError(f"unknown config key '{k}'")
        overrides[k] = v
    for k in ("seed", "lambda_max", "n_particles", "workers", "eps", "max_iter"):
        if getattr(args, k, None) is not None:
            overrides[k] = getattr(args, k)
    return cfg.with_overrides(overrides)


# ---------------------------------------------------------------- regress


def read_regression_csv(path):
    """Read a CSV with header ``y,x1..xp``; returns ``(X, y)``."""
    path = _require_file(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if any(c.strip() for c in r)]
    if not rows:
        raise CliError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    expected = ["y"] + [f"x{j}" for j in range(1, len(header))]
    if len(header) < 2 or header != expected:
        raise CliError(f"{path}:1: header must be y,x1..xp, got {','.join(header)}")
    if len(rows) < 2:
        raise CliError(f"{path}: no data rows")
    data = []
    for lineno, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise CliError(f"{path}:{lineno}: expected {len(header)} fields, got {len(r)}")
        try:
            vals = [float(c) for c in r]
        except ValueError:
            raise CliError(f"{path}:{lineno}: non-numeric field") from None
        if not all(np.isfinite(vals)):
            raise CliError(f"{path}:{lineno}: non-finite value")
        data.append(vals)
    arr = np.array(data)
    return arr[:, 1:], arr[:, 0]


def cmd_regress(args) -> int:
    X, y = read_regression_csv(args.csv)
    cfg = _config(args)
    if args.intercept:
        X = np.column_stack([np.ones(len(y)), X])
    lam_max = cfg.tracker.lambda_max if args.lambda_max is None else args.lambda_max
    if lam_max < 0:
        raise CliError("--lambda-max must be non-negative")
    if lam_max == 0:
        log.warning("lambda_max = 0 is degenerate: gamma absorbs every residual")
    lam = LambdaSequence.linear(len(y), lam_max, args.lambda_min_ratio)
    eta = "auto" if args.eta is None else args.eta
    sol = igdts_fit(RegressionProblem(X, y, lam, eta=eta, eps=cfg.eps, max_iter=cfg.max_iter))

    rows = [["beta", j, _num(b)] for j, b in enumerate(sol.beta)]
    rows += [["gamma", i, _num(g)] for i, g in enumerate(sol.gamma)]
    rows += [["mse", i, _num(m)] for i, m in enumerate(sol.mse_trace)]
    rows += [["objective", i, _num(o)] for i, o in enumerate(sol.objective_trace)]
    out = Path(args.out)
    atomic_write(out, _csv_text(["kind", "index", "value"], rows))
    if not args.no_figure:
        from igdts.plotting import plot_regression_trace

        plot_regression_trace(sol, out.with_suffix(".png"))
    print(f"iterations {sol.iterations}")
    print(f"stop {sol.stop_reason}")
    print(f"final_mse {sol.mse!r}")
    print(f"objective {sol.objective!r}")
    print("beta " + " ".join(f"{b:.10g}" for b in sol.beta))
    return 0


# ---------------------------------------------------------- distance-demo


def _load_images(paths):
    out = []
    for p in paths:
        p = _require_file(p)
        with Image.open(p) as img:
            out.append((p, image_to_gray(img)))
    return out


def _vectorize(images, side):
    shapes = {a.shape for _, a in images}
    if len(shapes) > 1:
        detail = ", ".join(f"{p.name} {a.shape[1]}x{a.shape[0]}" for p, a in images)
        raise CliError(f"image sizes differ: {detail}")
    cols = []
    for _, a in images:
        if side and a.shape != (side, side):
            img = Image.fromarray(a.astype(np.float32), mode="F").resize((side, side), Image.BILINEAR)
            a = np.asarray(img, dtype=float)
        cols.append(a.ravel())
    return np.column_stack(cols)


def distance_table(X, candidates, lambdas=DEMO_LAMBDAS, eps=1e-8, max_iter=500):
    """Rows of ``(label, [value per candidate])`` for OLS, LAD, LSS and IGDTS."""
    n = X.shape[0]
    table = {"d_OLS": [d_ols(c, X) for c in candidates], "d_LAD": [d_lad(c, X) for c in candidates]}
    for lam in lambdas:
        table[f"d_LSS (lambda={lam:g})"] = [d_lss(c, X, lam, eps=eps, max_iter=max_iter) for c in candidates]
    for lam in lambdas:
        seq = LambdaSequence.linear(n, lam)
        table[f"d_IGDTS (lambda_max={lam:g})"] = [d_igdts(c, X, seq, eps=eps, max_iter=max_iter) for c in candidates]
    return table


def format_table(names, table) -> str:
    width = max(len(k) for k in table)
    colw = max(10, *(len(n) for n in names))
    lines = [" " * width + "  " + "  ".join(n.rjust(colw) for n in names)]
    for label, vals in table.items():
        lines.append(label.ljust(width) + "  " + "  ".join(f"{v:{colw}.4f}" for v in vals))
    return "\n".join(lines)


def cmd_distance_demo(args) -> int:
    tdir = _require_dir(args.template_dir)
    tpaths = list_sequence(tdir)
    if len(tpaths) < 2:
        raise CliError(f"{tdir}: need at least 2 template images, found {len(tpaths)}")
    templates = _load_images(tpaths)
    cands = _load_images(args.candidates)
    cfg = _config(args)
    lambdas = tuple(args.lambdas) if args.lambdas else DEMO_LAMBDAS
    if any(v < 0 for v in lambdas):
        raise CliError("lambda values must be non-negative")
    if any(v == 0 for v in lambdas):
        log.warning("a lambda of 0 is degenerate: every residual is absorbed")
    M = _vectorize(templates + cands, args.side)
    X, C = M[:, : len(templates)], M[:, len(templates) :]
    names = [p.stem for p, _ in cands]
    table = distance_table(X, C.T, lambdas, cfg.eps, cfg.max_iter)
    print(format_table(names, table))
    if args.out:
        out = Path(args.out)
        rows = [[label] + [_num(v) for v in vals] for label, vals in table.items()]
        atomic_write(out, _csv_text(["distance"] + names, rows))
        if not args.no_figure:
            from igdts.plotting import plot_distance_table

            plot_distance_table(names, table, out.with_suffix(".png"))
    return 0


# ------------------------------------------------------------------ track


RESULT_HEADER = ["frame", "x", "y", "w", "h", "tx", "ty", "theta", "scale", "aspect", "skew",
                 "distance", "log_likelihood", "updated", "lost"]


def _check_gt(paths, gt: GroundTruth):
    if len(gt) < len(paths):
        missing = paths[len(gt)]
        raise CliError(
            f"ground truth has {len(gt)} boxes for {len(paths)} frames; "
            f"first frame without a box: {frame_index(missing)} ({missing.name})"
        )
    if len(gt) > len(paths):
        raise CliError(f"ground truth has {len(gt)} boxes but the sequence has only {len(paths)} frames")


def _report_outputs(report, out_dir: Path, title: str, figure: bool):
    atomic_write(out_dir / "report.csv", report.to_csv())
    atomic_write(out_dir / "summary.csv", report.summary_lines())
    if figure:
        from igdts.plotting import plot_tracking_report

        plot_tracking_report(report, out_dir / "report.png", title)


def cmd_track(args) -> int:
    seq_dir = _require_dir(args.seq_dir)
    gt_path = _require_file(args.gt if args.gt else seq_dir / "groundtruth.txt")
    cfg = _config(args)
    try:
        paths = list_sequence(seq_dir, args.pattern)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    if len(paths) < 2:
        raise CliError(f"{seq_dir}: need at least 2 frames, found {len(paths)}")
    gt = parse_ground_truth(gt_path)
    _check_gt(paths, gt)
    frames = load_sequence(seq_dir, args.pattern)

    def progress(i):
        log.info("frame %d/%d", i, len(frames))

    results = track_sequence(frames, gt[0], cfg.tracker, progress=progress)
    rows = []
    for r in results:
        rows.append(
            [r.frame_index, *(_num(v) for v in r.bbox), *(_num(v) for v in r.state.to_array()),
             _num(r.distance), _num(r.log_likelihood), int(r.updated_model), int(r.lost)]
        )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    atomic_write(out_dir / "results.csv", _csv_text(RESULT_HEADER, rows))
    report = summarize(results, gt)
    _report_outputs(report, out_dir, seq_dir.name, not args.no_figure)
    if args.overlays:
        odir = out_dir / "overlays"
        odir.mkdir(exist_ok=True)
        for frame, path, r, g in zip(frames, paths, results, gt.boxes):
            write_overlay(frame, [(tuple(g), TRUTH_COLOR), (r.bbox, TRACK_COLOR)], odir / f"{path.stem}.png")
    n_lost = sum(r.lost for r in results)
    print(f"frames {len(results)}")
    print(f"mean_cle {report.mean_cle:.4f}")
    print(f"mean_overlap {report.mean_overlap:.4f}")
    if n_lost:
        print(f"lost_frames {n_lost}")
    return 0


# ------------------------------------------------------------------- eval


def read_results_csv(path):
    path = _require_file(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"x", "y", "w", "h"} - set(reader.fieldnames or [])
        if missing:
            raise CliError(f"{path}: missing columns {','.join(sorted(missing))}")
        boxes = []
        for lineno, row in enumerate(reader, start=2):
            try:
                boxes.append(tuple(float(row[k]) for k in ("x", "y", "w", "h")))
            except (TypeError, ValueError):
                raise CliError(f"{path}:{lineno}: malformed box") from None
    if not boxes:
        raise CliError(f"{path}: no result rows")
    return boxes


def cmd_eval(args) -> int:
    boxes = read_results_csv(args.results)
    gt = parse_ground_truth(_require_file(args.gt))
    if len(gt) < len(boxes):
        raise CliError(f"ground truth has {len(gt)} boxes for {len(boxes)} results; first frame without a box: {len(gt) + 1}")
    report = summarize(boxes, gt)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _report_outputs(report, out_dir, Path(args.results).stem, not args.no_figure)
    print(f"frames {report.n_frames}")
    print(f"mean_cle {report.mean_cle:.4f}")
    print(f"mean_overlap {report.mean_overlap:.4f}")
    return 0


# ------------------------------------------------------------------ synth


def cmd_synth_regression(args) -> int:
    try:
        data = synth_regression(args.n, args.p, args.outlier_frac, args.sigma_g, args.sigma_l, args.seed)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    header = ["y"] + [f"x{j}" for j in range(1, args.p + 1)]
    rows = [[_num(yi), *(_num(v) for v in xi)] for yi, xi in zip(data.y, data.X)]
    out = Path(args.out)
    truth = {
        "beta": [float(b) for b in data.beta],
        "outliers": [int(i) for i in data.outliers],
        "n": args.n,
        "p": args.p,
        "outlier_frac": args.outlier_frac,
        "sigma_g": args.sigma_g,
        "sigma_l": args.sigma_l,
        "seed": args.seed,
    }
    truth_path = truth_path_for(out)
    atomic_write(truth_path, json.dumps(truth, indent=2) + "\n")
    atomic_write(out, _csv_text(header, rows))
    print(f"wrote {out} and {truth_path}")
    return 0


def truth_path_for(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".truth.json")


def _parse_window(text):
    if text is None or text.lower() in ("none", ""):
        return None
    try:
        a, b = (int(v) for v in text.replace(",", ":").split(":"))
    except ValueError:
        raise CliError(f"--occlusion expects START:END or none, got {text!r}") from None
    return a, b


def cmd_synth_sequence(args) -> int:
    window = _parse_window(args.occlusion)
    try:
        seq = synth_sequence(
            n_frames=args.n_frames,
            target_size=args.target_size,
            motion_preset=args.motion,
            occlusion_window=window,
            illumination_ramp=args.illumination_ramp,
            seed=args.seed,
            frame_shape=(args.height, args.width),
            occlusion_fraction=args.occlusion_fraction,
        )
    except ValueError as exc:
        raise CliError(str(exc)) from None
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    digits = max(4, len(str(args.n_frames)))
    with tempfile.TemporaryDirectory(dir=out_dir, prefix=".synth.") as tmp:
        tmp = Path(tmp)
        names = []
        for t, frame in enumerate(seq.frames, start=1):
            name = f"{t:0{digits}d}.pgm"
            save_gray(frame, tmp / name)
            names.append(name)
        gt_lines = "".join(",".join(str(int(v)) for v in b) + "\n" for b in seq.boxes)
        (tmp / "groundtruth.txt").write_text(gt_lines, encoding="ascii")
        occ = [int(m.sum()) for m in seq.occluder_masks]
        area = [int(m.sum()) for m in seq.target_masks]
        (tmp / "occlusion.csv").write_text(
            _csv_text(["frame", "occluded_pixels", "target_pixels"],
                      [[t, o, a] for t, (o, a) in enumerate(zip(occ, area), start=1)]),
            encoding="ascii",
        )
        for name in names + ["groundtruth.txt", "occlusion.csv"]:
            os.replace(tmp / name, out_dir / name)
    print(f"wrote {len(names)} frames and groundtruth.txt to {out_dir}")
    return 0


# ----------------------------------------------------------------- parser


class _Formatter(argparse.RawDescriptionHelpFormatter):
    # show defaults only where one exists
    def _get_help_string(self, action):
        text = action.help or ""
        if action.default is not None and action.default is not False and action.default != argparse.SUPPRESS and "%(default)" not in text:
            text += " (default: %(default)s)"
        return text


def _add_config_flags(p, tracker_flags=True):
    p.add_argument("--config", help=f"key=value config file (default: ${CONFIG_ENV} if set)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key; repeatable")
    p.add_argument("--eps", type=float, help="regression stopping tolerance (config: eps)")
    p.add_argument("--max-iter", type=int, help="regression iteration cap (config: max_iter)")
    if tracker_flags:
        p.add_argument("--seed", type=int, help="random seed (config: seed)")
        p.add_argument("--n-particles", type=int, help="particles per frame (config: n_particles)")
        p.add_argument("--workers", type=int, help="threads for particle evaluation (config: workers)")


def build_parser() -> argparse.ArgumentParser:
    keys = describe_keys()
    parser = argparse.ArgumentParser(
        prog="igdts",
        description="Robust regression with sorted soft-threshold outlier selection, and a particle-filter tracker.",
        epilog=f"{keys}\n\nThe default config file is read from ${CONFIG_ENV} when --config is not given.",
        formatter_class=_Formatter,
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text, epilog=keys, formatter_class=_Formatter)
        p.set_defaults(func=func)
        p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
        return p

    p = add("regress", cmd_regress, "Fit y ~ X with iterative gradient descent and threshold selection.")
    p.add_argument("csv", help="input CSV with header y,x1..xp")
    p.add_argument("--out", required=True, help="output CSV of kind,index,value rows (beta, gamma, mse, objective)")
    p.add_argument("--lambda-max", type=float, help="largest threshold (config: lambda_max) (not from paper)")
    p.add_argument("--lambda-min-ratio", type=float, default=0.1, help="smallest/largest threshold ratio (not from paper)")
    p.add_argument("--eta", type=float, help="gradient step; default 1/L from power iteration")
    p.add_argument("--intercept", action="store_true", help="prepend a column of ones to X")
    p.add_argument("--no-figure", action="store_true", help="skip the trace figure (written as OUT with .png)")
    _add_config_flags(p, tracker_flags=False)

    p = add("distance-demo", cmd_distance_demo, "Tabulate d_OLS, d_LAD, d_LSS and d_IGDTS of candidates against templates.")
    p.add_argument("template_dir", help="directory of at least 2 template images")
    p.add_argument("candidates", nargs="+", help="candidate image files")
    p.add_argument("--lambdas", type=float, nargs="+", help=f"threshold values (default {' '.join(map(str, DEMO_LAMBDAS))})")
    p.add_argument("--side", type=int, default=32, help="resize images to SIDE x SIDE before vectorizing; 0 keeps the native size")
    p.add_argument("--out", help="optional CSV of the table; a bar chart is written next to it")
    p.add_argument("--no-figure", action="store_true", help="skip the bar chart")
    _add_config_flags(p, tracker_flags=False)

    p = add("track", cmd_track, "Track a target through an image sequence and score it against ground truth.")
    p.add_argument("seq_dir", help="directory of numbered frames")
    p.add_argument("--gt", help="ground-truth file, one x,y,w,h box per frame (default SEQ_DIR/groundtruth.txt)")
    p.add_argument("--out-dir", required=True, help="writes results.csv, report.csv, summary.csv, report.png")
    p.add_argument("--pattern", default="*", help="glob for frame files inside SEQ_DIR")
    p.add_argument("--lambda-max", type=float, help="largest threshold (config: lambda_max) (not from paper)")
    p.add_argument("--overlays", action="store_true", help="write per-frame PNG overlays to OUT_DIR/overlays")
    p.add_argument("--no-figure", action="store_true", help="skip report.png")
    _add_config_flags(p)

    p = add("eval", cmd_eval, "Re-score an existing results CSV against ground truth.")
    p.add_argument("results", help="results CSV with x,y,w,h columns")
    p.add_argument("--gt", required=True, help="ground-truth file")
    p.add_argument("--out-dir", required=True, help="writes report.csv, summary.csv, report.png")
    p.add_argument("--no-figure", action="store_true", help="skip report.png")

    p = add("synth-regression", cmd_synth_regression, "Generate a regression CSV with planted outliers and a truth sidecar.")
    p.add_argument("--n", type=int, default=200, help="rows")
    p.add_argument("--p", type=int, default=8, help="columns of X")
    p.add_argument("--outlier-frac", type=float, default=0.1, help="fraction of rows with Laplacian outliers, in [0, 1)")
    p.add_argument("--sigma-g", type=float, default=0.1, help="dense Gaussian noise std")
    p.add_argument("--sigma-l", type=float, default=1.0, help="Laplacian outlier scale")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--out", required=True, help="output CSV; the truth sidecar is OUT_STEM.truth.json")

    p = add("synth-sequence", cmd_synth_sequence, "Generate a synthetic tracking sequence of PGM frames plus groundtruth.txt.")
    p.add_argument("--n-frames", type=int, default=120, help="number of frames")
    p.add_argument("--target-size", type=int, default=24, help="side of the square target in pixels")
    p.add_argument("--motion", choices=sorted(MOTION_PRESETS), default="random_walk", help="motion preset")
    p.add_argument("--occlusion", default="50:69", help="inclusive 1-based frame window START:END, or none")
    p.add_argument("--occlusion-fraction", type=float, default=0.3, help="fraction of the target covered while occluded")
    p.add_argument("--illumination-ramp", type=float, default=0.15, help="gain rises linearly to 1 + RAMP")
    p.add_argument("--height", type=int, default=120, help="frame height")
    p.add_argument("--width", type=int, default=160, help="frame width")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--out-dir", required=True, help="output directory")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename or exc}", file=sys.stderr)
        return EXIT_MISSING
    except (ValueError, ConfigError, ArithmeticError) as exc:
        print(f"error: {str(exc).splitlines()[0] if str(exc) else type(exc).__name__}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
