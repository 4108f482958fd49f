"""Command-line front end.

Commands: fit, transform, flip, eval, generate, trace, plot-data.

Experiment recipes are flat ``key = value`` files; ``#`` starts a comment
and every ``layer`` line appends to the schedule::

    dataset = moons          # generator kind, or use train_csv/test_csv
    seed = 0
    noise = 0.1
    weights = 0.5, 0.5
    layer = 15 * nb frame=mswd
    layer = gaussian reg=1e-6
    eps = 0.1
    max_iter = 100
    trace = true

Command-line flags override file values. Exit codes: 0 success, 2 usage
or config error, 3 data error, 4 numeric failure.
"""

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from .base import BarymapError, DataError, FitError
from .datasets import (DEFAULT_SIZES, generate_split, load_csv, write_csv,
                       write_points)
from .flow import (LayerConfig, ModelFormatError, fit_flow, identity_model,
                   load_model, save_model)
from .metrics import (SinkhornConfig, convergence_trace, flipped_samples,
                      pairwise_flip_wd, transportation_cost)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class ConfigError(BarymapError, ValueError):
    pass


_SCALARS = {
    "dataset": str, "train_csv": str, "test_csv": str, "out": str,
    "seed": int, "threads": int, "n_train": int, "n_test": int, "k": int,
    "noise": float, "eps": float, "max_iter": int, "trace": "bool", "timing": "bool",
}


def _convert(text):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", "null"):
        return None
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def parse_layer(text, lineno=None):
    """``[N *] kind key=value ...`` -> list of N LayerConfig."""
    where = "line %d: " % lineno if lineno else ""
    count = 1
    if "*" in text:
        head, text = text.split("*", 1)
        try:
            count = int(head)
        except ValueError:
            raise ConfigError("%sbad layer repeat count %r" % (where, head.strip())) from None
    tokens = text.split()
    if not tokens:
        raise ConfigError("%sempty layer specification" % where)
    params = {}
    for tok in tokens[1:]:
        if "=" not in tok:
            raise ConfigError("%slayer parameter %r is not key=value" % (where, tok))
        key, val = tok.split("=", 1)
        params[key] = _convert(val)
    try:
        return [LayerConfig(tokens[0], params)] * count
    except ValueError as exc:
        raise ConfigError("%s%s" % (where, exc)) from None


def parse_config(text):
    cfg = {"schedule": []}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("line %d: expected 'key = value'" % lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        if key == "layer":
            cfg["schedule"].extend(parse_layer(val, lineno))
        elif key == "weights":
            try:
                cfg["weights"] = [float(v) for v in val.split(",")]
            except ValueError:
                raise ConfigError("line %d: weights must be numbers" % lineno) from None
        elif key in _SCALARS:
            kind = _SCALARS[key]
            if kind == "bool":
                if val.lower() not in ("true", "false"):
                    raise ConfigError("line %d: %s must be true or false" % (lineno, key))
                cfg[key] = val.lower() == "true"
            else:
                try:
                    cfg[key] = kind(val)
                except ValueError:
                    raise ConfigError("line %d: bad value for %s: %r"
                                      % (lineno, key, val)) from None
        else:
            raise ConfigError("line %d: unknown key %r" % (lineno, key))
    return cfg


def _load_config(args):
    cfg = {"schedule": []}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = parse_config(fh.read())
    for key in ("seed", "threads", "eps", "max_iter", "out", "timing"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    for layer in getattr(args, "layer", None) or []:
        cfg["schedule"].extend(parse_layer(layer))
    return cfg


def _datasets(cfg):
    seed = cfg.get("seed", 0)
    if "train_csv" in cfg:
        train = load_csv(cfg["train_csv"])
        test = load_csv(cfg["test_csv"]) if "test_csv" in cfg else train
        return train, test
    kind = cfg.get("dataset")
    if kind not in DEFAULT_SIZES:
        raise ConfigError("dataset must be one of %s or set train_csv"
                          % ", ".join(sorted(DEFAULT_SIZES)))
    extra = {key: cfg[key] for key in ("k", "noise") if key in cfg}
    try:
        return generate_split(kind, seed, cfg.get("n_train"), cfg.get("n_test"), **extra)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _sinkhorn_config(cfg):
    try:
        return SinkhornConfig(cfg.get("eps", 0.1), cfg.get("max_iter", 100))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _write_metrics(path, rows, timing):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["layer", "wd", "tc"] + (["wall_time_ms"] if timing else []))
        for layer, wd, tc, ms in rows:
            w.writerow([layer, repr(float(wd)), repr(float(tc))]
                       + (["%.1f" % ms] if timing else []))


def _out_dir(cfg):
    out = cfg.get("out") or "."
    os.makedirs(out, exist_ok=True)
    return out


def cmd_fit(args, force_trace=False):
    cfg = _load_config(args)
    if not cfg["schedule"]:
        raise ConfigError("layer schedule is empty; add 'layer = ...' lines or --layer")
    sk = _sinkhorn_config(cfg)
    train, test = _datasets(cfg)
    seed, threads = cfg.get("seed", 0), cfg.get("threads", 1)
    timing = cfg.get("timing", False)
    trace = force_trace or cfg.get("trace", False)
    t0 = time.perf_counter()
    if trace:
        rows, model = convergence_trace(train, test, cfg.get("weights"), cfg["schedule"],
                                        sk, seed, threads=threads)
    else:
        model = fit_flow(train, cfg.get("weights"), cfg["schedule"], seed)
        rows = []
        for l, m in ((0, identity_model(model.d, model.k, model.weights)), (model.n_layers, model)):
            rows.append((l, pairwise_flip_wd(test, m, sk, threads=threads),
                         transportation_cost(test, m), 1000 * (time.perf_counter() - t0)))
    out = _out_dir(cfg)
    save_model(model, os.path.join(out, "model.json"))
    _write_metrics(os.path.join(out, "metrics.csv"), [rows[0], rows[-1]], timing)
    if trace:
        _write_metrics(os.path.join(out, "trace.csv"), rows, timing)
    summary = {"layers": model.n_layers, "k": model.k, "d": model.d, "seed": seed,
               "wd_initial": rows[0][1], "wd_final": rows[-1][1],
               "tc_final": rows[-1][2]}
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
    print("fitted %d layers: WD %.6g -> %.6g, TC %.6g"
          % (model.n_layers, rows[0][1], rows[-1][1], rows[-1][2]))
    return EXIT_OK


def cmd_trace(args):
    return cmd_fit(args, force_trace=True)


def _read_points(path, d):
    feats = _read_bare(path)
    if feats.shape[1] != d:
        raise DataError("input has %d columns, model expects %d" % (feats.shape[1], d))
    return feats


def _read_bare(path):
    """Unlabeled point CSV; an optional non-numeric header row is skipped."""
    with open(path, newline="") as fh:
        rows = [(i, r) for i, r in enumerate(csv.reader(fh), start=1) if r]
    if rows:
        try:
            [float(c) for c in rows[0][1]]
        except ValueError:
            rows = rows[1:]
    if not rows:
        raise DataError("%s: no data rows" % path)
    width = len(rows[0][1])
    out = []
    for lineno, row in rows:
        if len(row) != width:
            raise DataError("row %d: expected %d columns, got %d" % (lineno, width, len(row)))
        try:
            out.append([float(c) for c in row])
        except ValueError:
            raise DataError("row %d: non-numeric value" % lineno) from None
    return np.array(out)


def _emit_points(points, out):
    if out in (None, "-"):
        write_points(points, sys.stdout)
    else:
        with open(out, "w", newline="") as fh:
            write_points(points, fh)


def _class(model, j):
    if not 0 <= j < model.k:
        raise DataError("unknown class %d (model has k=%d)" % (j, model.k))
    return j


def cmd_transform(args):
    model = load_model(args.model)
    j = _class(model, args.class_id)
    X = _read_points(args.input, model.d)
    Y = model.inverse_transform(j, X) if args.inverse else model.transform(j, X)
    _emit_points(Y, args.out)
    return EXIT_OK


def cmd_flip(args):
    model = load_model(args.model)
    src, dst = _class(model, args.from_class), _class(model, args.to_class)
    X = _read_points(args.input, model.d)
    _emit_points(model.flip(src, dst, X), args.out)
    return EXIT_OK


def cmd_eval(args):
    model = load_model(args.model)
    test = load_csv(args.test)
    if test.d != model.d or test.k != model.k:
        raise DataError("test data (k=%d, d=%d) does not match model (k=%d, d=%d)"
                        % (test.k, test.d, model.k, model.d))
    sk = _sinkhorn_config({"eps": args.eps or 0.1, "max_iter": args.max_iter or 100})
    t0 = time.perf_counter()
    wd = pairwise_flip_wd(test, model, sk, threads=args.threads or 1)
    tc = transportation_cost(test, model)
    rows = [(model.n_layers, wd, tc, 1000 * (time.perf_counter() - t0))]
    out = args.out or "metrics.csv"
    _write_metrics(out, rows, args.timing)
    print("WD %.6g  TC %.6g" % (wd, tc))
    return EXIT_OK


def cmd_generate(args):
    cfg = _load_config(args)
    for key in ("dataset", "n_train", "n_test", "k", "noise"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    train, test = _datasets(cfg)
    out = _out_dir(cfg)
    write_csv(train, os.path.join(out, "train.csv"))
    write_csv(test, os.path.join(out, "test.csv"))
    return EXIT_OK


def plot_rows(model, data):
    """Rows ``(coords, class, role)`` for original, latent and flipped samples."""
    fake = flipped_samples(data, model)
    rows = []
    for j, X in enumerate(data):
        rows.append((X, j, "original"))
        rows.append((model.transform(j, X), j, "latent"))
        for c in range(data.k):
            if c != j:
                rows.append((fake[c][j], j, "flipped_to_%d" % c))
    return rows


def _write_svg(rows, k, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    matplotlib.rcParams["svg.hashsalt"] = "barymap"
    roles = ["original", "latent"] + ["flipped_to_%d" % c for c in range(k)]
    fig, axes = plt.subplots(1, len(roles), figsize=(3 * len(roles), 3))
    colors = plt.get_cmap("tab10")
    for ax, role in zip(axes, roles):
        for X, j, r in rows:
            if r == role:
                ax.scatter(X[:, 0], X[:, 1], s=2, color=colors(j % 10), label=str(j))
        ax.set_title(role, fontsize=8)
        ax.set_aspect("equal", adjustable="datalim")
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_plot_data(args):
    model = load_model(args.model)
    data = load_csv(args.data)
    if data.d != model.d or data.k != model.k:
        raise DataError("data does not match model dimensions")
    rows = plot_rows(model, data)
    out = args.out or "plot_data.csv"
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x%d" % i for i in range(model.d)] + ["class", "role"])
        for X, j, role in rows:
            for row in X:
                w.writerow([repr(float(v)) for v in row] + [j, role])
    if args.svg:
        if model.d != 2:
            print("notice: SVG needs d=2 (got d=%d); wrote CSV only" % model.d,
                  file=sys.stderr)
        else:
            _write_svg(rows, model.k, args.svg)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="barymap", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="key = value recipe file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int, help="parallel Sinkhorn pairs (default 1)")
        sp.add_argument("--eps", type=float, help="Sinkhorn regularization")
        sp.add_argument("--max-iter", dest="max_iter", type=int,
                        help="Sinkhorn iteration cap")
        sp.add_argument("--out", help="output directory or file")

    for name, fn in (("fit", cmd_fit), ("trace", cmd_trace)):
        sp = sub.add_parser(name)
        common(sp)
        sp.add_argument("--layer", action="append",
                        help="append a layer, e.g. '15 * nb frame=mswd'")
        sp.add_argument("--timing", action="store_true", default=None,
                        help="add a wall_time_ms column")
        sp.set_defaults(func=fn)

    sp = sub.add_parser("transform")
    sp.add_argument("--model", required=True)
    sp.add_argument("--input", required=True)
    sp.add_argument("--class", dest="class_id", type=int, required=True)
    sp.add_argument("--inverse", action="store_true")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_transform)

    sp = sub.add_parser("flip")
    sp.add_argument("--model", required=True)
    sp.add_argument("--input", required=True)
    sp.add_argument("--from", dest="from_class", type=int, required=True)
    sp.add_argument("--to", dest="to_class", type=int, required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_flip)

    sp = sub.add_parser("eval")
    common(sp, config=False)
    sp.add_argument("--model", required=True)
    sp.add_argument("--test", required=True)
    sp.add_argument("--timing", action="store_true", help="add a wall_time_ms column")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("generate")
    common(sp)
    sp.add_argument("--dataset", choices=sorted(DEFAULT_SIZES))
    sp.add_argument("--n-train", dest="n_train", type=int)
    sp.add_argument("--n-test", dest="n_test", type=int)
    sp.add_argument("--k", type=int)
    sp.add_argument("--noise", type=float)
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("plot-data")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--out")
    sp.add_argument("--svg")
    sp.set_defaults(func=cmd_plot_data)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ModelFormatError, OSError) as exc:
        print("data error: %s" % exc, file=sys.stderr)
        return EXIT_DATA
    except (FitError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print("numeric failure: %s" % exc, file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
