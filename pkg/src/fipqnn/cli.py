"""Command-line pipeline: prepare, build, solve, eval, sweep, report.

Outputs go under ``--out`` (default ``runs``)::

    prepared/   train.csv test.csv prototypes.csv manifest.json
    model/      model.json qubo.txt spin_report.json manifest.json
    solution/   solution.txt net.json trace.csv manifest.json
    eval/       report.json manifest.json
    sweep_<kind>/  sweep.csv timings.json manifest.json
    report/     report.json report.md

Exit codes: 0 success, 2 usage or configuration error, 3 runtime or solver error.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import logging
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, dataio, qcgd
from .errors import FipqnnError, InvalidInputError, ModelBuildError, SizeLimitError
from .pwl import build_midpoint_constant, sigmoid
from .qcbo import (NetSpec, QcboModel, build_fip_model, build_midpoint_qubo_model, linearize_all,
                   spin_report, to_penalty_qubo)
from .qnet import QuantNet, accuracy, decode, resource_report
from .qubo import ExactOracle, QuboInstance, SAOracle, SASchedule, derive_seeds, noisy_wrap

log = logging.getLogger("fipqnn")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3
ENCODINGS = ("midpoint", "inequality", "compact")
ORACLES = ("sa", "exact", "noisy")
MODES = ("direct", "qcgd")
SWEEP_KINDS = ("breakpoint_c", "precision_digits")

DEFAULT_CONFIG = {
    "data_dir": None,
    "keep": [4, 5],
    "threshold_method": "supervised",
    "use_prototypes": True,
    "net": {
        "dims": [3, 2, 1],
        "breakpoints": [-8, -4, 0, 4, 8],
        "weight_bits": 1, "weight_code": "pm1",
        "bias_bits": 1, "bias_code": "pm1",
        "activation_decimals": 1,
    },
    "build": {
        "encoding": "midpoint",
        "strategy": "rosenberg",
        "strength": 1.0,
        "onehot_weight": 0.5,
        "penalty": None,
        "normalize_weights": True,
    },
    "solver": {
        "mode": "direct",
        "oracle": "sa",
        "restarts": 5,
        "sweeps": 200_000, "T_init": None, "T_final": 1e-3,
        "T": 1000, "delta": 1.0, "alpha0": 1.0, "p0": 0.5,
        "digits": None, "lazy": False, "tol": 1e-4, "dual_step": "gamma_alpha",
        "noise_delta": 0.8, "noise_eps": 0.5,
    },
    "sweep": {"restarts": 5},
    "seed": 0,
}


class UsageError(Exception):
    """Bad arguments or configuration (exit code 2)."""


# config and file helpers ------------------------------------------------

def merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in out:
            raise UsageError(f"unknown config key {k!r}")
        if isinstance(out[k], dict) and isinstance(v, dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = v
    return out


def validate_config(cfg: dict) -> dict:
    b, s, n = cfg["build"], cfg["solver"], cfg["net"]
    if b["encoding"] not in ENCODINGS:
        raise UsageError(f"build.encoding must be one of {ENCODINGS}")
    if b["strategy"] not in ("rosenberg", "constraints"):
        raise UsageError("build.strategy must be rosenberg or constraints")
    if s["mode"] not in MODES:
        raise UsageError(f"solver.mode must be one of {MODES}")
    if s["oracle"] not in ORACLES:
        raise UsageError(f"unknown oracle {s['oracle']!r}; choose from {ORACLES}")
    if int(s["restarts"]) < 1:
        raise UsageError("solver.restarts must be >= 1")
    if cfg["threshold_method"] not in ("tertile", "supervised"):
        raise UsageError("threshold_method must be tertile or supervised")
    if not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise UsageError("seed must be a non-negative integer")
    try:
        net_spec(cfg)
        if s["mode"] == "qcgd":
            qcgd_config(cfg).validate()
    except InvalidInputError as exc:
        raise UsageError(str(exc)) from exc
    if n["dims"][0] != 3 and cfg["data_dir"] is not None:
        raise UsageError("the ternary features have 3 components; dims[0] must be 3")
    return cfg


def load_config(args) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = merge(cfg, json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
    if args.seed is not None:
        cfg["seed"] = args.seed
    return cfg


def net_spec(cfg: dict) -> NetSpec:
    n = cfg["net"]
    act = build_midpoint_constant(sigmoid, n["breakpoints"])
    return NetSpec(tuple(n["dims"]), act, n["weight_bits"], n["weight_code"], n["bias_bits"],
                   n["bias_code"], n["activation_decimals"])


def qcgd_config(cfg: dict, digits="cfg") -> qcgd.QcgdConfig:
    s = cfg["solver"]
    return qcgd.QcgdConfig(T=int(s["T"]), delta=s["delta"], alpha0=s["alpha0"], p0=s["p0"],
                           digits=s["digits"] if digits == "cfg" else digits, lazy=bool(s["lazy"]),
                           tol=s["tol"], seed=cfg["seed"], dual_step=s["dual_step"])


def atomic_write(path, data) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj) -> None:
    atomic_write(path, json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")


def write_manifest(out_dir, command: str, cfg: dict, inputs, outputs, extra=None) -> None:
    man = {"command": command, "version": __version__, "config": cfg,
           "inputs": {str(p): dataio.file_sha256(p) for p in inputs},
           "outputs": {Path(p).name: dataio.file_sha256(p) for p in outputs}}
    if extra:
        man.update(extra)
    write_json(Path(out_dir) / "manifest.json", man)


def csv_text(rows, header) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    wr.writerows(rows)
    return buf.getvalue()


def features_csv(X, y, w=None) -> str:
    w = np.ones(len(y), dtype=int) if w is None else w
    return csv_text([[*r, int(lab), int(wt)] for r, lab, wt in zip(np.asarray(X).tolist(), y, w)],
                    ["f1", "f2", "f3", "label", "weight"])


def _require(path) -> Path:
    path = Path(path)
    if not path.exists():
        raise UsageError(f"missing input file {path}")
    return path


# pipeline pieces (pure functions used by the commands and the sweep) ------

def prepare_data(cfg: dict, data_dir):
    """Featurize both splits. Returns ``(train, test, thresholds, inputs)``."""
    try:
        tr_paths = dataio.find_split(data_dir, "train")
        te_paths = dataio.find_split(data_dir, "test")
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from exc
    keep = cfg["keep"]
    tr = dataio.filter_classes(dataio.load_idx(*tr_paths), keep)
    te = dataio.filter_classes(dataio.load_idx(*te_paths), keep)
    ctr = dataio.zero_counts(tr.images)
    th = dataio.fit_thresholds(ctr, tr.labels, cfg["threshold_method"])
    Ftr = dataio.ternary_codes(ctr, th)
    Fte = dataio.featurize(te.images, th)
    return (Ftr, tr.labels.astype(int)), (Fte, te.labels.astype(int)), th, list(tr_paths) + list(te_paths)


def training_set(cfg: dict, X, y, w):
    """Samples and loss weights fed to the model builder."""
    w = np.asarray(w, dtype=float)
    if cfg["build"]["normalize_weights"]:
        w = w / w.sum() * len(w)
    return X, y, w


def build_model(cfg: dict, X, y, w):
    """Returns ``(model, qubo, n_model)`` where ``n_model`` leading QUBO bits are model variables."""
    spec = net_spec(cfg)
    b = cfg["build"]
    if b["encoding"] == "midpoint":
        m = build_midpoint_qubo_model(spec, X, y, w, b["strength"], b["onehot_weight"])
        return m, QuboInstance.from_expr(m.objective, m.n_vars), m.n_vars
    m = build_fip_model(spec, X, y, w, encoding=b["encoding"])
    ml = linearize_all(m, b["strategy"])
    pq = to_penalty_qubo(ml, b["penalty"])
    return m, pq.qubo, m.n_vars


def make_oracle(s: dict, seed: int):
    if s["oracle"] == "sa":
        return SAOracle(SASchedule(s["T_init"], s["T_final"], s["sweeps"]))
    if s["oracle"] == "exact":
        return ExactOracle()
    return noisy_wrap(ExactOracle(), s["noise_delta"], s["noise_eps"], seed)


def solve_direct(cfg: dict, qubo: QuboInstance, seed: int):
    """Best of ``restarts`` oracle calls by energy; also returns every restart."""
    s = cfg["solver"]
    oracle = make_oracle(s, seed)
    m = 1 if getattr(oracle, "deterministic", False) else int(s["restarts"])
    runs = [oracle(qubo, sd) for sd in derive_seeds(seed, m)]
    best = min(runs, key=lambda r: (r.objective, tuple(r.assignment)))
    return best, runs


def pipeline(cfg: dict, train, test, protos, seed: int) -> dict:
    """Build, solve directly and evaluate one configuration; returns a result row."""
    X, y, w = training_set(cfg, *protos) if cfg["use_prototypes"] else training_set(
        cfg, train[0], train[1], np.ones(len(train[1])))
    m, q, n_model = build_model(cfg, X, y, w)
    best, runs = solve_direct(cfg, q, seed)
    net = decode(np.asarray(best.assignment)[:n_model], m)
    accs = [accuracy(decode(np.asarray(r.assignment)[:n_model], m), *test) for r in runs]
    return {"n_vars": q.n, "energy": best.objective, "train_acc": accuracy(net, *train),
            "test_acc": accuracy(net, *test), "best_restart_test_acc": max(accs),
            "restarts": len(runs), "net": net.to_json()}


def read_features(path):
    X, y, w = dataio.read_features_csv(_require(path))
    return X, y, w


# commands ------------------------------------------------------------------

def cmd_prepare(args, cfg) -> int:
    data_dir = args.data_dir or cfg["data_dir"]
    if not data_dir:
        raise UsageError("prepare needs --data-dir or data_dir in the config")
    cfg["data_dir"] = str(data_dir)
    validate_config(cfg)
    (Ftr, ytr), (Fte, yte), th, inputs = prepare_data(cfg, data_dir)
    protos = dataio.prototypes(Ftr, ytr)
    Xp, yp, wp = dataio.prototype_arrays(protos)
    out = Path(args.out) / "prepared"
    files = {"train.csv": features_csv(Ftr, ytr), "test.csv": features_csv(Fte, yte),
             "prototypes.csv": features_csv(Xp, yp, wp)}
    for name, text in files.items():
        atomic_write(out / name, text)
    write_manifest(out, "prepare", cfg, inputs, [out / n for n in files],
                   {"thresholds": th, "counts": {"train": len(ytr), "test": len(yte), "prototypes": len(yp)}})
    print(f"prepared {len(ytr)} train / {len(yte)} test samples, {len(yp)} prototypes -> {out}")
    return EXIT_OK


def cmd_build(args, cfg) -> int:
    validate_config(cfg)
    out = Path(args.out) / "model"
    if args.fixture == "toy":
        m = qcgd.toy_model()
        ml = linearize_all(m, cfg["build"]["strategy"])
        q = to_penalty_qubo(ml).qubo
        inputs = []
    else:
        ds = Path(args.dataset or Path(args.out) / "prepared")
        name = "prototypes.csv" if cfg["use_prototypes"] else "train.csv"
        X, y, w = read_features(ds / name)
        try:
            m, q, _ = build_model(cfg, *training_set(cfg, X, y, w))
        except InvalidInputError as exc:
            raise UsageError(str(exc)) from exc
        inputs = [ds / name]
    atomic_write(out / "model.json", json.dumps(m.to_json(), sort_keys=True) + "\n")
    atomic_write(out / "qubo.txt", q.to_text())
    rep = spin_report(m)
    rep["qubo_total"] = q.n
    write_json(out / "spin_report.json", rep)
    write_manifest(out, "build", cfg, inputs, [out / "model.json", out / "qubo.txt", out / "spin_report.json"],
                   {"fixture": args.fixture})
    print(f"model with {m.n_vars} variables, QUBO with {q.n} -> {out}")
    return EXIT_OK


def cmd_solve(args, cfg) -> int:
    if args.mode:
        cfg["solver"]["mode"] = args.mode
    if args.oracle:
        cfg["solver"]["oracle"] = args.oracle
    if args.oracle and args.oracle not in ORACLES:
        raise UsageError(f"unknown oracle {args.oracle!r}; choose from {ORACLES}")
    validate_config(cfg)
    mdir = Path(args.model or Path(args.out) / "model")
    mpath, qpath = _require(mdir / "model.json"), _require(mdir / "qubo.txt")
    m = QcboModel.from_json(json.loads(mpath.read_text()))
    out = Path(args.out) / "solution"
    outputs = [out / "solution.txt"]
    s = cfg["solver"]
    extra = {}
    if s["mode"] == "direct":
        q = QuboInstance.read(qpath)
        best, runs = solve_direct(cfg, q, cfg["seed"])
        x = np.asarray(best.assignment)[: m.n_vars]
        extra = {"energy": best.objective, "restart_energies": [r.objective for r in runs]}
    else:
        ml = linearize_all(m, cfg["build"]["strategy"]) if not m.is_linearized else m
        prog = qcgd.lift(ml)
        res = qcgd.run(prog, make_oracle(s, cfg["seed"]), qcgd_config(cfg))
        x = np.asarray(res.solution)[: m.n_vars]
        atomic_write(out / "trace.csv", qcgd.trace_csv(res.trace))
        outputs.append(out / "trace.csv")
        extra = {"iterations": res.iterations, "feasible": res.feasible, "objective": res.objective,
                 "m_t": res.m_t}
    atomic_write(out / "solution.txt", "".join(str(int(v)) for v in x) + "\n")
    if m.meta.get("kind", "").startswith("fip"):
        net = decode(x, m)
        write_json(out / "net.json", net.to_json())
        outputs.append(out / "net.json")
    write_manifest(out, "solve", cfg, [mpath, qpath], outputs, extra)
    print(f"{s['mode']} solve done -> {out}")
    return EXIT_OK


def cmd_eval(args, cfg) -> int:
    validate_config(cfg)
    npath = _require(args.solution or Path(args.out) / "solution" / "net.json")
    ds = Path(args.dataset or Path(args.out) / "prepared")
    net = QuantNet.from_json(json.loads(npath.read_text()))
    rep = {}
    inputs = [npath]
    for split in ("train", "test"):
        p = ds / f"{split}.csv"
        if p.exists():
            X, y, w = dataio.read_features_csv(p)
            rep[f"{split}_accuracy"] = accuracy(net, X, y, weights=w)
            inputs.append(p)
    if args.features:
        X, y, w = dataio.read_features_csv(_require(args.features))
        rep["accuracy"] = accuracy(net, X, y, weights=w)
        inputs.append(Path(args.features))
    if not rep:
        raise UsageError(f"no dataset found in {ds}")
    rep["resources"] = resource_report(net, n_latency=args.latency_runs).to_json()
    out = Path(args.out) / "eval"
    write_json(out / "report.json", rep)
    write_manifest(out, "eval", cfg, inputs, [out / "report.json"])
    print(json.dumps({k: v for k, v in rep.items() if k != "resources"}, sort_keys=True))
    return EXIT_OK


def parse_range(text: str):
    """``a..b`` (inclusive) or a comma list."""
    text = text.strip()
    try:
        if ".." in text:
            a, b = text.split("..")
            vals = list(range(int(a), int(b) + 1))
        else:
            vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad range {text!r}") from exc
    if not vals:
        raise UsageError("empty sweep range")
    return vals


def _sweep_point(kind, value, index, cfg, data):
    seed = int(np.random.SeedSequence([cfg["seed"], index]).generate_state(1, dtype=np.uint32)[0])
    t0 = time.perf_counter()
    try:
        if kind == "breakpoint_c":
            c = value
            if not 0 < c < 8:
                raise InvalidInputError(f"c={c} must lie strictly between 0 and 8")
            pc = copy.deepcopy(cfg)
            pc["net"]["breakpoints"] = [-8, -c, 0, c, 8]
            r = pipeline(pc, *data, seed)
            row = {"c": c, "status": "ok", "n_vars": r["n_vars"], "energy": repr(r["energy"]),
                   "train_acc": repr(r["train_acc"]), "test_acc": repr(r["test_acc"]),
                   "best_restart_test_acc": repr(r["best_restart_test_acc"])}
        else:
            prog = qcgd.lift(qcgd.toy_model())
            res = qcgd.run(prog, make_oracle(cfg["solver"], seed), qcgd_config(cfg, digits=value))
            row = {"digits": value, "status": "ok", "iterations": res.iterations,
                   "solution": "".join(map(str, res.solution)), "feasible": res.feasible,
                   "objective": repr(res.objective),
                   "final_infeasibility": repr(res.trace[-1]["infeasibility"])}
    except FipqnnError as exc:
        row = {("c" if kind == "breakpoint_c" else "digits"): value, "status": f"error: {exc}"}
    return row, time.perf_counter() - t0


SWEEP_COLUMNS = {
    "breakpoint_c": ["c", "status", "n_vars", "energy", "train_acc", "test_acc", "best_restart_test_acc"],
    "precision_digits": ["digits", "status", "iterations", "solution", "feasible", "objective",
                         "final_infeasibility"],
}


def cmd_sweep(args, cfg) -> int:
    if args.kind not in SWEEP_KINDS:
        raise UsageError(f"sweep kind must be one of {SWEEP_KINDS}")
    values = parse_range(args.range or ("1..7" if args.kind == "breakpoint_c" else "1..10"))
    if args.restarts is not None:
        cfg["sweep"]["restarts"] = args.restarts
    cfg["solver"]["restarts"] = int(cfg["sweep"]["restarts"])
    if args.kind == "precision_digits":
        cfg["solver"]["mode"] = "qcgd"
        if cfg["solver"]["oracle"] == "sa":
            cfg["solver"]["oracle"] = "exact"
    validate_config(cfg)
    inputs = []
    data = None
    if args.kind == "breakpoint_c":
        ds = Path(args.dataset or Path(args.out) / "prepared")
        tr, te, pr = (read_features(ds / n) for n in ("train.csv", "test.csv", "prototypes.csv"))
        data = ((tr[0], tr[1]), (te[0], te[1]), pr)
        inputs = [ds / n for n in ("train.csv", "test.csv", "prototypes.csv")]
    jobs = [(args.kind, v, i, cfg, data) for i, v in enumerate(values)]
    workers = max(1, int(args.workers or 1))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_sweep_point, *zip(*jobs)))
    else:
        results = [_sweep_point(*j) for j in jobs]
    cols = SWEEP_COLUMNS[args.kind]
    out = Path(args.out) / f"sweep_{args.kind}"
    atomic_write(out / "sweep.csv", csv_text([[r.get(c, "") for c in cols] for r, _ in results], cols))
    write_json(out / "timings.json", {str(v): t for v, (_, t) in zip(values, results)})
    write_manifest(out, "sweep", cfg, inputs, [out / "sweep.csv"], {"kind": args.kind, "values": values})
    print((out / "sweep.csv").read_text(), end="")
    return EXIT_OK


def cmd_report(args, cfg) -> int:
    root = Path(args.out)
    summary = {}
    for man in sorted(root.glob("*/manifest.json")):
        d = json.loads(man.read_text())
        entry = {k: v for k, v in d.items() if k not in ("config",)}
        rep = man.parent / "report.json"
        if rep.exists():
            entry["report"] = json.loads(rep.read_text())
        sw = man.parent / "sweep.csv"
        if sw.exists():
            entry["table"] = list(csv.DictReader(io.StringIO(sw.read_text())))
        summary[man.parent.name] = entry
    if not summary:
        raise UsageError(f"no manifests under {root}")
    out = root / "report"
    write_json(out / "report.json", summary)
    lines = ["# Run report", ""]
    for name, e in summary.items():
        lines.append(f"## {name}")
        for k in ("counts", "thresholds", "energy", "iterations", "feasible"):
            if k in e:
                lines.append(f"- {k}: {e[k]}")
        if "report" in e:
            for k, v in e["report"].items():
                if k != "resources":
                    lines.append(f"- {k}: {v}")
            if "resources" in e["report"]:
                r = e["report"]["resources"]
                lines.append(f"- memory: {r['bytes_exact']} bytes, ops: {r['ops']}, "
                             f"median latency: {r['latency_median_s']:.3g} s")
        if "table" in e:
            cols = list(e["table"][0].keys()) if e["table"] else []
            lines.append("")
            lines.append("| " + " | ".join(cols) + " |")
            lines.append("|" + "---|" * len(cols))
            for row in e["table"]:
                lines.append("| " + " | ".join(str(row[c]) for c in cols) + " |")
        lines.append("")
    atomic_write(out / "report.md", "\n".join(lines))
    print(f"report -> {out}")
    return EXIT_OK


# entry point ---------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fipqnn", description="Train quantized networks through QUBO formulations.")
    p.add_argument("--config", help="JSON file overriding the default configuration")
    p.add_argument("--seed", type=int, help="root seed (all randomness derives from it)")
    p.add_argument("--out", default="runs", help="output directory")
    p.add_argument("--workers", type=int, default=1, help="parallel sweep workers")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("prepare", help="featurize the IDX files")
    sp.add_argument("--data-dir", help="directory holding the IDX(.gz) files")

    sp = sub.add_parser("build", help="build the model and its QUBO")
    sp.add_argument("--dataset", help="prepared directory (default <out>/prepared)")
    sp.add_argument("--fixture", choices=["toy"], help="build a built-in fixture instead")

    sp = sub.add_parser("solve", help="solve the built model")
    sp.add_argument("--model", help="model directory (default <out>/model)")
    sp.add_argument("--mode", choices=MODES)
    sp.add_argument("--oracle", help=f"one of {ORACLES}")

    sp = sub.add_parser("eval", help="accuracy and resource report")
    sp.add_argument("--solution", help="net.json (default <out>/solution/net.json)")
    sp.add_argument("--dataset", help="prepared directory (default <out>/prepared)")
    sp.add_argument("--features", help="extra feature CSV to score")
    sp.add_argument("--latency-runs", type=int, default=10_000)

    sp = sub.add_parser("sweep", help="breakpoint or precision sweep")
    sp.add_argument("kind", help=f"one of {SWEEP_KINDS}")
    sp.add_argument("--range", help="a..b or a comma list (defaults 1..7 and 1..10)")
    sp.add_argument("--restarts", type=int, help="restarts per grid point (default 5)")
    sp.add_argument("--dataset", help="prepared directory (default <out>/prepared)")

    sub.add_parser("report", help="summarize manifests under --out")
    return p


COMMANDS = {"prepare": cmd_prepare, "build": cmd_build, "solve": cmd_solve, "eval": cmd_eval,
            "sweep": cmd_sweep, "report": cmd_report}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = load_config(args)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvalidInputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ModelBuildError, SizeLimitError, FipqnnError, ArithmeticError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
