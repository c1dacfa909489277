"""Command-line entry point: ``zslca <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data/file error, 3 numerical failure.
Every run publishes its outputs atomically together with a
``<primary output>.manifest.json`` that echoes the configuration, the seed,
library versions and SHA-256 digests of inputs and outputs.
"""

import argparse
import hashlib
import json
import logging
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__, _kernels, dap, evalkit, lezsl, pacbound, pipeline
from ._io import fmt, read_rows, staged_writes, to_csv
from .attrspace import (
    attributes_csv,
    entropy_report,
    entropy_table,
    expand,
    guard_not_expanded,
    looks_expanded,
    normalize_columns,
    read_attributes,
    split_expanded,
)
from .datagen import SynthConfig, dataset_files, generate_synthetic, load_dataset, read_features, read_splits
from .errors import DataError, NumericalError, ParseError, ZslError

log = logging.getLogger("zslca")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- helpers -------------------------------------------------------------------


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _versions():
    out = {"zslca": __version__, "numpy": np.__version__, "python": platform.python_version()}
    if _kernels.HAS_NUMBA:
        out["numba"] = _kernels.numba.__version__
    return out


def _manifest(args, inputs, outputs):
    config = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k != "func"}
    return json.dumps(
        {
            "command": args.command,
            "config": config,
            "seed": args.seed,
            "backend": _kernels.BACKEND,
            "versions": _versions(),
            "inputs": {str(p): _sha256(p) for p in inputs},
            "outputs": {str(p): hashlib.sha256(text.encode("utf-8")).hexdigest() for p, text in outputs},
        },
        indent=2,
        sort_keys=True,
    ) + "\n"


def _publish(args, inputs, outputs):
    """Write ``outputs`` (path, text) and the manifest next to the first one, all or nothing."""
    outputs = [(Path(p), text) for p, text in outputs]
    targets = [p.resolve() for p, _ in outputs]
    clash = {p.resolve() for p in map(Path, inputs)} & set(targets)
    if clash:
        raise DataError(f"output {sorted(clash)[0]} would overwrite one of the inputs")
    if len(set(targets)) != len(targets):
        raise DataError("two outputs name the same file")
    manifest = outputs[0][0].with_name(outputs[0][0].name + ".manifest.json")
    with staged_writes() as pending:
        pending.extend(outputs)
        pending.append((manifest, _manifest(args, inputs, outputs)))
    for p, _ in outputs:
        log.info("wrote %s", p)


def _say(args, text):
    if not args.quiet:
        sys.stdout.write(text)


def _dataset_inputs(args):
    return [args.features, args.splits, args.attributes]


def _load(args):
    return load_dataset(args.features, args.splits, args.attributes)


def _sigma(text):
    if text == "median":
        return text
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("sigma must be 'median' or a positive number") from None
    if not value > 0 or not np.isfinite(value):
        raise argparse.ArgumentTypeError("sigma must be positive and finite")
    return value


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return value


def _unit_interval(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError("expected a value in (0, 1)")
    return value


def _hyper(args):
    return pipeline.PipelineHyper(
        dap_lr=args.dap_lr,
        dap_epochs=args.dap_epochs,
        dap_l2=args.dap_l2,
        le_lr=args.le_lr,
        le_epochs=args.le_epochs,
        le_l2=args.le_l2,
        weight_mode=args.weight_mode,
        sigma=args.sigma,
        max_iter=args.max_iters,
        tol=args.tol,
        seed=args.seed,
    )


# -- subcommands ---------------------------------------------------------------


def cmd_expand(args):
    raw = read_attributes(args.attributes)
    guard_not_expanded(raw, args.attributes)
    a = normalize_columns(raw)
    s = expand(a)
    records = entropy_report(a, s)
    outputs = [(args.out, attributes_csv(s))]
    if args.entropy_out:
        outputs.append((args.entropy_out, entropy_table(records)))
    _publish(args, [args.attributes], outputs)
    gains = sum(r.gain >= 0 for r in records)
    _say(args, f"expanded {a.n_attributes} -> {s.n_attributes} attributes over {a.n_classes} classes; "
               f"entropy not decreased for {gains}/{len(records)} classes\n")


def cmd_entropy(args):
    raw = read_attributes(args.attributes)
    if looks_expanded(raw.values):
        s = split_expanded(raw)
        a = s.source
    else:
        a = normalize_columns(raw)
        s = expand(a)
    records = entropy_report(a, s)
    _publish(args, [args.attributes], [(args.out, entropy_table(records))])
    for r in records:
        _say(args, f"{r.class_name}: OA {r.entropy_oa:.4f}  CA {r.entropy_ca:.4f}  gain {r.gain:+.4f}\n")


def cmd_synth(args):
    cfg = SynthConfig(
        seed=args.seed,
        K=args.K,
        L=args.L,
        M=args.M,
        d=args.d,
        samples_per_class=args.samples_per_class,
        noise_sigma=args.noise_sigma,
        signature_sparsity=args.sparsity,
    )
    bundle = generate_synthetic(cfg)
    _publish(args, [], dataset_files(bundle, args.features, args.splits, args.attributes))
    _say(args, f"synthetic dataset: {len(bundle.data.labels)} samples, {cfg.K} seen + {cfg.L} unseen classes\n")


def cmd_train_dap(args):
    bundle = _load(args)
    method = "dap-ca" if args.ca else "dap"
    bank = pipeline.train_model(bundle, method, _hyper(args))
    outputs = [(args.out, dap.bank_csv(bank))]
    if args.dropped_out:
        outputs.append((args.dropped_out, dap.dropped_report(bank)))
    _publish(args, _dataset_inputs(args), outputs)
    _say(args, f"trained {bank.n_attributes} attribute classifiers ({len(bank.dropped)} dropped)\n")


def cmd_train_le(args):
    bundle = _load(args)
    method = "le-ca" if args.ca else "le"
    model = pipeline.train_model(bundle, method, _hyper(args))
    outputs = [(args.out, lezsl.model_csv(model))]
    if args.loss_trace_out:
        outputs.append((args.loss_trace_out, lezsl.loss_trace_csv(model.loss_trace)))
    _publish(args, _dataset_inputs(args), outputs)
    _say(args, f"trained bilinear model on embedding {model.embedding_id}; final loss {model.loss_trace[-1]:.6g}\n")


def _load_model(args, bundle):
    if args.model is None:
        return None
    if pipeline.family(args.method) == "le":
        emb = pipeline.embedding_for(args.method, bundle.attributes)
        return lezsl.read_model(args.model, emb)
    return dap.read_bank(args.model)


def _report_csv(report, method, notes):
    rows = [("metric", "value"), ("method", method)] + report.summary_rows()
    rows += [(f"note:{k}", fmt(v) if isinstance(v, (int, float)) else str(v)) for k, v in sorted(notes.items())]
    return to_csv(rows)


def cmd_predict(args):
    pipeline.validate(args.method, args.mode)
    bundle = _load(args)
    model = _load_model(args, bundle)
    result = pipeline.run_method(bundle, args.method, args.mode, _hyper(args), model=model, threads=args.threads)
    report = evalkit.evaluate(result.predictions, bundle.data, bundle.split, args.mode)
    outputs = [(args.report, _report_csv(report, args.method, result.notes)),
               (args.predictions, result.predictions_csv())]
    if args.diagnostics:
        outputs.append((args.diagnostics, result.diagnostics_csv()))
    if args.confusion:
        outputs.append((args.confusion, report.confusion_csv()))
    inputs = _dataset_inputs(args) + ([args.model] if args.model else [])
    _publish(args, inputs, outputs)
    if result.notes.get("not_converged"):
        log.warning("%d samples hit the mean-shift iteration cap", result.notes["not_converged"])
    _say(args, f"method: {args.method}\n" + report.text())


def _read_predictions(path):
    rows = list(read_rows(path))
    if not rows or rows[0][1] != ["sample_id", "predicted"]:
        raise ParseError(path, 1, "header must be 'sample_id,predicted'")
    out = {}
    for lineno, fields in rows[1:]:
        if len(fields) != 2:
            raise ParseError(path, lineno, "expected 'sample_id,predicted'")
        if fields[0] in out:
            raise ParseError(path, lineno, f"duplicate prediction for {fields[0]!r}")
        out[fields[0]] = fields[1]
    return out


def cmd_eval(args):
    data = read_features(args.features)
    split = read_splits(args.splits)
    split.validate(data, None)
    predictions = _read_predictions(args.predictions)
    report = evalkit.evaluate(predictions, data, split, args.mode)
    outputs = [(args.report, report.to_csv())]
    if args.confusion:
        outputs.append((args.confusion, report.confusion_csv()))
    _publish(args, [args.features, args.splits, args.predictions], outputs)
    _say(args, report.text())


def cmd_pac_bound(args):
    rp = pacbound.read_rp_file(args.rp_file) if args.rp_file else None
    inp = pacbound.BoundInput(args.M, args.d, args.n, args.gamma, args.delta, rp=rp, g_inv=args.g_inv)
    report = pacbound.bound_report(inp, strict_2m=args.strict_2m)
    _publish(args, [args.rp_file] if args.rp_file else [], [(args.out, pacbound.report_csv(report))])
    for k, v in report.as_dict().items():
        _say(args, f"{k}: {v}\n")


# -- parser --------------------------------------------------------------------


def _add_dataset(p):
    p.add_argument("--features", type=Path, required=True, help="CSV 'sample_id,label,f1,...,fd'")
    p.add_argument("--splits", type=Path, required=True, help="split CSV (class roles + sample partitions)")
    p.add_argument("--attributes", type=Path, required=True, help="raw attribute CSV 'attribute,<class>...'")


def _add_hyper(p, dap_flags=True, le_flags=True, ra_flags=True):
    d = pipeline.PipelineHyper()
    # every subcommand carries the full set so PipelineHyper can be built uniformly
    p.set_defaults(
        dap_lr=d.dap_lr, dap_epochs=d.dap_epochs, dap_l2=d.dap_l2,
        le_lr=d.le_lr, le_epochs=d.le_epochs, le_l2=d.le_l2, weight_mode=d.weight_mode,
        sigma=d.sigma, max_iters=d.max_iter, tol=d.tol,
    )
    g = p.add_argument_group("hyperparameters")
    if dap_flags:
        g.add_argument("--dap-lr", type=float)
        g.add_argument("--dap-epochs", type=int)
        g.add_argument("--dap-l2", type=float)
    if le_flags:
        g.add_argument("--le-lr", type=float)
        g.add_argument("--le-epochs", type=int)
        g.add_argument("--le-l2", type=float)
        g.add_argument("--weight-mode", choices=lezsl.WEIGHT_MODES)
    if ra_flags:
        g.add_argument("--sigma", type=_sigma, help="'median' (default) or a positive number")
        g.add_argument("--max-iters", type=_positive_int)
        g.add_argument("--tol", type=float)


def _add_globals(p, seed, threads, quiet):
    p.add_argument("--seed", type=int, default=seed, help="RNG seed (synth default 42, training default 0)")
    p.add_argument("--threads", type=_positive_int, default=threads, help="worker threads for per-sample inference")
    p.add_argument("--quiet", action="store_true", default=quiet, help="suppress summaries and info logging")


def build_parser():
    parser = _Parser(prog="zslca", description="Zero-shot learning with complementary attributes and rank aggregation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _add_globals(parser, None, 1, False)
    # the same flags after the subcommand; SUPPRESS keeps them from resetting values given before it
    common = argparse.ArgumentParser(add_help=False)
    _add_globals(common, argparse.SUPPRESS, argparse.SUPPRESS, argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    add = sub.add_parser

    def add_parser(name, **kw):
        return add(name, parents=[common], **kw)

    sub.add_parser = add_parser

    p = sub.add_parser("expand", help="normalize and append complementary attributes")
    p.add_argument("attributes", type=Path)
    p.add_argument("-o", "--out", type=Path, required=True)
    p.add_argument("--entropy-out", type=Path)
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("entropy", help="per-class entropy of original vs. expanded attributes")
    p.add_argument("attributes", type=Path, help="raw or expanded attribute CSV")
    p.add_argument("-o", "--out", type=Path, required=True)
    p.set_defaults(func=cmd_entropy)

    d = SynthConfig()
    p = sub.add_parser("synth", help="write a seeded synthetic dataset")
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--splits", type=Path, required=True)
    p.add_argument("--attributes", type=Path, required=True)
    p.add_argument("--K", type=_positive_int, default=d.K, help="seen classes")
    p.add_argument("--L", type=_positive_int, default=d.L, help="unseen classes")
    p.add_argument("--M", type=_positive_int, default=d.M, help="attributes")
    p.add_argument("--d", type=_positive_int, default=d.d, help="feature dimension")
    p.add_argument("--samples-per-class", type=_positive_int, default=d.samples_per_class)
    p.add_argument("--noise-sigma", type=float, default=d.noise_sigma)
    p.add_argument("--sparsity", type=float, default=d.signature_sparsity)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train-dap", help="train the attribute classifier bank")
    _add_dataset(p)
    p.add_argument("--ca", action="store_true", help="train on the complementary-expanded attributes")
    p.add_argument("-o", "--out", type=Path, required=True)
    p.add_argument("--dropped-out", type=Path)
    _add_hyper(p, le_flags=False, ra_flags=False)
    p.set_defaults(func=cmd_train_dap)

    p = sub.add_parser("train-le", help="train the bilinear label-embedding model")
    _add_dataset(p)
    p.add_argument("--ca", action="store_true", help="embed classes with the complementary-expanded attributes")
    p.add_argument("-o", "--out", type=Path, required=True)
    p.add_argument("--loss-trace-out", type=Path)
    _add_hyper(p, dap_flags=False, ra_flags=False)
    p.set_defaults(func=cmd_train_le)

    p = sub.add_parser("predict", help="train (or load) a model, predict the test pool and evaluate")
    _add_dataset(p)
    p.add_argument("--method", choices=pipeline.METHODS, required=True)
    p.add_argument("--mode", choices=pipeline.MODES, default="zsl")
    p.add_argument("--model", type=Path, help="previously trained bank/model instead of training")
    p.add_argument("--report", type=Path, required=True)
    p.add_argument("--predictions", type=Path, required=True)
    p.add_argument("--diagnostics", type=Path)
    p.add_argument("--confusion", type=Path)
    _add_hyper(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="evaluate a predictions CSV")
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--splits", type=Path, required=True)
    p.add_argument("--predictions", type=Path, required=True)
    p.add_argument("--mode", choices=pipeline.MODES, default="zsl")
    p.add_argument("--report", type=Path, required=True)
    p.add_argument("--confusion", type=Path)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pac-bound", help="sample-complexity and recognition-probability bounds")
    p.add_argument("--M", type=_positive_int, required=True, help="number of attributes")
    p.add_argument("--d", type=_positive_int, required=True, help="feature dimension")
    p.add_argument("--n", type=_positive_int, required=True, help="number of unseen classes")
    p.add_argument("--gamma", type=_unit_interval, required=True)
    p.add_argument("--delta", type=_unit_interval, required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--rp-file", type=Path, help="distance sample or 'z,cdf' table")
    src.add_argument("--g-inv", type=float, help="tolerated distance G^-1(gamma) given directly")
    p.add_argument("--strict-2m", action="store_true", help="use (1-delta)^(2M) for the expanded bank")
    p.add_argument("-o", "--out", type=Path, required=True)
    p.set_defaults(func=cmd_pac_bound)
    return parser


def _default_seed(args):
    if args.seed is None:
        args.seed = SynthConfig().seed if args.command == "synth" else 0


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return 1
    _default_seed(args)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    try:
        args.func(args)
    except NumericalError as exc:
        sys.stderr.write(f"numerical error: {exc}\n")
        return exc.exit_code
    except ZslError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.exit_code
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
