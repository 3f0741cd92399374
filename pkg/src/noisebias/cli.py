"""Command-line pipeline driver.

One binary, subcommand per stage:

    simulate    run a simulated observer over seeded noise -> trial log
    estimate    trial log -> bias template(s) (noise-only or four-cell)
    render      template -> PNG visualization
    fit         labeled vectors -> (cone-)SVM model JSON
    eval        model or template + labeled vectors -> AP JSON
    experiment  synthetic low-data / cross-dataset runner -> report
    serve       run the HTTP labeling service

Every command is deterministic given its flags (seeds are flags), and
every output embeds the resolved configuration and tool version: JSONL
outputs in a leading meta line or per-record fields, JSON outputs in
top-level fields, PNGs in a tEXt chunk.  Failures print a machine-
readable ``{"error": ...}`` JSON on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__, rng
from .conesvm import (ConeConstraint, fit_cone_svm, fit_svm, model_from_dict,
                      model_to_dict)
from .errors import InputError
from .evaluation import (ExperimentReport, SyntheticDatasetSpec,
                         eval_model, eval_template,
                         labeled_vectors_from_records,
                         run_cross_dataset_experiment, run_low_data_experiment)
from .features import (FeatureSpace, FeatureVector, l2_normalize,
                       read_vector_jsonl, render_for_labeling, vector_record,
                       write_vector_jsonl)
from .observer import LinearObserver, run_session, run_stimulus_session
from .revcorr import (MODE_CLASSIC, MODE_NOISE_ONLY, Template,
                      estimate_classic, estimate_cohorts, estimate_noise_only,
                      TemplateAccumulator, accumulate, read_trial_log,
                      reconstruct_stimulus, write_trial_log)

_TOOL = "noisebias"


def _config_echo(args: argparse.Namespace) -> dict:
    skip = {"func"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def _stamp(args: argparse.Namespace, payload: dict) -> dict:
    return {"tool": _TOOL, "version": __version__,
            "config": _config_echo(args), **payload}


def _emit(args: argparse.Namespace, text: str):
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text)
            if not text.endswith("\n"):
                f.write("\n")
    else:
        print(text)


def _load_space(value: str) -> FeatureSpace:
    """Accept a feature-space descriptor as inline JSON or a file path."""
    if value.lstrip().startswith("{"):
        return FeatureSpace.from_dict(json.loads(value))
    with open(value, "r", encoding="utf-8") as f:
        return FeatureSpace.from_dict(json.load(f))


def _first_vector(path: str) -> tuple:
    records = read_vector_jsonl(path)
    if not records:
        raise InputError(f"{path}: no vector records")
    rec = records[0]
    return FeatureVector(rec["space"], rec["values"]), rec


def _load_template(path: str) -> Template:
    vec, rec = _first_vector(path)
    return Template(space_id=vec.space_id, values=vec.values,
                    trials_used=int(rec.get("trials_used", 1)),
                    mode=str(rec.get("mode", MODE_NOISE_ONLY)))


def _read_log_meta(path: str):
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                return None
            if isinstance(obj, dict) and obj.get("kind") == "meta":
                return obj
            return None
    return None


def _require(args: argparse.Namespace, *names: str):
    for name in names:
        if getattr(args, name, None) is None:
            raise InputError(f"--{name.replace('_', '-')} is required here")


# -- subcommands ---------------------------------------------------------------


def cmd_simulate(args) -> int:
    _require(args, "out")
    space = _load_space(args.space)
    template_vec, rec = _first_vector(args.observer_template)
    if template_vec.space_id != space.id:
        raise InputError(
            f"observer template lives in space {template_vec.space_id!r}, "
            f"--space declares {space.id!r}")
    observer = LinearObserver(
        template=l2_normalize(template_vec),
        sigma=args.sigma, tau=args.tau,
        seed=rng.mix_seeds(args.seed, "observer-noise"))
    stimulus_seed = rng.mix_seeds(args.seed, "stimuli")
    if (args.base_a is None) != (args.base_b is None):
        raise InputError("--base-a and --base-b must be given together")
    if args.base_a is not None:
        base_a, _ = _first_vector(args.base_a)
        base_b, _ = _first_vector(args.base_b)
        records = run_stimulus_session(
            observer, space, base_a, base_b, args.trials, stimulus_seed,
            observer_id=args.observer_id, cohort=args.cohort)
    else:
        records = run_session(
            observer, space, args.trials, stimulus_seed,
            observer_id=args.observer_id, cohort=args.cohort)
    meta = {"tool": _TOOL, "version": __version__,
            "config": _config_echo(args), "space": space.to_dict()}
    write_trial_log(args.out, records, meta=meta)
    print(json.dumps({"written": args.out, "trials": len(records)}))
    return 0


def _estimate_space(args) -> FeatureSpace:
    if args.space is not None:
        return _load_space(args.space)
    meta = _read_log_meta(args.log)
    if meta and "space" in meta:
        return FeatureSpace.from_dict(meta["space"])
    raise InputError(
        "the log has no embedded space descriptor; pass --space")


def cmd_estimate(args) -> int:
    _require(args, "out")
    space = _estimate_space(args)
    mode = args.mode.replace("-", "_")
    if mode not in (MODE_NOISE_ONLY, MODE_CLASSIC):
        raise InputError(f"--mode must be noise-only or classic, got {args.mode!r}")
    base_a = base_b = None
    if mode == MODE_CLASSIC:
        if args.base_a is None or args.base_b is None:
            raise InputError("classic mode needs --base-a and --base-b to "
                             "reconstruct stimuli")
        base_a, _ = _first_vector(args.base_a)
        base_b, _ = _first_vector(args.base_b)

    records = read_trial_log(args.log)
    pairs = []
    for recd in records:
        if recd.space_id != space.id:
            raise InputError(
                f"trial {recd.trial_id!r} is in space {recd.space_id!r}, "
                f"expected {space.id!r}")
        x = (None if recd.is_catch
             else reconstruct_stimulus(recd, space, base_a, base_b))
        pairs.append((recd, x))

    common = {
        "kind": "template",
        "mode": mode,
        "tool": _TOOL,
        "version": __version__,
        "config": _config_echo(args),
        "space_def": space.to_dict(),
    }
    out_records = []
    estimator = estimate_noise_only if mode == MODE_NOISE_ONLY else estimate_classic
    if args.cohort_key is None:
        acc = TemplateAccumulator.empty(space)
        for recd, x in pairs:
            if not recd.is_catch:
                acc = accumulate(acc, recd, x)
        template = estimator(acc)
        out_records.append(vector_record(
            "template", space.id, template.values,
            trials_used=template.trials_used, **common))
    else:
        if mode == MODE_CLASSIC:
            raise InputError("--cohort-key applies to noise-only estimation")
        key = {"cohort": lambda r: r.cohort,
               "observer": lambda r: r.observer_id or None}.get(args.cohort_key)
        if key is None:
            raise InputError("--cohort-key must be 'cohort' or 'observer'")
        templates, warnings = estimate_cohorts(
            ((recd, x) for recd, x in pairs if not recd.is_catch), key=key)
        for line in warnings:
            print(line, file=sys.stderr)
        if not templates:
            raise InputError("no cohort produced a template")
        for tag, template in templates.items():
            out_records.append(vector_record(
                f"template-{tag}", space.id, template.values,
                cohort_tag=tag, trials_used=template.trials_used, **common))
    write_vector_jsonl(args.out, out_records)
    print(json.dumps({"written": args.out, "templates": len(out_records)}))
    return 0


def cmd_render(args) -> int:
    _require(args, "out")
    vec, rec = _first_vector(args.template)
    if args.space is not None:
        space = _load_space(args.space)
    elif "space_def" in rec:
        space = FeatureSpace.from_dict(rec["space_def"])
    else:
        raise InputError(
            "the template record has no space_def; pass --space")
    image = render_for_labeling(vec, space, args.scale)
    text = {"noisebias-config": json.dumps(_stamp(args, {}),
                                           separators=(",", ":"))}
    image.save_png(args.out, text=text)
    print(json.dumps({"written": args.out,
                      "width": image.width, "height": image.height}))
    return 0


def cmd_fit(args) -> int:
    data = [lv.as_example()
            for lv in labeled_vectors_from_records(read_vector_jsonl(args.train))]
    if args.prior is not None:
        if args.theta is None:
            raise InputError("--theta is required with --prior")
        prior_vec, _ = _first_vector(args.prior)
        cone = ConeConstraint(l2_normalize(prior_vec).values, args.theta)
        model = fit_cone_svm(data, args.lam, cone)
    else:
        if args.theta is not None:
            raise InputError("--theta needs --prior")
        model = fit_svm(data, args.lam)
    report = model.solver_report
    payload = _stamp(args, {
        "model": model_to_dict(model),
        "solver_report": {
            "iterations": report.iterations,
            "converged": report.converged,
            "feasibility_residual": report.feasibility_residual,
            "w_norm": report.w_norm,
        },
    })
    _emit(args, json.dumps(payload, indent=2))
    return 0


def cmd_eval(args) -> int:
    if (args.model is None) == (args.template is None):
        raise InputError("pass exactly one of --model or --template")
    data = labeled_vectors_from_records(read_vector_jsonl(args.test))
    if args.model is not None:
        with open(args.model, "r", encoding="utf-8") as f:
            loaded = json.load(f)
        model = model_from_dict(loaded.get("model", loaded))
        result = eval_model(model, data)
    else:
        result = eval_template(_load_template(args.template), data)
    payload = _stamp(args, {
        "ap": result.ap, "chance": result.chance,
        "n_positive": result.n_positive, "n_total": result.n_total,
    })
    _emit(args, json.dumps(payload, indent=2))
    return 0


def _report_text(args, report: ExperimentReport) -> str:
    if args.format == "csv":
        header = "# " + json.dumps(
            _stamp(args, {}), separators=(",", ":")) + "\n"
        return header + report.to_csv()
    return json.dumps(_stamp(args, {"report": report.to_dict()}), indent=2)


def cmd_experiment(args) -> int:
    with open(args.config, "r", encoding="utf-8") as f:
        cfg = json.load(f)
    if not isinstance(cfg, dict):
        raise InputError("experiment config must be a JSON object")

    def need(key):
        if key not in cfg:
            raise InputError(f"experiment config is missing {key!r}")
        return cfg[key]

    prior = _load_template(need("prior"))
    if args.recipe == "low-data":
        train = labeled_vectors_from_records(read_vector_jsonl(need("train")))
        test = labeled_vectors_from_records(read_vector_jsonl(need("test")))
        report = run_low_data_experiment(
            prior, train, test,
            positives_per_condition=need("positives_per_condition"),
            lam=float(need("lambda")), theta=float(need("theta")),
            repeats=int(need("repeats")), seed=int(cfg.get("seed", args.seed)))
    elif args.recipe == "cross-dataset":
        report = run_cross_dataset_experiment(
            prior,
            SyntheticDatasetSpec.from_dict(need("spec_train")),
            SyntheticDatasetSpec.from_dict(need("spec_test")),
            sizes=need("sizes"), lam=float(need("lambda")),
            theta=float(need("theta")), repeats=int(need("repeats")))
    else:
        raise InputError(
            f"--recipe must be low-data or cross-dataset, got {args.recipe!r}")
    _emit(args, _report_text(args, report))
    return 0


def cmd_serve(args) -> int:
    from .server import run_server

    run_server(args.addr, args.data_dir, static_dir=args.static_dir)
    return 0


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=_TOOL,
        description="Estimate perceptual bias templates from noise-labeling "
                    "trials and use them as classifier priors.")
    parser.add_argument("--version", action="version",
                        version=f"{_TOOL} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0,
                        help="base seed for anything stochastic (default 0)")
    common.add_argument("--out", help="output file (default: stdout for JSON)")
    common.add_argument("--format", choices=("json", "csv"), default="json",
                        help="report format where applicable")

    p = sub.add_parser("simulate", parents=[common],
                       help="simulated observer labeling seeded noise")
    p.add_argument("--space", required=True,
                   help="feature-space descriptor (JSON file or inline JSON)")
    p.add_argument("--observer-template", required=True,
                   help="vector JSONL with the observer's internal template")
    p.add_argument("--sigma", type=float, default=1.0,
                   help="observer internal-noise std (default 1.0)")
    p.add_argument("--tau", type=float, default=0.0,
                   help="observer decision threshold (default 0.0)")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--observer-id", default="sim")
    p.add_argument("--cohort", default=None,
                   help="cohort tag stamped on every trial")
    p.add_argument("--base-a", default=None,
                   help="class-A base stimulus (switches to stimulus mode)")
    p.add_argument("--base-b", default=None,
                   help="class-B base stimulus (switches to stimulus mode)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", parents=[common],
                       help="estimate template(s) from a trial log")
    p.add_argument("--log", required=True)
    p.add_argument("--mode", default="noise-only",
                   help="noise-only (default) or classic")
    p.add_argument("--cohort-key", default=None,
                   help="group trials by 'cohort' or 'observer'")
    p.add_argument("--space", default=None,
                   help="space descriptor override (else taken from log meta)")
    p.add_argument("--base-a", default=None)
    p.add_argument("--base-b", default=None)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("render", parents=[common],
                       help="render a template to PNG")
    p.add_argument("--template", required=True)
    p.add_argument("--scale", type=int, default=16)
    p.add_argument("--space", default=None)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("fit", parents=[common],
                       help="fit an SVM, optionally cone-constrained to a prior")
    p.add_argument("--train", required=True,
                   help="labeled vector JSONL")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--prior", default=None,
                   help="template JSONL used as the cone axis")
    p.add_argument("--theta", type=float, default=None,
                   help="cosine bound in (0,1] (requires --prior)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", parents=[common],
                       help="average precision of a model or template")
    p.add_argument("--model", default=None, help="model JSON from fit")
    p.add_argument("--template", default=None, help="template JSONL")
    p.add_argument("--test", required=True, help="labeled vector JSONL")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("experiment", parents=[common],
                       help="run a packaged synthetic experiment")
    p.add_argument("--recipe", required=True,
                   choices=("low-data", "cross-dataset"))
    p.add_argument("--config", required=True, help="recipe config JSON file")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("serve", parents=[common],
                       help="run the HTTP labeling service")
    p.add_argument("--addr", default="127.0.0.1:8000")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--static-dir", default=None,
                   help="optional built frontend to serve at /")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as e:
        print(json.dumps({"error": str(e), "tool": _TOOL,
                          "version": __version__}), file=sys.stderr)
        return 1
    except OSError as e:
        print(json.dumps({"error": f"{e.__class__.__name__}: {e}",
                          "tool": _TOOL, "version": __version__}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
