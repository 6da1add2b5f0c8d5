"""Command-line interface: ``csrsa <subcommand> [flags]``.

Exit codes: 0 success, 1 validation failure (bad input, failed golden or
recovery check), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from . import io as csv_io
from .compare import AISConfig, bayes_factor_matrix, compare_models, max_threads
from .engine import PARAM_NAMES, CostModel, ModelParams, prediction_table, table_from_compiled
from .generators import GENERATORS, SweepSpec, builtin_contexts, get_generator
from .golden import check_golden
from .inference import (TrialData, correlate, map_estimate, mh_sample, posterior_predictive,
                        run_recovery)
from .scene import SLOTS, AlternativePolicy
from .semantics import FixedSemanticParams, LexiconSpec
from .variants import PRIORS, VARIANT_NAMES, make_variant

DEFAULT_MODEL = {"exp1": "exp1", "exp2": "exp2-fixed-none", "exp3": "exp3-empirical"}


class CLIError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Shared argument groups


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model parameters")
    g.add_argument("--x-size", type=float, default=0.8)
    g.add_argument("--x-color", type=float, default=0.99)
    g.add_argument("--x-type", type=float, default=1.0)
    g.add_argument("--beta-i", type=float, default=1.0)
    g.add_argument("--beta-t", type=float, default=1.0)
    g.add_argument("--beta-fixed", type=float, default=0.0)
    g.add_argument("--lexicon", choices=("boolean", "fixed", "empirical", "interpolated"),
                   help="default: empirical when a typicality table is available, else fixed")
    g.add_argument("--cost-kind", choices=("none", "fixed-per-slot", "empirical"), default="none")
    g.add_argument("--cost-weight", action="append", default=[], metavar="SLOT=W|W",
                   help="per-slot cost weight; a bare number applies to every slot (repeatable)")
    g.add_argument("--beta-f", type=float, default=0.0, help="frequency cost weight")
    g.add_argument("--beta-l", type=float, default=0.0, help="length cost weight")


def _add_data_flags(p: argparse.ArgumentParser, trials_required: bool = False) -> None:
    p.add_argument("--contexts", help="context JSON file (default: built-in generator contexts)")
    p.add_argument("--typicality", help="typicality CSV (utterance,object,typicality)")
    p.add_argument("--costs", help="cost CSV (utterance,neg_log_frequency,length)")
    if trials_required is not None:
        p.add_argument("--trials", required=trials_required, help="trial CSV (context_id,coded_utterance,count)")


def _add_mh_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--burn-in", type=int, default=10000)
    p.add_argument("--lag", type=int, default=10)
    p.add_argument("--samples", type=int, default=2000)


def _cost_weights(entries: Sequence[str]) -> dict[str, float]:
    out: dict[str, float] = {}
    for e in entries:
        if "=" in e:
            slot, _, raw = e.partition("=")
            slots = [slot.strip()]
        else:
            slots, raw = list(SLOTS), e
        try:
            w = float(raw)
        except ValueError:
            raise CLIError(f"--cost-weight: not a number: {raw!r}") from None
        for s in slots:
            if s not in SLOTS:
                raise CLIError(f"--cost-weight: unknown slot {s!r}; choose from {SLOTS}")
            out[s] = w
    return out


def _table(args, gen=None):
    if args.typicality:
        return csv_io.ingest_typicalities(args.typicality)
    if gen is not None and gen.table is not None:
        return gen.table()
    return None


def _cost_tables(args):
    if args.costs:
        return csv_io.ingest_costs(args.costs)
    return None, None


def _model_params(args, gen=None) -> ModelParams:
    table = _table(args, gen)
    source = args.lexicon or ("empirical" if table is not None else "fixed")
    fixed = FixedSemanticParams(args.x_size, args.x_color, args.x_type)
    lex = LexiconSpec(source, fixed_params=None if source == "boolean" else fixed, table=table,
                      beta_fixed=args.beta_fixed)
    if args.cost_kind == "fixed-per-slot":
        cm = CostModel("fixed-per-slot", _cost_weights(args.cost_weight))
    elif args.cost_kind == "empirical":
        freq, length = _cost_tables(args)
        if freq is None:
            raise CLIError("--cost-kind empirical needs --costs")
        cm = CostModel("empirical", beta_F=args.beta_f, beta_L=args.beta_l, freq_table=freq, len_table=length)
    else:
        if args.cost_weight:
            raise CLIError("--cost-weight needs --cost-kind fixed-per-slot")
        cm = CostModel()
    return ModelParams(args.beta_i, lex, cm, args.beta_t)


def _contexts(args, gen_name: str | None = None):
    """Labelled contexts from --contexts or a named generator."""
    if getattr(args, "contexts", None):
        return csv_io.read_contexts(args.contexts), None
    name = gen_name or getattr(args, "gen", None)
    if not name:
        raise CLIError("give --gen or --contexts")
    gen = get_generator(name)
    return gen.make(), gen


def _context_lookup(args) -> dict:
    if args.contexts:
        return {c.label: c.context for c in csv_io.read_contexts(args.contexts)}
    return builtin_contexts()


def _variant(args, name: str | None = None):
    freq, length = _cost_tables(args)
    return make_variant(name or args.model or DEFAULT_MODEL[args.priors], _table(args), freq, length)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_simulate(args) -> int:
    contexts, gen = _contexts(args)
    policy = gen.policy if gen is not None else _file_policy(args)
    table = prediction_table(contexts, _model_params(args, gen), policy)
    csv_io.write_predictions(table, args.out)
    return 0


def _file_policy(args):
    return AlternativePolicy(args.policy_mode, tuple(args.policy_slots.split(",")) if args.policy_slots else None,
                             tuple(args.require.split(",")) if args.require else ())


def cmd_sweep(args) -> int:
    if args.spec:
        try:
            raw = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise CLIError(f"{args.spec}: cannot read sweep spec ({exc})") from None
        spec = SweepSpec(raw.get("grid", {}), raw.get("generator", ""), raw.get("out"))
    else:
        if not args.gen or not args.grid:
            raise CLIError("sweep needs --spec or both --gen and --grid")
        grid = {}
        for entry in args.grid:
            name, _, values = entry.partition("=")
            try:
                grid[name.strip()] = [float(v) for v in values.split(",") if v.strip()]
            except ValueError:
                raise CLIError(f"--grid: bad values in {entry!r}") from None
        spec = SweepSpec(grid, args.gen, None)
    bad = [n for n in spec.grid if n not in PARAM_NAMES]
    if bad:
        raise CLIError(f"unknown sweep parameters {bad}; choose from {PARAM_NAMES}")
    gen = get_generator(spec.generator)
    base = _model_params(args, gen)
    if any(n.startswith("beta_c_") for n in spec.grid) and base.cost.kind != "fixed-per-slot":
        raise CLIError("sweeping beta_c_* needs --cost-kind fixed-per-slot")
    contexts = gen.make()
    points = spec.points()

    def run(point):
        return prediction_table(contexts, base.with_values(**point), gen.policy)

    with ThreadPoolExecutor(max_workers=max_threads()) as pool:
        tables = list(pool.map(run, points))
    names = list(spec.grid)
    rows = ((*(repr(p[n]) for n in names), r.context_id, r.utterance, f"{r.probability:.6f}", r.aggregate_class)
            for p, t in zip(points, tables) for r in t)
    out = args.out if args.out != "-" or spec.out is None else spec.out
    csv_io._write_csv(out, (*names, *csv_io.PREDICTION_COLUMNS), rows)
    return 0


def cmd_infer(args) -> int:
    if args.out == "-":
        raise CLIError("infer needs --out (the trace is written with a metadata sidecar)")
    trials = csv_io.ingest_trials(args.trials, _context_lookup(args))
    variant = _variant(args)
    trace = mh_sample(TrialData(trials, variant.policy), PRIORS[args.priors], variant,
                      n_samples=args.samples, burn_in=args.burn_in, lag=args.lag, seed=args.seed)
    csv_io.write_trace(trace, args.out)
    print(f"acceptance rate {trace.meta['acceptance_rate']:.3f}; MAP "
          + ", ".join(f"{k}={v:.4g}" for k, v in trace.sample_dict(trace.map_index).items()),
          file=sys.stderr)
    return 0


def cmd_predict(args) -> int:
    trace = csv_io.read_trace(args.trace)
    name = args.model or trace.meta.get("model")
    if not name:
        raise CLIError("trace has no model recorded; pass --model")
    variant = _variant(args, name)
    trace = replace(trace, model=variant)
    if args.trials:
        lookup = _context_lookup(args)
        data = TrialData(csv_io.ingest_trials(args.trials, lookup), variant.policy)
        table = table_from_compiled(data.compiled, data.context_ids, map_estimate(trace))
        r = correlate(table, data.empirical_table())
        print(f"r = {r:.4f} over {len(table)} cells", file=sys.stderr)
    else:
        contexts, _ = _contexts(args)
        table = posterior_predictive(trace, contexts, variant.policy)
    csv_io.write_predictions(table, args.out)
    return 0


def cmd_compare(args) -> int:
    lookup = _context_lookup(args)
    trials = csv_io.ingest_trials(args.trials, lookup)
    names = [m.strip() for m in args.models.split(",") if m.strip()]
    if not names:
        raise CLIError("--models needs at least one variant name")
    models = [(_variant(args, n), PRIORS[args.priors]) for n in names]
    cfg = AISConfig(n_chains=args.chains, n_steps=args.steps, seed=args.seed)
    rows = compare_models(trials, models, cfg)
    csv_io.write_report(rows, args.out)
    if args.bf_out:
        csv_io.write_bayes_factors(bayes_factor_matrix(rows), args.bf_out)
    return 0


def cmd_recover(args) -> int:
    contexts, gen = _contexts(args)
    variant = _variant(args)
    weights = _cost_weights(args.cost_weight)
    available = {"x_size": args.x_size, "x_color": args.x_color, "x_type": args.x_type,
                 "beta_i": args.beta_i, "beta_t": args.beta_t, "beta_fixed": args.beta_fixed,
                 "beta_F": args.beta_f, "beta_L": args.beta_l,
                 **{f"beta_c_{s}": w for s, w in weights.items()}}
    missing = [n for n in variant.free if n not in available]
    if missing:
        raise CLIError(f"generating values missing for {missing}")
    generating = {n: available[n] for n in variant.free}
    report = run_recovery(contexts, variant, PRIORS[args.priors], generating, n_trials=args.n_trials,
                          seed=args.seed, n_samples=args.samples, burn_in=args.burn_in, lag=args.lag)
    rows = ((n, repr(generating[n]), repr(lo), repr(hi), repr(report.map_values[n]), report.covered[n])
            for n, (lo, hi) in report.hdis.items())
    csv_io._write_csv(args.out, ("parameter", "generating", "hdi_lo", "hdi_hi", "map", "covered"), rows)
    print(f"predictive vs. simulated proportions: r = {report.correlation:.4f}", file=sys.stderr)
    return 0 if report.all_covered else 1


def cmd_golden(args) -> int:
    checks = check_golden()
    failed = [c for c in checks if not c.ok]
    if args.out:
        rows = ((c.cell.table, c.cell.semantics, "" if c.cell.beta_i is None else repr(c.cell.beta_i),
                 c.cell.utterance, c.cell.object, repr(c.cell.expected), f"{c.got:.6f}", c.ok)
                for c in checks)
        csv_io._write_csv(args.out, ("table", "semantics", "beta_i", "utterance", "object",
                                     "expected", "got", "ok"), rows)
    for c in failed:
        beta = f" beta_i={c.cell.beta_i:g}" if c.cell.beta_i else ""
        print(f"MISMATCH {c.cell.table}/{c.cell.semantics}{beta} {c.cell.utterance!r} -> {c.cell.object}: "
              f"expected {c.cell.expected}, got {c.got:.5f} (|d|={c.deviation:.5f})", file=sys.stderr)
    print(f"golden: {len(checks) - len(failed)}/{len(checks)} cells within tolerance", file=sys.stderr)
    return 1 if failed else 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="csrsa", description="Continuous-semantics RSA speaker models.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="-", help="output path (default: standard output)")
        p.set_defaults(func=func)
        return p

    p = add("simulate", cmd_simulate, "speaker predictions for generator or file contexts")
    p.add_argument("--gen", choices=sorted(GENERATORS))
    _add_data_flags(p, trials_required=None)
    p.add_argument("--policy-mode", default="contextual-features",
                   choices=("size-color-grid", "contextual-features", "taxonomy-levels"),
                   help="alternative policy for --contexts files")
    p.add_argument("--policy-slots", help="comma-separated slots for --contexts files")
    p.add_argument("--require", help="comma-separated slots every alternative must mention")
    _add_model_flags(p)

    p = add("sweep", cmd_sweep, "predictions over a parameter grid")
    p.add_argument("--spec", help="sweep JSON: {generator, grid: {param: [values]}, out?}")
    p.add_argument("--gen", choices=sorted(GENERATORS))
    p.add_argument("--grid", action="append", default=[], metavar="PARAM=V1,V2,...")
    _add_data_flags(p, trials_required=None)
    _add_model_flags(p)

    p = add("infer", cmd_infer, "Metropolis-Hastings posterior samples from trial data")
    _add_data_flags(p, trials_required=True)
    p.add_argument("--priors", choices=sorted(PRIORS), default="exp1")
    p.add_argument("--model", choices=VARIANT_NAMES)
    _add_mh_flags(p)

    p = add("predict", cmd_predict, "predictions at the MAP sample of a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--model", choices=VARIANT_NAMES, help="default: the model recorded with the trace")
    p.add_argument("--gen", choices=sorted(GENERATORS))
    _add_data_flags(p)
    p.set_defaults(priors="exp1")

    p = add("compare", cmd_compare, "AIS marginal likelihoods and Bayes factors")
    _add_data_flags(p, trials_required=True)
    p.add_argument("--models", required=True, help=f"comma-separated variants from {', '.join(VARIANT_NAMES)}")
    p.add_argument("--priors", choices=sorted(PRIORS), default="exp1")
    p.add_argument("--chains", type=int, default=100)
    p.add_argument("--steps", type=int, default=30000)
    p.add_argument("--bf-out", help="log10 Bayes-factor matrix CSV")

    p = add("recover", cmd_recover, "simulate data at known parameters and refit")
    p.add_argument("--gen", choices=sorted(GENERATORS), default="variation")
    _add_data_flags(p, trials_required=None)
    p.add_argument("--model", choices=VARIANT_NAMES, default="exp1-nocost")
    p.add_argument("--priors", choices=sorted(PRIORS), default="exp1")
    p.add_argument("--n-trials", type=int, default=2000)
    _add_mh_flags(p)
    _add_model_flags(p)
    p.set_defaults(x_size=0.79, x_color=0.88, beta_i=31.4)

    p = add("golden", cmd_golden, "check the reference pin-scene tables")
    p.set_defaults(out=None)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 1


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
