"""Command-line interface: gen-synthetic, fit, decode, simulate, stats.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
degeneracy, 4 fit stopped at max iterations without converging.
Environment: SPGHMM_SEED and SPGHMM_THREADS override the default seed and
thread count.
"""

import argparse
import datetime as dt
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataio import (
    PrecipDataset,
    Block,
    block_dataset,
    daily_dataset,
    load_long_csv,
    load_model,
    load_wide_csv,
    make_blocks,
    read_states_csv,
    save_model,
    write_json,
    write_locations,
    write_long_csv,
    write_states_csv,
    write_trace_csv,
)
from .errors import ConfigError, DataError, DegeneracyError, DomainError
from .generator import paper_simulation_preset, simulate, simulate_replicates
from .model import (
    CHESAPEAKE_TEMPLATES,
    SIMULATION_TEMPLATES,
    Hyperparameters,
    ModelDims,
    default_priors,
    permute_states,
    posterior_means,
)
from .stats import (
    location_stats,
    monthly_state_distribution,
    order_by_wetness,
    per_state_stats,
    replicate_rmse,
    replicate_summary,
    rmse,
)
from .svb import SvbConfig, fit_svb
from .vbem import FitConfig, fit_cavi
from .viterbi import decode

log = logging.getLogger("spghmm")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DEGENERATE, EXIT_NOT_CONVERGED = 0, 1, 2, 3, 4
PRESETS = {"simulation": SIMULATION_TEMPLATES, "chesapeake": CHESAPEAKE_TEMPLATES}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _env_seed():
    return int(os.environ.get("SPGHMM_SEED", 0))


def _env_threads():
    return int(os.environ.get("SPGHMM_THREADS", os.cpu_count() or 1))


def _now():
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


def write_manifest(out_dir, command, args, outputs, started, seed=None, config=None, extra=None):
    doc = {
        "command": command,
        "argv": sys.argv[1:],
        "config": str(config) if config else None,
        "seed": seed,
        "inputs": {k: str(v) for k, v in vars(args).items() if k in ("data", "data_b", "locations", "model", "params", "states") and v},
        "outputs": [str(p) for p in outputs],
        "started": started,
        "finished": _now(),
        "version": __version__,
    }
    if extra:
        doc.update(extra)
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(doc, indent=2), encoding="utf-8")
    return path


def _load_dataset(path, locations=None, wide=False, threshold=0.0):
    if wide:
        return load_wide_csv(path, threshold)
    return load_long_csv(path, locations, threshold)


def _by_year(ds):
    years = ds.dates.astype("datetime64[Y]").astype(int) + 1970
    blocks, start = [], 0
    for y in np.unique(years):
        n = int(np.sum(years == y))
        blocks.append(Block(int(y), start, n))
        start += n
    if not np.all(np.diff(years) >= 0):
        raise DataError("dates are not sorted")
    if len({b.length for b in blocks}) != 1:
        raise DataError("yearly blocks have unequal lengths: " + ", ".join(f"{b.block_id} ({b.length})" for b in blocks))
    return PrecipDataset(ds.values, ds.dates, ds.location_ids, ds.lat, ds.lon, blocks)


def _by_days(ds, days):
    if ds.T % days:
        raise DataError(f"T={ds.T} is not a multiple of block length {days}")
    blocks = [Block(n, n * days, days) for n in range(ds.T // days)]
    return PrecipDataset(ds.values, ds.dates, ds.location_ids, ds.lat, ds.lon, blocks)


def apply_blocking(ds, blocking, season=None):
    """blocking: None, "year", "season" or an integer block length in days."""
    if blocking in (None, "none"):
        return ds
    if blocking == "season":
        return make_blocks(ds, tuple(tuple(x) for x in (season or ((7, 1), (9, 30)))))
    if blocking == "year":
        return _by_year(ds)
    if isinstance(blocking, int) or (isinstance(blocking, str) and blocking.isdigit()):
        return _by_days(ds, int(blocking))
    raise ConfigError(f"unknown blocking {blocking!r}")


def prior_from_config(cfg):
    K, M = cfg.get("K", 3), cfg.get("M", 2)
    if not isinstance(K, int) or not isinstance(M, int) or K < 1 or M < 1:
        raise ConfigError(f"K and M must be positive integers (got K={K!r}, M={M!r})")
    return K, M


def build_prior(cfg, L):
    K, M = prior_from_config(cfg)
    p = dict(cfg.get("prior") or {})
    try:
        if "xi" in p:
            prior = Hyperparameters(**{k: np.array(p[k], dtype=float) for k in ("xi", "alpha", "zeta", "gamma_shape", "delta_rate")})
            if (prior.dims.K, prior.dims.L, prior.dims.M) != (K, L, M):
                raise ConfigError("explicit prior arrays do not match K, L, M")
            return prior
        preset = p.pop("preset", cfg.get("prior_preset"))
        if preset is not None:
            if preset not in PRESETS or (K, M) != (3, 2):
                raise ConfigError(f"prior preset {preset!r} needs K=3, M=2 and one of {sorted(PRESETS)}")
            t = PRESETS[preset]
            p.setdefault("zeta_template", t["zeta"])
            p.setdefault("gamma_template", t["gamma"])
            p.setdefault("delta_template", t["delta"])
        return default_priors(
            ModelDims(K=K, L=L, M=M),
            pi_concentration=p.get("pi_concentration", 1.0),
            row_concentration=p.get("row_concentration", 10.0),
            zeta_template=p.get("zeta_template"),
            gamma_template=p.get("gamma_template"),
            delta_template=p.get("delta_template"),
        )
    except DomainError as exc:
        raise ConfigError(str(exc)) from None


def _read_config(path):
    if not path:
        return {}
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


# -- commands ---------------------------------------------------------------


def cmd_gen_synthetic(args):
    if (args.preset is None) == (args.params is None):
        raise UsageError("give exactly one of --preset or --params")
    if (args.t is None) == (args.blocks is None):
        raise UsageError("give either --t or --blocks with --days")
    if args.blocks is not None and args.days is None:
        raise UsageError("--blocks needs --days")
    started = _now()
    seed = args.seed if args.seed is not None else _env_seed()
    if args.preset is not None:
        params = paper_simulation_preset()
        ids = None
    else:
        saved = load_model(args.params)
        params = posterior_means(saved.posterior)
        ids = saved.location_ids
    rng = np.random.default_rng(seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.t is not None:
        run = simulate(params, args.t, rng)
        ds = daily_dataset(run.data, location_ids=ids)
    else:
        run = simulate(params, args.blocks * args.days, rng, [args.days] * args.blocks)
        ds = block_dataset(run.data, args.blocks, args.days, location_ids=ids)
    outputs = [out / "data.csv", out / "locations.csv", out / "states.csv"]
    write_long_csv(ds, outputs[0])
    write_locations(ds, outputs[1])
    write_states_csv(ds.dates, ds.block_ids, run.states, outputs[2])
    write_manifest(out, "gen-synthetic", args, outputs, started, seed)
    return EXIT_OK


def cmd_fit(args):
    started = _now()
    cfg = _read_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.max_iterations is not None:
        cfg["max_iterations"] = args.max_iterations
    if args.tolerance is not None:
        cfg["elbo_rel_tolerance"] = args.tolerance
    if args.blocks is not None:
        cfg["blocks"] = args.blocks
    method = args.method or cfg.get("method", "cavi")
    seed = int(cfg.get("seed", _env_seed()))
    threads = args.threads or int(cfg.get("threads", _env_threads()))
    prior_from_config(cfg)

    ds = _load_dataset(args.data, args.locations, args.wide, float(cfg.get("dryness_threshold", 0.0)))
    blocking = cfg.get("blocks", "year" if method == "svb" else None)
    ds = apply_blocking(ds, blocking, cfg.get("season"))
    prior = build_prior(cfg, ds.L)
    fit_cfg = FitConfig(
        max_iterations=int(cfg.get("max_iterations", 1000)),
        elbo_rel_tolerance=float(cfg.get("elbo_rel_tolerance", 1e-9)),
        seed=seed,
        jitter=float(cfg.get("jitter", 0.0)),
        threads=threads,
        progress_every=int(cfg.get("progress_every", args.progress_every)),
    )
    if method == "cavi":
        post, trace = fit_cavi(ds.values, prior, fit_cfg, lengths=ds.lengths)
    elif method == "svb":
        s = dict(cfg.get("svb") or {})
        s.setdefault("seed", seed)
        post, trace = fit_svb(ds, prior, SvbConfig(**s), fit_cfg)
    else:
        raise UsageError(f"unknown method {method!r}")

    order = order_by_wetness(post)
    post = permute_states(post, order)
    prior = permute_states(prior, order)
    K, L, M = prior.dims.K, prior.dims.L, prior.dims.M
    N = len(ds.blocks) if ds.blocks else None
    D = ds.blocks[0].length if ds.blocks else None
    dims = ModelDims(K=K, L=L, M=M, T=ds.T, N=N, D=D)
    model_path = Path(args.out_model)
    model_path.parent.mkdir(parents=True, exist_ok=True)
    save_model(
        post,
        prior,
        dims,
        trace,
        model_path,
        seed=seed,
        state_order=order.tolist(),
        location_ids=ds.location_ids,
        extra={"blocking": blocking, "season": cfg.get("season")},
    )
    trace_path = Path(args.trace) if args.trace else model_path.with_suffix(".trace.csv")
    write_trace_csv(trace, trace_path)
    write_manifest(
        model_path.parent,
        "fit",
        args,
        [model_path, trace_path],
        started,
        seed,
        args.config,
        {"method": method, "converged": trace.converged, "final_elbo": trace.final_elbo},
    )
    log.info("fit %s: %d iterations, converged=%s, elbo=%.6f", method, trace.iterations_run, trace.converged, trace.final_elbo)
    return EXIT_OK if trace.converged else EXIT_NOT_CONVERGED


def _model_blocking(model_path):
    doc = json.loads(Path(model_path).read_text(encoding="utf-8"))
    return doc.get("blocking"), doc.get("season")


def cmd_decode(args):
    started = _now()
    saved = load_model(args.model)
    blocking, season = _model_blocking(args.model)
    if args.blocks is not None:
        blocking = args.blocks
    ds = _load_dataset(args.data, args.locations, args.wide)
    if ds.L != saved.dims.L:
        raise DataError(f"data has {ds.L} locations, model has {saved.dims.L}")
    ds = apply_blocking(ds, blocking, season)
    path = decode(ds.values, saved.posterior, ds.lengths, use_means=args.use_means, threads=args.threads or _env_threads())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    states_path = out / "states.csv"
    write_states_csv(ds.dates, ds.block_ids, path.states, states_path)
    K = saved.dims.K
    per_state = per_state_stats(ds.values, path.states, K)
    stats_path = out / "state_stats.json"
    write_json(
        {
            "location_ids": ds.location_ids,
            "log_score": path.log_score,
            "days_per_state": np.bincount(path.states, minlength=K),
            "states": {
                str(j + 1): {"days": s.n_days, "dry_proportion": s.dry_proportion, "mean_intensity": s.mean_intensity}
                for j, s in enumerate(per_state)
            },
        },
        stats_path,
    )
    write_manifest(out, "decode", args, [states_path, stats_path], started)
    return EXIT_OK


def cmd_simulate(args):
    if (args.t is None) == (args.blocks is None):
        raise UsageError("give either --t or --blocks with --days")
    if args.blocks is not None and args.days is None:
        raise UsageError("--blocks needs --days")
    if args.replicates < 1:
        raise UsageError("--replicates must be >= 1")
    started = _now()
    seed = args.seed if args.seed is not None else _env_seed()
    saved = load_model(args.model)
    params = posterior_means(saved.posterior)
    ids = saved.location_ids
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    T = args.t if args.t is not None else args.blocks * args.days
    lengths = None if args.t is not None else [args.days] * args.blocks

    if args.replicates == 1:
        run = simulate(params, T, np.random.default_rng(seed), lengths)
        ds = daily_dataset(run.data, location_ids=ids) if lengths is None else block_dataset(run.data, args.blocks, args.days, location_ids=ids)
        outputs = [out / "data.csv", out / "states.csv"]
        write_long_csv(ds, outputs[0])
        write_states_csv(ds.dates, ds.block_ids, run.states, outputs[1])
    else:
        summary = replicate_summary(simulate_replicates(params, T, args.replicates, seed, lengths))
        ids = ids or [f"L{i + 1}" for i in range(saved.dims.L)]
        rep_path = out / "replicate_stats.csv"
        with open(rep_path, "w", encoding="utf-8") as fh:
            fh.write("replicate,location_id,dry_proportion,mean_intensity\n")
            for r in range(summary["replicates"]):
                for l, loc in enumerate(ids):
                    fh.write(f"{r},{loc},{summary['dry_proportion'][r, l]!r},{summary['mean_intensity'][r, l]!r}\n")
        doc = {
            "replicates": summary["replicates"],
            "T": T,
            "location_ids": ids,
            "quantile_levels": summary["quantile_levels"],
            "dry_proportion": {"mean": np.nanmean(summary["dry_proportion"], axis=0), "quantiles": summary["dry_quantiles"]},
            "mean_intensity": {"mean": np.nanmean(summary["mean_intensity"], axis=0), "quantiles": summary["intensity_quantiles"]},
        }
        if args.data:
            ref = location_stats(_load_dataset(args.data, args.locations, args.wide).values)
            doc["training"] = {"dry_proportion": ref.dry_proportion, "mean_intensity": ref.mean_intensity}
            doc["rmse"] = {
                "dry_proportion": replicate_rmse(summary["dry_proportion"], ref.dry_proportion),
                "mean_intensity": replicate_rmse(summary["mean_intensity"], ref.mean_intensity),
            }
        sum_path = out / "summary.json"
        write_json(doc, sum_path)
        outputs = [rep_path, sum_path]
    write_manifest(out, "simulate", args, outputs, started, seed)
    return EXIT_OK


def cmd_stats(args):
    started = _now()
    a = _load_dataset(args.data, args.locations, args.wide)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sa = location_stats(a.values)
    doc = {
        "location_ids": a.location_ids,
        "n_days": sa.n_days,
        "dry_proportion": sa.dry_proportion,
        "mean_intensity": sa.mean_intensity,
    }
    outputs = []
    if args.data_b:
        b = _load_dataset(args.data_b, args.locations_b, args.wide)
        if list(b.location_ids) != list(a.location_ids):
            raise DataError("datasets A and B have different location sets")
        sb = location_stats(b.values)
        ok = ~(np.isnan(sa.mean_intensity) | np.isnan(sb.mean_intensity))
        doc["b"] = {"n_days": sb.n_days, "dry_proportion": sb.dry_proportion, "mean_intensity": sb.mean_intensity}
        doc["rmse"] = {
            "dry_proportion": rmse(sa.dry_proportion, sb.dry_proportion),
            "mean_intensity": rmse(sa.mean_intensity[ok], sb.mean_intensity[ok]) if ok.any() else None,
            "mean_daily_precip": rmse(a.values.mean(axis=0), b.values.mean(axis=0)),
        }
        scatter = out / "scatter.csv"
        with open(scatter, "w", encoding="utf-8") as fh:
            fh.write("location_id,dry_a,dry_b,intensity_a,intensity_b,mean_a,mean_b\n")
            ma, mb = a.values.mean(axis=0), b.values.mean(axis=0)
            for l, loc in enumerate(a.location_ids):
                fh.write(
                    f"{loc},{sa.dry_proportion[l]!r},{sb.dry_proportion[l]!r},"
                    f"{sa.mean_intensity[l]!r},{sb.mean_intensity[l]!r},{ma[l]!r},{mb[l]!r}\n"
                )
        outputs.append(scatter)
    if args.states:
        dates, _, states = read_states_csv(args.states)
        if len(states) != a.T:
            raise DataError(f"states file has {len(states)} rows, data has {a.T}")
        if not np.array_equal(dates, a.dates):
            raise DataError("states file dates do not match the data dates")
        K = args.K or int(states.max()) + 1
        per_state = per_state_stats(a.values, states, K)
        doc["per_state"] = {
            str(j + 1): {"days": s.n_days, "dry_proportion": s.dry_proportion, "mean_intensity": s.mean_intensity}
            for j, s in enumerate(per_state)
        }
        months, table = monthly_state_distribution(states, dates, K)
        doc["monthly_state_percent"] = {
            "months": months,
            "states": {str(j + 1): table[j] for j in range(K)},
        }
        per_loc = out / "per_state_locations.csv"
        with open(per_loc, "w", encoding="utf-8") as fh:
            fh.write("state,location_id,dry_proportion,mean_intensity\n")
            for j, s in enumerate(per_state):
                for l, loc in enumerate(a.location_ids):
                    fh.write(f"{j + 1},{loc},{s.dry_proportion[l]!r},{s.mean_intensity[l]!r}\n")
        outputs.append(per_loc)
    stats_path = out / "stats.json"
    write_json(doc, stats_path)
    outputs.insert(0, stats_path)
    write_manifest(out, "stats", args, outputs, started)
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def build_parser():
    p = _Parser(prog="spghmm", description="HMM stochastic precipitation generator with variational Bayes fitting")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def data_args(sp, required=True):
        sp.add_argument("--data", required=required, help="long CSV date,location_id,precip_mm")
        sp.add_argument("--locations", help="locations.csv (default: beside --data)")
        sp.add_argument("--wide", action="store_true", help="--data is a wide date,<id>... matrix")

    g = sub.add_parser("gen-synthetic", help="simulate a dataset from known parameters")
    g.add_argument("--preset", choices=["paper"])
    g.add_argument("--params", help="model JSON whose posterior means are used")
    g.add_argument("--t", type=int)
    g.add_argument("--blocks", type=int)
    g.add_argument("--days", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_synthetic)

    f = sub.add_parser("fit", help="fit the HMM by CAVI or SVB")
    data_args(f)
    f.add_argument("--config", help="JSON run configuration")
    f.add_argument("--method", choices=["cavi", "svb"])
    f.add_argument("--out-model", required=True)
    f.add_argument("--trace", help="ELBO trace CSV (default: <model>.trace.csv)")
    f.add_argument("--blocks", help="none, year, season or a block length in days")
    f.add_argument("--seed", type=int)
    f.add_argument("--max-iterations", type=int)
    f.add_argument("--tolerance", type=float)
    f.add_argument("--threads", type=int)
    f.add_argument("--progress-every", type=int, default=50)
    f.set_defaults(func=cmd_fit)

    d = sub.add_parser("decode", help="Viterbi state path and per-state statistics")
    data_args(d)
    d.add_argument("--model", required=True)
    d.add_argument("--out", required=True)
    d.add_argument("--blocks", help="override the model's blocking")
    d.add_argument("--use-means", action="store_true", help="decode with posterior means")
    d.add_argument("--threads", type=int)
    d.set_defaults(func=cmd_decode)

    s = sub.add_parser("simulate", help="synthetic data from a fitted model")
    s.add_argument("--model", required=True)
    s.add_argument("--replicates", type=int, default=1)
    s.add_argument("--t", type=int)
    s.add_argument("--blocks", type=int)
    s.add_argument("--days", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    data_args(s, required=False)
    s.set_defaults(func=cmd_simulate)

    st = sub.add_parser("stats", help="location statistics and A-vs-B comparison")
    data_args(st)
    st.add_argument("--data-b")
    st.add_argument("--locations-b")
    st.add_argument("--states", help="states CSV from decode")
    st.add_argument("--K", type=int)
    st.add_argument("--out", required=True)
    st.set_defaults(func=cmd_stats)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.verbose:
        logging.getLogger("spghmm").setLevel(logging.INFO)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"spghmm: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"spghmm: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DegeneracyError as exc:
        print(f"spghmm: numerical degeneracy: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (DataError, DomainError, OSError) as exc:
        print(f"spghmm: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
