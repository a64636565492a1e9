"""Command-line front end.

    clickless simulate --config cfg.json --out DIR
    clickless estimate --config cfg.json [--tally DIR/tally.csv | --exact] --out DIR
    clickless pipeline --config cfg.json --out DIR [--seed N] [--exact]

Exit codes: 0 success, 1 usage or config error, 2 physics validation,
3 numerical failure. Failures print a one-line JSON diagnostic on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, core, entanglement, estimator, io, optics
from .config import ExperimentConfig, load_config
from .errors import ClicklessError, ConfigError, NonzeroDisplacement

log = logging.getLogger("clickless")


class UsageError(ConfigError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- experiment plumbing --------------------------------------------------

def _schedule(cfg: ExperimentConfig) -> optics.SettingSchedule:
    return optics.SettingSchedule.from_grid(cfg.transmittances, cfg.shots, cfg.efficiency, cfg.seed)


def _sub_experiments(cfg: ExperimentConfig):
    return entanglement.sub_experiments(cfg.state, cfg.transmittances, cfg.multimode_transmittances,
                                        cfg.weights)


def simulate(cfg: ExperimentConfig) -> optics.TallyTable:
    """Seeded finite-shot tallies for every setting the configured pipeline needs."""
    if cfg.pipeline == "negativity":
        return entanglement.simulate_sub_experiments(_sub_experiments(cfg), cfg.shots, cfg.seed, cfg.efficiency)
    return optics.simulate_tallies(cfg.detected_state(), _schedule(cfg))


def _expected_layout(cfg: ExperimentConfig) -> list[tuple]:
    if cfg.pipeline == "negativity":
        return [(f"{e.label}#{j}", t) for e in _sub_experiments(cfg) for j, t in enumerate(e.transmittances)]
    return [(s.label, s.T) for s in _schedule(cfg)]


def check_tally(cfg: ExperimentConfig, table: optics.TallyTable) -> None:
    """Reject tallies whose labels or transmittances differ from the configured schedule."""
    want = _expected_layout(cfg)
    got = [(r.label, r.T) for r in table.rows]
    if len(got) != len(want):
        raise ConfigError(f"tally has {len(got)} rows, the {cfg.pipeline} schedule needs {len(want)}")
    for j, (g, w) in enumerate(zip(got, want)):
        if g != w:
            raise ConfigError(f"tally CSV line {j + 2}: expected setting {w[0]} at T={w[1]!r}, "
                              f"got {g[0]} at T={g[1]!r}")


def _exact_single(cfg: ExperimentConfig):
    state = cfg.detected_state()
    t = np.asarray(cfg.transmittances)
    p = [optics.setting_probability(state, optics.DetectorSetting(float(x), cfg.efficiency)) for x in t]
    if cfg.pipeline == "single-mode":
        if np.max(np.abs(state.xi)) > 1e-10:
            raise NonzeroDisplacement("single-mode inversion assumes zero displacement; enable two_copy")
        return estimator.estimate_single_mode(p, cfg.efficiency * t)
    return estimator.estimate_multimode(p, cfg.efficiency * t, state.mode_count)


def _reference(cfg: ExperimentConfig) -> dict:
    """Ground-truth invariants of the configured state, for comparison."""
    if cfg.pipeline == "negativity":
        dets = entanglement.determinants(cfg.state.gamma)
        _, zeta2 = entanglement.symplectic_pt_spectrum(dets)
        return {"determinants": dets.to_dict(), "zeta2": zeta2,
                "log_negativity": entanglement.log_negativity(zeta2)}
    g = cfg.detected_state().gamma
    ref = {"lambda": core.squeezing_variance(g), "purity": core.purity(g),
           "tr_gamma": float(np.trace(g)), "det_gamma": float(np.linalg.det(g))}
    if cfg.pipeline == "multimode":
        ref["f"] = core.charpoly_coefficients(g)
    return ref


def estimate(cfg: ExperimentConfig, source=None) -> dict:
    """Estimates from exact probabilities (``source=None``), a tally table or observations."""
    if cfg.pipeline == "negativity":
        if source is None:
            rep = entanglement.measure_negativity_pipeline(
                cfg.state, None, cfg.seed, cfg.efficiency, cfg.transmittances,
                cfg.multimode_transmittances, cfg.weights, cfg.sigmas, strict=False)
        else:
            rep = entanglement.estimate_negativity_from_tally(source, cfg.sigmas, strict=False)
        return rep.to_dict()
    if source is None:
        est = _exact_single(cfg)
    else:
        if cfg.pipeline == "single-mode" and not cfg.two_copy and np.max(np.abs(cfg.state.xi)) > 1e-10:
            raise NonzeroDisplacement("single-mode inversion assumes zero displacement; enable two_copy")
        est = estimator.estimate_from_tally(source, cfg.state.mode_count)
    return est.to_dict()


def build_report(cfg: ExperimentConfig, source=None, kind: str = "exact") -> dict:
    tallies = io.tally_records(source) if isinstance(source, optics.TallyTable) else None
    return {
        "library_version": __version__,
        "convention": core.CONVENTION,
        "config_hash": cfg.config_hash,
        "config": cfg.raw,
        "seed": cfg.seed,
        "pipeline": cfg.pipeline,
        "source": kind,
        "estimates": estimate(cfg, source),
        "reference": _reference(cfg),
        "tallies": tallies,
    }


def _meta(cfg: ExperimentConfig, table: optics.TallyTable) -> dict:
    return {
        "library_version": __version__,
        "convention": core.CONVENTION,
        "config_hash": cfg.config_hash,
        "seed": cfg.seed,
        "pipeline": cfg.pipeline,
        "rows": len(table),
        "columns": list(io.TALLY_COLUMNS),
    }


# -- commands -------------------------------------------------------------

def _out(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    table = simulate(cfg)
    out = _out(args.out)
    io.write_tally_csv(table, out / "tally.csv")
    (out / "tally_meta.json").write_text(io.dumps(_meta(cfg, table)), encoding="utf-8")
    log.info("wrote %d tally rows to %s", len(table), out)
    return 0


def cmd_estimate(args) -> int:
    cfg = load_config(args.config)
    if args.exact:
        report = build_report(cfg)
    elif args.tally is None:
        raise UsageError("estimate needs --tally <file> or --exact")
    elif str(args.tally).endswith(".json"):
        report = build_report(cfg, io.read_observations_json(args.tally), "observations")
    else:
        table = io.read_tally_csv(args.tally, cfg.seed)
        check_tally(cfg, table)
        report = build_report(cfg, table, "tally")
    (_out(args.out) / "report.json").write_text(io.dumps(report), encoding="utf-8")
    return 0


def cmd_pipeline(args) -> int:
    cfg = load_config(args.config, seed=args.seed)
    out = _out(args.out)
    if args.exact:
        report = build_report(cfg)
    else:
        table = simulate(cfg)
        io.write_tally_csv(table, out / "tally.csv")
        report = build_report(cfg, table, "tally")
    (out / "report.json").write_text(io.dumps(report), encoding="utf-8")
    return 0


def _u64(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="clickless", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"clickless {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="draw seeded no-click tallies")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="invert tallies (or exact probabilities) into invariants")
    p.add_argument("--config", required=True)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--tally", help="tally CSV, or observations JSON (.json)")
    src.add_argument("--exact", action="store_true", help="use exact probabilities (infinite statistics)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("pipeline", help="simulate and estimate in one run")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=_u64, default=None, help="override schedule.seed")
    p.add_argument("--exact", action="store_true", help="skip sampling")
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except ClicklessError as exc:
        diag = {"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
        print(json.dumps(diag), file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
