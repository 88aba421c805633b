"""Command-line front end.

Every subcommand prints a CSV table (curves) or a JSON document (scalar
reports) to ``--out`` or stdout. Errors exit with the code carried by the
exception: 1 parameter domain, 2 numerical convergence, 3 configuration or
command-line usage.
"""
import argparse
import itertools
import logging
import os
import sys
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from . import __version__
from .distributed import CorrelatedChannelSpec, random_squeezed_states, verify_reduction
from .exceptions import (
    ConfigError,
    HaloscopeQfiError,
    IncompatibleStrategyError,
    TruncationError,
)
from .figures import FIGURES, figure_data
from .fock_oracle import (
    apply_channel_fock,
    channel_family,
    fock_from_source,
    qfi_finite_diff,
    squeeze_fock,
    tmsv_output_counts,
)
from .gaussian_core import ChannelParams, SourceKind, SourceSpec
from .haloscope import (
    CavityParams,
    Engineering,
    STRATEGIES,
    fisher_spectrum,
    optimize_coupling,
    strategy,
    total_fisher_closed,
)
from .measurements import (
    fi_bell,
    fi_direct_pd_tmsv,
    fi_from_distribution,
    fi_homodyne_sv,
    fi_homodyne_vacuum,
    fi_photon_counting_vacuum,
    mle_estimate,
    nulled_sv_distribution,
    nulled_sv_fi,
    nulled_tmsv_distribution,
    nulled_tmsv_fi,
    photon_distribution_single,
    sample_counts,
    tmsv_nulling_angle,
)
from .qfi_closed_form import (
    qfi_sv,
    qfi_sv_noisy,
    qfi_tmsv,
    qfi_tmsv_noisy,
    qfi_vacuum_limit,
    ub_combined,
    ub_ue,
)
from .utils import (
    cfg,
    config_override,
    linear_to_db,
    load_config,
    logger,
    make_grid,
    merge_config,
    parallel_map,
    parse_axis,
    parse_gain,
    to_csv,
    to_json,
)

ORACLE_GRID = dict(kappa=(0.3, 0.6, 1.0), n_b=(1e-3, 0.1, 0.5), gain=(1.0, 4.0, 10.0))
ORACLE_QFI_TOLERANCE = 1e-3
ORACLE_COUNTS_TOLERANCE = 1e-8
ORACLE_NORM_TOLERANCE = 1e-9
DISTRIBUTED_MODES = (2, 3, 5)
DEFAULT_NB = 1e-3

FI_DEFAULT_SOURCE = {
    "homodyne": "sv",
    "bell": "tmsv",
    "nulling": "sv",
    "photon-counting": "vacuum",
    "direct-pd": "tmsv",
}


@dataclass
class RunConfig:
    """Resolved run settings: defaults, then ``--config``, then flags."""

    strategies: Tuple[str, ...]
    engineering: Engineering
    cavity: dict
    omega: dict
    gain_dB: dict
    gm_ratio_dB: dict
    output_format: str = "csv"
    seed: Optional[int] = None
    threads: int = 0
    optimize: dict = field(default_factory=dict)
    samples: int = 10000
    replications: int = 200
    numerics: dict = field(default_factory=dict)
    measurements: dict = field(default_factory=dict)
    oracle: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in self.strategies:
            if name not in STRATEGIES:
                raise ConfigError(
                    f"unknown strategy {name!r}; choose from {', '.join(STRATEGIES)}"
                )
        for grid in (self.omega, self.gain_dB, self.gm_ratio_dB):
            make_grid(grid)
        if self.output_format not in ("csv", "json"):
            raise ConfigError(f"unknown output format {self.output_format!r}")

    @classmethod
    def from_args(cls, args):
        tree = cfg
        if args.config:
            user = load_config(*os.path.split(os.path.abspath(args.config)))
            tree = merge_config(cfg, user.get("haloscope_qfi", user))
        run, cavity = tree["run"], dict(tree["cavity"])
        overrides = dict(
            temp_mK=args.temp_mK, fc_GHz=args.fc_GHz, ga_ratio=args.ga_ratio, gm_ratio=args.gm_ratio
        )
        cavity.update({k: v for k, v in overrides.items() if v is not None})
        cavity["n_t"] = args.nt if args.nt else None
        omega = tree["sweeps"]["omega"]
        if args.omega_grid:
            omega = parse_axis(args.omega_grid)
        optimize = dict(tree["optimize"])
        if args.gm_range:
            optimize["gm_range"] = _gm_range(args.gm_range)
        strategies = tuple(s.strip() for s in (args.strategy or "vac-hom").split(","))
        return cls(
            strategies=strategies,
            engineering=Engineering.parse(args.engineering),
            cavity=cavity,
            omega=omega,
            gain_dB=tree["sweeps"]["gain_dB"],
            gm_ratio_dB=tree["sweeps"]["gm_ratio_dB"],
            output_format=args.format or run["output_format"],
            seed=args.seed if args.seed is not None else run["seed"],
            threads=args.threads if args.threads is not None else run["threads"],
            optimize=optimize,
            samples=args.samples or run["samples"],
            replications=args.replications or run["replications"],
            numerics=dict(tree["numerics"]),
            measurements=dict(tree["measurements"]),
            oracle=dict(tree["oracle"]),
        )

    def overrides(self):
        """Config sections the computation modules read while a command runs."""
        return dict(numerics=self.numerics, measurements=self.measurements, oracle=self.oracle)

    def cavity_params(self, gm_ratio=None):
        c = self.cavity
        return CavityParams.from_ratios(
            c["gm_ratio"] if gm_ratio is None else gm_ratio,
            c["ga_ratio"],
            gamma_l=c["gamma_l"],
            temp=c["temp_mK"] * 1e-3,
            omega_c=2.0 * np.pi * c["fc_GHz"] * 1e9,
            n_t_override=c["n_t"],
        )

    def strategy_specs(self, gain):
        try:
            return [strategy(name, self.engineering, gain) for name in self.strategies]
        except IncompatibleStrategyError as e:
            raise ConfigError(str(e))


def _gain(args):
    return parse_gain(args.G) if args.G is not None else 1.0


def _gm_range(text):
    try:
        lo, hi = (float(v) for v in str(text).split(":"))
    except ValueError:
        raise ConfigError(f"coupling range {text!r} is not lo:hi")
    if not 0 < lo < hi:
        raise ConfigError(f"coupling range needs 0 < lo < hi, got {text!r}")
    return [lo, hi]


def _nb(args):
    return DEFAULT_NB if args.nb is None else args.nb


def _emit(data, args, fmt=None):
    """CSV for frames (unless the format is ``json``), JSON for everything else."""
    if isinstance(data, pd.DataFrame):
        if (args.format or fmt) == "json":
            text = to_json(data.to_dict(orient="records"))
        else:
            text = to_csv(data)
    else:
        text = to_json(data)
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def cmd_qfi(args):
    gain, kappa, n_b, n_t = _gain(args), args.kappa, _nb(args), args.nt
    kind = SourceKind.parse(args.source)
    source = SourceSpec(kind, gain if kind is not SourceKind.VACUUM else 1.0, n_t)
    if kind is SourceKind.VACUUM:
        result = qfi_vacuum_limit(kappa * n_t + n_b)
    elif n_t > 0:
        noisy = qfi_sv_noisy if kind is SourceKind.SQUEEZED_VACUUM else qfi_tmsv_noisy
        result = noisy(source.gain, n_t, kappa, n_b)
    else:
        pure = qfi_sv if kind is SourceKind.SQUEEZED_VACUUM else qfi_tmsv
        result = pure(source.n_squeeze, kappa, n_b)
    report = dict(
        source=kind.value,
        gain=source.gain,
        n_s=source.n_s,
        kappa=kappa,
        n_b=n_b,
        n_t=n_t,
        qfi=result.value,
        method=result.method.value,
        vacuum_limit=qfi_vacuum_limit(n_b).value,
        ub_ue=ub_ue(source.n_s, kappa, n_b).value,
        ub_combined=ub_combined(source.n_s, kappa, n_b).value,
    )
    _emit(report, args)
    return 0


def cmd_fi(args):
    gain, kappa, n_b, n_t = _gain(args), args.kappa, _nb(args), args.nt
    receiver = args.receiver or "homodyne"
    if receiver not in FI_DEFAULT_SOURCE:
        raise IncompatibleStrategyError(
            f"unknown receiver {receiver!r}; choose from {', '.join(FI_DEFAULT_SOURCE)}"
        )
    kind = SourceKind.parse(args.source or FI_DEFAULT_SOURCE[receiver])
    n_s = SourceSpec(kind, gain if kind is not SourceKind.VACUUM else 1.0).n_squeeze
    dispatch = {
        ("homodyne", SourceKind.VACUUM): lambda: fi_homodyne_vacuum(n_b, n_t, kappa),
        ("homodyne", SourceKind.SQUEEZED_VACUUM): lambda: fi_homodyne_sv(gain, kappa, n_b, n_t),
        ("bell", SourceKind.TMSV): lambda: fi_bell(gain, kappa, n_b, n_t),
        ("nulling", SourceKind.SQUEEZED_VACUUM): lambda: nulled_sv_fi(
            gain, kappa, n_b, args.n_max, n_t
        ),
        ("nulling", SourceKind.TMSV): lambda: nulled_tmsv_fi(n_s, kappa, n_b, args.n_max, n_t),
        ("photon-counting", SourceKind.VACUUM): lambda: fi_photon_counting_vacuum(
            n_b, n_t, kappa
        ),
        ("direct-pd", SourceKind.TMSV): lambda: fi_direct_pd_tmsv(
            n_s, kappa, n_b, args.n_max, cutoff=args.cutoff
        ),
    }
    try:
        compute = dispatch[(receiver, kind)]
    except KeyError:
        raise IncompatibleStrategyError(
            f"{receiver} receiver cannot read out a {kind.value} source"
        )
    result = compute()
    report = dict(
        receiver=receiver,
        source=kind.value,
        gain=gain,
        kappa=kappa,
        n_b=n_b,
        n_t=n_t,
        fi=result.value,
        error=result.error,
        flags=list(result.flags),
    )
    if "squeeze" in result.params:
        report["squeeze"] = result.params["squeeze"]
    _emit(report, args)
    return 0


def cmd_spectrum(args):
    run = args.run
    cavity = run.cavity_params()
    specs = run.strategy_specs(_gain(args))

    def row(omega):
        out = dict(omega=omega)
        for spec in specs:
            out[spec.name] = fisher_spectrum(spec, cavity, omega * cavity.gamma_l).value
        return out

    frame = pd.DataFrame(parallel_map(row, make_grid(run.omega), run.threads))
    _emit(frame, args, run.output_format)
    return 0


def cmd_scanrate(args):
    run = args.run
    cavity = run.cavity_params()
    rows = []
    for spec in run.strategy_specs(_gain(args)):
        result = total_fisher_closed(spec, cavity)
        rows.append(
            dict(
                strategy=spec.name,
                engineering=spec.engineering.value,
                gain=spec.gain,
                gm_ratio=result.gm_ratio,
                n_t=cavity.n_t,
                total=result.total,
                method=result.method,
                flags=";".join(result.flags),
            )
        )
    _emit(pd.DataFrame(rows), args, run.output_format)
    return 0


def cmd_optimize(args):
    run = args.run
    cavity = run.cavity_params()
    rows = []
    for spec in run.strategy_specs(_gain(args)):
        result = optimize_coupling(
            spec,
            cavity,
            gm_range=run.optimize["gm_range"],
            grid_points=run.optimize["grid_points"],
            dense_points=run.optimize["dense_points"],
            threads=run.threads,
        )
        rows.append(
            dict(
                strategy=spec.name,
                engineering=spec.engineering.value,
                gain=spec.gain,
                optimum_coupling=result.optimum_coupling,
                total=result.total,
                method=result.method,
                flags=";".join(result.flags),
            )
        )
    _emit(pd.DataFrame(rows), args, run.output_format)
    return 0


def cmd_figure(args):
    params = dict(
        n_b=args.nb,
        gain_db=float(linear_to_db(parse_gain(args.G))) if args.G is not None else None,
        temp_mK=args.temp_mK,
        fc_GHz=args.fc_GHz,
        ga_ratio=args.ga_ratio,
        n_t=args.nt or None,
        n_max=args.n_max,
        threads=args.threads,
    )
    params = {k: v for k, v in params.items() if v is not None}
    if args.omega_grid:
        params["omega"] = parse_axis(args.omega_grid)
    if args.gm_range:
        params["gm_range"] = _gm_range(args.gm_range)
    _emit(figure_data(args.figure, params), args)
    return 0


def _oracle_single_mode(cutoff):
    rows = []
    grid = itertools.product(ORACLE_GRID["kappa"], ORACLE_GRID["n_b"], ORACLE_GRID["gain"])
    for kappa, n_b, gain in grid:
        for kind, closed in ((SourceKind.SQUEEZED_VACUUM, qfi_sv), (SourceKind.TMSV, qfi_tmsv)):
            spec = SourceSpec(kind, gain)
            row = dict(check="qfi", source=kind.value, kappa=kappa, n_b=n_b, gain=gain)
            expected = closed(spec.n_squeeze, kappa, n_b).value
            try:
                family = channel_family(spec, kappa, cutoff=cutoff)
                got = qfi_finite_diff(family, n_b).value
            except TruncationError as e:
                row.update(passed=False, deviation=None, tail_mass=e.tail_mass, cutoff=e.cutoff)
                rows.append(row)
                continue
            deviation = abs(got / expected - 1.0)
            row.update(
                expected=expected,
                oracle=got,
                deviation=deviation,
                passed=bool(deviation <= ORACLE_QFI_TOLERANCE),
            )
            rows.append(row)
    return rows


def _oracle_counts(cutoff, two_mode, n_max):
    """Nulled count laws against the explicit Fock pipeline."""
    kappa, n_b, gain = 0.6, 1e-3, 10.0
    spec = SourceSpec(SourceKind.TMSV if two_mode else SourceKind.SQUEEZED_VACUUM, gain)
    ch = ChannelParams(kappa, n_b)
    row = dict(check="counts", source=spec.kind.value, kappa=kappa, n_b=n_b, gain=gain)
    try:
        if two_mode:
            n_max = n_max or 40
            formula = nulled_tmsv_distribution(spec.n_squeeze, kappa, n_b, n_max).probs
            oracle, _ = tmsv_output_counts(
                spec.n_squeeze,
                ch,
                r2=tmsv_nulling_angle(spec.n_squeeze, kappa),
                cutoff=cutoff,
                n_max=n_max,
            )
        else:
            source = fock_from_source(spec, cutoff=cutoff, max_cutoff=cutoff)
            rho = apply_channel_fock(
                source, ch, max_cutoff=None if cutoff is None else source.cutoff
            )
            oracle = squeeze_fock(rho, -spec.r, cutoff=2 * rho.cutoff).photon_distribution()
            n_max = min(n_max or oracle.size - 1, oracle.size - 1)
            oracle = oracle[:n_max + 1]
            formula = nulled_sv_distribution(gain, kappa, n_b, n_max).probs
    except TruncationError as e:
        row.update(passed=False, deviation=None, tail_mass=e.tail_mass, cutoff=e.cutoff)
        return row
    deviation = float(np.abs(formula - oracle).max())
    norm_error = abs(float(formula.sum()) - 1.0)
    row.update(
        deviation=deviation,
        norm_error=norm_error,
        passed=bool(deviation <= ORACLE_COUNTS_TOLERANCE and norm_error <= ORACLE_NORM_TOLERANCE),
    )
    return row


def cmd_oracle_check(args):
    """Closed forms and count laws against the Fock-basis oracle; exit 2 on any failure."""
    if args.two_mode:
        rows = [_oracle_counts(args.cutoff, True, args.n_max)]
    else:
        rows = _oracle_single_mode(args.cutoff) + [_oracle_counts(args.cutoff, False, args.n_max)]
    failed = [row for row in rows if not row["passed"]]
    deviations = [row["deviation"] for row in rows if row.get("deviation") is not None]
    report = dict(
        passed=not failed,
        n_checks=len(rows),
        n_failed=len(failed),
        worst_deviation=max(deviations, default=None),
        checks=rows,
    )
    _emit(report, args)
    if failed:
        logger.warning(f"oracle check failed on {len(failed)} of {len(rows)} points")
        return 2
    return 0


def _sample_model(args):
    gain, kappa, n_t = _gain(args), args.kappa, args.nt
    kind = SourceKind.parse(args.source or "vacuum")
    if kind is SourceKind.VACUUM:
        n_max = args.n_max or cfg["measurements"]["n_max"]
        return lambda x: photon_distribution_single(
            (kappa * n_t + x + 0.5) * np.eye(2), n_max
        )
    if kind is SourceKind.SQUEEZED_VACUUM:
        return lambda x: nulled_sv_distribution(gain, kappa, x, args.n_max, n_t)
    n_s = SourceSpec(kind, gain).n_squeeze
    return lambda x: nulled_tmsv_distribution(n_s, kappa, x, args.n_max, n_t)


def cmd_sample(args):
    """Replicated maximum-likelihood estimates of ``n_b`` from simulated counts."""
    run = args.run
    if run.seed is None:
        raise ConfigError("sampling needs an explicit --seed (or run.seed in the config)")
    n_b = _nb(args)
    n_samples, replications = run.samples, run.replications
    model = _sample_model(args)
    truth = model(n_b)
    fisher = fi_from_distribution(model, n_b).value
    bracket = (n_b / 20.0, n_b * 20.0)
    seeds = np.random.SeedSequence(int(run.seed)).spawn(replications)

    def replicate(seed):
        samples = sample_counts(truth, n_samples, seed)
        return mle_estimate(samples, model, bracket)

    results = parallel_map(replicate, seeds, run.threads)
    frame = pd.DataFrame(
        dict(
            replication=np.arange(replications),
            estimate=[r.estimate for r in results],
            log_likelihood=[r.log_likelihood for r in results],
            curvature=[r.curvature for r in results],
            flags=[";".join(r.flags) for r in results],
        )
    )
    estimates = frame["estimate"].to_numpy()
    crb = 1.0 / (n_samples * fisher)
    variance = float(np.var(estimates, ddof=1)) if replications > 1 else 0.0
    summary = dict(
        source=args.source or "vacuum",
        n_b=n_b,
        seed=run.seed,
        samples=n_samples,
        replications=replications,
        fisher_information=fisher,
        crb=crb,
        mean_estimate=float(estimates.mean()),
        empirical_variance=variance,
        variance_ratio=variance / crb,
    )
    if args.out:
        with open(args.out, "w") as f:
            f.write(to_csv(frame))
        sys.stdout.write(to_json(summary) + "\n")
    else:
        sys.stdout.write(to_csv(frame))
        sys.stdout.write(to_json(summary) + "\n")
    return 0


def cmd_distributed_check(args):
    modes = [int(m) for m in args.modes.split(",")] if args.modes else DISTRIBUTED_MODES
    seed = 0 if args.seed is None else args.seed
    n_states = args.samples or 8
    source = SourceSpec(SourceKind.TMSV, _gain(args))
    reports = []
    for m in modes:
        spec = CorrelatedChannelSpec(m, ChannelParams(args.kappa, _nb(args)))
        states = random_squeezed_states(m, n_states, seed)
        reports.append(verify_reduction(spec, states, n_s=source.n_s).to_dict())
    passed = all(r["passed"] for r in reports)
    _emit(dict(passed=passed, reports=reports), args)
    return 0 if passed else 2


COMMANDS = [
    ("qfi", "quantum Fisher information of a probe through the channel"),
    ("fi", "classical Fisher information of a receiver"),
    ("spectrum", "Fisher information about n_a versus detuning"),
    ("scanrate", "detuning-integrated Fisher information at one coupling"),
    ("optimize", "maximize the scan rate over the measurement-port coupling"),
    ("figure", "plot-ready table for one comparison figure"),
    ("oracle-check", "closed forms against the Fock-basis oracle"),
    ("sample", "Monte Carlo maximum-likelihood runs"),
    ("distributed-check", "correlated-noise reduction over sensor arrays"),
]


def _add_common(p):
    p.add_argument("--kappa", type=float, default=1.0, help="channel transmissivity")
    p.add_argument("--nb", type=float, help=f"channel noise n_B (default {DEFAULT_NB})")
    p.add_argument("--nt", type=float, default=0.0, help="thermal occupation n_T")
    p.add_argument("--G", help="squeezing gain, linear or '<x>dB'")
    p.add_argument("--source", help="vacuum, sv or tmsv")
    p.add_argument("--receiver", help=", ".join(FI_DEFAULT_SOURCE))
    p.add_argument("--strategy", help="comma-separated strategy names")
    p.add_argument("--engineering", default="ideal", choices=[e.value for e in Engineering])
    p.add_argument("--gm-ratio", dest="gm_ratio", type=float)
    p.add_argument("--temp-mK", dest="temp_mK", type=float)
    p.add_argument("--fc-GHz", dest="fc_GHz", type=float)
    p.add_argument("--ga-ratio", dest="ga_ratio", type=float)
    p.add_argument("--omega-grid", dest="omega_grid", help="start:stop:num in units of gamma_l")
    p.add_argument("--gm-range", dest="gm_range", help="lo:hi coupling search range")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, help="worker threads, 0 for all cores")
    p.add_argument("--config", help="YAML file overriding config.defaults.yaml")
    p.add_argument("--n-max", dest="n_max", type=int)
    p.add_argument("--cutoff", type=int, help="Fock cutoff")
    p.add_argument("--replications", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--two-mode", dest="two_mode", action="store_true")
    p.add_argument("--modes", help="comma-separated array sizes")
    p.add_argument("--verbose", "-v", action="store_true")


class ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with the configuration error code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(ConfigError.exit_code, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = ArgumentParser(prog="haloscope-qfi")
    parser.add_argument("--version", action="version", version=__version__)
    subparsers = parser.add_subparsers(title="commands", dest="command")
    for cmd, desc in COMMANDS:
        p = subparsers.add_parser(cmd, help=desc)
        if cmd == "figure":
            p.add_argument("figure", choices=list(FIGURES), help="figure id")
        _add_common(p)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return 0

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    if not logger.handlers:
        logger.addHandler(handler)
    logger.setLevel(logging.DEBUG if args.verbose else logging.WARNING)

    command = getattr(sys.modules[__name__], "cmd_" + args.command.replace("-", "_"))
    try:
        args.run = RunConfig.from_args(args)
        with config_override(args.run.overrides()):
            return command(args)
    except HaloscopeQfiError as e:
        logger.error(str(e))
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
