"""Plot-ready tables for the source, receiver and scan-rate comparisons.

Every builder returns a ``pandas.DataFrame`` with one row per grid point in
grid order. Curves normalized by a reference carry values in dB and the
linear reference in a ``normalization`` column.
"""
import itertools

import numpy as np
import pandas as pd

from .exceptions import ConfigError, ParameterDomainError
from .gaussian_core import SourceKind, SourceSpec
from .haloscope import (
    CavityParams,
    Engineering,
    fisher_spectrum,
    optimize_coupling,
    overcoupling_limit,
    strategy,
    total_fisher_closed,
)
from .measurements import (
    fi_bell,
    fi_direct_pd_tmsv,
    fi_homodyne_sv,
    nulled_sv_fi,
    nulled_tmsv_fi,
)
from .qfi_closed_form import qfi_sv, qfi_tmsv, qfi_vacuum_limit, ub_ue
from .utils import cfg, db_to_linear, linear_to_db, make_grid, parallel_map

SWEEPS = cfg["sweeps"]
CAVITY = cfg["cavity"]

DEFAULTS = {
    "n_b": 1e-3,
    "gain_db": 10.0,
    "temp_mK": CAVITY["temp_mK"],
    "fc_GHz": CAVITY["fc_GHz"],
    "ga_ratio": CAVITY["ga_ratio"],
    "n_t": None,
    "n_max": None,
    "threads": 1,
    "kappa": SWEEPS["kappa"],
    "gain_dB": SWEEPS["gain_dB"],
    "omega": SWEEPS["omega"],
    "gm_ratio_dB": SWEEPS["gm_ratio_dB"],
    "n_s": SWEEPS["n_s"],
    "gm_range": cfg["optimize"]["gm_range"],
}

FIGURE_10_GRID = {
    "kappa": {"start": 0.1, "stop": 1.0, "num": 10},
    "n_s": {"start": 1e-2, "stop": 3.0, "num": 13, "scale": "log"},
}

SPECTRUM_CURVES = ("ub", "vl", "vac-hom", "sv-hom", "sv-qfi", "tmsv-qfi")
PRACTICAL_SPECTRUM_CURVES = SPECTRUM_CURVES + ("sv-null", "tmsv-null")
TOTAL_CURVES = ("ub", "vl", "vac-hom", "sv-hom", "sv-qfi", "tmsv-qfi")


def _photons(gain):
    return SourceSpec(SourceKind.TMSV, gain).n_squeeze


def _cavity(params, gm_ratio=1.0):
    return CavityParams.from_ratios(
        gm_ratio,
        params["ga_ratio"],
        temp=params["temp_mK"] * 1e-3,
        omega_c=2.0 * np.pi * params["fc_GHz"] * 1e9,
        n_t_override=params["n_t"],
    )


def _source_ratio(params, numerator, denominator):
    n_b = params["n_b"]
    rows = list(itertools.product(make_grid(params["kappa"]), make_grid(params["gain_dB"])))

    def row(point):
        kappa, gain_db = point
        n_s = _photons(float(db_to_linear(gain_db)))
        value = numerator(n_s, kappa, n_b).value / denominator(n_s, kappa, n_b).value
        return dict(kappa=kappa, gain_db=gain_db, n_s=n_s, value=value, value_db=linear_to_db(value))

    return pd.DataFrame(parallel_map(row, rows, params["threads"]))


def _receivers(params, kappa):
    n_b, n_max = params["n_b"], params["n_max"]
    reference = 2.0 / (1.0 + 2.0 * n_b) ** 2

    def row(gain_db):
        gain = float(db_to_linear(gain_db))
        n_s = _photons(gain)
        curves = {
            "vl": qfi_vacuum_limit(n_b).value,
            "sv-qfi": qfi_sv(n_s, kappa, n_b).value,
            "tmsv-qfi": qfi_tmsv(n_s, kappa, n_b).value,
            "sv-hom": fi_homodyne_sv(gain, kappa, n_b).value,
            "bell": fi_bell(gain, kappa, n_b).value,
            "sv-null": nulled_sv_fi(gain, kappa, n_b, n_max).value,
            "tmsv-null": nulled_tmsv_fi(n_s, kappa, n_b, n_max).value,
        }
        out = dict(gain_db=gain_db, n_s=n_s, normalization=reference)
        out.update({name: linear_to_db(value / reference) for name, value in curves.items()})
        return out

    return pd.DataFrame(parallel_map(row, make_grid(params["gain_dB"]), params["threads"]))


def _vac_hom_peak(params, engineering):
    """Vacuum-homodyne spectrum at zero detuning and critical coupling."""
    spec = strategy("vac-hom", engineering)
    return fisher_spectrum(spec, _cavity(params, 1.0), 0.0).value


def _spectra(params, engineering, curves, gm_ratio):
    gain = _gain(params)
    cavity = _cavity(params, gm_ratio)
    reference = _vac_hom_peak(params, engineering)
    specs = {name: strategy(name, engineering, gain) for name in curves}

    def row(omega):
        out = dict(omega=omega, gm_ratio=gm_ratio, normalization=reference)
        for name, spec in specs.items():
            value = fisher_spectrum(spec, cavity, omega * cavity.gamma_l).value
            out[name] = linear_to_db(value / reference)
        return out

    return pd.DataFrame(parallel_map(row, make_grid(params["omega"]), params["threads"]))


def _vac_hom_optimum(params, engineering):
    spec = strategy("vac-hom", engineering)
    return optimize_coupling(spec, _cavity(params), gm_range=params["gm_range"]).total


def _totals_vs_coupling(params, engineering):
    gain = _gain(params)
    reference = _vac_hom_optimum(params, engineering)
    specs = {name: strategy(name, engineering, gain) for name in TOTAL_CURVES}

    def row(gm_db):
        cavity = _cavity(params, float(db_to_linear(gm_db)))
        out = dict(gm_ratio_db=gm_db, normalization=reference)
        for name, spec in specs.items():
            out[name] = linear_to_db(total_fisher_closed(spec, cavity).total / reference)
        return out

    return pd.DataFrame(parallel_map(row, make_grid(params["gm_ratio_dB"]), params["threads"]))


def _optimized_vs_gain(params, engineering):
    reference = _vac_hom_optimum(params, engineering)
    cavity = _cavity(params)

    def row(gain_db):
        gain = float(db_to_linear(gain_db))
        out = dict(gain_db=gain_db, normalization=reference)
        for name in TOTAL_CURVES:
            spec = strategy(name, engineering, gain)
            result = optimize_coupling(spec, cavity, gm_range=params["gm_range"])
            out[name] = linear_to_db(result.total / reference)
            out[f"{name}_gm_ratio"] = result.optimum_coupling
        return out

    return pd.DataFrame(parallel_map(row, make_grid(params["gain_dB"]), params["threads"]))


def _nulling_advantage(params):
    n_b, n_max = params["n_b"], params["n_max"]
    rows = list(itertools.product(make_grid(params["kappa"]), make_grid(params["n_s"])))

    def row(point):
        kappa, n_s = point
        nulled = nulled_tmsv_fi(n_s, kappa, n_b, n_max).value
        direct = fi_direct_pd_tmsv(n_s, kappa, n_b, n_max, method="closed").value
        return dict(kappa=kappa, n_s=n_s, nulled=nulled, direct=direct, ratio=nulled / direct)

    return pd.DataFrame(parallel_map(row, rows, params["threads"]))


def _sv_piecewise(params):
    reference = _vac_hom_optimum(params, Engineering.IDEAL)
    critical_cavity = _cavity(params, 1.0)

    def row(gain_db):
        gain = float(db_to_linear(gain_db))
        spec = strategy("sv-qfi", Engineering.IDEAL, gain)
        critical = total_fisher_closed(spec, critical_cavity).total
        limit = overcoupling_limit(spec, critical_cavity)
        return dict(
            gain_db=gain_db,
            normalization=reference,
            critical=linear_to_db(critical / reference),
            overcoupling=linear_to_db(limit / reference),
            optimum="critical" if critical > limit else "overcoupling",
        )

    return pd.DataFrame(parallel_map(row, make_grid(params["gain_dB"]), params["threads"]))


def _gain(params):
    return float(db_to_linear(params["gain_db"]))


FIGURES = {
    "3a": lambda p: _source_ratio(p, qfi_tmsv, ub_ue),
    "3b": lambda p: _source_ratio(p, qfi_sv, ub_ue),
    "3c": lambda p: _source_ratio(p, qfi_tmsv, lambda n, k, b: qfi_vacuum_limit(b)),
    "3d": lambda p: _source_ratio(p, qfi_sv, lambda n, k, b: qfi_vacuum_limit(b)),
    "4a": lambda p: _receivers(p, 1.0),
    "4b": lambda p: _receivers(p, 0.6),
    "5a": lambda p: _totals_vs_coupling(p, Engineering.IDEAL),
    "5b": lambda p: _optimized_vs_gain(p, Engineering.IDEAL),
    "6a": lambda p: _spectra(p, Engineering.IDEAL, SPECTRUM_CURVES, 1.0),
    "6b": lambda p: _spectra(p, Engineering.IDEAL, SPECTRUM_CURVES, 2.0 * _gain(p)),
    "8a": lambda p: _spectra(p, Engineering.PRACTICAL, PRACTICAL_SPECTRUM_CURVES, 1.0),
    "8b": lambda p: _spectra(p, Engineering.PRACTICAL, PRACTICAL_SPECTRUM_CURVES, 2.0 * _gain(p)),
    "9a": lambda p: _totals_vs_coupling(p, Engineering.PRACTICAL),
    "9b": lambda p: _optimized_vs_gain(p, Engineering.PRACTICAL),
    "10": _nulling_advantage,
    "11": _sv_piecewise,
}


def figure_data(figure_id, params=None):
    """Table behind ``figure_id``; ``params`` overrides any key of ``DEFAULTS``."""
    figure_id = str(figure_id).lower()
    if figure_id not in FIGURES:
        raise ParameterDomainError(
            f"unknown figure {figure_id!r}; choose from {', '.join(FIGURES)}"
        )
    merged = dict(DEFAULTS, **FIGURE_10_GRID) if figure_id == "10" else dict(DEFAULTS)
    for key, value in (params or {}).items():
        if key not in merged:
            raise ConfigError(f"unknown figure parameter {key!r}")
        merged[key] = value
    return FIGURES[figure_id](merged)
