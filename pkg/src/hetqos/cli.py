"""Command-line interface: scenario sweeps, validation, figure pipelines.

Subcommands: assoc | rates | traffic | qos | validate | figure <id>.
Every run writes RFC-4180-style CSV ('.' decimal, LF endings) with a header
comment block carrying the fully resolved configuration and tool version,
so identical config + seed reruns are byte-identical.  --format json emits
the same content as a JSON object.  Exit codes: 0 all ran, 2 configuration
error, 3 validation failures present.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .association import AssociationEngine
from .config import Scenario, build_scenario, load_config
from .dpsq import eps_baseline, instances_per_tier, qos_metrics
from .errors import ConfigError, HetQoSError, InsufficientSamplesError
from .montecarlo import (
    McRunSpec,
    dps_des,
    empirical_association,
    empirical_ergodic_rates,
)
from .rates import ActiveIntensities, RateEngine
from .traffic import (
    active_d2d_intensity,
    build_state_matrix,
    matrices_to_csv,
    state_matrix_pipeline,
)

RATE_COLUMNS = ("u_case1_d2d", "u_case1_sbs", "u_case1_mbs", "u_case2_sbs",
                "u_case2_mbs", "u_case3_sbs", "u_case3_mbs")
RATE_CELL_FOR = {"u_case1_d2d": (1, 1), "u_case1_sbs": (1, 2),
                 "u_case1_mbs": (1, 3), "u_case2_sbs": (2, 2),
                 "u_case2_mbs": (2, 3), "u_case3_sbs": (3, 2),
                 "u_case3_mbs": (3, 3)}


# ----------------------------------------------------------------------
# output plumbing
# ----------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def _meta(scenario: Scenario, command):
    pairs = [("tool", "hetqos"), ("tool_version", __version__),
             ("command", command)]
    pairs += list(scenario.raw)
    return pairs


def _json_safe(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return None if math.isnan(v) else v
    if isinstance(v, np.integer):
        return int(v)
    return v


def _write_rows(path, meta, columns, rows, fmt):
    if fmt == "json":
        obj = {"meta": {k: v for k, v in meta},
               "columns": list(columns),
               "rows": [[_json_safe(r[c]) for c in columns] for r in rows]}
        text = json.dumps(obj, sort_keys=True, indent=1) + "\n"
    else:
        buf = []
        for k, v in meta:
            buf.append(f"# {k} = {v}")
        buf.append(",".join(columns))
        for r in rows:
            buf.append(",".join(_fmt(r[c]) for c in columns))
        text = "\n".join(buf) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


# ----------------------------------------------------------------------
# per-point computations (top level so process pools can pickle them)
# ----------------------------------------------------------------------

def _case_masses(d):
    return {m: d[2 * m - 2] + d[2 * m - 1] for m in (1, 2, 3, 4)}


def _assoc_point(task):
    value, scn = task
    eng = AssociationEngine(scn.network)
    probs = eng.assoc_probs()
    d = build_state_matrix(scn.network, probs, scn.content)
    masses = _case_masses(d)
    row = {"sweep_value": value if value is not None else math.nan,
           "mode": scn.mode,
           "g3_d2d": probs.g3[1], "g3_sbs": probs.g3[2],
           "g3_mbs": probs.g3[3]}
    for m in (1, 2, 3, 4):
        row[f"p_case{m}"] = float(masses[m].sum())
    return row


def _active_for(scn: Scenario, probs):
    lam_act = active_d2d_intensity(scn.network, probs.g3[1], scn.content)
    return ActiveIntensities(
        d2d=lam_act, sbs=scn.network.sbs_layout.effective_intensity,
        mbs=scn.network.mbs_intensity)


def _rate_point(task):
    value, scn = task
    eng = AssociationEngine(scn.network)
    probs = eng.assoc_probs()
    active = _active_for(scn, probs)
    rt = RateEngine(eng, active, scn.numerics).rate_table()
    d = build_state_matrix(scn.network, probs, scn.content)
    row = {"sweep_value": value if value is not None else math.nan,
           "mode": scn.mode}
    total = 0.0
    for col, cell in RATE_CELL_FOR.items():
        u = rt.nats.get(cell, math.nan)
        row[col] = u
        case, tier = cell
        mass = d[2 * case - 2, tier - 1] + d[2 * case - 1, tier - 1]
        if mass > 0 and not math.isnan(u):
            total += mass * u
    row["total"] = total
    return row


def _qos_point(task):
    value, scn = task
    eng = AssociationEngine(scn.network)
    probs = eng.assoc_probs()
    active = _active_for(scn, probs)
    rt = RateEngine(eng, active, scn.numerics).rate_table()
    sm, _ = state_matrix_pipeline(scn.network, probs, scn.content,
                                  scn.traffic, rt)
    insts = instances_per_tier(sm.zeta, sm.a, scn.traffic, scn.content)
    rows = []
    for tier, inst in sorted(insts.items()):
        for disc, metric_rows in (("dps", qos_metrics(inst)),
                                  ("eps", eps_baseline(inst))):
            for r in metric_rows:
                rows.append({
                    "sweep_value": value if value is not None else math.nan,
                    "mode": scn.mode, "discipline": disc, "tier": tier,
                    "class_row": r.class_row, "bh_needed": r.bh_needed,
                    "arrival": r.arrival, "service": r.service,
                    "weight": r.weight, "utilization": r.utilization,
                    "mean_requests": r.mean_requests, "delay": r.delay,
                    "throughput": r.throughput, "stable": r.stable})
    return rows


def _map_points(fn, tasks, workers):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------

def _scenario_from(opts, mode=None) -> Scenario:
    raw = load_config(opts.config)
    scn = build_scenario(raw, mode=mode or opts.mode, seed=opts.seed)
    if opts.sweep_values:
        values = tuple(float(t) for t in opts.sweep_values.split(","))
        if not scn.sweep_parameter:
            raise ConfigError("sweep.parameter",
                              "--sweep-values given but config has no sweep")
        scn = build_scenario(
            dict(scn.raw) | {"sweep.values": ",".join(map(repr, values))},
            mode=mode or opts.mode, seed=opts.seed)
    return scn


ASSOC_COLUMNS = ("sweep_value", "mode", "g3_d2d", "g3_sbs", "g3_mbs",
                 "p_case1", "p_case2", "p_case3", "p_case4")


def cmd_assoc(opts):
    scn = _scenario_from(opts)
    rows = _map_points(_assoc_point, scn.sweep_points(), opts.workers)
    _write_rows(opts.out, _meta(scn, "assoc"), ASSOC_COLUMNS, rows,
                opts.format)
    return 0


def cmd_rates(opts):
    scn = _scenario_from(opts)
    rows = _map_points(_rate_point, scn.sweep_points(), opts.workers)
    cols = ("sweep_value", "mode") + RATE_COLUMNS + ("total",)
    _write_rows(opts.out, _meta(scn, "rates"), cols, rows, opts.format)
    return 0


def cmd_traffic(opts):
    scn = _scenario_from(opts)
    point = scn.sweep_points()[0][1]
    eng = AssociationEngine(point.network)
    probs = eng.assoc_probs()
    active = _active_for(point, probs)
    rt = RateEngine(eng, active, point.numerics).rate_table()
    sm, info = state_matrix_pipeline(point.network, probs, point.content,
                                     point.traffic, rt)
    if opts.out is None:
        matrices_to_csv(sys.stdout, sm.d, sm.zeta, sm.a, info)
    else:
        with open(opts.out, "w", newline="") as fh:
            for k, v in _meta(point, "traffic"):
                fh.write(f"# {k} = {v}\n")
            matrices_to_csv(fh, sm.d, sm.zeta, sm.a, info)
    return 0


QOS_COLUMNS = ("sweep_value", "mode", "discipline", "tier", "class_row",
               "bh_needed", "arrival", "service", "weight", "utilization",
               "mean_requests", "delay", "throughput", "stable")


def cmd_qos(opts):
    scn = _scenario_from(opts)
    nested = _map_points(_qos_point, scn.sweep_points(), opts.workers)
    rows = [r for point_rows in nested for r in point_rows]
    _write_rows(opts.out, _meta(scn, "qos"), QOS_COLUMNS, rows, opts.format)
    return 0


VALIDATE_COLUMNS = ("check", "group", "analytic", "empirical", "deviation",
                    "threshold", "verdict")


def _verdict(analytic, empirical, se, power=0.015):
    if se <= 0:
        return "inconclusive", 0.0
    dev = abs(analytic - empirical) / se
    if dev > 3.0:
        return "fail", dev
    if se > power:
        return "inconclusive", dev
    return "pass", dev


def cmd_validate(opts):
    import scipy.stats

    scn = _scenario_from(opts)
    point = scn.sweep_points()[0][1]
    eng = AssociationEngine(point.network)
    probs = eng.assoc_probs()
    spec = McRunSpec(realizations=opts.samples, seed=point.seed)
    mc = empirical_association(point.network, spec)
    rows = []
    for i, tier in ((1, "d2d"), (2, "sbs"), (3, "mbs")):
        verdict, dev = _verdict(probs.g3[i], mc["g3"][i], mc["g3_se"][i])
        rows.append({"check": "tier_association", "group": tier,
                     "analytic": probs.g3[i], "empirical": mc["g3"][i],
                     "deviation": dev, "threshold": 3.0, "verdict": verdict})
    for perm, p in sorted(probs.ordered.items()):
        verdict, dev = _verdict(p, mc["ordered"][perm],
                                mc["ordered_se"][perm])
        rows.append({"check": "ordered_association",
                     "group": "".join(map(str, perm)), "analytic": p,
                     "empirical": mc["ordered"][perm], "deviation": dev,
                     "threshold": 3.0, "verdict": verdict})
    verdict, dev = _verdict(probs.pairwise[(2, 3)], mc["pairwise"][(2, 3)],
                            mc["pairwise_se"][(2, 3)])
    rows.append({"check": "pairwise_association", "group": "sbs_over_mbs",
                 "analytic": probs.pairwise[(2, 3)],
                 "empirical": mc["pairwise"][(2, 3)], "deviation": dev,
                 "threshold": 3.0, "verdict": verdict})

    snap = mc["snapshot"]
    crit = 1.628 / math.sqrt(opts.samples)  # 1% Kolmogorov critical value
    for i, tier in ((1, "d2d"), (2, "sbs"), (3, "mbs")):
        if point.network.layouts[i].effective_intensity <= 0:
            continue
        law = eng.laws[i]
        stat = scipy.stats.kstest(
            snap.nearest[i], lambda r: 1.0 - np.exp(-law.exponent(r))).statistic
        verdict = "inconclusive" if opts.samples < 1000 else (
            "pass" if stat < crit else "fail")
        rows.append({"check": "contact_distance_ks", "group": tier,
                     "analytic": 0.0, "empirical": stat, "deviation": stat,
                     "threshold": crit, "verdict": verdict})

    # queue approximation against its event-driven oracle
    from .dpsq import DpsInstance, dps_sojourn_approx
    inst = DpsInstance((0.3, 0.2), (1.0, 1.0), (1.0, 2.0))
    des = dps_des(inst.arrival, inst.service, inst.weight,
                  completions=max(100000, opts.samples), seed=point.seed)
    for k in range(2):
        approx = dps_sojourn_approx(inst, k)
        rel = abs(approx - des.mean_sojourn[k]) / des.mean_sojourn[k]
        rows.append({"check": "dps_sojourn_vs_des", "group": f"class{k+1}",
                     "analytic": approx, "empirical": des.mean_sojourn[k],
                     "deviation": rel, "threshold": 0.10,
                     "verdict": "pass" if rel <= 0.10 else "fail"})

    if opts.with_rates:
        active = _active_for(point, probs)
        rt = RateEngine(eng, active, point.numerics).rate_table()
        try:
            mc_rates = empirical_ergodic_rates(
                point.network, active,
                McRunSpec(realizations=opts.samples, seed=point.seed + 1))
            for col, cell in RATE_CELL_FOR.items():
                if cell not in rt.nats:
                    continue
                mean, se, hits = mc_rates[(f"case{cell[0]}", cell[1])]
                band = 0.07 if cell[0] == 3 else 0.05
                rel = abs(rt.nats[cell] - mean) / mean
                noise = se / mean
                # a miss inside the oracle's own noise is not resolvable
                if rel <= band:
                    verdict = "pass"
                elif rel > band + 3.0 * noise:
                    verdict = "fail"
                else:
                    verdict = "inconclusive"
                rows.append({"check": "ergodic_rate", "group": col,
                             "analytic": rt.nats[cell], "empirical": mean,
                             "deviation": rel, "threshold": band,
                             "verdict": verdict})
        except InsufficientSamplesError as exc:
            rows.append({"check": "ergodic_rate", "group": "all",
                         "analytic": math.nan, "empirical": math.nan,
                         "deviation": float(exc.hits), "threshold": 500.0,
                         "verdict": "inconclusive"})

    _write_rows(opts.out, _meta(point, "validate"), VALIDATE_COLUMNS, rows,
                opts.format)
    return 3 if any(r["verdict"] == "fail" for r in rows) else 0


FIGURE_IDS = ("3", "4", "5", "6", "7")


def cmd_figure(opts):
    from . import plotting

    fig_id = opts.id
    config_name = opts.config or f"fig{fig_id}"
    raw = load_config(config_name)
    out_dir = opts.out or "."
    import os
    csv_path = os.path.join(out_dir, f"fig{fig_id}.csv")
    png_path = os.path.join(out_dir, f"fig{fig_id}.png")

    def scenarios():
        for mode in ("clustered", "baseline"):
            use = dict(raw)
            if mode == "baseline":
                # figure-level weight overrides for the uniform comparison
                for tier in ("sbs", "mbs"):
                    key = f"traffic.weights_{tier}_baseline"
                    if key in use:
                        use[f"traffic.weights_{tier}"] = use[key]
            scn = build_scenario(use, mode=mode, seed=opts.seed)
            if opts.sweep_values:
                vals = ",".join(repr(float(t))
                                for t in opts.sweep_values.split(","))
                scn = build_scenario(dict(scn.raw) | {"sweep.values": vals},
                                     mode=mode, seed=opts.seed)
            yield mode, scn

    sweep_label = None
    all_rows = []
    base_meta = None
    for mode, scn in scenarios():
        sweep_label = scn.sweep_parameter or "point"
        if base_meta is None:
            base_meta = _meta(scn, f"figure {fig_id}")
        if fig_id == "3":
            all_rows += _map_points(_assoc_point, scn.sweep_points(),
                                    opts.workers)
        elif fig_id == "4":
            all_rows += _map_points(_rate_point, scn.sweep_points(),
                                    opts.workers)
        else:
            for point_rows in _map_points(_qos_point, scn.sweep_points(),
                                          opts.workers):
                all_rows += point_rows

    if fig_id == "3":
        cols = ASSOC_COLUMNS
    elif fig_id == "4":
        cols = ("sweep_value", "mode") + RATE_COLUMNS + ("total",)
    else:
        cols = QOS_COLUMNS
    _write_rows(csv_path, base_meta, cols, all_rows, "csv")

    if opts.plot:
        if fig_id == "3":
            plotting.render_association(all_rows, png_path, sweep_label)
        elif fig_id == "4":
            plotting.render_rates(all_rows, png_path, sweep_label)
        elif fig_id in ("5", "6"):
            plotting.render_qos(all_rows, png_path, sweep_label,
                                tier="sbs" if fig_id == "5" else "mbs")
        else:
            plotting.render_throughput(all_rows, png_path, sweep_label)
    return 0


# ----------------------------------------------------------------------
# entry point
# ----------------------------------------------------------------------

def _add_common(p, config_required=True):
    p.add_argument("--config", required=config_required,
                   help="config file path or preset name (fig3..fig7)")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--mode", choices=("clustered", "baseline"), default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--sweep-values", default=None,
                   help="comma list overriding sweep.values")
    p.add_argument("--workers", type=int, default=1)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="hetqos",
        description="QoS analytics for cache-enabled heterogeneous networks "
                    "with clustered small cells")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("assoc", cmd_assoc), ("rates", cmd_rates),
                     ("traffic", cmd_traffic), ("qos", cmd_qos)):
        p = sub.add_parser(name)
        _add_common(p)
        p.set_defaults(fn=fn)
    p = sub.add_parser("validate")
    _add_common(p)
    p.add_argument("--with-rates", action="store_true",
                   help="include the ergodic-rate oracle cells (slow)")
    p.set_defaults(fn=cmd_validate)
    p = sub.add_parser("figure")
    p.add_argument("id", choices=FIGURE_IDS)
    _add_common(p, config_required=False)
    p.add_argument("--plot", dest="plot", action="store_true", default=True)
    p.add_argument("--no-plot", dest="plot", action="store_false")
    p.set_defaults(fn=cmd_figure)
    opts = parser.parse_args(argv)
    try:
        return opts.fn(opts)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except HetQoSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
