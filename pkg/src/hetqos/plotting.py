"""Matplotlib rendering of the figure-reproduction pipelines.

Figures are written next to the delimited output with fixed metadata so
reruns are byte-identical.  Styling is intentionally plain: solid lines for
the clustered deployment, dashed for the uniform baseline, pale variants
for the equal-share queue discipline.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_META = {"Software": "hetqos"}
_MODE_STYLE = {"clustered": "-", "baseline": "--"}
_TIER_COLOR = {"d2d": "tab:blue", "sbs": "tab:orange", "mbs": "tab:green"}
_CASE_COLOR = {1: "tab:blue", 2: "tab:orange", 3: "tab:green",
               4: "tab:red"}


def _save(fig, path):
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)


def _by(rows, key):
    out = {}
    for r in rows:
        out.setdefault(r[key], []).append(r)
    return out


def render_association(rows, path, sweep_label):
    """Two panels: case activity probabilities and tier association."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.5, 3.8))
    for mode, sub in sorted(_by(rows, "mode").items()):
        sub = sorted(sub, key=lambda r: r["sweep_value"])
        xs = [r["sweep_value"] for r in sub]
        for case in (1, 2, 3, 4):
            ax1.plot(xs, [r[f"p_case{case}"] for r in sub],
                     _MODE_STYLE[mode], color=_CASE_COLOR[case],
                     label=f"case {case} ({mode})")
        for tier in ("d2d", "sbs", "mbs"):
            ax2.plot(xs, [r[f"g3_{tier}"] for r in sub],
                     _MODE_STYLE[mode], color=_TIER_COLOR[tier],
                     label=f"{tier} ({mode})")
    ax1.set_xlabel(sweep_label)
    ax1.set_ylabel("case activity probability")
    ax1.legend(fontsize=7)
    ax2.set_xlabel(sweep_label)
    ax2.set_ylabel("tier association probability")
    ax2.legend(fontsize=7)
    fig.tight_layout()
    _save(fig, path)


def render_rates(rows, path, sweep_label):
    """Per-case mean rates (left) and case-weighted total (right)."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.5, 3.8))
    for mode, sub in sorted(_by(rows, "mode").items()):
        sub = sorted(sub, key=lambda r: r["sweep_value"])
        xs = [r["sweep_value"] for r in sub]
        for case in (1, 2, 3):
            ax1.plot(xs, [r[f"u_case{case}"] for r in sub],
                     _MODE_STYLE[mode], color=_CASE_COLOR[case],
                     label=f"case {case} ({mode})")
        ax2.plot(xs, [r["total"] for r in sub], _MODE_STYLE[mode],
                 color="tab:purple", label=f"total ({mode})")
    ax1.set_xlabel(sweep_label)
    ax1.set_ylabel("mean ergodic rate [nats]")
    ax1.legend(fontsize=7)
    ax2.set_xlabel(sweep_label)
    ax2.set_ylabel("weighted total rate [nats]")
    ax2.legend(fontsize=7)
    fig.tight_layout()
    _save(fig, path)


def render_qos(rows, path, sweep_label, tier):
    """Mean requests (left) and normalized throughput (right) per class.

    Weighted-share results in saturated colors, equal-share in pale.
    """
    palette = ["tab:blue", "tab:orange", "tab:green", "tab:red",
               "tab:purple", "tab:brown", "tab:pink", "tab:gray"]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.5, 3.8))
    keyed = {}
    for r in rows:
        if r["tier"] != tier or not r["stable"]:
            continue
        keyed.setdefault((r["mode"], r["discipline"], r["class_row"]),
                         []).append(r)
    for (mode, disc, cls), sub in sorted(keyed.items()):
        sub = sorted(sub, key=lambda r: r["sweep_value"])
        xs = [r["sweep_value"] for r in sub]
        color = palette[(cls - 1) % len(palette)]
        alpha = 1.0 if disc == "dps" else 0.35
        label = f"class {cls} {disc} ({mode})"
        ax1.plot(xs, [r["mean_requests"] for r in sub], _MODE_STYLE[mode],
                 color=color, alpha=alpha, label=label)
        ax2.plot(xs, [r["throughput"] for r in sub], _MODE_STYLE[mode],
                 color=color, alpha=alpha, label=label)
    ax1.set_xlabel(sweep_label)
    ax1.set_ylabel(f"mean requests per {tier}")
    ax1.legend(fontsize=6)
    ax2.set_xlabel(sweep_label)
    ax2.set_ylabel("normalized throughput")
    ax2.legend(fontsize=6)
    fig.tight_layout()
    _save(fig, path)


def render_throughput(rows, path, sweep_label, tier="d2d"):
    """Single panel: equal-share throughput of one tier."""
    fig, ax = plt.subplots(figsize=(5.2, 3.8))
    keyed = {}
    for r in rows:
        if r["tier"] != tier or r["discipline"] != "eps" or not r["stable"]:
            continue
        keyed.setdefault((r["mode"], r["class_row"]), []).append(r)
    for (mode, cls), sub in sorted(keyed.items()):
        sub = sorted(sub, key=lambda r: r["sweep_value"])
        xs = [r["sweep_value"] for r in sub]
        ax.plot(xs, [r["throughput"] for r in sub], _MODE_STYLE[mode],
                color=_TIER_COLOR.get(tier, "tab:blue"),
                label=f"class {cls} ({mode})")
    ax.set_xlabel(sweep_label)
    ax.set_ylabel(f"{tier} normalized throughput")
    ax.legend(fontsize=7)
    fig.tight_layout()
    _save(fig, path)
