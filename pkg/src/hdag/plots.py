"""Figure rendering for the CLI report paths.

Every report writer pairs its delimited output with a PNG rendered
here.  Figures avoid timestamps and host metadata so identical runs
produce identical bytes.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_SAVE_KW = dict(dpi=110, metadata={"Software": None})

METHOD_STYLES = {
    "unprocessed": dict(color="0.5", marker="o", linestyle="--"),
    "gtf_f0": dict(color="tab:orange", marker="s", linestyle="-"),
    "hdag": dict(color="tab:blue", marker="D", linestyle="-"),
}


def _style_for(method):
    return METHOD_STYLES.get(method, dict(marker="x", linestyle="-"))


def save_enhance_figure(path, report, frame_times_s):
    """F0 track and per-frame class/salience for one enhancement run."""
    fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(8, 5), sharex=True)
    voiced = [f for f in report.frames if f.voiced]
    t = [frame_times_s[f.frame_index] for f in voiced]
    ax0.plot(t, [f.f_est_hz for f in voiced], "o", ms=3, label="estimated F0")
    ax0.plot(t, [f.f_adj_hz for f in voiced], ".", ms=3, label="bank anchor")
    ax0.set_ylabel("frequency [Hz]")
    ax0.legend(loc="upper right", fontsize=8)
    ax0.set_title(f"method={report.method}  voiced {report.n_voiced}/{len(report.frames)}")
    ax1.plot(t, [f.salience for f in voiced], "o", ms=3, color="tab:green")
    low_t = [frame_times_s[f.frame_index] for f in voiced
             if f.frame_class.value == "low"]
    ax1.plot(low_t, [0.05] * len(low_t), "s", ms=3, color="tab:red",
             label="low-pitch frames")
    ax1.set_ylim(0.0, 1.05)
    ax1.set_xlabel("time [s]")
    ax1.set_ylabel("salience")
    ax1.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_grid_figure(path, rows):
    """Mean score against SNR per method, one panel per noise.

    rows: (noise, snr_db, method, mean_score) tuples.
    """
    noises = sorted({r[0] for r in rows})
    methods = []
    for r in rows:
        if r[2] not in methods:
            methods.append(r[2])
    fig, axes = plt.subplots(1, max(len(noises), 1),
                             figsize=(4.2 * max(len(noises), 1), 3.4),
                             squeeze=False)
    for ax, noise in zip(axes[0], noises):
        for method in methods:
            pts = sorted((r[1], r[3]) for r in rows
                         if r[0] == noise and r[2] == method)
            if pts:
                ax.plot([p[0] for p in pts], [p[1] for p in pts],
                        label=method, ms=4, **_style_for(method))
        ax.set_title(noise)
        ax.set_xlabel("SNR [dB]")
        ax.set_ylabel("score")
        ax.grid(alpha=0.3)
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_param_sweep_figure(path, values, means, param_name):
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.plot(values, means, "o-", color="tab:blue")
    best = max(range(len(values)), key=lambda i: means[i])
    ax.plot(values[best], means[best], "*", ms=14, color="tab:red",
            label=f"best {param_name} = {values[best]:g}")
    ax.set_xlabel(param_name)
    ax.set_ylabel("mean score")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_greedy_figure(path, trace, pitch_class):
    """Per-filter candidate curves of a greedy gain calibration.

    trace: (filter_index, gain, score, chosen) tuples.
    """
    filters = sorted({t[0] for t in trace})
    fig, ax = plt.subplots(figsize=(7, 4))
    cmap = plt.get_cmap("viridis")
    for k in filters:
        pts = [(t[1], t[2], t[3]) for t in trace if t[0] == k]
        color = cmap(k / max(len(filters) - 1, 1))
        ax.plot([p[0] for p in pts], [p[1] for p in pts], "-", color=color,
                lw=1, label=f"F{k + 1}")
        chosen = [p for p in pts if p[2]]
        if chosen:
            ax.plot(chosen[0][0], chosen[0][1], "o", color=color, ms=6)
    ax.set_xlabel("gain")
    ax.set_ylabel("mean score")
    ax.set_title(f"greedy gain calibration ({pitch_class} pitch)")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
