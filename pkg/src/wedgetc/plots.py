"""Static SVG figures of sweep medians."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_HEADLINE = dict(subspace="rel_err", spectral="rel_err", gd="final_rel_err_F", delta_probe="delta_norm")


def _medians(rows, metric):
    from .harness import median_table

    return {k: v for k, v in median_table(rows).items() if k[5] == metric}


def write_plots(rows, cfg, out_dir) -> dict:
    """One line plot per (n, r) of the headline metric against s, and for
    subspace sweeps a rank-by-budget heatmap per scheme."""
    out = Path(out_dir)
    plt.rcParams["svg.hashsalt"] = "wedgetc"
    metric = _HEADLINE[cfg.experiment]
    med = _medians(rows, metric)
    paths = {}
    for n in cfg.n:
        for r in cfg.r:
            fig, ax = plt.subplots(figsize=(5, 3.5))
            for scheme in sorted({k[4] for k in med if k[1] == n and k[2] == r}):
                pts = sorted((k[3], v) for k, v in med.items() if k[1] == n and k[2] == r and k[4] == scheme)
                if pts:
                    xs, ys = zip(*pts)
                    ax.plot(xs, ys, marker="o", label=scheme)
            ax.set_xlabel("s")
            ax.set_ylabel(f"median {metric}")
            ax.set_yscale("log")
            ax.set_title(f"{cfg.experiment}: n={n}, r={r}")
            ax.legend()
            path = out / f"{cfg.experiment}_n{n}_r{r}.svg"
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
            paths[path.stem] = path
    if cfg.experiment == "subspace":
        for n in cfg.n:
            for scheme in cfg.schemes:
                grid = np.array([[med.get(("subspace", n, r, s, scheme, metric), np.nan) for r in cfg.r] for s in cfg.s])
                budgets = [n ** (3 - s) * cfg.c * np.log(n) for s in cfg.s]
                fig, ax = plt.subplots(figsize=(5, 4))
                im = ax.imshow(grid, aspect="auto", origin="lower", vmin=0, vmax=1.5, cmap="viridis")
                ax.set_xticks(range(len(cfg.r)), [str(r) for r in cfg.r])
                ax.set_yticks(range(len(cfg.s)), [f"{b:.2g}" for b in budgets])
                ax.set_xlabel("rank r")
                ax.set_ylabel("expected entry observations")
                ax.set_title(f"{scheme}, n={n}")
                fig.colorbar(im, ax=ax, label=f"median {metric}")
                path = out / f"heatmap_{scheme}_n{n}.svg"
                fig.savefig(path, format="svg", metadata={"Date": None})
                plt.close(fig)
                paths[path.stem] = path
    return paths
