"""Figure rendering for the CLI report paths.

Every command that writes delimited report data can also render a summary
figure next to it; all plotting stays headless (Agg) and file-based.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

plt.rcParams.update({
    "figure.dpi": 110,
    "savefig.dpi": 160,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
})


def save_figure(fig, path):
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    return path


def gravity_figure(path, kind_label, fit, metrics, x, ln_flux):
    """Scatter of ln T against the regressor with the fitted line and bins."""
    fig, ax = plt.subplots(figsize=(4.2, 3.2))
    ax.scatter(x, ln_flux, s=4, alpha=0.25, linewidths=0, color="#4878a8", label="pairs")
    if metrics.binned_means:
        centers = [row[0] for row in metrics.binned_means]
        means = [row[1] for row in metrics.binned_means]
        ax.plot(centers, means, "o-", color="#d1495b", ms=3, lw=1, label="binned mean")
    xs = np.linspace(min(x), max(x), 50)
    mean_lnm = np.mean(ln_flux - (fit.lnC - fit.exponent_or_rate * np.asarray(x)))
    ax.plot(xs, fit.lnC - fit.exponent_or_rate * xs + mean_lnm, "-", color="#333333",
            lw=1.2, label="fit")
    xlabel = "ln distance" if fit.family.value == "power" else "distance"
    ax.set_xlabel(xlabel)
    ax.set_ylabel("ln flux")
    ax.set_title(f"{kind_label}: R$^2$={fit.r_squared:.3f}, slope={fit.exponent_or_rate:.3f}")
    ax.legend(frameon=False, fontsize=7)
    return save_figure(fig, path)


def dendrogram_figure(path, dendrogram, similarity_names, similarity):
    """Dendrogram next to the similarity matrix it was built from."""
    from scipy.cluster import hierarchy

    linkage = dendrogram.to_linkage()
    fig, (ax_tree, ax_mat) = plt.subplots(
        1, 2, figsize=(8.0, 3.6), gridspec_kw={"width_ratios": [1.2, 1.0]}
    )
    tree = hierarchy.dendrogram(
        linkage, labels=list(dendrogram.leaves), ax=ax_tree,
        leaf_rotation=90, leaf_font_size=6, color_threshold=None,
    )
    ax_tree.set_ylabel("cosine distance")
    ax_tree.grid(False)

    order = [similarity_names.index(name) for name in tree["ivl"]]
    reordered = similarity[np.ix_(order, order)]
    image = ax_mat.imshow(reordered, cmap="viridis", aspect="auto")
    ax_mat.set_xticks(range(len(order)))
    ax_mat.set_yticks(range(len(order)))
    ax_mat.set_xticklabels(tree["ivl"], rotation=90, fontsize=5)
    ax_mat.set_yticklabels(tree["ivl"], fontsize=5)
    ax_mat.grid(False)
    fig.colorbar(image, ax=ax_mat, label="cosine similarity")
    return save_figure(fig, path)


def norm_figure(path, summaries, size_norm_points=None):
    """Mean centroid norms per country, annotated with each Gini.

    size_norm_points is an optional list of (size, norm) pairs; when given a
    second panel scatters per-organization norm against size, log x-axis.
    """
    panels = 2 if size_norm_points else 1
    fig, axes = plt.subplots(1, panels, figsize=(4.0 * panels, 3.0), squeeze=False)
    ax = axes[0][0]
    countries = [s.country for s in summaries]
    ax.bar(range(len(countries)), [s.mean_norm for s in summaries], color="#4878a8")
    ax.set_xticks(range(len(countries)))
    ax.set_xticklabels(countries, rotation=90, fontsize=6)
    ax.set_ylabel("centroid L2 norm")
    for i, summary in enumerate(summaries):
        ax.text(i, summary.mean_norm, f"g={summary.gini:.2f}",
                ha="center", va="bottom", fontsize=5, rotation=90)
    if size_norm_points:
        ax2 = axes[0][1]
        ax2.scatter([p[0] for p in size_norm_points], [p[1] for p in size_norm_points],
                    s=6, alpha=0.5, linewidths=0, color="#d1495b")
        ax2.set_xscale("log")
        ax2.set_xlabel("size")
        ax2.set_ylabel("org L2 norm")
    return save_figure(fig, path)


def semaxis_figure(path, ranking, reference=None):
    """Axis scores in rank order; against the reference ranking when given."""
    fig, ax = plt.subplots(figsize=(4.2, 3.2))
    scores = [score for _, score in ranking.entries]
    if reference:
        ref_positions = {i: r for i, r in reference.items()}
        xs = [ref_positions[loc_id] for loc_id, _ in ranking.entries if loc_id in ref_positions]
        ys = [i + 1 for i, (loc_id, _) in enumerate(ranking.entries) if loc_id in ref_positions]
        ax.scatter(xs, ys, s=10, alpha=0.6, linewidths=0, color="#4878a8")
        ax.set_xlabel("reference rank")
        ax.set_ylabel("axis rank")
    else:
        ax.plot(range(1, len(scores) + 1), scores, ".-", color="#4878a8", ms=3, lw=0.8)
        ax.set_xlabel("rank")
        ax.set_ylabel("axis score")
    return save_figure(fig, path)


def baselines_figure(path, strengths, centralities):
    """Eigenvector centrality against degree strength, log-x."""
    fig, ax = plt.subplots(figsize=(4.2, 3.2))
    nodes = [n for n in strengths if strengths[n] > 0]
    ax.scatter([strengths[n] for n in nodes], [centralities[n] for n in nodes],
               s=8, alpha=0.5, linewidths=0, color="#4878a8")
    ax.set_xscale("log")
    ax.set_xlabel("degree strength")
    ax.set_ylabel("eigenvector centrality")
    return save_figure(fig, path)
