"""Plain SVG rendering of 2-D ball embeddings and their mixture."""

import numpy as np

PALETTE = (
    "#1f77b4",
    "#ff7f0e",
    "#2ca02c",
    "#9467bd",
    "#8c564b",
    "#e377c2",
    "#7f7f7f",
    "#bcbd22",
    "#17becf",
    "#393b79",
    "#637939",
    "#8c6d31",
)
MEAN_COLOR = "#d62728"


def hyperbolic_circle(center, radius):
    """Euclidean center and radius of the hyperbolic circle ``{x : d(x, center) = radius}``.

    Hyperbolic circles in the Poincaré disc are Euclidean circles whose
    center is pulled toward the origin.
    """
    center = np.asarray(center, dtype=np.float64)
    r0 = float(np.linalg.norm(center))
    u = center / r0 if r0 > 0 else np.array([1.0, 0.0])
    a = np.arctanh(r0)
    far = np.tanh(a + radius / 2)
    near = np.tanh(a - radius / 2)
    return (far + near) / 2 * u, (far - near) / 2


def render_svg(points, labels=None, mixture=None, size=600, point_radius=0.012):
    """SVG document with the unit circle, the nodes and, optionally, the mixture.

    ``labels`` is one community id per node (``None`` or negative for
    unlabeled); means are drawn as red squares with one circle of
    hyperbolic radius sigma around each.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValueError("plotting needs 2-D embeddings; retrain with --dim 2")
    pad = 1.05
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="{-pad} {-pad} {2 * pad} {2 * pad}">',
        # flip y so the picture uses the usual orientation
        '<g transform="scale(1,-1)">',
        '<circle cx="0" cy="0" r="1" fill="none" stroke="black" stroke-width="0.004"/>',
    ]
    for i, (x, y) in enumerate(points):
        color = PALETTE[0]
        if labels is not None and labels[i] is not None and labels[i] >= 0:
            color = PALETTE[int(labels[i]) % len(PALETTE)]
        out.append(f'<circle class="node" cx="{x:.6f}" cy="{y:.6f}" r="{point_radius}" fill="{color}" fill-opacity="0.8"/>')
    if mixture is not None:
        half = 1.5 * point_radius
        for comp in mixture.components:
            c, r = hyperbolic_circle(comp.mu, comp.sigma)
            out.append(
                f'<circle class="sigma" cx="{c[0]:.6f}" cy="{c[1]:.6f}" r="{r:.6f}" '
                f'fill="none" stroke="{MEAN_COLOR}" stroke-width="0.003" stroke-dasharray="0.02,0.01"/>'
            )
            mx, my = comp.mu
            out.append(
                f'<rect class="mean" x="{mx - half:.6f}" y="{my - half:.6f}" '
                f'width="{2 * half}" height="{2 * half}" fill="{MEAN_COLOR}"/>'
            )
    out += ["</g>", "</svg>"]
    return "\n".join(out) + "\n"
