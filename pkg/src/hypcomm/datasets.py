"""Bundled example graph."""

from importlib import resources

from .graph import load_graph


def bundled_path(name):
    """Path of a file shipped in ``hypcomm/data`` (e.g. ``karate.edges``)."""
    path = resources.files("hypcomm") / "data" / name
    if not path.is_file():
        raise FileNotFoundError(f"no such input: bundled {name}")
    return path


def karate():
    """Zachary's karate club: graph, 34 x 2 label matrix and community names."""
    return load_graph(bundled_path("karate.edges"), bundled_path("karate.labels"))
