"""Dataset registry, download cache and an offline stand-in for ego-Facebook."""

from __future__ import annotations

import gzip
import os
import shutil
import tempfile
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import Graph, load_edge_list

CACHE_ENV = "LDP_POISON_CACHE"


class RegistryError(KeyError):
    pass


class IntegrityError(RuntimeError):
    pass


class FetchError(RuntimeError):
    """Network failure; safe to retry."""


@dataclass(frozen=True)
class DatasetInfo:
    name: str
    url: str | None
    vertices: int
    edges: int
    large: bool = False


REGISTRY: dict[str, DatasetInfo] = {
    d.name: d
    for d in [
        DatasetInfo("facebook", "https://snap.stanford.edu/data/facebook_combined.txt.gz", 4039, 88234),
        DatasetInfo("enron", "https://snap.stanford.edu/data/email-Enron.txt.gz", 36692, 183831),
        DatasetInfo("astroph", "https://snap.stanford.edu/data/ca-AstroPh.txt.gz", 18772, 198110),
        DatasetInfo("gplus", "https://snap.stanford.edu/data/gplus_combined.txt.gz", 107614, 12238285, large=True),
        # generated locally; same vertex and edge counts as facebook
        DatasetInfo("facebook-surrogate", None, 4039, 88234),
    ]
}


def default_cache_dir() -> Path:
    return Path(os.environ.get(CACHE_ENV, Path.home() / ".cache" / "ldp_poison"))


def _info(name: str) -> DatasetInfo:
    try:
        return REGISTRY[name.lower()]
    except KeyError:
        raise RegistryError(f"unknown dataset {name!r}; known: {', '.join(sorted(REGISTRY))}") from None


def _verify(info: DatasetInfo, g: Graph) -> Graph:
    if (g.num_nodes, g.edge_count) != (info.vertices, info.edges):
        raise IntegrityError(f"{info.name}: parsed {g.num_nodes} vertices / {g.edge_count} edges, "
                             f"expected {info.vertices} / {info.edges}")
    return g


def fetch_dataset(name: str, cache_dir: str | Path | None = None, *, allow_large: bool = False,
                  timeout: float = 60.0) -> Path:
    """Local path of the (verified) edge list for ``name``, downloading on first use."""
    info = _info(name)
    if info.large and not allow_large:
        raise RegistryError(f"{info.name} is large; pass allow_large to use it")
    cache = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    cache.mkdir(parents=True, exist_ok=True)
    path = cache / f"{info.name}.txt"
    if path.exists():
        return path
    if info.url is None:
        g = facebook_surrogate()
        _write_edges(g, path)
        return path
    tmp = Path(tempfile.mkstemp(dir=cache, suffix=".part")[1])
    try:
        with urllib.request.urlopen(info.url, timeout=timeout) as resp, open(tmp, "wb") as out:
            shutil.copyfileobj(resp, out)
        opener = gzip.open if info.url.endswith(".gz") else open
        with opener(tmp, "rb") as fh:
            g = load_edge_list(fh)
        _verify(info, g)
        with opener(tmp, "rb") as src, open(path, "wb") as dst:
            shutil.copyfileobj(src, dst)
    except (urllib.error.URLError, TimeoutError, ConnectionError) as exc:
        raise FetchError(f"could not download {info.name}: {exc}") from exc
    finally:
        tmp.unlink(missing_ok=True)
    return path


def load_dataset(name_or_path: str | Path, cache_dir: str | Path | None = None, *,
                 allow_large: bool = False) -> Graph:
    """Load a registry dataset by name, or any edge-list file by path."""
    key = str(name_or_path).lower()
    if key in REGISTRY:
        path = fetch_dataset(key, cache_dir, allow_large=allow_large)
        with open(path, "rb") as fh:
            return _verify(REGISTRY[key], load_edge_list(fh))
    path = Path(name_or_path)
    if not path.exists():
        raise RegistryError(f"{name_or_path!r} is neither a registered dataset nor a file")
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return load_edge_list(fh)


def cached(name: str, cache_dir: str | Path | None = None) -> bool:
    cache = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    return (cache / f"{_info(name).name}.txt").exists()


def facebook_surrogate(seed: int = 4039) -> Graph:
    """Clustered, hub-heavy graph with ego-Facebook's vertex and edge counts.

    Nodes fall into heavy-tailed communities that are dense inside; ten ego
    hubs each link whole groups of communities; random cross links and a
    final trim/top-up land exactly on 88,234 edges.
    """
    info = REGISTRY["facebook-surrogate"]
    n = info.vertices
    rng = np.random.default_rng(seed)
    sizes = []
    while sum(sizes) < n - 10:
        sizes.append(int(np.clip(rng.pareto(1.6) * 25 + 12, 12, 260)))
    sizes[-1] -= sum(sizes) - (n - 10)
    hubs = np.arange(n - 10, n)
    start = np.cumsum([0] + sizes[:-1])
    pairs = set()

    def add(u, v):
        if u != v:
            pairs.add((min(u, v), max(u, v)))

    for s, size in zip(start, sizes):
        if size < 2:
            continue
        prob = min(0.85, 36.0 / size)
        iu, ju = np.triu_indices(size, 1)
        keep = rng.random(iu.size) < prob
        for a, b in zip(iu[keep] + s, ju[keep] + s):
            add(int(a), int(b))
    groups = np.array_split(rng.permutation(len(sizes)), len(hubs))
    for h, group in zip(hubs, groups):
        for c in group:
            members = np.arange(start[c], start[c] + sizes[c])
            for v in members[rng.random(members.size) < 0.8]:
                add(int(h), int(v))
    while len(pairs) < info.edges:
        u, v = rng.integers(n, size=2)
        add(int(u), int(v))
    edges = np.array(sorted(pairs), dtype=np.int64)
    if len(edges) > info.edges:
        edges = edges[np.sort(rng.choice(len(edges), size=info.edges, replace=False))]
    return _verify(info, Graph.from_edges(n, edges))


def _write_edges(g: Graph, path: Path) -> None:
    tmp = path.with_suffix(".part")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(f"# {g.num_nodes} nodes, {g.edge_count} edges\n")
        for u, v in g.edges():
            fh.write(f"{u} {v}\n")
    tmp.replace(path)
