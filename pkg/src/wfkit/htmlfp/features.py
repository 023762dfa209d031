"""The 65 HTML document features and their rank transform."""

from __future__ import annotations

import ipaddress
import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence
from urllib.parse import urlsplit

import numpy as np
from scipy.stats import rankdata

from .dom import DomTree, Element

log = logging.getLogger(__name__)

N_FEATURES = 65
TRACKED_EXTENSIONS = ("png", "ico", "jpg", "gif", "bmp", "html", "css", "js", "mp3", "avi")
_EXT_ALIASES = {"jpeg": "jpg", "htm": "html"}
_SKIP_SCHEMES = ("javascript:", "mailto:", "data:", "tel:")
# common public second-level suffixes; not a full public suffix list
SECOND_LEVEL_SUFFIXES = frozenset({
    "co.uk", "org.uk", "ac.uk", "gov.uk", "co.jp", "ne.jp", "or.jp", "com.au", "net.au", "org.au",
    "co.nz", "co.in", "co.kr", "com.br", "com.cn", "com.mx", "com.tr", "com.tw", "co.za",
})

FEATURE_NAMES = (
    "links", "links_same_domain", "links_third_party", "link_domains", "link_unique_domains",
    "tag_paths", "unique_tag_paths",
    "path_unique_tags_sum", "path_unique_tags_median", "path_unique_tags_mean", "path_unique_tags_std",
    "depth_direction_changes", "depth_direction_non_changes", "depth_positive", "depth_negative",
    "depth_sum", "depth_std",
    "n_at_max_depth", "n_at_min_depth", "n_at_median_depth", "n_at_mean_depth",
    "n_at_p30_depth", "n_at_p70_depth",
    "max_depth", "min_depth", "median_depth", "mean_depth", "p30_depth", "p70_depth",
    "tags", "unique_tags", "comments", "attributes", "unique_attributes",
    "chars", "chars_script", "chars_style_attr", "chars_attr", "chars_text", "chars_data_attr",
    "words_text", "words_data_attr",
    "img_tags", "img_tag_share",
    "png", "png_share", "ico", "ico_share", "jpg", "jpg_share", "gif", "gif_share",
    "bmp", "bmp_share", "html", "html_share", "css", "css_share", "js", "js_share",
    "mp3", "avi",
    "duration_seconds", "html_bytes", "capture_bytes",
)
assert len(FEATURE_NAMES) == N_FEATURES


@dataclass(frozen=True)
class HtmlFeatureRow:
    values: np.ndarray
    site: str = ""
    instance_id: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (N_FEATURES,):
            raise ValueError(f"expected {N_FEATURES} features, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(FEATURE_NAMES, self.values.tolist()))


def registrable_domain(host: str) -> str:
    """Last two labels, or three under a known second-level suffix."""
    host = host.lower().rstrip(".")
    if host.startswith("[") or _is_ip(host):
        return host
    labels = host.split(".")
    if len(labels) >= 3 and ".".join(labels[-2:]) in SECOND_LEVEL_SUFFIXES:
        return ".".join(labels[-3:])
    return ".".join(labels[-2:])


def _is_ip(host: str) -> bool:
    try:
        ipaddress.ip_address(host)
    except ValueError:
        return False
    return True


def _link_values(dom: DomTree) -> list[str]:
    out = []
    for el in dom.root.iter():
        for name in ("href", "src"):
            v = el.attrs.get(name)
            if v is None:
                continue
            v = v.strip()
            if not v or v.startswith("#") or v.lower().startswith(_SKIP_SCHEMES):
                continue
            out.append(v)
    return out


def _host(url: str) -> str | None:
    try:
        netloc = urlsplit(url).hostname
    except ValueError:
        return None
    return netloc or None


def _extension(url: str) -> str | None:
    try:
        path = urlsplit(url).path
    except ValueError:
        return None
    last = path.rsplit("/", 1)[-1]
    if "." not in last:
        return None
    ext = last.rsplit(".", 1)[-1].lower()
    return _EXT_ALIASES.get(ext, ext)


def nearest_rank(sorted_values: np.ndarray, pct: float) -> float:
    """Nearest-rank percentile of already sorted values."""
    n = sorted_values.size
    rank = max(1, math.ceil(pct / 100.0 * n - 1e-12))
    return float(sorted_values[rank - 1])


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def tag_paths(dom: DomTree) -> list[tuple[str, ...]]:
    """One ancestor-tag chain per element, in document order."""
    out = []
    stack = [(c, ()) for c in reversed(dom.root.children) if isinstance(c, Element)]
    while stack:
        el, prefix = stack.pop()
        path = prefix + (el.tag,)
        out.append(path)
        stack.extend((c, path) for c in reversed(el.children) if isinstance(c, Element))
    return out


@dataclass(frozen=True)
class DirectionStats:
    changes: int
    non_changes: int
    positive: int
    negative: int


def depth_direction_stats(depths: Sequence[int]) -> DirectionStats:
    """Signs of consecutive depth differences; a change is a sign flip between
    consecutive non-zero steps, every other adjacent pair is a non-change."""
    steps = np.sign(np.diff(np.asarray(depths, dtype=np.int64)))
    pos = int(np.sum(steps > 0))
    neg = int(np.sum(steps < 0))
    a, b = steps[:-1], steps[1:]
    flips = int(np.sum((a != 0) & (b != 0) & (a != b)))
    return DirectionStats(flips, int(max(0, steps.size - 1) - flips), pos, neg)


def _words(s: str) -> int:
    return len(s.split())


def extract_features(dom: DomTree, meta: Mapping | None = None, page_url: str = "") -> HtmlFeatureRow:
    meta = dict(meta or {})
    f: list[float] = []

    # links and domains
    page_domain = registrable_domain(_host(page_url) or "") if page_url else ""
    links = _link_values(dom)
    hosts = [_host(u) for u in links]
    domains = [registrable_domain(h) for h in hosts if h]
    same = sum(1 for h in hosts if h is None or registrable_domain(h) == page_domain)
    f += [len(links), same, len(links) - same, len(domains), len(set(domains))]

    # tag paths
    paths = tag_paths(dom)
    depths = np.array([len(p) for p in paths], dtype=np.float64)
    uniq = np.array([len(set(p)) for p in paths], dtype=np.float64)
    f += [len(paths), len(set(paths))]
    if paths:
        f += [uniq.sum(), float(np.median(uniq)), uniq.mean(), uniq.std()]
    else:
        f += [0.0] * 4
    ds = depth_direction_stats(depths.astype(np.int64))
    f += [ds.changes, ds.non_changes, ds.positive, ds.negative]
    if paths:
        sd = np.sort(depths)
        stats = [sd[-1], sd[0], float(np.median(sd)), float(round_half_up(sd.mean())),
                 nearest_rank(sd, 30), nearest_rank(sd, 70)]
        f += [depths.sum(), depths.std()]
        f += [float(np.sum(depths == s)) for s in stats]
        f += stats
    else:
        f += [0.0] * 14

    # tags and other elements
    elements = dom.elements()
    attrs = [(k, v) for el in elements for k, v in el.attrs.items()]
    data_attr = [v for k, v in attrs if k == "data" or k.startswith("data-")]
    text = "".join(el.text for el in elements)
    f += [len(elements), len({el.tag for el in elements}), len(dom.comments()),
          len(attrs), len({k for k, _ in attrs}), dom.source_length,
          sum(len(el.text) for el in elements if el.tag == "script"),
          sum(len(v) for k, v in attrs if k == "style"),
          sum(len(v) for _, v in attrs),
          len(text), sum(len(v) for v in data_attr),
          _words(text), sum(_words(v) for v in data_attr)]

    # embedded files
    n_img = sum(el.tag == "img" for el in elements)
    f += [n_img, n_img / len(paths) if paths else 0.0]
    exts = [_extension(u) for u in links]
    counts = {e: sum(x == e for x in exts) for e in TRACKED_EXTENSIONS}
    denom = sum(counts.values())
    for e in TRACKED_EXTENSIONS[:8]:
        f += [counts[e], counts[e] / denom if denom else 0.0]
    f += [counts["mp3"], counts["avi"]]

    # capture metadata
    for key in ("duration_seconds", "html_bytes", "capture_bytes"):
        v = meta.get(key)
        if v is None:
            log.warning("metadata field %s missing; using 0", key)
            v = 0.0
        f.append(float(v))
    return HtmlFeatureRow(np.array(f, dtype=np.float64), str(meta.get("site", "")),
                          str(meta.get("instance_id", "")))


def rank_transform(matrix) -> np.ndarray:
    """Column-wise ascending ranks from 1; ties share the minimum rank."""
    rows = [r.values if isinstance(r, HtmlFeatureRow) else r for r in matrix]
    M = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if M.shape[0] < 1:
        raise ValueError("need at least one row")
    return rankdata(M, method="min", axis=0).astype(np.int64)
