"""Synthetic HTML corpus with a planted fingerprintability signal.

Each site gets a page template and a number of distinct third-party link
domains. Sites at least half a cut above ``domain_cut`` domains get traffic
with no stable structure (every visit looks new), so an attack cannot learn
them; the rest replay a per-site prototype with jittered timing and optional
direction noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..trace import Dataset, TraceRecord, _prototype, perturb

_TAGS = ("div", "p", "span", "section", "ul", "li", "a", "b")
_EXTS = ("png", "jpg", "gif", "ico", "css", "js", "html", "bmp")
_WORDS = ("lorem", "ipsum", "dolor", "sit", "amet", "news", "world", "home", "login", "shop")


@dataclass(frozen=True)
class FpCorpusConfig:
    n_sites: int = 80
    n_instances: int = 20
    domain_cut: int = 8
    trace_len_mean: int = 150
    noise_rate: float = 0.0
    time_jitter: float = 0.1

    def __post_init__(self):
        if self.n_sites < 4 or self.n_instances < 2 or self.domain_cut < 1:
            raise ValueError("need n_sites >= 4, n_instances >= 2 and domain_cut >= 1")
        if not 0.0 <= self.time_jitter < 1.0 or not 0.0 <= self.noise_rate <= 1.0:
            raise ValueError("time_jitter must lie in [0, 1) and noise_rate in [0, 1]")


@dataclass(frozen=True)
class FpCorpus:
    documents: tuple[str, ...]
    instances: tuple[dict, ...]
    traces: Dataset
    unique_domains: dict[str, int]

    @property
    def sites(self) -> list[str]:
        return [m["site"] for m in self.instances]


def _template(rng, n_domains):
    return {
        "domains": [f"cdn{i}.{_word(rng)}{int(rng.integers(1000))}.com" for i in range(n_domains)],
        "blocks": int(rng.integers(3, 10)),
        "depth": int(rng.integers(2, 6)),
        "images": int(rng.integers(1, 12)),
        "scripts": int(rng.integers(0, 6)),
        "style": int(rng.integers(0, 40)),
    }


def _word(rng) -> str:
    return _WORDS[int(rng.integers(len(_WORDS)))]


def _text(rng, n) -> str:
    return " ".join(_word(rng) for _ in range(n))


def _document(rng, site: str, tpl: dict) -> str:
    out = ["<html><head><title>", site, "</title>"]
    for k in range(tpl["scripts"] + int(rng.integers(0, 2))):
        out.append(f'<script src="/static/app{k}.js">var x{k} = {k};</script>')
    out.append('<link rel="stylesheet" href="/static/site.css"></head><body>')
    domains = tpl["domains"]
    for b in range(tpl["blocks"] + int(rng.integers(0, 3))):
        depth = max(1, tpl["depth"] + int(rng.integers(-1, 2)))
        tags = [_TAGS[int(rng.integers(len(_TAGS)))] for _ in range(depth)]
        style = f' style="margin:{tpl["style"]}px"' if tpl["style"] else ""
        out.append("".join(f"<{t}{style if i == 0 else ''}>" for i, t in enumerate(tags)))
        out.append(_text(rng, int(rng.integers(3, 15))))
        out.append("".join(f"</{t}>" for t in reversed(tags)))
        if b % 3 == 0:
            out.append("<!-- block -->")
    # every third-party domain is referenced at least once
    for i, dom in enumerate(domains):
        out.append(f'<a href="https://{dom}/page{i}.html" data-track="{_word(rng)}">{_word(rng)}</a>')
    for k in range(tpl["images"] + int(rng.integers(-1, 2))):
        ext = _EXTS[int(rng.integers(4))]
        host = f"https://{domains[k % len(domains)]}" if domains and k % 2 else ""
        out.append(f'<img src="{host}/img/pic{k}.{ext}" alt="{_word(rng)}">')
    out.append("</body></html>")
    return "".join(out)


def generate_fp_corpus(config: FpCorpusConfig = FpCorpusConfig(), seed: int = 0) -> FpCorpus:
    rng = np.random.default_rng(seed)
    width = len(str(config.n_sites - 1))
    sites = [f"site{s:0{width}d}" for s in range(config.n_sites)]
    hard = set(rng.permutation(config.n_sites)[: config.n_sites // 2].tolist())
    cut = config.domain_cut
    docs, metas, records, unique = [], [], [], {}
    for s, site in enumerate(sites):
        n_dom = int(rng.integers(cut + cut // 2 + 1, 3 * cut + 1)) if s in hard else int(rng.integers(1, cut + 1))
        unique[site] = n_dom
        tpl = _template(rng, n_dom)
        pt, pd = _prototype(rng, config.trace_len_mean)
        for i in range(config.n_instances):
            if s in hard:
                pt, pd = _prototype(rng, config.trace_len_mean)
            t, d, _ = perturb(pt, pd, config.noise_rate, rng)
            t = t * rng.uniform(1 - config.time_jitter, 1 + config.time_jitter)
            doc = _document(rng, site, tpl)
            rec = TraceRecord(site, t, d, meta={"capture_bytes": int(d.size * 512), "duration_seconds": float(t[-1])})
            records.append(rec)
            docs.append(doc)
            metas.append({"instance_id": f"{site}-{i:03d}", "site": site,
                          "capture_bytes": rec.meta["capture_bytes"], "html_bytes": len(doc.encode("utf-8")),
                          "duration_seconds": rec.meta["duration_seconds"]})
    return FpCorpus(tuple(docs), tuple(metas), Dataset(tuple(records)), unique)



