"""Eigenbasis persistence: human-inspectable header, bit-exact payload."""

from __future__ import annotations

import hashlib
import logging
import os
from pathlib import Path

import numpy as np

from . import __version__
from .errors import CacheError
from .geometry import GraphFunction, enumerate_vertices
from .spectral import EigenBasis, EigenPair, LocalizedDescriptor, build_basis

log = logging.getLogger(__name__)

FORMAT_VERSION = 1

#: fingerprint of the basis ordering decision baked into build_basis
ORDERING_RULE = "ascending-continuum;localized-first-by-generation;dominant-vertex"
ORDERING_FINGERPRINT = hashlib.sha256(ORDERING_RULE.encode()).hexdigest()[:12]


def _pair_line(pair: EigenPair) -> str:
    if pair.localized is not None:
        d = pair.localized
        loc = "{}:{}:{}:{}".format(
            d.j, d.junction,
            "".join(map(str, d.word)) or "e",
            "".join(map(str, d.word_mate)) or "e",
        )
    else:
        loc = "-"
    history = ",".join(float(h).hex() for h in pair.graph_history)
    values = " ".join(float(v).hex() for v in pair.values.values.real)
    return f"{pair.lam!r} {pair.birth_level} {pair.bc} {loc} {history} {values}"


def _parse_word(text: str) -> tuple:
    return () if text == "e" else tuple(int(c) for c in text)


def _parse_pair(line: str, level: int) -> EigenPair:
    head, birth, bc, loc, history, values = line.split(" ", 5)
    localized = None
    if loc != "-":
        j, junction, word, mate = loc.split(":")
        localized = LocalizedDescriptor(
            j=int(j), junction=int(junction),
            word=_parse_word(word), word_mate=_parse_word(mate),
        )
    vals = np.array([float.fromhex(v) for v in values.split(" ")])
    return EigenPair(
        lam=float(head),
        graph_history=tuple(float.fromhex(h) for h in history.split(",")),
        birth_level=int(birth),
        bc=bc,
        values=GraphFunction(level, vals),
        localized=localized,
    )


def basis_cache_save(basis: EigenBasis, path) -> None:
    """Write the basis: key=value header line, one record per eigenpair."""
    body = "\n".join(_pair_line(p) for p in basis.pairs) + "\n"
    checksum = hashlib.sha256(body.encode()).hexdigest()
    header = (
        f"sgnls-basis format_version={FORMAT_VERSION} level={basis.level} "
        f"bc={basis.bc} count={basis.size} "
        f"ordering_fingerprint={ORDERING_FINGERPRINT} "
        f"artifact_version={__version__} checksum={checksum}\n"
    )
    Path(path).write_text(header + body)


def _parse_header(line: str) -> dict:
    fields = line.split()
    if not fields or fields[0] != "sgnls-basis":
        raise CacheError("not a basis cache file")
    out = {}
    for item in fields[1:]:
        key, _, value = item.partition("=")
        out[key] = value
    return out


def basis_cache_load(path) -> EigenBasis:
    """Load a cached basis, verifying format version and payload checksum."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CacheError(f"cannot read cache file {path}: {exc}") from exc
    header, _, body = text.partition("\n")
    meta = _parse_header(header)
    if int(meta.get("format_version", -1)) != FORMAT_VERSION:
        raise CacheError(
            f"cache format version {meta.get('format_version')} != "
            f"{FORMAT_VERSION}; refusing to load"
        )
    checksum = hashlib.sha256(body.encode()).hexdigest()
    if checksum != meta.get("checksum"):
        raise CacheError(f"cache checksum mismatch in {path} (corrupt file)")
    level = int(meta["level"])
    count = int(meta["count"])
    lines = body.splitlines()
    if len(lines) != count:
        raise CacheError(f"cache records {len(lines)} != declared count {count}")
    vs = enumerate_vertices(level)
    pairs = tuple(_parse_pair(line, level) for line in lines)
    return EigenBasis(level=level, bc=meta["bc"], pairs=pairs, vs=vs)


def cache_path(cache_dir, level: int, bc: str) -> Path:
    return Path(cache_dir) / f"basis_M{level}_{bc}.txt"


def load_or_build(level: int, bc: str, cache_dir=None) -> EigenBasis:
    """Return the basis from cache when compatible, else build (and cache).

    A cache file for a different level or boundary condition triggers a
    rebuild; a corrupt file is reported and rebuilt, never silently reused.
    """
    if cache_dir is None:
        return build_basis(level, bc)
    os.makedirs(cache_dir, exist_ok=True)
    path = cache_path(cache_dir, level, bc)
    if path.exists():
        try:
            basis = basis_cache_load(path)
        except CacheError as exc:
            log.warning("rebuilding basis: %s", exc)
        else:
            if basis.level == level and basis.bc == bc:
                return basis
            log.warning(
                "cache %s holds level=%s bc=%s, need level=%s bc=%s; rebuilding",
                path, basis.level, basis.bc, level, bc,
            )
    basis = build_basis(level, bc)
    basis_cache_save(basis, path)
    return basis


def cache_fingerprint(basis: EigenBasis) -> str:
    """Short content hash of the basis payload, echoed in reports."""
    body = "\n".join(_pair_line(p) for p in basis.pairs) + "\n"
    return hashlib.sha256(body.encode()).hexdigest()[:16]
