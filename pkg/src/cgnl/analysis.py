"""Affinity maps from a reference position, thresholding and PGM/CSV export."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .compact import GroupConfig
from .core import BlockParams, as_feature_map, linear_transform
from .errors import GeometryError
from .kernels import KernelSpec, taylor_coefficients, taylor_eval
from .oracle import group_vectors

DEFAULT_THRESHOLD = 0.7


@dataclass(frozen=True, eq=False)
class AffinityMask:
    mask: np.ndarray
    scores: np.ndarray          # shifted and max-normalized, in [0, 1]
    raw: np.ndarray             # kernel values before normalization
    reference: int
    threshold: float = DEFAULT_THRESHOLD
    channel_pair: tuple | None = None   # (reference channel, this mask's channel)


def normalize_scores(raw) -> np.ndarray:
    """Shift by the minimum, then divide by the maximum.

    A constant row carries no preference, so every position scores 1.
    """
    raw = np.asarray(raw, dtype=np.float64)
    shifted = raw - raw.min()
    top = shifted.max()
    if top > 0:
        return shifted / top
    return np.ones_like(raw)


def _make_mask(raw, ref, threshold, channel_pair=None) -> AffinityMask:
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must lie in (0, 1], got {threshold}")
    scores = normalize_scores(raw)
    return AffinityMask(scores >= threshold, scores, np.asarray(raw, dtype=np.float64),
                        ref, threshold, channel_pair)


def nl_affinity(x, params: BlockParams, ref: int, threshold: float = DEFAULT_THRESHOLD) -> AffinityMask:
    """Row ``ref`` of the ``N x N`` dot-product pairwise matrix, thresholded."""
    x = as_feature_map(x)
    n, c = x.shape
    params.check_channels(c)
    if not 0 <= ref < n:
        raise IndexError(f"reference position {ref} outside [0, {n})")
    theta_ref = linear_transform(x[ref:ref + 1], params.w_theta)[0]
    phi = linear_transform(x, params.w_phi)
    raw = phi[:, 0] * theta_ref[0]
    for k in range(1, c):
        raw += phi[:, k] * theta_ref[k]
    return _make_mask(raw, ref, threshold)


def cgnl_affinity(x, params: BlockParams, spec: KernelSpec, grp: GroupConfig, ref: int,
                  ref_channel: int, threshold: float = DEFAULT_THRESHOLD) -> list[AffinityMask]:
    """Per-channel affinity masks of element ``(ref, ref_channel)`` within its group.

    Scores are the truncated-series kernel between the reference entry of
    ``theta'`` and every entry of ``phi'`` in the same group, folded back
    to one ``N``-vector per channel.  Each mask is normalized on its own.
    """
    x = as_feature_map(x)
    n, c = x.shape
    if not 0 <= ref < n:
        raise IndexError(f"reference position {ref} outside [0, {n})")
    if not 0 <= ref_channel < c:
        raise IndexError(f"reference channel {ref_channel} outside [0, {c})")
    cg = grp.channels_per_group(c)
    k = ref_channel // cg
    t, f, _ = group_vectors(x, params, spec, grp.groups)[k]
    local = ref_channel - k * cg
    raw = taylor_eval(t[local * n + ref], f, taylor_coefficients(spec))
    raw = np.broadcast_to(raw, f.shape).reshape(cg, n)
    return [_make_mask(raw[j], ref, threshold, (ref_channel, k * cg + j)) for j in range(cg)]


def export_mask(m: AffinityMask, height: int, width: int, path, frames: int = 1) -> list[Path]:
    """Write ``<stem>.pgm`` (P5, scores scaled by ``floor(255 s)``) and ``<stem>.mask.csv``.

    Positions fold row-major into ``height x width``.  With ``frames > 1``
    (``N = T*H*W``) one PGM per frame is written as ``<stem>.f<t>.pgm``.
    Returns the written paths.
    """
    n = m.scores.size
    if height < 1 or width < 1 or frames < 1 or frames * height * width != n:
        raise GeometryError(f"cannot fold N={n} into {frames} x {height} x {width}")
    path = Path(path)
    stem = path.with_suffix("") if path.suffix in (".pgm", ".csv") else path
    pixels = np.floor(np.clip(m.scores, 0.0, 1.0) * 255).astype(np.uint8)
    pixels = pixels.reshape(frames, height, width)
    written = []
    for t in range(frames):
        out = Path(f"{stem}.pgm" if frames == 1 else f"{stem}.f{t:03d}.pgm")
        with open(out, "wb") as fh:
            fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
            fh.write(pixels[t].tobytes())
        written.append(out)
    csv_path = Path(f"{stem}.mask.csv")
    rows = m.mask.reshape(frames * height, width).astype(int)
    csv_path.write_text("\n".join(",".join(str(v) for v in row) for row in rows) + "\n")
    written.append(csv_path)
    return written


def read_mask_csv(path) -> np.ndarray:
    text = Path(path).read_text().split()
    return np.array([v == "1" for line in text for v in line.split(",")], dtype=bool)


def read_pgm(path) -> np.ndarray:
    """Minimal P5 reader for the files written by :func:`export_mask`."""
    data = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1  # single whitespace byte ends the header
    if tokens[0] != b"P5":
        raise ValueError(f"{path} is not a binary PGM")
    width, height, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise ValueError(f"unsupported maxval {maxval}")
    return np.frombuffer(data[pos:pos + width * height], dtype=np.uint8).reshape(height, width)
