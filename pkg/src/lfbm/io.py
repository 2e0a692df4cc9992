"""File formats: TSV edge lists, label/score files, side-information files
and JSON checkpoints.

Edge lists are UTF-8 text, one observed entry per line as
"i<TAB>j<TAB>s" with s in {0, 1}. Lines starting with '#' are comments;
two comment forms carry meaning: "#n=<N>" overrides the object count and
"#undirected" mirrors every entry (i, j) into (j, i). Writers emit a
canonical form, sorted by (i, j), that parses back to an equal relation.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import IO, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .core import DataError, FitTrace, LatentState, RelationData, SideInfo, validate

FORMAT_VERSION = 1

Source = Union[str, bytes, Path, IO]


def _read_lines(source: Source) -> List[str]:
    if isinstance(source, Path):
        return source.read_text(encoding="utf-8").splitlines()
    if isinstance(source, bytes):
        return source.decode("utf-8").splitlines()
    if isinstance(source, str):
        return source.splitlines()
    payload = source.read()
    if isinstance(payload, bytes):
        payload = payload.decode("utf-8")
    return payload.splitlines()


def parse_edge_list(source: Source) -> RelationData:
    """Parse an edge list into a validated RelationData.

    Unless a "#n=" header says otherwise, the object count is one plus
    the largest index seen. Duplicate pairs (after mirroring, for
    undirected input) are an error; error messages carry line numbers.
    """
    n_override: Optional[int] = None
    undirected = False
    raw: List[Tuple[int, int, int]] = []
    seen = {}
    for lineno, line in enumerate(_read_lines(source), start=1):
        text = line.strip()
        if not text:
            continue
        if text.startswith("#"):
            body = text[1:].strip()
            if body.startswith("n="):
                try:
                    n_override = int(body[2:])
                except ValueError:
                    raise DataError(f"line {lineno}: malformed object-count header {text!r}")
            elif body == "undirected":
                undirected = True
            continue
        fields = text.split("\t")
        if len(fields) != 3:
            raise DataError(
                f"line {lineno}: expected 'i<TAB>j<TAB>s', got {line!r}"
            )
        try:
            i, j, s = (int(f) for f in fields)
        except ValueError:
            raise DataError(f"line {lineno}: non-integer field in {line!r}")
        if s not in (0, 1):
            raise DataError(f"line {lineno}: non-binary value {s}")
        mirrored = [(i, j, s)]
        if undirected and i != j:
            mirrored.append((j, i, s))
        for entry in mirrored:
            key = entry[:2]
            if key in seen:
                raise DataError(
                    f"line {lineno}: duplicate pair {key} (first seen at line {seen[key]})"
                )
            seen[key] = lineno
            raw.append(entry)
    if n_override is not None:
        n = n_override
    else:
        n = 1 + max((max(i, j) for i, j, _ in raw), default=-1)
    data = RelationData(n=n, entries=tuple(raw), directed=not undirected)
    validate(data)
    return data


def write_edge_list(data: RelationData, target: Union[Path, IO, None] = None) -> str:
    """Serialize to the canonical edge-list text; optionally write it out.

    Directed data lists every entry. Undirected data (which stores each
    link as two mirrored entries) must be symmetric and lists only the
    i <= j half under an "#undirected" header, so parsing reproduces the
    original relation exactly.
    """
    lines = [f"#n={data.n}"]
    if data.directed:
        body = data.entries
    else:
        by_pair = {(i, j): s for i, j, s in data.entries}
        for (i, j), s in by_pair.items():
            if by_pair.get((j, i)) != s:
                raise DataError(
                    f"undirected relation is not symmetric at pair ({i}, {j})"
                )
        lines.append("#undirected")
        body = tuple(e for e in data.entries if e[0] <= e[1])
    lines.extend(f"{i}\t{j}\t{s}" for i, j, s in body)
    text = "\n".join(lines) + "\n"
    if target is not None:
        if isinstance(target, Path):
            target.write_text(text, encoding="utf-8")
        else:
            target.write(text)
    return text


def read_labels(source: Source) -> np.ndarray:
    """One integer label per line, index-aligned with objects."""
    labels = []
    for lineno, line in enumerate(_read_lines(source), start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        try:
            labels.append(int(text))
        except ValueError:
            raise DataError(f"line {lineno}: non-integer label {line!r}")
    return np.asarray(labels, dtype=np.int64)


def write_labels(labels: Sequence[int], target: Union[Path, IO]) -> None:
    text = "\n".join(str(int(x)) for x in labels) + "\n"
    if isinstance(target, Path):
        target.write_text(text, encoding="utf-8")
    else:
        target.write(text)


def read_pairs(source: Source) -> List[Tuple[int, int]]:
    """Pairs "i<TAB>j" (extra columns ignored, so labeled test files work)."""
    pairs = []
    for lineno, line in enumerate(_read_lines(source), start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        fields = text.split("\t")
        if len(fields) < 2:
            raise DataError(f"line {lineno}: expected at least 'i<TAB>j', got {line!r}")
        try:
            pairs.append((int(fields[0]), int(fields[1])))
        except ValueError:
            raise DataError(f"line {lineno}: non-integer index in {line!r}")
    return pairs


def write_scores(
    pairs: Sequence[Tuple[int, int]], scores: Sequence[float], target: Union[Path, IO]
) -> None:
    """Full-precision "i<TAB>j<TAB>score" lines."""
    lines = [f"{i}\t{j}\t{float(x)!r}" for (i, j), x in zip(pairs, scores)]
    text = "\n".join(lines) + "\n"
    if isinstance(target, Path):
        target.write_text(text, encoding="utf-8")
    else:
        target.write(text)


def read_scores(source: Source) -> Tuple[List[Tuple[int, int]], np.ndarray]:
    pairs = []
    values = []
    for lineno, line in enumerate(_read_lines(source), start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        fields = text.split("\t")
        if len(fields) != 3:
            raise DataError(f"line {lineno}: expected 'i<TAB>j<TAB>score', got {line!r}")
        try:
            pairs.append((int(fields[0]), int(fields[1])))
            values.append(float(fields[2]))
        except ValueError:
            raise DataError(f"line {lineno}: malformed score line {line!r}")
    return pairs, np.asarray(values, dtype=np.float64)


def read_side_info(source: Source) -> SideInfo:
    """Covariate lines "i<TAB>j<TAB>f1,f2,...,fm"; m fixed by the first line."""
    vectors = {}
    m: Optional[int] = None
    for lineno, line in enumerate(_read_lines(source), start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        fields = text.split("\t")
        if len(fields) != 3:
            raise DataError(
                f"line {lineno}: expected 'i<TAB>j<TAB>f1,...,fm', got {line!r}"
            )
        try:
            i, j = int(fields[0]), int(fields[1])
            vec = [float(x) for x in fields[2].split(",")]
        except ValueError:
            raise DataError(f"line {lineno}: malformed covariate line {line!r}")
        if m is None:
            m = len(vec)
        elif len(vec) != m:
            raise DataError(
                f"line {lineno}: covariate length {len(vec)} differs from {m}"
            )
        if (i, j) in vectors:
            raise DataError(f"line {lineno}: duplicate covariate pair ({i}, {j})")
        vectors[(i, j)] = np.asarray(vec)
    return SideInfo(m=m or 0, vectors=vectors)


def save_checkpoint(
    state: LatentState, trace: FitTrace, path: Union[str, Path]
) -> None:
    """Write state and trace as JSON with full float round-trip precision."""
    doc = {
        "format_version": FORMAT_VERSION,
        "n": state.n,
        "d": state.d,
        "K": state.k,
        "m": state.m,
        "U": state.U.ravel().tolist(),
        "V": state.V.ravel().tolist(),
        "C": state.C.ravel().tolist(),
        "beta": state.beta.tolist(),
        "z": state.z.tolist(),
        "bias": state.bias,
        "objective_per_sweep": list(trace.objective_per_sweep),
        "eta_per_update": list(trace.eta_per_update),
        "reassignment_counts": list(trace.reassignment_counts),
        "warnings": list(trace.warnings),
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def _expect(doc: dict, key: str, n_items: int) -> list:
    value = doc.get(key)
    if not isinstance(value, list) or len(value) != n_items:
        raise DataError(
            f"checkpoint field {key!r} should be a list of {n_items} values"
        )
    return value


def load_checkpoint(path: Union[str, Path]) -> Tuple[LatentState, FitTrace]:
    """Inverse of save_checkpoint; bit-exact for finite values."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed checkpoint document: {exc}") from exc
    if not isinstance(doc, dict):
        raise DataError("malformed checkpoint document: not a JSON object")
    version = doc.get("format_version")
    if version is None:
        raise DataError("checkpoint version mismatch: missing format_version")
    if version != FORMAT_VERSION:
        raise DataError(
            f"checkpoint version mismatch: got {version!r}, expected {FORMAT_VERSION}"
        )
    try:
        n, d, k, m = (int(doc[key]) for key in ("n", "d", "K", "m"))
    except (KeyError, TypeError, ValueError):
        raise DataError("checkpoint is missing integer dimensions n, d, K, m")
    if n < 0 or d < 1 or k < 1 or m < 0:
        raise DataError(f"checkpoint dimensions out of range: n={n} d={d} K={k} m={m}")
    U = np.asarray(_expect(doc, "U", n * d), dtype=np.float64).reshape(n, d)
    V = np.asarray(_expect(doc, "V", n * d), dtype=np.float64).reshape(n, d)
    C = np.asarray(_expect(doc, "C", k * k), dtype=np.float64).reshape(k, k)
    beta = np.asarray(_expect(doc, "beta", m), dtype=np.float64)
    z = np.asarray(_expect(doc, "z", n), dtype=np.int64)
    if z.size and (z.min() < 0 or z.max() >= k):
        raise DataError("checkpoint labels lie outside [0, K)")
    bias = doc.get("bias")
    if not isinstance(bias, (int, float)) or not math.isfinite(bias):
        raise DataError("checkpoint bias must be a finite number")
    state = LatentState(U=U, V=V, C=C, z=z, beta=beta, bias=float(bias))
    trace = FitTrace(
        objective_per_sweep=tuple(doc.get("objective_per_sweep", ())),
        eta_per_update=tuple(doc.get("eta_per_update", ())),
        reassignment_counts=tuple(doc.get("reassignment_counts", ())),
        warnings=tuple(doc.get("warnings", ())),
    )
    return state, trace
