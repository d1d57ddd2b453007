"""Reference/hypothesis alignment and fixed-context correction pairs.

``align`` produces one optimal Levenshtein edit script over Unicode scalar
values with deterministic tie-breaking (match > substitute > delete >
insert).  ``make_pairs`` windows the aligned script into (noisy, clean)
training pairs whose noisy side never exceeds the symbol budget.  A
configurable noise channel stands in for a real recognizer at desk scale.

The DP sweeps rows vectorized in numpy: live memory is two distance rows
plus one byte per cell of backpointer storage for the traceback.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .style import Rng

_MATCH, _SUB, _DEL, _INS = 1, 2, 3, 4


class OpKind(str, Enum):
    MATCH = "match"
    SUBSTITUTE = "substitute"
    INSERT = "insert"  # hypothesis has a spurious character
    DELETE = "delete"  # hypothesis lost a reference character


@dataclass(frozen=True, slots=True)
class EditOp:
    kind: OpKind
    ref_char: str | None = None
    hyp_char: str | None = None


@dataclass(frozen=True)
class Alignment:
    ops: tuple[EditOp, ...]
    distance: int

    def reconstruct_reference(self, hypothesis: str) -> str:
        """Replay the script against ``hypothesis``; returns the reference."""
        out: list[str] = []
        j = 0
        for op in self.ops:
            if op.kind in (OpKind.MATCH, OpKind.SUBSTITUTE):
                if hypothesis[j] != op.hyp_char:
                    raise ValueError("ops do not apply to this hypothesis")
                out.append(op.ref_char)
                j += 1
            elif op.kind is OpKind.INSERT:
                if hypothesis[j] != op.hyp_char:
                    raise ValueError("ops do not apply to this hypothesis")
                j += 1
            else:  # DELETE: reference char the hypothesis lost
                out.append(op.ref_char)
        if j != len(hypothesis):
            raise ValueError("ops do not consume the whole hypothesis")
        return "".join(out)


def _sweep_rows(ref_ids: np.ndarray, hyp_ids: np.ndarray, bp: np.ndarray | None) -> int:
    """Row-by-row DP; optionally fills a backpointer matrix."""
    n, m = len(ref_ids), len(hyp_ids)
    prev = np.arange(m + 1, dtype=np.int64)
    if bp is not None:
        bp[0, 1:] = _INS
        bp[1:, 0] = _DEL
    j = np.arange(1, m + 1, dtype=np.int64)
    cur = np.empty(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        eq = hyp_ids == ref_ids[i - 1]
        diag = prev[:-1] + (~eq)
        up = prev[1:] + 1
        t = np.minimum(diag, up)
        # cur[j] = min(t[j], cur[j-1] + 1) resolved as a prefix scan.
        best = np.minimum.accumulate(t - j) + j
        cur[0] = i
        cur[1:] = np.minimum(best, i + j)
        if bp is not None:
            row = bp[i]
            body = row[1:]
            body[cur[1:] == cur[:-1] + 1] = _INS
            body[cur[1:] == up] = _DEL
            body[(~eq) & (cur[1:] == diag)] = _SUB
            body[eq & (cur[1:] == prev[:-1])] = _MATCH
        prev, cur = cur, prev
    return int(prev[m])


def _to_ids(seq: Sequence) -> np.ndarray:
    if isinstance(seq, str):
        return np.fromiter((ord(c) for c in seq), dtype=np.int64, count=len(seq))
    table: dict = {}
    return np.fromiter(
        (table.setdefault(tok, len(table)) for tok in seq), dtype=np.int64, count=len(seq)
    )


def edit_distance(a: Sequence, b: Sequence) -> int:
    """Levenshtein distance over arbitrary hashable tokens. Distance only."""
    if len(a) == 0:
        return len(b)
    if len(b) == 0:
        return len(a)
    if isinstance(a, str) and isinstance(b, str):
        ia, ib = _to_ids(a), _to_ids(b)
    else:
        table: dict = {}
        ia = np.fromiter((table.setdefault(t, len(table)) for t in a), dtype=np.int64, count=len(a))
        ib = np.fromiter((table.setdefault(t, len(table)) for t in b), dtype=np.int64, count=len(b))
    return _sweep_rows(ia, ib, None)


def align(reference: str, hypothesis: str) -> Alignment:
    """Optimal edit script turning ``hypothesis`` back into ``reference``."""
    n, m = len(reference), len(hypothesis)
    if n == 0:
        ops = tuple(EditOp(OpKind.INSERT, hyp_char=c) for c in hypothesis)
        return Alignment(ops=ops, distance=m)
    if m == 0:
        ops = tuple(EditOp(OpKind.DELETE, ref_char=c) for c in reference)
        return Alignment(ops=ops, distance=n)

    bp = np.zeros((n + 1, m + 1), dtype=np.uint8)
    distance = _sweep_rows(_to_ids(reference), _to_ids(hypothesis), bp)

    ops: list[EditOp] = []
    i, j = n, m
    while i > 0 or j > 0:
        code = bp[i, j]
        if code == _MATCH:
            i -= 1
            j -= 1
            ops.append(EditOp(OpKind.MATCH, reference[i], hypothesis[j]))
        elif code == _SUB:
            i -= 1
            j -= 1
            ops.append(EditOp(OpKind.SUBSTITUTE, reference[i], hypothesis[j]))
        elif code == _DEL:
            i -= 1
            ops.append(EditOp(OpKind.DELETE, ref_char=reference[i]))
        else:
            j -= 1
            ops.append(EditOp(OpKind.INSERT, hyp_char=hypothesis[j]))
    ops.reverse()
    return Alignment(ops=tuple(ops), distance=distance)


@dataclass(frozen=True, slots=True)
class TrainingPair:
    noisy: str
    clean: str
    pair_id: str
    n_errors: int


def _window_ops(ops: tuple[EditOp, ...], window: int, overlap: int) -> list[tuple[int, int]]:
    """Split an op script into (start, end) spans of <= window hyp chars.

    A cut never lands inside a run of error ops: it shifts left to just
    after the nearest match.  Deletes consume no hyp budget and attach to
    the window on their left.
    """
    spans: list[tuple[int, int]] = []
    start = 0
    total = len(ops)
    while start < total:
        used = 0
        k = start
        last_match_cut = None
        while k < total:
            consumes = 1 if ops[k].kind is not OpKind.DELETE else 0
            if used + consumes > window:
                break
            used += consumes
            k += 1
            if ops[k - 1].kind is OpKind.MATCH:
                last_match_cut = k
        end = k
        if k < total and ops[k].kind is not OpKind.MATCH and ops[k - 1].kind is not OpKind.MATCH:
            if last_match_cut is not None and last_match_cut > start:
                end = last_match_cut
        spans.append((start, end))
        if end >= total:
            break
        if overlap > 0:
            back = end
            seen = 0
            while back > start + 1 and seen < overlap:
                if ops[back - 1].kind is not OpKind.DELETE:
                    seen += 1
                back -= 1
            start = back
        else:
            start = end
    return spans


def make_pairs(
    refs: list[str],
    hyps: list[str],
    window: int = 90,
    *,
    keep_clean_ratio: float = 0.1,
    overlap: int = 0,
    seed: int = 0,
    ids: list[str] | None = None,
) -> list[TrainingPair]:
    """Mint fixed-context (noisy, clean) pairs from aligned record lists.

    Pairs with zero errors are kept with probability ``keep_clean_ratio``
    (deterministic under ``seed``).  With ``overlap`` > 0 consecutive
    windows share that many hypothesis characters.
    """
    if len(refs) != len(hyps):
        raise ValueError(f"refs/hyps length mismatch: {len(refs)} vs {len(hyps)}")
    if window < 1:
        raise ValueError("window must be >= 1")
    if ids is not None and len(ids) != len(refs):
        raise ValueError("ids must parallel refs")

    pairs: list[TrainingPair] = []
    for r, (ref, hyp) in enumerate(zip(refs, hyps)):
        rec_id = ids[r] if ids is not None else f"{r:06d}"
        ops = align(ref, hyp).ops
        for w, (start, end) in enumerate(_window_ops(ops, window, overlap)):
            chunk = ops[start:end]
            noisy = "".join(op.hyp_char for op in chunk if op.hyp_char is not None)
            clean = "".join(op.ref_char for op in chunk if op.ref_char is not None)
            n_errors = sum(1 for op in chunk if op.kind is not OpKind.MATCH)
            if n_errors == 0 and keep_clean_ratio < 1.0:
                keep = Rng(seed).child(r, w).random() < keep_clean_ratio
                if not keep:
                    continue
            pairs.append(TrainingPair(noisy=noisy, clean=clean, pair_id=f"{rec_id}:{w:03d}", n_errors=n_errors))
    return pairs


@dataclass(frozen=True)
class NoiseChannelConfig:
    """Synthetic recognizer-error channel configuration."""

    sub_rate: float = 0.0
    ins_rate: float = 0.0
    del_rate: float = 0.0
    confusion_pairs: dict[str, dict[str, float]] | None = None
    seed: int = 0

    def __post_init__(self):
        for name in ("sub_rate", "ins_rate", "del_rate"):
            rate = getattr(self, name)
            if not (0.0 <= rate <= 1.0):
                raise ValueError(f"{name} must be in [0, 1]")
        if self.sub_rate + self.ins_rate + self.del_rate > 1.0 + 1e-9:
            raise ValueError("sub+ins+del rates must not exceed 1")


def noise_channel(text: str, cfg: NoiseChannelConfig, rng: Rng) -> str:
    """Corrupt ``text`` with substitutions, deletions, and insertions.

    Substitutions draw from the confusion table when one covers the
    character, otherwise uniformly from the other characters seen in the
    input.  Insertions are injected after characters at ``ins_rate``.
    """
    alphabet = sorted({c for c in text if not c.isspace()})
    conf = cfg.confusion_pairs or {}

    def substitute(c: str) -> str:
        row = conf.get(c)
        if row:
            chars = sorted(row)
            weights = np.array([row[k] for k in chars], dtype=np.float64)
            weights /= weights.sum()
            return chars[int(rng.gen.choice(len(chars), p=weights))]
        others = [a for a in alphabet if a != c]
        if not others:
            return c
        return others[rng.integers(len(others))]

    out: list[str] = []
    for c in text:
        u = rng.random()
        if u < cfg.del_rate:
            pass
        elif u < cfg.del_rate + cfg.sub_rate:
            out.append(substitute(c))
        else:
            out.append(c)
        if cfg.ins_rate > 0.0 and rng.random() < cfg.ins_rate and alphabet:
            out.append(alphabet[rng.integers(len(alphabet))])
    return "".join(out)
