"""Single-example rewrite latency, no batching.

Each dialogue is rewritten on its own and timed with ``perf_counter``; file
I/O and input parsing stay outside the timed region. Warmup iterations run
first and are discarded.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import asdict, dataclass
from typing import Callable, List, Sequence

import numpy as np

from .corpus import Dialogue
from .labeler import LabelConfig, build_labeled_example
from .splicer import DecodePolicy, Rewriter, decode
from .tagger.model import argmax_tags


@dataclass
class LatencyReport:
    mode: str
    examples: int
    repetitions: int
    warmup: int
    mean_ms: float
    median_ms: float
    p95_ms: float
    tokens_per_second: float

    def as_dict(self) -> dict:
        return asdict(self)

    def format(self) -> str:
        return (f"mode={self.mode} examples={self.examples} reps={self.repetitions} "
                f"mean={self.mean_ms:.4f}ms median={self.median_ms:.4f}ms p95={self.p95_ms:.4f}ms "
                f"throughput={self.tokens_per_second:.0f} tok/s")


def _measure(jobs: Sequence[Callable[[], object]], sizes: Sequence[int], warmup: int,
             repetitions: int, mode: str) -> LatencyReport:
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if not jobs:
        raise ValueError("bench needs at least one example")
    for i in range(warmup):
        jobs[i % len(jobs)]()
    times: List[float] = []
    tokens = 0
    for _ in range(repetitions):
        for job, size in zip(jobs, sizes):
            t0 = time.perf_counter()
            job()
            times.append(time.perf_counter() - t0)
            tokens += size
    ms = np.array(times) * 1e3
    total = float(np.sum(times))
    return LatencyReport(
        mode, len(jobs), repetitions, warmup,
        float(ms.mean()), float(statistics.median(ms)), float(np.percentile(ms, 95)),
        tokens / total if total > 0 else float("inf"),
    )


def bench_model(dialogues: Sequence[Dialogue], rewriter: Rewriter, warmup: int = 10,
                repetitions: int = 1) -> LatencyReport:
    """Full path: assemble, encode, tag, decode."""
    jobs = [lambda d=d: rewriter.rewrite(d) for d in dialogues]
    sizes = [len(rewriter.assemble(d)) for d in dialogues]
    return _measure(jobs, sizes, warmup, repetitions, "full")


def gold_logits(y_sgt: Sequence[int], n_classes: int, margin: float = 50.0) -> np.ndarray:
    logits = np.zeros((len(y_sgt), n_classes))
    logits[np.arange(len(y_sgt)), np.asarray(y_sgt)] = margin
    return logits


def bench_decode(dialogues: Sequence[Dialogue], label_config: LabelConfig = LabelConfig(),
                 policy: DecodePolicy = DecodePolicy(), warmup: int = 10,
                 repetitions: int = 1) -> LatencyReport:
    """Decode-only path from saturated gold logits: argmax, runs, splice.

    Dialogues must be coverable.
    """
    jobs, sizes = [], []
    for d in dialogues:
        ex = build_labeled_example(d, label_config)
        logits = gold_logits(ex.y_sgt, label_config.n_classes)
        inp = ex.input
        jobs.append(lambda logits=logits, inp=inp, d=d: decode(argmax_tags(logits), inp, d, policy))
        sizes.append(len(inp))
    return _measure(jobs, sizes, warmup, repetitions, "decode")
