"""Process-based work pool with voluntary work sharing, and parallel sorters.

Workers are forked processes sharing the character buffer (copy-on-write)
and the handle/scratch arrays (anonymous shared memory), so jobs write
directly into disjoint ranges of the final arrays.  Scheduling follows one
idea: a central queue holds coarse jobs, workers keep recursion on local
stacks, and an unsynchronized idle counter tells busy workers when to
donate their largest pending subproblems back to the queue.

Fully parallel steps (classification/counting, global prefix sum,
redistribution) are phased from the coordinating thread: shard jobs run on
the pool, the prefix sum is sequential, and recursive subproblems below
the fully-parallel threshold flow back into the queue as batch jobs.
"""

from __future__ import annotations

import heapq
import multiprocessing as mp
import os
import queue as queue_mod
import threading
import traceback
from dataclasses import dataclass

import numpy as np

from .basecase import SortedWithLcp, fill_dchar
from .counters import SortStats
from .lcpmerge import LcpStream, MergeJob, kway_lcp_merge, run_merge_job, split_merge_jobs
from .mkqs import INSERTION_THRESHOLD, _median3, mkqs_cached, mkqs_cached_items
from .radix import RADIX16_THRESHOLD, _digits8, _digits16, radix8_items
from .ssss import (
    S5Context,
    T_MEDIUM,
    classify_keys,
    child_depths,
    draw_sample,
    s5_sort_items,
    select_splitters,
    tree_capacity,
)
from .strset import (
    LCP_UNDEF,
    WORD_CHARS,
    StringSet,
    extract_keys,
    lcp,
    shared_chars,
)

_CTX = mp.get_context("fork")

BLOCK_SIZE = 131072  # entries per partition block


def shared_array(n: int, dtype) -> np.ndarray:
    """Anonymous shared-memory array, visible to forked workers."""
    itemsize = np.dtype(dtype).itemsize
    raw = _CTX.RawArray("b", max(n, 1) * itemsize)
    return np.frombuffer(raw, dtype=dtype, count=max(n, 1))[:n]


def default_workers() -> int:
    return os.cpu_count() or 1


class WorkerFailure(RuntimeError):
    pass


@dataclass
class _Env:
    """Per-worker handles to the pool's shared state."""

    jobs: object
    replies: object
    outstanding: object
    idle: object
    share_events: object
    stop: object
    fail: object
    stats: SortStats

    def enqueue(self, job) -> None:
        with self.outstanding.get_lock():
            self.outstanding.value += 1
        self.stats.jobs_enqueued += 1
        self.jobs.put(job)

    def idle_workers(self) -> int:
        return self.idle.value

    def record_share(self) -> None:
        with self.share_events.get_lock():
            self.share_events.value += 1
        self.stats.share_events += 1


def _worker_main(executor, ctx, env: _Env, worker_id: int) -> None:
    was_idle = False
    try:
        while True:
            try:
                job = env.jobs.get(timeout=0.05)
            except queue_mod.Empty:
                if not was_idle:
                    with env.idle.get_lock():
                        env.idle.value += 1
                    was_idle = True
                if env.stop.is_set():
                    break
                continue
            if was_idle:
                with env.idle.get_lock():
                    env.idle.value -= 1
                was_idle = False
            try:
                executor(ctx, job, env)
                env.stats.jobs_executed += 1
            except Exception:
                # the flag must precede the counter decrement, or the main
                # process could observe quiescence before the diagnostic
                env.fail.set()
                env.replies.put(("error", worker_id, traceback.format_exc()))
            finally:
                with env.outstanding.get_lock():
                    env.outstanding.value -= 1
    except Exception:
        env.fail.set()
        env.replies.put(("error", worker_id, traceback.format_exc()))
    finally:
        env.replies.put(("stats", worker_id, env.stats.as_dict()))


class WorkPool:
    """p forked workers around one job queue.

    Every enqueued job executes exactly once; the pool is quiescent when
    the outstanding-job counter returns to zero.  Worker exceptions abort
    the run with the worker's traceback.
    """

    def __init__(self, p: int, executor, ctx):
        self.p = p
        self.jobs = _CTX.Queue()
        self.replies = _CTX.Queue()
        self.outstanding = _CTX.Value("q", 0)
        self.idle = _CTX.Value("i", 0)
        self.share_events = _CTX.Value("q", 0)
        self.stop = _CTX.Event()
        self.fail = _CTX.Event()
        self.stats = SortStats()
        self._stats_seen = 0
        self._closed = False
        self.workers = []
        for i in range(p):
            env = _Env(
                self.jobs, self.replies, self.outstanding, self.idle,
                self.share_events, self.stop, self.fail, SortStats(),
            )
            w = _CTX.Process(
                target=_worker_main, args=(executor, ctx, env, i), daemon=True
            )
            w.start()
            self.workers.append(w)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.shutdown()

    def submit(self, job) -> None:
        with self.outstanding.get_lock():
            self.outstanding.value += 1
        self.jobs.put(job)

    def _handle(self, msg) -> None:
        if msg[0] == "error":
            self.stop.set()
            raise WorkerFailure(f"worker {msg[1]} failed:\n{msg[2]}")
        if msg[0] == "stats":
            self.stats.add(SortStats.from_dict(msg[2]))
            self._stats_seen += 1

    def wait_phase(self, count: int, collect=None) -> list:
        """Wait for `count` phase replies, returning their payloads."""
        out = []
        while len(out) < count:
            msg = self.replies.get()
            if msg[0] == "phase":
                out.append(msg[1])
                if collect is not None:
                    collect(msg[1])
            else:
                self._handle(msg)
        return out

    def wait_idle(self) -> None:
        """Block until all submitted jobs (and their descendants) finished."""
        while True:
            if self.fail.is_set():
                msg = self.replies.get()  # the error diagnostic is in flight
                self._handle(msg)
                continue
            with self.outstanding.get_lock():
                if self.outstanding.value == 0:
                    return
            try:
                msg = self.replies.get(timeout=0.1)
            except queue_mod.Empty:
                continue
            self._handle(msg)

    def shutdown(self) -> None:
        if self._closed:
            return
        self._closed = True
        self.stop.set()
        while self._stats_seen < len(self.workers):
            try:
                msg = self.replies.get(timeout=5.0)
            except queue_mod.Empty:
                break
            try:
                self._handle(msg)
            except WorkerFailure:
                pass
        for w in self.workers:
            w.join(timeout=5.0)
            if w.is_alive():
                w.terminate()
        self.jobs.close()
        self.replies.close()


def pool_run(p: int, root_jobs: list, executor, ctx) -> SortStats:
    """Run root jobs (and everything they spawn) to quiescence; return stats."""
    with WorkPool(p, executor, ctx) as pool:
        for job in root_jobs:
            pool.submit(job)
        pool.wait_idle()
        pool.shutdown()
        return pool.stats


def make_share_hook(env: _Env, job_of_entry):
    """Donate the largest pending stack entries when workers sit idle.

    `job_of_entry` wraps a list of stack entries into a queue job.  One
    donation per trigger counts as one share event.
    """

    def share(stack: list) -> None:
        idle = env.idle_workers()
        if idle <= 0 or len(stack) <= 1:
            return
        take = min(idle, len(stack) - 1)
        largest = heapq.nlargest(
            take, range(len(stack)), key=lambda i: stack[i][1] - stack[i][0]
        )
        donated = [stack[i] for i in largest]
        for i in sorted(largest, reverse=True):
            del stack[i]
        env.enqueue(job_of_entry(donated))
        env.record_share()

    return share


# ---------------------------------------------------------------------------
# parallel super scalar string sample sort


@dataclass
class _S5Shared:
    sset: StringSet
    cur: np.ndarray
    other: np.ndarray
    cache: np.ndarray
    lcps: np.ndarray | None
    seed: int
    variant: str
    v: int
    t_medium: int

    def seq_ctx(self, stats: SortStats) -> S5Context:
        return S5Context(
            self.sset, self.cur, self.other, self.cache, self.lcps,
            stats, self.seed, self.variant, self.v, None, self.t_medium,
        )


def _s5_executor(shared: _S5Shared, job, env: _Env) -> None:
    kind = job[0]
    if kind == "classify":
        _, lo, hi, depth, in_cur, tree = job
        src = shared.cur if in_cur else shared.other
        keys = extract_keys(shared.sset, src[lo:hi], depth)
        oracle = classify_keys(keys, tree, shared.variant)
        counts = np.bincount(oracle, minlength=tree.num_buckets)
        env.replies.put(("phase", (lo, hi, oracle, counts, keys)))
    elif kind == "distribute":
        _, lo, hi, in_cur, oracle, keys, offsets = job
        src = shared.cur if in_cur else shared.other
        dst = shared.other if in_cur else shared.cur
        order = np.argsort(oracle, kind="stable")
        sorted_keys = keys[order]
        counts = np.bincount(oracle, minlength=len(offsets))
        nonzero = np.flatnonzero(counts)
        sizes = counts[nonzero]
        group_starts = np.zeros(len(nonzero), dtype=np.int64)
        np.cumsum(sizes[:-1], out=group_starts[1:])
        within = np.arange(len(oracle), dtype=np.int64) - np.repeat(group_starts, sizes)
        pos = np.repeat(offsets[nonzero], sizes) + within
        dst[pos] = src[lo:hi][order]
        kmin = np.minimum.reduceat(sorted_keys, group_starts)
        kmax = np.maximum.reduceat(sorted_keys, group_starts)
        env.replies.put(("phase", (nonzero, kmin, kmax)))
    elif kind == "batch":
        _, entries = job
        ctx = shared.seq_ctx(env.stats)
        s5_sort_items(ctx, entries, share=make_share_hook(env, lambda d: ("batch", d)))
    else:
        raise ValueError(f"unknown s5 job kind: {kind}")


class _ParallelS5Run:
    """One parallel sample-sort run: arena, pool, and phased orchestration."""

    def __init__(
        self,
        sset: StringSet,
        p: int,
        want_lcps: bool = False,
        seed: int = 1,
        variant: str = "unroll",
        v: int = 8191,
        t_medium: int = T_MEDIUM,
    ):
        self.sset = sset
        self.p = max(1, p)
        n = len(sset)
        self.n = n
        cur = shared_array(n, np.int64)
        cur[:] = sset.handles
        other = shared_array(n, np.int64)
        cache = shared_array(n, np.uint64)
        lcps = None
        if want_lcps:
            lcps = shared_array(n, np.int64)
            lcps.fill(LCP_UNDEF)
        self.shared = _S5Shared(
            sset, cur, other, cache, lcps, seed, variant, v, t_medium
        )
        self.pool = WorkPool(self.p, _s5_executor, self.shared)

    def _phased_step(self, lo: int, hi: int, depth: int, in_cur: bool):
        """Classify/count on shards, prefix-sum globally, redistribute."""
        sh = self.shared
        n_sub = hi - lo
        v = tree_capacity(n_sub, sh.v)
        rng = np.random.default_rng((sh.seed, lo, hi, depth))
        src = sh.cur if in_cur else sh.other
        sample = draw_sample(sh.sset, src[lo:hi], depth, v, rng)
        tree = select_splitters(sample, v)
        k = tree.num_buckets
        cuts = np.linspace(lo, hi, self.p + 1).astype(np.int64)
        shards = [
            (int(cuts[i]), int(cuts[i + 1]))
            for i in range(self.p)
            if cuts[i] < cuts[i + 1]
        ]
        for slo, shi in shards:
            self.pool.submit(("classify", slo, shi, depth, in_cur, tree))
        parts = self.pool.wait_phase(len(shards))
        parts.sort(key=lambda t: t[0])
        counts = np.stack([pt[3] for pt in parts])  # (shards, buckets)
        # interleaved prefix sum: bucket-major, shard-minor write regions
        flat = counts.T.reshape(-1)
        starts = np.zeros(len(flat), dtype=np.int64)
        np.cumsum(flat[:-1], out=starts[1:])
        starts += lo
        offsets = starts.reshape(k, len(parts)).T  # per shard, per bucket
        for i, (slo, shi, oracle, _, keys) in enumerate(parts):
            self.pool.submit(
                ("distribute", slo, shi, in_cur, oracle, keys, offsets[i].copy())
            )
        minmax = self.pool.wait_phase(len(parts))
        bucket_min = np.full(k, np.iinfo(np.uint64).max, dtype=np.uint64)
        bucket_max = np.zeros(k, dtype=np.uint64)
        for nonzero, kmin, kmax in minmax:
            np.minimum.at(bucket_min, nonzero, kmin)
            np.maximum.at(bucket_max, nonzero, kmax)
        bounds = np.zeros(k + 1, dtype=np.int64)
        np.cumsum(counts.sum(axis=0), out=bounds[1:])
        return tree, bounds, bucket_min, bucket_max

    def execute(self) -> None:
        sh = self.shared
        n = self.n
        if n == 0:
            return
        par_threshold = max((n + self.p - 1) // self.p, INSERTION_THRESHOLD)
        pending = [(0, n, 0, True)]
        small: list[tuple[int, int, int, bool]] = []
        while pending:
            lo, hi, depth, in_cur = pending.pop()
            if hi - lo < par_threshold or hi - lo < 2 * INSERTION_THRESHOLD:
                small.append((lo, hi, depth, in_cur))
                continue
            tree, bounds, bmin, bmax = self._phased_step(lo, hi, depth, in_cur)
            depths = child_depths(tree, depth)
            dst_in_cur = not in_cur
            if sh.lcps is not None:
                self._boundary_lcps(lo, depth, bounds, bmin, bmax)
            for i in range(tree.num_buckets):
                clo = lo + int(bounds[i])
                chi = lo + int(bounds[i + 1])
                size = chi - clo
                if size == 0:
                    continue
                if i % 2 == 1 and tree.eq_final[i // 2]:
                    if not dst_in_cur:
                        sh.cur[clo:chi] = sh.other[clo:chi]
                    if sh.lcps is not None and size > 1:
                        sh.lcps[clo + 1 : chi] = depth + int(tree.term_pos[i // 2])
                    continue
                if size == 1:
                    if not dst_in_cur:
                        sh.cur[clo:chi] = sh.other[clo:chi]
                    continue
                if size >= par_threshold:
                    pending.append((clo, chi, int(depths[i]), dst_in_cur))
                else:
                    small.append((clo, chi, int(depths[i]), dst_in_cur))
        # feed the sequential tiers as batched jobs; workers share when idle
        if small:
            batches = max(1, min(len(small), 2 * self.p))
            chunks = np.array_split(np.arange(len(small)), batches)
            for chunk in chunks:
                if len(chunk):
                    self.pool.submit(("batch", [small[i] for i in chunk]))
        self.pool.wait_idle()

    def _boundary_lcps(self, lo, depth, bounds, bmin, bmax) -> None:
        sh = self.shared
        sizes = np.diff(bounds)
        nonempty = np.flatnonzero(sizes)
        for t in range(1, len(nonempty)):
            pos = lo + int(bounds[nonempty[t]])
            sh.lcps[pos] = depth + shared_chars(
                int(bmax[nonempty[t - 1]]), int(bmin[nonempty[t]])
            )

    def finish(self, want_dchar: bool = False):
        self.pool.shutdown()
        out = self.sset.with_handles(self.shared.cur.copy())
        if self.shared.lcps is None:
            return out, None, self.pool.stats
        lcps = self.shared.lcps.copy()
        if len(lcps):
            lcps[0] = LCP_UNDEF
        return out, lcps, self.pool.stats


def parallel_s5(
    sset: StringSet,
    p: int | None = None,
    want_lcps: bool = False,
    want_dchar: bool = False,
    seed: int = 1,
    variant: str = "unroll",
    stats: SortStats | None = None,
    t_medium: int = T_MEDIUM,
) -> StringSet | SortedWithLcp:
    """Sample sort on p workers; content order matches the sequential sorter."""
    p = default_workers() if p is None else p
    run = _ParallelS5Run(
        sset, p, want_lcps or want_dchar, seed, variant, t_medium=t_medium
    )
    try:
        run.execute()
    finally:
        out, lcps, run_stats = run.finish()
    if stats is not None:
        stats.add(run_stats)
    if not (want_lcps or want_dchar):
        return out
    dchar = fill_dchar(out, lcps) if want_dchar else None
    return SortedWithLcp(out, lcps, dchar, run_stats)


# ---------------------------------------------------------------------------
# parallel radix sort


@dataclass
class _RadixShared:
    sset: StringSet
    cur: np.ndarray
    other: np.ndarray
    oracle: np.ndarray


def _radix_digits(shared: _RadixShared, src, lo, hi, depth, width):
    if width == 16:
        return _digits16(shared.sset, src[lo:hi], depth)
    return _digits8(shared.sset, src, lo, hi, depth).astype(np.int64)


def _radix_executor(shared: _RadixShared, job, env: _Env) -> None:
    kind = job[0]
    if kind == "count":
        _, lo, hi, depth, in_cur, width = job
        src = shared.cur if in_cur else shared.other
        digs = _radix_digits(shared, src, lo, hi, depth, width)
        counts = np.bincount(digs, minlength=1 << width)
        env.replies.put(("phase", (lo, hi, counts)))
    elif kind == "distribute":
        _, lo, hi, depth, in_cur, width, offsets = job
        src = shared.cur if in_cur else shared.other
        dst = shared.other if in_cur else shared.cur
        digs = _radix_digits(shared, src, lo, hi, depth, width)
        order = np.argsort(digs, kind="stable")
        counts = np.bincount(digs, minlength=len(offsets))
        nonzero = np.flatnonzero(counts)
        sizes = counts[nonzero]
        group_starts = np.zeros(len(nonzero), dtype=np.int64)
        np.cumsum(sizes[:-1], out=group_starts[1:])
        within = np.arange(hi - lo, dtype=np.int64) - np.repeat(group_starts, sizes)
        pos = np.repeat(offsets[nonzero], sizes) + within
        dst[pos] = src[lo:hi][order]
        env.replies.put(("phase", None))
    elif kind == "batch":
        _, entries = job
        items = []
        for lo, hi, depth, in_cur in entries:
            if not in_cur:
                shared.cur[lo:hi] = shared.other[lo:hi]
            if depth >= 0 and hi - lo > 1:
                items.append((lo, hi, depth))
        if items:
            share = make_share_hook(
                env, lambda d: ("batch", [(a, b, c, True) for a, b, c in d])
            )
            radix8_items(shared.sset, shared.cur, items, shared.oracle, share)
    else:
        raise ValueError(f"unknown radix job kind: {kind}")


def parallel_radix(
    sset: StringSet,
    p: int | None = None,
    stats: SortStats | None = None,
) -> StringSet:
    """MSD radix sort with fully parallel counting/redistribution steps.

    Large subproblems run phased 16- or 8-bit steps on the pool; smaller
    ones flow into the queue as batched in-place 8-bit jobs with voluntary
    sharing.  Terminator buckets are final and never recursed.
    """
    p = default_workers() if p is None else max(1, p)
    n = len(sset)
    if n == 0:
        return sset.with_handles(sset.handles.copy())
    cur = shared_array(n, np.int64)
    cur[:] = sset.handles
    other = shared_array(n, np.int64)
    oracle = shared_array(n, np.uint8)
    shared = _RadixShared(sset, cur, other, oracle)
    par_threshold = max((n + p - 1) // p, 2 * INSERTION_THRESHOLD)
    pool = WorkPool(p, _radix_executor, shared)
    try:
        pending = [(0, n, 0, True)]
        small: list[tuple[int, int, int, bool]] = []
        while pending:
            lo, hi, depth, in_cur = pending.pop()
            size = hi - lo
            if size < par_threshold:
                small.append((lo, hi, depth, in_cur))
                continue
            width = 16 if size >= RADIX16_THRESHOLD else 8
            k = 1 << width
            cuts = np.linspace(lo, hi, p + 1).astype(np.int64)
            shards = [
                (int(cuts[i]), int(cuts[i + 1]))
                for i in range(p)
                if cuts[i] < cuts[i + 1]
            ]
            for slo, shi in shards:
                pool.submit(("count", slo, shi, depth, in_cur, width))
            parts = pool.wait_phase(len(shards))
            parts.sort(key=lambda t: t[0])
            counts = np.stack([pt[2] for pt in parts])
            flat = counts.T.reshape(-1)
            starts = np.zeros(len(flat), dtype=np.int64)
            np.cumsum(flat[:-1], out=starts[1:])
            starts += lo
            offsets = starts.reshape(k, len(parts)).T
            for i, (slo, shi, _) in enumerate(parts):
                pool.submit(
                    ("distribute", slo, shi, depth, in_cur, width, offsets[i].copy())
                )
            pool.wait_phase(len(parts))
            total = counts.sum(axis=0)
            bounds = np.zeros(k + 1, dtype=np.int64)
            np.cumsum(total, out=bounds[1:])
            dst_in_cur = not in_cur
            nonzero = np.flatnonzero(total)
            for b in nonzero:
                clo = lo + int(bounds[b])
                chi = lo + int(bounds[b + 1])
                final = b == 0 or (width == 16 and (b & 0xFF) == 0)
                if final or chi - clo == 1:
                    small.append((clo, chi, -1, dst_in_cur))
                elif chi - clo >= par_threshold:
                    pending.append((clo, chi, depth + width // 8, dst_in_cur))
                else:
                    small.append((clo, chi, depth + width // 8, dst_in_cur))
        if small:
            batches = max(1, min(len(small), 2 * p))
            chunks = np.array_split(np.arange(len(small)), batches)
            for chunk in chunks:
                if len(chunk):
                    pool.submit(("batch", [small[i] for i in chunk]))
        pool.wait_idle()
    finally:
        pool.shutdown()
    if stats is not None:
        stats.add(pool.stats)
    return sset.with_handles(cur.copy())


# ---------------------------------------------------------------------------
# parallel caching multikey quicksort (block-based ternary partition)


@dataclass
class _MkqsShared:
    sset: StringSet
    h_arr: np.ndarray  # block arena handles
    c_arr: np.ndarray  # block arena cache words
    out_h: np.ndarray  # compacted output entries
    out_c: np.ndarray
    claim: object  # shared index into the current phase's block list
    block_size: int


def _mkqs_partition_worker(shared: _MkqsShared, job, env: _Env) -> None:
    _, blocks, pivot, spares = job
    B = shared.block_size
    h_arr, c_arr = shared.h_arr, shared.c_arr
    free = list(spares)
    pv = np.uint64(pivot)
    out = {0: [], 1: [], 2: []}
    open_blocks = {c: (free.pop(), 0) for c in (0, 1, 2)}

    def append(cls: int, h_chunk: np.ndarray, c_chunk: np.ndarray) -> None:
        done = 0
        while done < len(h_chunk):
            slot, fill = open_blocks[cls]
            take = min(B - fill, len(h_chunk) - done)
            h_arr[slot + fill : slot + fill + take] = h_chunk[done : done + take]
            c_arr[slot + fill : slot + fill + take] = c_chunk[done : done + take]
            fill += take
            done += take
            if fill == B:
                out[cls].append((slot, B))
                open_blocks[cls] = (free.pop(), 0)
            else:
                open_blocks[cls] = (slot, fill)

    while True:
        with shared.claim.get_lock():
            i = shared.claim.value
            shared.claim.value += 1
        if i >= len(blocks):
            break
        start, fill = blocks[i]
        h_loc = h_arr[start : start + fill].copy()
        c_loc = c_arr[start : start + fill].copy()
        free.append(start)  # consumed input block becomes a write slot
        lt = c_loc < pv
        eq = c_loc == pv
        append(0, h_loc[lt], c_loc[lt])
        append(1, h_loc[eq], c_loc[eq])
        gt = ~(lt | eq)
        append(2, h_loc[gt], c_loc[gt])
    # second phase: flush the (at most three) partially filled blocks
    for cls in (0, 1, 2):
        slot, fill = open_blocks[cls]
        if fill:
            out[cls].append((slot, fill))
        else:
            free.append(slot)
    env.replies.put(("phase", (out[0], out[1], out[2], free)))


def _mkqs_seq_executor(shared: _MkqsShared, job, env: _Env) -> None:
    kind = job[0]
    if kind == "partition":
        _mkqs_partition_worker(shared, job, env)
    elif kind == "seq":
        _, entries = job
        share = make_share_hook(env, lambda d: ("seq", d))
        mkqs_cached_items(
            shared.sset, shared.out_h, shared.out_c, entries, None, env.stats, share
        )
    else:
        raise ValueError(f"unknown mkqs job kind: {kind}")


def parallel_mkqs(
    sset: StringSet,
    p: int | None = None,
    stats: SortStats | None = None,
    block_size: int = BLOCK_SIZE,
    debug: dict | None = None,
) -> StringSet:
    """Caching multikey quicksort with block-wise parallel ternary partition.

    Workers claim input blocks of (handle, word) entries, classify them
    against a globally selected pivot word into three private write blocks,
    and publish full blocks to the class sets; a second phase flushes the
    at most 3p partial blocks.  Classes recurse with refreshed words for
    the equal set; small classes are compacted and sorted sequentially.
    """
    p = default_workers() if p is None else max(1, p)
    n = len(sset)
    stats = stats if stats is not None else SortStats()
    if n == 0:
        return sset.with_handles(sset.handles.copy())
    if p == 1 or n <= block_size:
        res = mkqs_cached(sset, stats=stats)
        return res.set
    B = block_size
    nblocks = (n + B - 1) // B
    spares_per_worker = 6
    extra = spares_per_worker * p + 8
    cap = (nblocks + extra) * B
    h_arr = shared_array(cap, np.int64)
    c_arr = shared_array(cap, np.uint64)
    out_h = shared_array(n, np.int64)
    out_c = shared_array(n, np.uint64)
    h_arr[:n] = sset.handles
    c_arr[:n] = extract_keys(sset, sset.handles, 0)
    stats.word_fetches += n
    claim = _CTX.Value("q", 0)
    shared = _MkqsShared(sset, h_arr, c_arr, out_h, out_c, claim, B)
    free = [(nblocks + i) * B for i in range(extra)]
    par_threshold = max((n + p - 1) // p, B)
    max_partials = 0
    pool = WorkPool(p, _mkqs_seq_executor, shared)

    def compact(blocks: list[tuple[int, int]], olo: int) -> None:
        pos = olo
        for slot, fill in blocks:
            out_h[pos : pos + fill] = h_arr[slot : slot + fill]
            out_c[pos : pos + fill] = c_arr[slot : slot + fill]
            pos += fill
            free.append(slot)

    try:
        initial = [(i * B, min(B, n - i * B)) for i in range(nblocks)]
        stack = [(initial, 0, 0, n)]
        seq_entries: list[tuple[int, int, int]] = []
        while stack:
            blocks, depth, olo, ohi = stack.pop()
            size = ohi - olo
            if size < par_threshold or len(blocks) <= 1 or len(free) < spares_per_worker * p:
                compact(blocks, olo)
                if size > 1:
                    seq_entries.append((olo, ohi, depth))
                continue
            first = blocks[0]
            mid = blocks[len(blocks) // 2]
            last = blocks[-1]
            pivot = _median3(
                int(c_arr[first[0]]),
                int(c_arr[mid[0] + mid[1] // 2]),
                int(c_arr[last[0] + last[1] - 1]),
            )
            with claim.get_lock():
                claim.value = 0
            spare_sets = [
                [free.pop() for _ in range(spares_per_worker)] for _ in range(p)
            ]
            for spares in spare_sets:
                pool.submit(("partition", blocks, pivot, spares))
            replies = pool.wait_phase(p)
            class_blocks = {0: [], 1: [], 2: []}
            partials = 0
            for lt_b, eq_b, gt_b, freed in replies:
                for cls, lst in ((0, lt_b), (1, eq_b), (2, gt_b)):
                    class_blocks[cls].extend(lst)
                    partials += sum(1 for _, f in lst if f < B)
                free.extend(freed)
            max_partials = max(max_partials, partials)
            sizes = {c: sum(f for _, f in class_blocks[c]) for c in (0, 1, 2)}
            next_lo = olo
            for cls in (0, 1, 2):
                clo, chi = next_lo, next_lo + sizes[cls]
                next_lo = chi
                cblocks = class_blocks[cls]
                if sizes[cls] == 0:
                    continue
                if cls == 1:
                    term = b"\0" in int(pivot).to_bytes(WORD_CHARS, "big")
                    if term:
                        compact(cblocks, clo)  # equal strings, already done
                        continue
                    nd = depth + WORD_CHARS
                    for slot, fill in cblocks:
                        c_arr[slot : slot + fill] = extract_keys(
                            sset, h_arr[slot : slot + fill], nd
                        )
                    stats.word_fetches += sizes[cls]
                    stack.append((cblocks, nd, clo, chi))
                else:
                    stack.append((cblocks, depth, clo, chi))
        if seq_entries:
            batches = max(1, min(len(seq_entries), 2 * p))
            chunks = np.array_split(np.arange(len(seq_entries)), batches)
            for chunk in chunks:
                if len(chunk):
                    pool.submit(("seq", [seq_entries[i] for i in chunk]))
        pool.wait_idle()
    finally:
        pool.shutdown()
    stats.add(pool.stats)
    if debug is not None:
        debug["max_partials"] = max_partials
        debug["partial_limit"] = 3 * p
    return sset.with_handles(out_h.copy())


# ---------------------------------------------------------------------------
# partitioned top-level sort: independent part sorts, then K-way LCP merge


@dataclass
class _MergeShared:
    sset: StringSet
    streams: list
    out_h: np.ndarray
    out_l: np.ndarray
    use_cache: bool
    target_jobs: int


def _merge_executor(shared: _MergeShared, job, env: _Env) -> None:
    kind = job[0]
    if kind != "merge":
        raise ValueError(f"unknown merge job kind: {kind}")
    _, mjob, offset = job
    size = mjob.size
    out_h = shared.out_h[offset : offset + size]
    out_l = shared.out_l[offset : offset + size]

    def poll(emitted: int) -> bool:
        return env.idle_workers() > 0

    _, _, emitted, leftover = run_merge_job(
        shared.streams, mjob, env.stats, shared.use_cache, out_h, out_l, poll
    )
    if leftover:
        subjobs = split_merge_jobs(
            [shared.streams[k].slice(s, l) for k, s, l in leftover],
            max(2, env.idle_workers() + 1),
            mjob.shared_prefix,
        )
        remap = {i: k for i, (k, _, _) in enumerate(leftover)}
        base = {i: s for i, (k, s, _) in enumerate(leftover)}
        pos = offset + emitted
        for sub in subjobs:
            ranges = [(remap[i], base[i] + s, l) for i, s, l in sub.ranges]
            env.enqueue(("merge", MergeJob(ranges, sub.shared_prefix), pos))
            env.replies.put(("boundary", pos))
            pos += sub.size
        env.record_share()


def partitioned_merge_sort(
    sset: StringSet,
    K: int = 4,
    p: int | None = None,
    use_cache: bool = True,
    want_lcps: bool = False,
    seed: int = 1,
    stats: SortStats | None = None,
    merge_stats: SortStats | None = None,
    t_medium: int = T_MEDIUM,
) -> StringSet | SortedWithLcp:
    """Sort K byte-balanced parts independently, then merge with LCPs.

    Each part runs the parallel sample sorter with about p/K workers and
    records LCPs (and distinguishing characters when use_cache is set); the
    parts are then merged by independent jobs on the full pool, re-split
    when workers go idle.  Cached distinguishing characters answer the
    first comparison of every game, so merge-phase buffer reads shrink to
    the LCP-sum growth of the merge.
    """
    p = default_workers() if p is None else max(1, p)
    n = len(sset)
    merge_stats = merge_stats if merge_stats is not None else SortStats()
    if n == 0 or K <= 1:
        out = parallel_s5(sset, p, want_lcps=want_lcps, seed=seed, stats=stats,
                          t_medium=t_medium)
        return out
    # split characters into K contiguous, byte-balanced parts (whole strings)
    lens = sset.ends() - sset.handles + 1
    cum = np.cumsum(lens)
    total = int(cum[-1])
    cuts = [0]
    for k in range(1, K):
        cuts.append(int(np.searchsorted(cum, total * k / K)))
    cuts.append(n)
    parts = [(cuts[k], cuts[k + 1]) for k in range(K) if cuts[k] < cuts[k + 1]]
    workers_each = max(1, p // max(1, len(parts)))
    runs = []
    for lo, hi in parts:
        sub = sset.with_handles(sset.handles[lo:hi])
        runs.append(
            _ParallelS5Run(sub, workers_each, want_lcps=True, seed=seed,
                           t_medium=t_medium)
        )
    # pools are forked before any orchestration threads start
    threads = [threading.Thread(target=r.execute) for r in runs]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    streams = []
    for r in runs:
        out, lcps, run_stats = r.finish()
        if stats is not None:
            stats.add(run_stats)
        dchar = fill_dchar(out, lcps) if use_cache else None
        streams.append(LcpStream(sset, out.handles, lcps, dchar))
    out_h = shared_array(n, np.int64)
    out_l = shared_array(n, np.int64)
    target_jobs = 8 * p
    jobs = split_merge_jobs(streams, target_jobs)
    shared = _MergeShared(sset, streams, out_h, out_l, use_cache, target_jobs)
    pool = WorkPool(p, _merge_executor, shared)
    boundaries = [0]
    try:
        offset = 0
        for job in jobs:
            pool.submit(("merge", job, offset))
            boundaries.append(offset)
            offset += job.size
        while True:
            if pool.fail.is_set():
                pool._handle(pool.replies.get())
                continue
            with pool.outstanding.get_lock():
                if pool.outstanding.value == 0:
                    break
            try:
                msg = pool.replies.get(timeout=0.1)
            except queue_mod.Empty:
                continue
            if msg[0] == "boundary":
                boundaries.append(msg[1])
            else:
                pool._handle(msg)
        # drain any boundary notices that raced with the last decrement
        while True:
            try:
                msg = pool.replies.get_nowait()
            except queue_mod.Empty:
                break
            if msg[0] == "boundary":
                boundaries.append(msg[1])
            else:
                pool._handle(msg)
    finally:
        pool.shutdown()
    merge_stats.add(pool.stats)
    if stats is not None:
        stats.add(pool.stats)
    out = sset.with_handles(out_h.copy())
    if not want_lcps:
        return out
    lcps = out_l.copy()
    for pos in sorted(set(boundaries)):
        if 0 < pos < n:
            lcps[pos] = lcp(sset, int(out_h[pos - 1]), int(out_h[pos]))
    if n:
        lcps[0] = LCP_UNDEF
    return SortedWithLcp(out, lcps, None, merge_stats)
