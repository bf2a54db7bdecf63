"""Deterministic flow-level simulator of job execution on a platform.

Jobs are dispatched FIFO to the worker with the most free cores (ties by node
id), hold one core through three sequential phases (input transfer, compute,
output transfer), and release it at the end.  Concurrent transfers split each
link's bandwidth equally; rates are recomputed whenever a transfer starts or
finishes.  A transfer's rate is the minimum over its route links' shares and
the endpoint disk bandwidths; the summed route latency is added once, after
the bytes have been serviced.

Transfers sharing the same ordered (source, destination) pair always have the
same rate, so they are tracked per route as fluid progress against absolute
byte thresholds.  This keeps each event O(#routes) instead of O(#transfers).
"""

from __future__ import annotations

import heapq
import math
import time as _time
from collections import deque
from dataclasses import dataclass

from .errors import SimulationError
from .platform import PlatformSpec
from .workload import DatasetSpec, JobSpec, SuiteEntry, generate_workload

# Event kinds in tie-break order.
EV_SUBMIT = 0
EV_RATE_CHANGE = 1  # implicit: rates change at transfer start/finish
EV_TRANSFER_DONE = 2
EV_COMPUTE_DONE = 3
EV_OUTPUT_DONE = 4


@dataclass(frozen=True)
class TraceRecord:
    simulation_id: int
    job_index: int
    submission_time_s: float
    start_time_s: float
    end_time_s: float
    compute_time_s: float
    input_files_transfer_time_s: float
    output_files_transfer_time_s: float
    input_bytes: float
    output_bytes: float
    worker_id: str


TRACE_FIELDS = (
    "simulation_id",
    "job_index",
    "submission_time_s",
    "start_time_s",
    "end_time_s",
    "compute_time_s",
    "input_files_transfer_time_s",
    "output_files_transfer_time_s",
    "input_bytes",
    "output_bytes",
    "worker_id",
)


class _Transfer:
    __slots__ = ("job", "threshold", "size", "latency", "on_done", "audit_bytes")

    def __init__(self, job, threshold, size, latency, on_done):
        self.job = job
        self.threshold = threshold
        self.size = size
        self.latency = latency
        self.on_done = on_done
        self.audit_bytes = 0.0


class _RouteFlow:
    __slots__ = ("links", "cap", "latency", "progress", "rate", "pending")

    def __init__(self, links, cap, latency):
        self.links = links
        self.cap = cap
        self.latency = latency
        self.progress = 0.0
        self.rate = 0.0
        self.pending: list[tuple[float, int, _Transfer]] = []


class _JobState:
    __slots__ = (
        "spec", "worker", "start", "input_started", "input_time",
        "compute_time", "output_started", "output_time", "files_left",
        "input_bytes",
    )

    def __init__(self, spec: JobSpec):
        self.spec = spec
        self.worker = None
        self.start = 0.0
        self.input_started = 0.0
        self.input_time = 0.0
        self.compute_time = 0.0
        self.output_started = 0.0
        self.output_time = 0.0
        self.files_left: deque[str] = deque(spec.input_files)
        self.input_bytes = 0.0


class _Simulation:
    def __init__(self, platform: PlatformSpec, jobs: list[JobSpec],
                 datasets: DatasetSpec, audit: bool):
        self.platform = platform
        self.audit = audit
        self.nodes = {n.id: n for n in platform.nodes}
        self.link_bw = {l.id: l.bandwidth_bps for l in platform.links}
        self.link_latency = {l.id: l.latency_s for l in platform.links}
        self.file_size: dict[str, float] = {}
        self.file_loc: dict[str, str] = {}
        for f in datasets.files:
            self.file_size[f.file_id] = f.size_bytes
            self.file_loc[f.file_id] = f.location
        for j in jobs:
            for fid in j.input_files:
                if fid not in self.file_size:
                    raise SimulationError(
                        f"job {j.job_index} of simulation {j.simulation_id} "
                        f"references missing input file {fid!r}"
                    )
        self.jobs = [_JobState(j) for j in sorted(jobs, key=lambda j: j.job_index)]
        workers = sorted(platform.workers(), key=lambda w: w.id)
        self.worker_ids = [w.id for w in workers]
        self.free_cores = {w.id: w.cores for w in workers}
        self.queue: deque[_JobState] = deque()
        self.heap: list[tuple[float, int, int, int]] = []
        self.heap_payload: dict[int, tuple] = {}
        self.seq = 0
        self.now = 0.0
        self.link_load: dict[str, int] = {}
        self.flows: dict[tuple[str, str], _RouteFlow] = {}
        self.traces: dict[int, TraceRecord] = {}

    # Event plumbing -------------------------------------------------------
    def _push(self, when: float, kind: int, job_index: int, payload: tuple) -> None:
        self.seq += 1
        self.heap_payload[self.seq] = payload
        heapq.heappush(self.heap, (when, kind, job_index, self.seq))

    # Transfer plumbing ----------------------------------------------------
    def _route_cap(self, src: str, dst: str) -> float:
        cap = float("inf")
        read = self.nodes[src].disk_read_bw_bps
        write = self.nodes[dst].disk_write_bw_bps
        if read > 0:
            cap = min(cap, read)
        if write > 0:
            cap = min(cap, write)
        return cap

    def _recompute_rates(self) -> None:
        for flow in self.flows.values():
            share = flow.cap
            for lid in flow.links:
                share = min(share, self.link_bw[lid] / self.link_load[lid])
            flow.rate = share

    def _start_transfer(self, job: _JobState, src: str, dst: str, size: float,
                        on_done) -> None:
        if src == dst or size <= 0.0:
            on_done(job, 0.0)
            return
        key = (src, dst)
        flow = self.flows.get(key)
        if flow is None:
            try:
                links = self.platform.routes[key]
            except KeyError:
                raise SimulationError(f"no route between nodes {src!r} and {dst!r}") from None
            latency = sum(self.link_latency[l] for l in links)
            flow = _RouteFlow(links, self._route_cap(src, dst), latency)
            self.flows[key] = flow
        for lid in flow.links:
            self.link_load[lid] = self.link_load.get(lid, 0) + 1
        self.seq += 1
        xfer = _Transfer(job, flow.progress + size, size, flow.latency, on_done)
        heapq.heappush(flow.pending, (xfer.threshold, self.seq, xfer))
        self._recompute_rates()

    def _finish_transfer(self, key: tuple[str, str], xfer: _Transfer) -> None:
        flow = self.flows[key]
        for lid in flow.links:
            self.link_load[lid] -= 1
            if self.link_load[lid] == 0:
                del self.link_load[lid]
        if not flow.pending:
            del self.flows[key]
        self._recompute_rates()
        if self.audit:
            got = xfer.audit_bytes
            if abs(got - xfer.size) > 1e-6 * max(1.0, xfer.size):
                raise AssertionError(
                    f"work conservation violated: transferred {got} of {xfer.size} bytes"
                )
        # Latency is charged once, after the bytes are through.
        kind = EV_OUTPUT_DONE if xfer.on_done == self._output_done else EV_TRANSFER_DONE
        self._push(self.now + xfer.latency, kind, xfer.job.spec.job_index,
                   ("xfer_latency", xfer))

    # Scheduling -----------------------------------------------------------
    def _try_dispatch(self) -> None:
        while self.queue:
            best = None
            for wid in self.worker_ids:
                free = self.free_cores[wid]
                if free > 0 and (best is None or free > self.free_cores[best]):
                    best = wid
            if best is None:
                return
            job = self.queue.popleft()
            self.free_cores[best] -= 1
            job.worker = best
            job.start = self.now
            job.input_started = self.now
            self._next_input(job)

    def _next_input(self, job: _JobState) -> None:
        if job.files_left:
            fid = job.files_left.popleft()
            size = self.file_size[fid]
            job.input_bytes += size
            self._start_transfer(job, self.file_loc[fid], job.worker, size,
                                 self._input_done)
        else:
            self._input_phase_over(job)

    def _input_done(self, job: _JobState, _latency: float) -> None:
        self._next_input(job)

    def _input_phase_over(self, job: _JobState) -> None:
        job.input_time = self.now - job.input_started
        speed = self.nodes[job.worker].core_speed_flops
        job.compute_time = job.spec.flops / speed
        self._push(self.now + job.compute_time, EV_COMPUTE_DONE,
                   job.spec.job_index, ("compute_done", job))

    def _compute_done(self, job: _JobState) -> None:
        job.output_started = self.now
        out = job.spec.output_files_size_bytes
        dest = self.file_loc.get(job.spec.input_files[0]) if job.spec.input_files else None
        if dest is None:
            storages = self.platform.storage_nodes()
            dest = storages[0].id if storages else job.worker
        self._start_transfer(job, job.worker, dest, out, self._output_done)

    def _output_done(self, job: _JobState, _latency: float) -> None:
        job.output_time = self.now - job.output_started
        spec = job.spec
        self.traces[spec.job_index] = TraceRecord(
            simulation_id=spec.simulation_id,
            job_index=spec.job_index,
            submission_time_s=spec.submission_time_s,
            start_time_s=job.start,
            end_time_s=self.now,
            compute_time_s=job.compute_time,
            input_files_transfer_time_s=job.input_time,
            output_files_transfer_time_s=job.output_time,
            input_bytes=job.input_bytes,
            output_bytes=spec.output_files_size_bytes,
            worker_id=job.worker,
        )
        self.free_cores[job.worker] += 1
        self._try_dispatch()

    # Main loop ------------------------------------------------------------
    def run(self) -> list[TraceRecord]:
        for job in self.jobs:
            self._push(job.spec.submission_time_s, EV_SUBMIT,
                       job.spec.job_index, ("submit", job))
        while self.heap or self.flows:
            t_fluid = float("inf")
            for flow in self.flows.values():
                if flow.pending and flow.rate > 0:
                    t_fluid = min(
                        t_fluid,
                        self.now + (flow.pending[0][0] - flow.progress) / flow.rate,
                    )
            t_event = self.heap[0][0] if self.heap else float("inf")
            t = min(t_fluid, t_event)
            if t == float("inf"):
                raise AssertionError("simulation stalled with pending work")
            dt = t - self.now
            if dt > 0:
                for key in list(self.flows):
                    flow = self.flows[key]
                    flow.progress += flow.rate * dt
                    if self.audit:
                        for _, _, xfer in flow.pending:
                            xfer.audit_bytes += flow.rate * dt
            self.now = t
            if t_fluid <= t_event:
                # Complete every transfer whose threshold has been reached.
                for key in list(self.flows):
                    flow = self.flows[key]
                    # Tolerance covers accumulated rounding plus the bytes a
                    # flow can move within one representable time step; without
                    # the rate term a sub-ulp deficit can never be closed and
                    # the loop would spin at a frozen clock.
                    tol = (1e-6 + 1e-12 * abs(flow.progress)
                           + flow.rate * math.ulp(max(self.now, 1.0)))
                    while flow.pending and flow.pending[0][0] <= flow.progress + tol:
                        _, _, xfer = heapq.heappop(flow.pending)
                        self._finish_transfer(key, xfer)
            else:
                when, kind, job_index, seq = heapq.heappop(self.heap)
                payload = self.heap_payload.pop(seq)
                tag = payload[0]
                if tag == "submit":
                    self.queue.append(payload[1])
                    self._try_dispatch()
                elif tag == "xfer_latency":
                    xfer = payload[1]
                    xfer.on_done(xfer.job, xfer.latency)
                else:  # compute_done
                    self._compute_done(payload[1])
            if self.audit:
                for wid in self.worker_ids:
                    free = self.free_cores[wid]
                    if not 0 <= free <= self.nodes[wid].cores:
                        raise AssertionError(f"core conservation violated on {wid}: {free}")
        missing = [j.spec.job_index for j in self.jobs if j.spec.job_index not in self.traces]
        if missing:
            raise AssertionError(f"jobs never completed: {missing[:10]}")
        return [self.traces[j.spec.job_index] for j in self.jobs]


def run_simulation(platform: PlatformSpec, jobs: list[JobSpec],
                   datasets: DatasetSpec, audit: bool = False) -> list[TraceRecord]:
    """Execute a workload, returning one TraceRecord per job in index order."""
    return _Simulation(platform, jobs, datasets, audit).run()


def bench_simulation(platform: PlatformSpec, scenario: str,
                     suite: list[SuiteEntry], seed: int,
                     repeats: int = 1) -> list[dict]:
    """Measure wall-clock per suite entry (median over `repeats` runs)."""
    if not suite:
        raise SimulationError("bench suite must be nonempty")
    rows = []
    for entry in suite:
        jobs, datasets = generate_workload(scenario, entry.n_jobs, 0, seed)
        samples = []
        for _ in range(max(1, repeats)):
            t0 = _time.perf_counter()
            run_simulation(platform, jobs, datasets)
            samples.append(_time.perf_counter() - t0)
        samples.sort()
        rows.append({
            "scenario": scenario,
            "n_jobs": entry.n_jobs,
            "seconds": samples[len(samples) // 2],
        })
    return rows
