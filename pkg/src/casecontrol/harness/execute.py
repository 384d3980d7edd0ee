# SPDX-FileCopyrightText: 2024 Casecontrol Developers
# SPDX-License-Identifier: Apache-2.0

"""
Execute a planned run against its manifest.

The scheduler is a finite state machine in the main process. It submits every
job whose dependencies are done to a bounded worker pool, records outcomes and
content hashes in the manifest, and stops early (after in-flight jobs finish) when
a signal is received. Only the scheduler writes to the manifest.

Example:
    >>> from casecontrol.harness.config import RunConfig
    >>> from casecontrol.harness.plan import plan
    >>> from casecontrol.harness.execute import prepare_run, execute
    >>> config = prepare_run(RunConfig.load(profile='desk', output='out', jobs=4))
    >>> summary = execute(config.output, config, plan(config))

On resume every completed job is re-verified against the files on disk. A job
whose outputs, inputs or hash chain no longer match is reset to pending, and so
is everything downstream of it.
"""


# type annotations
from __future__ import annotations
from typing import List, Dict, Callable, Optional, NamedTuple, Iterable, FrozenSet, Final

# standard libs
import os
import time
from enum import Enum
from datetime import datetime
from functools import cached_property
from multiprocessing import get_context
from concurrent.futures import Executor, Future, ProcessPoolExecutor, wait, FIRST_COMPLETED

# internal libs
from casecontrol.core.logging import Logger
from casecontrol.core.fsm import State, StateMachine
from casecontrol.core.signal import check_signal, ignore_signals, SIGNAL_MAP
from casecontrol.core.exceptions import ManifestError, JobFailures
from casecontrol.data import Job, JobStatus, open_manifest, close_manifest, MANIFEST_NAME
from casecontrol.harness.config import RunConfig, RUN_FILE
from casecontrol.harness.plan import JobSpec, JobKind
from casecontrol.harness.artifacts import hash_files, hash_values
from casecontrol.harness.jobs import run_job

# public interface
__all__ = ['execute', 'prepare_run', 'verify_manifest', 'RunSummary', 'Scheduler', 'SchedulerState',
           'InlineExecutor', 'worker_pool', ]

# initialize logger
log = Logger.with_name(__name__)


POLL_INTERVAL: Final[float] = 1.0
"""Seconds to wait on running jobs before checking for signals."""


class InlineExecutor(Executor):
    """Run each submitted call immediately in the calling thread."""

    def submit(self: InlineExecutor, fn: Callable, /, *args, **kwargs) -> Future:
        future = Future()
        try:
            future.set_result(fn(*args, **kwargs))
        except Exception as error:
            future.set_exception(error)
        return future


class RunSummary(NamedTuple):
    """Job counts after execution."""
    done: int
    failed: int
    pending: int
    halted: bool


def _verify_job(root: str, job: Job, hashes: Dict[str, Optional[str]]) -> Optional[str]:
    """Reason `job` no longer matches the files on disk (None if it does)."""
    missing = [path for path in job.outputs if not os.path.exists(os.path.join(root, path))]
    if missing:
        return f'missing output {missing[0]}'
    if hash_files(root, job.outputs) != job.output_hash:
        return 'output hash mismatch'
    if hash_values(*[hashes.get(dep) for dep in job.depends]) != job.input_hash:
        return 'input hash mismatch'
    if hash_values(job.input_hash, job.output_hash) != job.chain_hash:
        return 'chain hash mismatch'
    return None


def verify_manifest(root: str) -> Dict[str, str]:
    """
    Check every completed job in the run at `root` without changing anything.

    Returns a mapping of job id to the reason it fails verification.
    """
    open_manifest(root, create=False)
    try:
        problems = {}
        hashes: Dict[str, Optional[str]] = {}
        for job in Job.select_all():
            if job.status != JobStatus.DONE.value:
                continue
            reason = _verify_job(root, job, hashes)
            if reason is None:
                hashes[job.id] = job.output_hash
            else:
                problems[job.id] = reason
        return problems
    finally:
        close_manifest()


class SchedulerState(State, Enum):
    """Finite states of the scheduler."""
    START = 0
    SUBMIT = 1
    WAIT = 2
    FINAL = 3
    HALT = 4


class Scheduler(StateMachine):
    """Submit ready jobs and record their outcomes in the manifest."""

    root: str
    config: RunConfig
    jobs: Dict[str, JobSpec]
    executor: Executor
    width: int
    kinds: FrozenSet[JobKind]

    status: Dict[str, JobStatus]
    hashes: Dict[str, Optional[str]]
    attempts: Dict[str, int]
    running: Dict[Future, str]
    started: Dict[str, datetime]
    failed: List[str]
    halted: bool

    state = SchedulerState.START
    states = SchedulerState

    def __init__(self: Scheduler, root: str, config: RunConfig, jobs: List[JobSpec], executor: Executor,
                 width: int, kinds: Optional[Iterable[JobKind]] = None) -> None:
        """Initialize with the plan and a worker pool."""
        self.root = root
        self.config = config
        self.jobs = {job.id: job for job in jobs}
        self.executor = executor
        self.width = width
        self.kinds = frozenset(JobKind if kinds is None else kinds)
        self.status = {}
        self.hashes = {}
        self.attempts = {}
        self.running = {}
        self.started = {}
        self.failed = []
        self.halted = False

    @cached_property
    def actions(self: Scheduler) -> Dict[SchedulerState, Callable[[], SchedulerState]]:
        return {
            SchedulerState.START: self.start,
            SchedulerState.SUBMIT: self.submit,
            SchedulerState.WAIT: self.wait,
            SchedulerState.FINAL: self.finalize,
        }

    def start(self: Scheduler) -> SchedulerState:
        """Synchronize the manifest with the plan, verifying completed jobs."""
        existing = {job.id: job for job in Job.select_all()}
        if existing and set(existing) != set(self.jobs):
            raise ManifestError(f'Manifest in {self.root} does not match the planned jobs '
                                f'({len(existing)} recorded, {len(self.jobs)} planned)')
        if not existing:
            Job.add_all([Job.new(job.id, job.kind.value, position, job.keys, list(job.depends))
                         for position, job in enumerate(self.jobs.values())])
            log.info(f'Planned {len(self.jobs)} jobs')
        else:
            log.warning(f'Manifest exists ({len(existing)} jobs): resuming')
        reset = []
        for job in Job.select_all():
            self.attempts[job.id] = job.attempt
            if job.status == JobStatus.DONE.value:
                stale = [dep for dep in job.depends if self.status.get(dep) is not JobStatus.DONE]
                reason = f'dependency {stale[0]} will run again' if stale else _verify_job(self.root, job, self.hashes)
                if reason is None:
                    self.status[job.id] = JobStatus.DONE
                    self.hashes[job.id] = job.output_hash
                    continue
                log.warning(f'Job {job.id} failed verification ({reason}): will run again')
            elif job.status == JobStatus.FAILED.value:
                log.info(f'Retrying previously failed job {job.id}')
            if job.status != JobStatus.PENDING.value:
                reset.append(job.id)
            self.status[job.id] = JobStatus.PENDING
        Job.mark_pending(reset)
        counts = self.counts()
        log.info(f'{counts[JobStatus.DONE]} jobs done, {counts[JobStatus.PENDING]} pending')
        return SchedulerState.SUBMIT

    def counts(self: Scheduler) -> Dict[JobStatus, int]:
        counts = {status: 0 for status in JobStatus}
        for status in self.status.values():
            counts[status] += 1
        return counts

    def ready(self: Scheduler, job: JobSpec) -> bool:
        """All dependencies done (or merely finished, for jobs tolerant of gaps)."""
        finished = (JobStatus.DONE, JobStatus.FAILED) if job.kind.tolerant else (JobStatus.DONE, )
        return all(self.status[dep] in finished for dep in job.depends)

    def blocked(self: Scheduler, job: JobSpec) -> Optional[str]:
        """Id of a failed dependency if `job` can never run."""
        if job.kind.tolerant:
            return None
        for dep in job.depends:
            if self.status[dep] is JobStatus.FAILED:
                return dep
        return None

    def submit(self: Scheduler) -> SchedulerState:
        """Fail blocked jobs and submit ready ones up to the pool width."""
        if (signum := check_signal()) is not None and not self.halted:
            log.warning(f'Signal interrupt ({SIGNAL_MAP.get(signum, signum)}): waiting on {len(self.running)} jobs')
            self.halted = True
        in_flight = set(self.running.values())
        for job in self.jobs.values():
            if self.status[job.id] is not JobStatus.PENDING or job.id in in_flight:
                continue
            if (dep := self.blocked(job)) is not None:
                self.record_failure(job.id, f'dependency failed: {dep}', attempt=self.attempts[job.id])
                continue
            if self.halted or job.kind not in self.kinds or len(self.running) >= self.width or not self.ready(job):
                continue
            self.attempts[job.id] += 1
            self.started[job.id] = datetime.now().astimezone()
            future = self.executor.submit(run_job, self.root, job.to_dict(), self.config.to_dict())
            self.running[future] = job.id
            in_flight.add(job.id)
            log.debug(f'Submitted {job.id}')
        if not self.running:
            return SchedulerState.FINAL
        return SchedulerState.WAIT

    def wait(self: Scheduler) -> SchedulerState:
        """Collect finished jobs."""
        finished, _ = wait(list(self.running), timeout=POLL_INTERVAL, return_when=FIRST_COMPLETED)
        for future in sorted(finished, key=lambda f: self.running[f]):
            job_id = self.running.pop(future)
            try:
                outputs = future.result()
            except Exception as error:
                log.error(f'Job {job_id} failed: {error.__class__.__name__}: {error}')
                self.record_failure(job_id, f'{error.__class__.__name__}: {error}', self.attempts[job_id])
            else:
                self.record_success(job_id, outputs)
        return SchedulerState.SUBMIT

    def record_success(self: Scheduler, job_id: str, outputs: List[str]) -> None:
        job = self.jobs[job_id]
        input_hash = hash_values(*[self.hashes.get(dep) for dep in job.depends])
        output_hash = hash_files(self.root, outputs)
        start_time = self.started.pop(job_id)
        elapsed = (datetime.now().astimezone() - start_time).total_seconds()
        Job.mark_done(job_id, input_hash=input_hash, output_hash=output_hash,
                      chain_hash=hash_values(input_hash, output_hash), outputs=list(outputs),
                      start_time=start_time, elapsed=elapsed, attempt=self.attempts[job_id])
        self.status[job_id] = JobStatus.DONE
        self.hashes[job_id] = output_hash
        log.info(f'Completed {job_id} ({elapsed:.1f}s)')

    def record_failure(self: Scheduler, job_id: str, error: str, attempt: int) -> None:
        start_time = self.started.pop(job_id, None)
        elapsed = None if start_time is None else (datetime.now().astimezone() - start_time).total_seconds()
        Job.mark_failed(job_id, error=error, attempt=attempt, start_time=start_time, elapsed=elapsed)
        self.status[job_id] = JobStatus.FAILED

    def finalize(self: Scheduler) -> SchedulerState:
        """Stop scheduler, reporting outcomes as recorded in the manifest."""
        counts = Job.count_by_status()
        self.failed = [job.id for job in Job.select_status(JobStatus.FAILED)]
        log.info(f'Finished: {counts[JobStatus.DONE.value]} done, {counts[JobStatus.FAILED.value]} failed, '
                 f'{counts[JobStatus.PENDING.value]} pending')
        return SchedulerState.HALT


def worker_pool(width: int) -> Executor:
    """Inline executor for width 1, otherwise spawned worker processes that ignore interrupts."""
    if width == 1:
        return InlineExecutor()
    return ProcessPoolExecutor(max_workers=width, mp_context=get_context('spawn'), initializer=ignore_signals)


def _without_width(config: RunConfig) -> Dict[str, dict]:
    data = config.to_dict()
    data['run'].pop('jobs', None)
    return data


def prepare_run(config: RunConfig, resume: bool = False) -> RunConfig:
    """
    Create the run directory and settle which configuration it runs under.

    A new run writes `run.toml`. With `resume` the stored configuration is used
    (pool width may still be overridden). Without it an existing run is continued
    only when its stored configuration is identical.
    """
    root = config.output
    stored_path = os.path.join(root, RUN_FILE)
    if os.path.exists(stored_path):
        stored = RunConfig.from_file(stored_path)
        if resume:
            data = stored.to_dict()
            data['run']['jobs'] = config.jobs
            data['run']['output'] = root
            return RunConfig(data)
        if _without_width(stored) != _without_width(config):
            raise ManifestError(f'{root} holds a run with a different configuration '
                                f'(use --resume to continue it or choose another output)')
        log.info(f'Continuing existing run in {root}')
        return config
    if resume:
        raise ManifestError(f'Nothing to resume in {root} (no {RUN_FILE})')
    if os.path.exists(os.path.join(root, MANIFEST_NAME)):
        raise ManifestError(f'{root} has a manifest but no {RUN_FILE}')
    os.makedirs(root, exist_ok=True)
    config.write(stored_path)
    return config


def execute(root: str, config: RunConfig, jobs: List[JobSpec], width: Optional[int] = None,
            raise_on_failure: bool = True, kinds: Optional[Iterable[JobKind]] = None) -> RunSummary:
    """
    Run every pending job in `jobs` with at most `width` (default ``config.jobs``) at once.

    Raises :class:`JobFailures` at the end if any job failed (unless `raise_on_failure`
    is disabled). Results do not depend on `width`.
    """
    width = width or config.jobs
    open_manifest(root)
    executor = worker_pool(width)
    start_time = time.time()
    try:
        scheduler = Scheduler(root, config, jobs, executor, width, kinds)
        scheduler.run()
    finally:
        executor.shutdown(wait=True)
        close_manifest()
    counts = scheduler.counts()
    summary = RunSummary(done=counts[JobStatus.DONE], failed=counts[JobStatus.FAILED],
                         pending=counts[JobStatus.PENDING], halted=scheduler.halted)
    log.info(f'Run took {time.time() - start_time:.1f}s')
    if scheduler.halted:
        log.warning(f'Halted with {summary.pending} jobs pending (continue with --resume)')
    if summary.failed and raise_on_failure:
        raise JobFailures(f'{summary.failed} jobs failed (first: {scheduler.failed[0]})')
    return summary
