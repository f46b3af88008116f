"""Repeated runs with per-member seeds.

Member ``k`` of an ensemble with base seed ``s`` uses seed ``s + k`` for
every stream it draws from (see :mod:`plateau_ns.seeding`), so results do not
depend on whether members run serially or in a process pool.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

from .compression import DEFAULT_METHOD, evaluate
from .run_record import serialize
from .samplers import SamplerConfig, StopCondition, run_modified, run_original
from .seeding import member_seed, stream
from .testbeds import model_from_id


@dataclass(frozen=True)
class MemberResult:
    index: int
    seed: int
    log_Z: float
    log_Z_naive: float
    log_Z_sd: float
    n_points: int
    min_n_live: int
    tie_group_count: int
    termination: str

    def row(self) -> str:
        return ",".join(repr(v) if isinstance(v, float) else str(v)
                        for v in asdict(self).values())


HEADER = ",".join(MemberResult.__dataclass_fields__)


@dataclass(frozen=True)
class EnsembleSpec:
    model_id: str
    n_live: int = 500
    algorithm: str = "modified"
    seed: int = 0
    runs: int = 10
    epsilon: float = 1e-3
    method: str = DEFAULT_METHOD.value
    n_sim: int = 0
    out_dir: str | None = None


def run_member(spec: EnsembleSpec, index: int) -> MemberResult:
    """Run, resum and optionally simulate one ensemble member."""
    seed = member_seed(spec.seed, index)
    model = model_from_id(spec.model_id)
    config = SamplerConfig(spec.n_live, seed, StopCondition.remainder_fraction(spec.epsilon))
    runner = run_modified if spec.algorithm == "modified" else run_original
    record = runner(model, config)
    if spec.out_dir:
        serialize(record, os.path.join(spec.out_dir, f"run_{index:05d}.csv"))
    # the modified resummation is the plateau-correct estimate for either sampler
    res = evaluate(record, spec.method, nlive="modified", n_sim=spec.n_sim,
                   rng=stream(seed, "errors"))
    naive = evaluate(record, spec.method, nlive="naive")
    return MemberResult(index, seed, res.log_Z, naive.log_Z,
                        res.log_Z_sd if spec.n_sim >= 2 else math.nan,
                        len(record), res.diagnostics["min_n_live"],
                        res.diagnostics["tie_group_count"], record.meta.termination)


def _member(args):
    return run_member(*args)


def run_ensemble(spec: EnsembleSpec, jobs: int = 1) -> list:
    """All members of ``spec`` in index order."""
    if spec.algorithm not in ("original", "modified"):
        raise ValueError(f"algorithm must be 'original' or 'modified', not {spec.algorithm!r}")
    if spec.runs < 1:
        raise ValueError("runs must be positive")
    model_from_id(spec.model_id)  # fail early on a bad identifier
    if spec.out_dir:
        os.makedirs(spec.out_dir, exist_ok=True)
    tasks = [(spec, k) for k in range(spec.runs)]
    if jobs <= 1:
        return [run_member(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_member, tasks, chunksize=max(1, spec.runs // (4 * jobs))))


def ensemble_table(results) -> str:
    return "\n".join([HEADER, *(r.row() for r in results)]) + "\n"
