"""Random pursuit and related derivative-free optimisers, with a benchmark harness."""

from .harness import AggregateStats, ExperimentConfig, ExperimentResult, export_results, mu_sweep, run_experiment, scan_dims
from .linesearch import LineSearchConfig, LineSearchError, LineSearchResult, line_search
from .objectives import BENCHMARKS, EvalCounter, ObjectiveSpec, eval_counted, make_benchmark
from .sampling import DirectionSampler
from .solvers import (
    ArpState,
    EsState,
    RunTrace,
    SolverConfig,
    calibrate_sigma0,
    run,
    run_arp,
    run_es,
    run_fg,
    run_gm,
    run_gm_ls,
    run_rg,
    run_rp,
)

__version__ = "0.1.0"
