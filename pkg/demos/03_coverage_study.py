"""
A small Monte Carlo study of interval coverage
==============================================

Replicate the estimation many times on fresh data and compare the
intervals with the oracle truth. Each replicate draws from its own
counter-based random stream, so results are identical for any number of
worker processes (set ``LVIM_THREADS`` to control it).

Pass the number of replicates as the first argument (default 40).
"""

import sys

from lvim.learners import LearnerSpec
from lvim.report import RenderSpec, render_study
from lvim.simulation import DgpConfig, Scenario, run_study

R = int(sys.argv[1]) if len(sys.argv) > 1 else 40

scenario = Scenario(
    config=DgpConfig.standard(),
    n=1000,
    R=R,
    learner=LearnerSpec("Logistic"),
    variables=(0, 7),
    vim_kinds=("AddIn",),
    summaries=("mean", "slope"),
)

###############################################################################
# ``coverage`` is the share of 95% intervals containing the truth;
# ``rejection_prop`` is the share of tests rejecting zero importance. For the
# null variable x8 it estimates the type-I error.

report = run_study(scenario, root_seed=7)
print(render_study(report, RenderSpec("text", digits=4)))
