# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: light
#       format_version: '1.5'
#       jupytext_version: 1.15.1
# ---

# # Convergence tables for the smooth benchmark
#
# Solves the smooth manufactured problem ``test1`` (lambda = 1, mu = 1/2,
# zero Dirichlet trace) on uniform triangulations with 1/h = 2..32
# and prints the three error measures with observed orders, for both edge
# spaces at k = 1.

from wgelast.cli import RunConfig, convergence_study, format_table

# ## Rigid-motion edge space
#
# The ``rm`` edge space carries the two translations plus a linear normal
# component on each edge.

report = convergence_study(RunConfig(problem="test1", variant="rm"))
print(format_table(report))

# ## Full polynomial edge space

report = convergence_study(RunConfig(problem="test1", variant="p"))
print(format_table(report))

# The L2 error of the interior part converges at order 2 and the energy
# error at order 1 for both variants; the two tables agree to about 1%.
