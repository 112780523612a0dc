# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: light
#       format_version: '1.5'
#       jupytext_version: 1.15.1
# ---

# # Solving on a user-supplied mesh
#
# Meshes are read from the ``wgmesh 2d`` text format. Here a quadrilateral
# mesh is written out, read back, and used to solve the smooth benchmark.

import numpy as np

from wgelast import (MaterialParams, Scheme, WeakSpace, dump_mesh, error_vs_exact,
                     generate_uniform_quads, get_problem, load_mesh, solve_primal, validate)

text = dump_mesh(generate_uniform_quads(8))
print("\n".join(text.splitlines()[:6]))
mesh = load_mesh(text)
print(mesh.summary())
assert not validate(mesh)

# ## Solve and measure

problem = get_problem("test1")
material = MaterialParams(problem.lam, problem.mu)
space = WeakSpace(mesh, Scheme(1, "rm"))
u_h, _ = solve_primal(space, material, problem.f, problem.u)
err = error_vs_exact(u_h, problem, material, inv_h=8)
print(np.round(err.as_tuple(), 5))

# Elements may be arbitrary simple polygons; integration on
# polygons uses a fan of triangles around the vertex average.
