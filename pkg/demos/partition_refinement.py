"""
Watching scenario partitions refine
===================================

The adaptive variants start with every realization of a stage in a single
cluster. Clusters only split when their members' dual solutions disagree, so
the number of clusters per stage tells us how much of the scenario detail
the cost-to-go approximation actually needs.
"""

from adaptive_sddp import HydroConfig, SolverConfig, VariantSpec, generate_hydro, run_variant, solve_dep

lattice = generate_hydro(HydroConfig(horizon=4, realizations=10, seed=3))
z = solve_dep(lattice).value

###############################################################################
# Quick pass with coarse cuts first and semi-coarse cuts when the coarse cut
# is not violated.
log = run_variant(VariantSpec("apqp", SolverConfig(max_iterations=60)), lattice)

print("iter  lower bound   clusters per stage   coarse tree size")
for rec in log.records[::6]:
    print(f"{rec.iteration:4d}  {rec.lower_bound:11.4f}   {str(rec.partition_sizes):18s}   {rec.coarse_tree_size:.2f}")
print(f"extensive form value {z:.4f}")

###############################################################################
# Most of the LP work went into cluster subproblems, which are as cheap as a
# single scenario subproblem each.
totals = log.totals()
print("scenario LPs:", totals["lp_solves_scenario"], " cluster LPs:", totals["lp_solves_cluster"])
print("cuts by kind:", {k: v for k, v in totals.items() if k.startswith("cuts")})

###############################################################################
# Final clusters at the last stage.
for cl in log.engine.partitions[lattice.horizon].clusters:
    print("cluster", cl.members)
