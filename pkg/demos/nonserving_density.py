# Where are the other drones after the serving one was picked?
#
# At t = 0 no drone is closer to the user than the serving drone, which sits
# at u* = 500 m.  Once the drones start moving, others drift into that empty
# disc and the hole fills up.  Speeds here are Rayleigh with mean 45 km/h.

# %%
import numpy as np

from drone_handover import AnalyticInputs, SimConfig, estimate_nonserving_density, nonserving_density, rayleigh_mean

lam = 1e-6
law = rayleigh_mean(12.5)
u_star = 500.0
ux = np.arange(0.0, 1501.0, 100.0)

# %%
print("density / lambda0 at distance u_x (m)")
print("  t [s] " + " ".join(f"{u:5.0f}" for u in ux))
for t in (10.0, 20.0, 40.0, 100.0):
    dens = nonserving_density(t, ux, u_star, AnalyticInputs(lam, t, law)) / lam
    print(f"{t:7.0f} " + " ".join(f"{d:5.2f}" for d in dens))

# %% [markdown]
# A histogram of simulated drones agrees with the formula.  Bins are 100 m
# wide here to keep the run short.

# %%
t = 40.0
prof = estimate_nonserving_density(SimConfig(lam, law, t, master_seed=3), t, u_star, 5_000, 100.0, 1500.0)
exact = nonserving_density(t, prof.bin_centers, u_star, AnalyticInputs(lam, t, law))
for c, d, se, e in zip(prof.bin_centers, prof.densities, prof.standard_errors, exact):
    print(f"u_x={c:6.0f}  MC={d / lam:5.3f} +- {3 * se / lam:5.3f}   formula={e / lam:5.3f}")
