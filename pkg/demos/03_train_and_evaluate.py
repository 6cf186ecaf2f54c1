"""Train the full model and the plain autoencoder on a noisy Swiss roll, then compare.

Run:  python demos/03_train_and_evaluate.py [epochs]

The default of 20 epochs takes a few seconds per epoch on one core. The
embedding is written to swiss_roll_embedding.svg in the working directory.
"""
# %%
import sys
from dataclasses import replace

from mforge import add_gaussian_noise, metric_report, normalize_unit_cube, preset_config, swiss_roll_with_hole, train
from mforge.plotting import render_svg
from mforge.training import ABLATIONS

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 20
cloud = add_gaussian_noise(normalize_unit_cube(swiss_roll_with_hole(2000, seed=0)), 0.02, seed=0)
x = cloud.points
base = preset_config("swiss-roll", epochs=epochs)

# %%
results = {}
for name in ("final", "vanilla_ae"):
    res = train(x, replace(base, **ABLATIONS[name]))
    y, z = res.transform(x)
    results[name] = (res, y, z)
    last = res.report.epochs[-1]
    print(f"{name:10s} ae {last.ae:.4g} topo {last.topo:.4g} geom {last.geom:.4g} radii {res.report.final_radii}")

# %% Point cloud versus embedding
for name, (_, y, z) in results.items():
    r = metric_report(x, z)
    print(f"{name:10s} KL0.1 {r.kl_01:.4f} kNN {r.knn:.3f} Trust {r.trust:.3f} "
          f"KL100 {r.kl_100:.2e} RMSE {r.rmse:.3f} Spear {r.spear:.3f}")

# %%
_, _, z = results["final"]
with open("swiss_roll_embedding.svg", "w", encoding="utf-8") as fh:
    fh.write(render_svg(z, cloud.labels, title=f"full model, {epochs} epochs"))
print("wrote swiss_roll_embedding.svg")
