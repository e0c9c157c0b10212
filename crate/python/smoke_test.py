"""Import the extension and exercise each entry point once."""

import math
import tempfile

import translab_py as tl

g = tl.Grid.box([0.0, 0.0], [1.0, 1.0], [24, 24])
assert g.dim == 2 and len(g) == 25 * 25

h = tl.VectorField.affine(g, [0.3, 1.0], [[0.0, 0.1], [0.1, 0.0]])
p = tl.ScalarField.affine(g, 0.3, [0.1, 0.0])
a1 = tl.ScalarField.affine(g, 1.0, [1.0, 0.2])
a2 = tl.ScalarField.sample(g, lambda x: 1.0 + x[1] + 0.1 * math.sin(2.0 * x[0]))

u = tl.solve_forward(h, p, a1, 0.25, 1.0 / 48.0)
assert len(u.times) == 13
assert all(math.isfinite(v) for v in u.values)
up = tl.solve_forward(h, p, a1, 0.25, 1.0 / 48.0, scheme="upwind")
assert abs(up.l2_at(12) - u.l2_at(12)) < 0.05 * u.l2_at(12)

est, summary = tl.reconstruct_h(h, p, [a1, a2], 4.0 / 48.0, 1.0 / 48.0)
assert summary["relative_error"] < 1e-2, summary
pe, summary = tl.reconstruct_p(h, p, a1, 4.0 / 48.0, 1.0 / 48.0)
assert summary["relative_error"] < 1e-2, summary

adm = h.check_admissible(0.5, 3.0, [0.5, 1.0], [0.0, 1.0])
assert adm["admissible"], adm

b = tl.s_balance(math.e, 1.0, 1.0, 1.0, 2.0)
assert abs(b["s_star"] - 1.0) < 1e-12 and b["theta"] == 0.5

demo = tl.nonuniqueness_demo(64)
assert demo["initial_norm"] == 0.0 and demo["final_norm"] > 0.1

fit = tl.carleman_fit(members=4, cells=16, steps=64)
assert fit["c"] > 0.0, fit

assert tl.validate_config(tl.default_config(), "forward") == []
bad = "[discretization]\nt_final = 0.5\neps0 = 0.0625\n"
assert any(v.startswith("ε₀ < T/16") for v in tl.validate_config(bad, "forward"))
try:
    tl.run_experiment(bad, "forward", "unused")
except ValueError:
    pass
else:
    raise AssertionError("invalid config ran")

with tempfile.TemporaryDirectory() as d:
    rep = tl.run_experiment("", "demo-nonuniqueness", d)
    assert rep["passed"], rep["assertions"]

print("smoke test passed")
