import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from interp_solve import kernels
from interp_solve.problems import forsaken_field, polar_game_field, quadratic_field


def _env(**extra):
    env = dict(os.environ)
    env.update(extra)
    return env


def _backend_name(env):
    out = subprocess.run(
        [sys.executable, "-c", "from interp_solve import kernels; print(kernels.BACKEND_NAME)"],
        capture_output=True, text=True, env=env, check=True,
    )
    return out.stdout.strip()


def test_environment_forces_pure_python():
    assert _backend_name(_env(INTERP_SOLVE_PURE="1")) == "python"


@pytest.mark.skipif(kernels.compiled is None, reason="compiled extension not built")
def test_compiled_is_default_when_built():
    assert _backend_name(_env(INTERP_SOLVE_PURE="0")) == "compiled"


def test_use_rejects_unknown_backend():
    with pytest.raises(ValueError):
        kernels.use("fortran")


SPECS = [quadratic_field(0.7, -0.2), polar_game_field(), forsaken_field(0.45)]
coord = st.floats(-1.5, 1.5)


@given(st.sampled_from(range(len(SPECS))), coord, coord)
def test_field_kernel_matches_numpy_batch(i, x, y):
    spec = SPECS[i]
    kind, p = spec.field.kernel
    want = spec.field.eval_many(np.array([[x, y]]))[0]
    for mod in filter(None, (kernels.pure, kernels.compiled)):
        fx, fy = mod.field(kind, p, x, y)
        # scalar and vectorised paths may contract differently; the solvers never mix them
        np.testing.assert_allclose([fx, fy], want, rtol=1e-13, atol=1e-13)


@pytest.mark.skipif(kernels.compiled is None, reason="compiled extension not built")
@given(st.sampled_from(range(len(SPECS))), coord, coord, st.floats(0.01, 0.5),
       st.sampled_from([kernels.GDA, kernels.EG, kernels.CEGPLUS]), st.integers(1, 30))
def test_la_inner_backends_bit_identical(i, x, y, gamma, base, tau):
    spec = SPECS[i]
    kind, p = spec.field.kernel
    box = spec.box_tuple()
    a = kernels.pure.la_inner(kind, p, box, base, x, y, gamma, 0.2, tau)
    b = kernels.compiled.la_inner(kind, p, box, base, x, y, gamma, 0.2, tau)
    assert a == b


@pytest.mark.skipif(kernels.compiled is None, reason="compiled extension not built")
@given(st.sampled_from(range(len(SPECS))), coord, coord, st.floats(0.01, 0.08), st.integers(1, 30),
       st.integers(0, 1000))
def test_prox_inner_backends_bit_identical(i, x, y, gamma, tau, seed):
    spec = SPECS[i]
    kind, p = spec.field.kernel
    noise = np.random.default_rng(seed).normal(size=(tau, 2))
    a = kernels.pure.prox_inner(kind, p, spec.box_tuple(), x, y, gamma, tau, noise)
    b = kernels.compiled.prox_inner(kind, p, spec.box_tuple(), x, y, gamma, tau, noise)
    assert a == b
