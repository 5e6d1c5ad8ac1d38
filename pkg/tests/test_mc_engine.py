import numpy as np
import pytest
from scipy import stats

from martcomp import payoffs as P
from martcomp.char_model import JumpKernel, brownian, levy_model
from martcomp.compare import model_from_dict
from martcomp.errors import ConfigurationError, DataError
from martcomp.laws import Normal
from martcomp.mc_engine import MCEstimate, bias_check, estimate_terminal, path_rng, simulate_paths


def test_zero_model_stays_put():
    b = simulate_paths(levy_model(c=0.0, x0=1.5), 50, 16, 0)
    assert np.all(b.states == 1.5) and np.all(b.terminal == 1.5)
    assert b.jump_counts().sum() == 0


def test_brownian_variance():
    b = simulate_paths(brownian(0.25), 20000, 16, 1, record="terminal")
    x = b.terminal[:, 0]
    assert abs(x.mean()) < 4 * 0.5 / np.sqrt(x.size)
    # var of the sample variance of N(0, s2) is 2 s2^2 / n
    assert abs(x.var(ddof=1) - 0.25) < 4 * np.sqrt(2 / x.size) * 0.25


def test_compound_poisson_jump_count():
    b = simulate_paths(levy_model(kernel=JumpKernel.compound_poisson(3.0, Normal(0, 1))), 5000, 16, 2,
                       record="terminal")
    n = b.jump_counts()
    assert abs(n.mean() - 3.0) < 4 * np.sqrt(3.0 / n.size)
    assert abs(n.var(ddof=1) - 3.0) < 0.3


def test_estimate_constant_payoff():
    b = simulate_paths(brownian(1.0), 100, 16, 3, record="terminal")
    est = estimate_terminal(lambda x: np.full(x.shape[0], 3.0), b)
    assert est.mean == 3.0 and est.stderr == 0.0 and est.n == 100


def test_estimate_rejects_nonfinite():
    b = simulate_paths(brownian(1.0), 10, 16, 3, record="terminal")
    with pytest.raises(DataError):
        estimate_terminal(lambda x: np.full(x.shape[0], np.nan), b)


def test_estimate_negative_stderr():
    with pytest.raises(ValueError):
        MCEstimate(0.0, -1.0, 3)


def test_bachelier_call():
    exact = 0.2 / np.sqrt(2 * np.pi)
    assert exact == pytest.approx(0.0797885, abs=1e-7)
    est = estimate_terminal(P.call(0.0), simulate_paths(brownian(0.04), 40000, 16, 4, record="terminal"))
    assert abs(est.mean - exact) < 4 * est.stderr


def test_bias_check_brownian():
    out = bias_check(brownian(0.04), P.call(0.0), 0.2 / np.sqrt(2 * np.pi), n_paths=4000, steps=(16, 32, 64))
    assert out["passed"] and len(out["rows"]) == 3


def test_determinism_and_prefix_invariance():
    m = levy_model(c=0.04, kernel=JumpKernel.compound_poisson(2.0, Normal(0, 0.3)))
    a = simulate_paths(m, 300, 32, 7)
    b = simulate_paths(m, 300, 32, 7, block=37)
    c = simulate_paths(m, 100, 32, 7)
    assert np.array_equal(a.states, b.states) and np.array_equal(a.jump_size, b.jump_size)
    assert np.array_equal(a.states[:100], c.states)
    assert not np.array_equal(simulate_paths(m, 100, 32, 8).states, c.states)


def test_path_rng_seed_range():
    with pytest.raises(ConfigurationError):
        path_rng(-1, 0)
    assert path_rng(2 ** 64 - 1, 5).random() >= 0


def test_martingale_mean_with_jumps():
    # compensated asymmetric jumps: the process is a martingale
    m = levy_model(c=0.01, kernel=JumpKernel.compound_poisson(2.0, Normal(0.5, 0.1)))
    x = simulate_paths(m, 20000, 32, 9, record="terminal").terminal[:, 0]
    assert abs(x.mean()) < 4 * x.std() / np.sqrt(x.size)


def test_jump_bookkeeping():
    m = levy_model(c=0.04, kernel=JumpKernel.compound_poisson(1.5, Normal(0, 0.5)))
    b = simulate_paths(m, 200, 32, 10)
    for i in range(b.n_paths):
        tt, sz = b.jumps_of(i)
        assert np.all(np.diff(tt) >= 0) and np.all((tt >= 0) & (tt <= 1))
        assert b.terminal[i, 0] == pytest.approx(b.x0[0] + b.continuous[i, 0] + sz.sum(), abs=1e-12)


def test_grigelionis_atoms_chi_square():
    spec = {"family": "grigelionis", "diffusion": 0.0,
            "atoms": [{"time": 0.5, "mass": 0.4, "law": {"type": "normal", "mean": 0.0, "std": 0.2}}]}
    m = model_from_dict(spec, 1.0)
    b = simulate_paths(m, 10000, 16, 11)
    hits = b.jump_counts()
    assert set(np.unique(hits)) <= {0, 1}
    k = int(hits.sum())
    assert abs(k - 4000) < 4 * np.sqrt(10000 * 0.4 * 0.6)
    assert np.all(b.jump_time == 0.5) and np.all(b.jump_kind == 1)
    sizes = b.jump_size[:, 0]
    edges = stats.norm.ppf(np.linspace(0, 1, 11), scale=0.2)
    obs = np.histogram(sizes, bins=edges)[0]
    assert stats.chisquare(obs).pvalue > 1e-3
    # the state before the atom is recorded separately
    j = int(np.argmin(np.abs(b.grid - 0.5)))
    assert j in b.pre_atom


def test_infinite_activity_variance():
    k = JumpKernel.power_law(1.2, scale=1.0, r_hi=1.0)
    var = 2.0 / 0.8
    b = simulate_paths(levy_model(kernel=k), 20000, 32, 12, record="terminal")
    x = b.terminal[:, 0]
    assert b.scheme_meta["jump_rate"] <= 256.0 + 1e-9
    assert abs(x.var(ddof=1) - var) < 4 * np.sqrt(2 / x.size) * var + 0.05 * var


def test_require_special():
    k = JumpKernel.power_law(0.5, r_hi=np.inf)
    with pytest.raises(ConfigurationError):
        simulate_paths(levy_model(kernel=k), 10, 16, 0, require_special=True)


@pytest.mark.parametrize("kw", [{"n_steps": 8}, {"n_paths": 0}, {"record": "sparse"}, {"t0": 1.0}])
def test_configuration_errors(kw):
    args = {"n_paths": 10, "n_steps": 16, "seed": 0} | kw
    with pytest.raises(ConfigurationError):
        simulate_paths(brownian(1.0), **args)


def test_artifacts(tmp_path):
    b = simulate_paths(brownian(1.0), 5, 16, 0)
    z = np.load(b.to_npz(tmp_path / "p.npz"))
    assert np.array_equal(z["terminal"], b.terminal)
    lines = b.sample_csv(tmp_path / "p.csv", n=3).read_text().splitlines()
    assert len(lines) == 1 + 3 * 17
