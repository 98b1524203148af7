import numpy as np

from nirspain import gradcheck


def test_every_check_passes_tolerance():
    results = gradcheck.run_suite(n_seeds=5)
    expected = {
        "dense", "lstm_cell", "lstm_stack_4step", "bilstm_stack", "dropout_train",
        "model_mlp", "model_lstm_fwd", "model_lstm_bwd", "model_bilstm",
    }
    assert set(results) == expected
    for name, err in results.items():
        assert err < gradcheck.TOLERANCE, f"{name}: {err:.3e}"


def test_detects_broken_gradient():
    # a deliberately corrupted analytic gradient must fail loudly
    rng = np.random.default_rng(0)
    x = rng.standard_normal(6)
    err = gradcheck.fd_max_rel_error(lambda v: float((v**2).sum()), x, 4.0 * x)
    assert err > 0.3
