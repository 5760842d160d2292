"""The top-level package namespace: every advertised name must resolve.

All other test modules import from submodules, so a missing re-export in
``mcfusion/__init__.py`` would never fail them; this module guards the
import surface that library users (and the README quickstart) actually see.
"""

import mcfusion


def test_all_names_resolve():
    for name in mcfusion.__all__:
        assert getattr(mcfusion, name, None) is not None, name


def test_all_is_sorted_unique():
    assert len(mcfusion.__all__) == len(set(mcfusion.__all__))


def test_quickstart_names_are_exported():
    # The names a first session reaches for: build a model and channel,
    # calibrate, evaluate exactly, and simulate the same operating point.
    for name in (
        "ChannelParams",
        "DetectorKind",
        "SimConfig",
        "analytic_point",
        "calibrate_threshold",
        "estimate_perf",
        "make_soft_model",
        "spec_for_threshold",
    ):
        assert name in mcfusion.__all__, name


def test_quickstart_flow_runs():
    model = mcfusion.make_soft_model(L=2, b0=-2.5, b1=3.5)
    params = mcfusion.ChannelParams.from_gain(A=15.0, J=4.0, N=1, M=2)
    kind = mcfusion.DetectorKind.OPT_DTM

    thr = mcfusion.calibrate_threshold(kind, model, params, target_pfa=0.05)
    exact = mcfusion.analytic_point(kind, model, params, thr)
    assert 0.0 < exact.pfa <= 0.05

    sim = mcfusion.estimate_perf(
        mcfusion.spec_for_threshold(kind, thr),
        model, params, mcfusion.SimConfig(seed=7, trials=20_000),
    )
    assert abs(sim.pfa_hat - exact.pfa) <= sim.pfa_ci + exact.uncertainty
