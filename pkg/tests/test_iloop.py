import numpy as np
import pytest
from numpy.testing import assert_allclose

from inmux.iloop import (IntegralLoopConfig, augmented_jacobian,
                         closed_loop_rhs, local_stability, simulate,
                         stability_map)
from inmux.linear import PairingConfig, ic_classify
from inmux.model import DomainError
from conftest import SETPOINT

# §-style quoted configurations: (pairing, signs, claimed stable instance 0-based)
BULLETS = [
    ("direct", (1, 1), 1),
    ("direct", (1, -1), 2),
    ("swapped", (1, 1), 0),
    ("swapped", (-1, 1), 1),
]


def witness_cfg(analyses, pairing, signs, claimed, k=0.01):
    w = ic_classify(analyses[claimed].gain, PairingConfig(pairing, signs)).witness
    return IntegralLoopConfig(pairing=PairingConfig(pairing, signs, w), k=k,
                              r=tuple(SETPOINT))


class TestClosedLoopRhs:
    def test_all_instances_are_equilibria(self, params, u_instances):
        for pairing, signs, claimed in BULLETS:
            cfg = IntegralLoopConfig(pairing=PairingConfig(pairing, signs),
                                     r=tuple(SETPOINT))
            for u in u_instances:
                z = np.concatenate([SETPOINT, u])
                assert np.max(np.abs(closed_loop_rhs(params, cfg, z))) < 1e-12

    def test_domain_exit_raises(self, params):
        cfg = IntegralLoopConfig(r=tuple(SETPOINT))
        with pytest.raises(DomainError):
            closed_loop_rhs(params, cfg, [0.49, 0.37, 0.9, 1.2])

    def test_config_validation(self):
        with pytest.raises(ValueError):
            IntegralLoopConfig(k=0.0)
        with pytest.raises(DomainError):
            IntegralLoopConfig(u_init=(0.9, 1.5))


class TestLocalStability:
    def test_small_k_limit_is_block_triangular(self, params, u_instances, analyses):
        # as k -> 0 two eigenvalues approach the open-loop pair, two approach 0
        cfg = IntegralLoopConfig(pairing=PairingConfig("direct", (1, 1)),
                                 k=1e-12, r=tuple(SETPOINT))
        eig, hurwitz = local_stability(params, cfg, u_instances[0])
        assert not hurwitz
        re = np.sort(eig.real)
        assert_allclose(re[:2], analyses[0].jac_eigs[::-1], atol=1e-6)
        assert np.max(np.abs(re[2:])) < 1e-5

    @pytest.mark.parametrize("pairing,signs,claimed", BULLETS)
    def test_hurwitz_only_at_claimed_instance(self, params, u_instances,
                                              analyses, pairing, signs, claimed):
        cfg = witness_cfg(analyses, pairing, signs, claimed)
        flags = [local_stability(params, cfg, u)[1] for u in u_instances]
        assert flags == [i == claimed for i in range(3)]

    @pytest.mark.parametrize("pairing,signs,claimed", BULLETS)
    def test_hurwitz_persists_as_k_shrinks(self, params, u_instances, analyses,
                                           pairing, signs, claimed):
        ks = [0.01 * 0.5 ** j for j in range(7)]   # down to ~1.6e-4
        table = stability_map(
            params, witness_cfg(analyses, pairing, signs, claimed),
            u_instances, ks)
        for k in ks:
            assert table[k][claimed]

    def test_augmented_jacobian_layout(self, params, u_instances):
        cfg = IntegralLoopConfig(pairing=PairingConfig("direct", (-1, 1)),
                                 k=0.05, r=tuple(SETPOINT))
        A = augmented_jacobian(params, cfg, u_instances[0])
        assert A.shape == (4, 4)
        assert_allclose(A[2:, 2:], 0.0, rtol=0, atol=0)
        assert_allclose(A[2:, :2], -0.05 * np.array([[-1.0, 0.0], [0.0, 1.0]]),
                        rtol=0, atol=0)


class TestSimulate:
    def test_returns_to_stable_instance(self, params, u_instances, analyses):
        cfg0 = witness_cfg(analyses, "swapped", (1, 1), 0)
        cfg = IntegralLoopConfig(pairing=cfg0.pairing, k=0.01, r=tuple(SETPOINT),
                                 u_init=(u_instances[0][0] + 1e-3,
                                         u_instances[0][1]),
                                 x_init=tuple(SETPOINT))
        res = simulate(params, cfg, t_final=5000.0, targets=u_instances)
        assert res.instance == 0
        assert np.max(np.abs(res.z_trace[-1, 2:] - u_instances[0])) < 1e-4

    def test_departs_from_unstable_instance(self, params, u_instances, analyses):
        cfg0 = witness_cfg(analyses, "swapped", (1, 1), 0)
        cfg = IntegralLoopConfig(pairing=cfg0.pairing, k=0.01, r=tuple(SETPOINT),
                                 u_init=(u_instances[1][0] + 1e-3,
                                         u_instances[1][1]),
                                 x_init=tuple(SETPOINT))
        res = simulate(params, cfg, t_final=5000.0, targets=u_instances)
        assert res.instance != 1
        assert np.max(np.abs(res.z_trace[-1, 2:] - u_instances[1])) > 1e-2
        assert res.reason in ("left-input-domain", "converged", "max-time")

    def test_trace_sampling(self, params, u_instances, analyses):
        cfg0 = witness_cfg(analyses, "swapped", (1, 1), 0)
        cfg = IntegralLoopConfig(pairing=cfg0.pairing, k=0.01, r=tuple(SETPOINT),
                                 u_init=tuple(u_instances[0]),
                                 x_init=(0.45, 0.40))
        t_eval = np.linspace(0.0, 50.0, 11)[1:]
        res = simulate(params, cfg, t_final=50.0, t_eval=t_eval)
        assert res.t_trace[0] == 0.0
        assert_allclose(res.t_trace[1:], t_eval, rtol=0, atol=1e-12)
