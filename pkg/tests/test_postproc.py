"""Post-processing: decoy bounds, Chernoff intervals, sifting, pairing."""
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings, strategies as st

from tfqkd.counts import CountsTable
from tfqkd.postproc import (aopp_pair, aopp_phase_error, chernoff_lower,
                            chernoff_upper, decoy_bounds, odd_parity_pairing,
                            process, z_basis_stats)
from tfqkd.ratecore import PartySettings, SecuritySettings


# ------------------------------------------------------ phase-error map

def test_aopp_phase_error_paper_values():
    # Agreement to one unit in the fourth significant digit; the source
    # figures were themselves rounded to four digits before the map.
    assert aopp_phase_error(0.1128) == pytest.approx(0.2001, abs=1e-4)
    assert aopp_phase_error(0.0790) == pytest.approx(0.1455, abs=1e-4)
    assert aopp_phase_error(0.0994) == pytest.approx(0.1790, abs=1e-4)


def test_aopp_phase_error_edges():
    assert aopp_phase_error(0.0) == 0.0
    assert aopp_phase_error(0.5) == 0.5
    with pytest.raises(ValueError):
        aopp_phase_error(0.6)
    with pytest.raises(ValueError):
        aopp_phase_error(-0.1)


@given(st.floats(min_value=1e-6, max_value=0.5 - 1e-6))
def test_aopp_phase_error_no_interior_fixed_point(e):
    assert aopp_phase_error(e) > e


# ------------------------------------------------------ Chernoff bounds

def test_chernoff_upper_zero_observation():
    assert chernoff_upper(0, 1e-10) == pytest.approx(23.03, abs=0.01)


def test_chernoff_large_count_scaling():
    gap = chernoff_upper(1e6, 1e-10) - 1e6
    assert 6.6e3 <= gap <= 7.0e3


def test_chernoff_vanishing_confidence():
    assert chernoff_upper(1000.0, 1 - 1e-12) == pytest.approx(1000.0, rel=1e-3)
    assert chernoff_lower(1000.0, 1 - 1e-12) == pytest.approx(1000.0, rel=1e-3)


def test_chernoff_lower_zero():
    assert chernoff_lower(0, 1e-10) == 0.0


@given(st.floats(min_value=1.0, max_value=1e9),
       st.floats(min_value=1e-12, max_value=0.1))
@hyp_settings(deadline=None)
def test_chernoff_brackets_observation(obs, eps):
    lo = chernoff_lower(obs, eps)
    hi = chernoff_upper(obs, eps)
    assert lo <= obs <= hi
    # Bound consistency: solving at the bound recovers the budget.
    assert hi > obs > lo or obs < 1.0


def test_chernoff_tightens_with_eps():
    assert chernoff_upper(1e4, 1e-3) < chernoff_upper(1e4, 1e-10)
    assert chernoff_lower(1e4, 1e-3) > chernoff_lower(1e4, 1e-10)


# --------------------------------------------------------------- pairing

def test_aopp_pair_complementary_strings():
    rng = np.random.default_rng(0)
    r = aopp_pair([1, 0, 1, 0], [0, 1, 0, 1], rng)
    assert r.pairs == 2
    assert r.surviving_pairs == 2.0
    assert r.e_bit_prime == 0.0


def test_aopp_pair_nothing_to_pair():
    rng = np.random.default_rng(0)
    assert aopp_pair([1, 1, 1], [0, 0, 0], rng).pairs == 0
    assert aopp_pair([], [], rng).pairs == 0


def test_aopp_pair_length_mismatch():
    with pytest.raises(ValueError):
        aopp_pair([0, 1], [0], np.random.default_rng(0))


def _pairing_oracle(alice, bob):
    """Exact expected (surviving, errors) by enumerating all pairings."""
    zeros = [i for i, b in enumerate(bob) if b == 0]
    ones = [i for i, b in enumerate(bob) if b == 1]
    m = min(len(zeros), len(ones))
    total_s = total_e = count = 0
    for zs in itertools.permutations(zeros, m):
        for os_ in itertools.permutations(ones, m):
            count += 1
            for i, j in zip(zs, os_):
                if alice[i] == alice[j]:
                    continue
                total_s += 1
                first = min(i, j)
                if alice[first] == bob[first]:
                    total_e += 1
    return total_s / count, total_e / count


def test_aopp_pair_matches_exhaustive_oracle():
    bob = [0, 1, 0, 1, 0, 1, 0, 1, 1, 0]
    # Alice: complement of Bob (all-correct) with errors planted at
    # positions 0, 3 and 7.
    alice = [1 - b for b in bob]
    for pos in (0, 3, 7):
        alice[pos] = bob[pos]
    want_s, want_e = _pairing_oracle(alice, bob)
    n_trials = 4000
    got_s = np.empty(n_trials)
    got_e = np.empty(n_trials)
    for k in range(n_trials):
        r = aopp_pair(alice, bob, np.random.default_rng(k))
        got_s[k] = r.surviving_pairs
        got_e[k] = r.e_bit_prime * r.surviving_pairs
    for got, want in ((got_s, want_s), (got_e, want_e)):
        sem = got.std(ddof=1) / math.sqrt(n_trials)
        assert abs(got.mean() - want) <= 4.0 * max(sem, 1e-12)


# ------------------------------------------------------ sifting statistics

def _z_table(zz33, zz30, zz03, zz00):
    t = CountsTable(n_windows=10**9)
    for cat, v in (("ZZ33", zz33), ("ZZ30", zz30), ("ZZ03", zz03),
                   ("ZZ00", zz00)):
        t.heralds[cat] = v
        t.windows[cat] = 10 * v + 1
    return t


def test_z_basis_stats_hand_example():
    z = z_basis_stats(_z_table(10, 100, 200, 5))
    assert z.group0 == 210 and z.group1 == 105
    assert z.nt == 315 and z.errors == 15
    assert z.e0 == pytest.approx(10 / 210)
    assert z.e1 == pytest.approx(5 / 105)
    assert z.qber == pytest.approx(15 / 315)


def test_z_basis_stats_paper_column():
    z = z_basis_stats(_z_table(3107361, 4396652, 4005761, 51305))
    assert z.qber == pytest.approx(0.2732, abs=2e-4)


def test_pairing_paper_column():
    z = z_basis_stats(_z_table(3107361, 4396652, 4005761, 51305))
    r = odd_parity_pairing(z, 2.4e6, 2.4e6)
    assert r.e_bit_prime == pytest.approx(0.0090, abs=2e-4)
    assert r.pairs == min(z.group0, z.group1)
    assert r.surviving_pairs <= r.pairs


def test_pairing_empty_group():
    z = z_basis_stats(_z_table(0, 100, 0, 0))
    assert odd_parity_pairing(z, 10.0, 10.0).pairs == 0


# --------------------------------------------------------- decoy bounds

def _pure_loss_table(eta, party, n=10**12):
    """Counts for a lossless-model channel: S_mu = 1 - exp(-eta mu)."""
    t = CountsTable(n_windows=n)
    per_cat = 10**9
    for side, mus in (("XZ", (party.mu0, party.mu1, party.mu2)),
                      ("ZX", (party.mu0, party.mu1, party.mu2))):
        for idx, mu in enumerate(mus):
            cat = f"{side}{idx}0" if side == "XZ" else f"{side}0{idx}"
            t.windows[cat] = per_cat
            t.heralds[cat] = round(per_cat * (1.0 - math.exp(-eta * mu)))
    return t


def test_decoy_pure_loss_oracle():
    party = PartySettings(mu_z=0.5, mu2=0.3, mu1=0.1, mu0=0.0,
                          p_signal_window=0.7, epsilon_send=0.3,
                          p_mu0=0.1, p_mu1=0.6, p_mu2=0.3)
    table = _pure_loss_table(0.01, party)
    sec = SecuritySettings(mode="asymptotic")
    bounds = decoy_bounds(table, party, party, sec)
    assert bounds.y1a_lower == pytest.approx(9.83e-3, rel=2e-3)
    assert bounds.y1a_lower <= 0.01  # true single-photon yield eta
    assert not bounds.clamped or bounds.e1_upper == 0.5


def test_decoy_zero_counts():
    party = PartySettings(mu_z=0.5, mu2=0.3, mu1=0.1, mu0=0.0,
                          p_signal_window=0.7, epsilon_send=0.3,
                          p_mu0=0.1, p_mu1=0.6, p_mu2=0.3)
    t = CountsTable(n_windows=1000)
    for cat in t.windows:
        t.windows[cat] = 10
    bounds = decoy_bounds(t, party, party, SecuritySettings())
    assert bounds.n1 == 0.0


def test_decoy_finite_mode_is_conservative():
    party = PartySettings(mu_z=0.5, mu2=0.3, mu1=0.1, mu0=0.0,
                          p_signal_window=0.7, epsilon_send=0.3,
                          p_mu0=0.1, p_mu1=0.6, p_mu2=0.3)
    table = _pure_loss_table(0.01, party)
    table.windows["XX11"] = 10**8
    table.x11_errors = 1000
    table.windows["XX00"] = 10**6
    asym = decoy_bounds(table, party, party, SecuritySettings(mode="asymptotic"))
    fin = decoy_bounds(table, party, party, SecuritySettings(mode="finite"))
    assert fin.n1 <= asym.n1
    assert fin.e1_upper >= asym.e1_upper


# ----------------------------------------------------------- integration

def test_process_outputs_consistent():
    from tfqkd import bench
    from tfqkd.engine import expected_counts
    from tfqkd.presets import get_preset
    cfg = get_preset("sym546")
    table = expected_counts(bench.engine_settings(cfg), 1e12)
    run = process(table, cfg.party_a, cfg.party_b, cfg.security)
    assert run.inputs.n1_prime <= run.inputs.nt_prime
    assert 0.0 <= run.inputs.e_bit_prime <= 0.5
    assert run.e1_ph_prime == pytest.approx(
        aopp_phase_error(min(0.5, run.decoy.e1_upper)), abs=1e-12)
    assert run.z_stats.qber == pytest.approx(0.2732, abs=0.03)
