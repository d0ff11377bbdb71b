"""Monte Carlo window engine for the two-user interference link.

Windows are generated in fixed blocks of 2**21, each block seeded as
``default_rng([seed, block_index])``, so results depend only on
``(seed, n_windows)`` and not on how the run is chunked.  The draw
order inside a block is fixed: A basis+intensity (one uniform), A
slice, B basis+intensity, B slice, residual phase, detector outcome
(one uniform against the joint click distribution).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .counts import CATEGORIES, CountsTable
from .optics import DetectorModel, LinkConfig, NoiseModel, click_probability_arrays
from .ratecore import PartySettings

#: Number of discrete phase-slice values per window.
N_SLICES = 16

#: Windows per deterministic RNG block.
BLOCK = 1 << 21


@dataclass(frozen=True)
class EngineSettings:
    """Everything the window engine needs for one run."""

    party_a: PartySettings
    party_b: PartySettings
    link: LinkConfig
    detectors: DetectorModel
    noise: NoiseModel
    residual_phase_std_rad: float = 0.0

    def __post_init__(self) -> None:
        if self.residual_phase_std_rad < 0:
            raise ValueError("residual phase std must be nonnegative")


def _draw_window(u: np.ndarray, p: PartySettings) -> tuple[np.ndarray, np.ndarray]:
    """Map one uniform draw to (is_signal_window, intensity_index).

    Signal windows send (index 3) with probability epsilon, else stay
    at the vacuum index; decoy windows split over the three decoy
    intensities.
    """
    pz = p.p_signal_window
    is_z = u < pz
    idx = np.full(u.shape, 2, dtype=np.int8)
    # Signal-window sub-split on the same uniform.
    idx[u < pz * p.epsilon_send] = 3
    idx[(u >= pz * p.epsilon_send) & is_z] = 0
    ux_base = pz
    px = 1.0 - pz
    idx[(u >= ux_base) & (u < ux_base + px * p.p_mu0)] = 0
    idx[(u >= ux_base + px * p.p_mu0)
        & (u < ux_base + px * (p.p_mu0 + p.p_mu1))] = 1
    return is_z, idx


# 25 valid (basisA, basisB, iA, iB) combinations packed into a flat code:
# code = (((zA*4 + iA)*2 + zB)*4 + iB), zA/zB = 1 for a Z window.
_CODE_TO_CAT = {}
for _cat in CATEGORIES:
    _za = 1 if _cat[0] == "Z" else 0
    _zb = 1 if _cat[1] == "Z" else 0
    _code = ((_za * 4 + int(_cat[2])) * 2 + _zb) * 4 + int(_cat[3])
    _CODE_TO_CAT[_code] = _cat


def run_block(settings: EngineSettings, seed: int, block_index: int,
              n: int) -> CountsTable:
    """Simulate one block of ``n`` windows and return its counts."""
    pa, pb = settings.party_a, settings.party_b
    rng = np.random.default_rng([seed, block_index])

    za, ia = _draw_window(rng.random(n), pa)
    sa = (rng.random(n) * N_SLICES).astype(np.int8)
    zb, ib = _draw_window(rng.random(n), pb)
    sb = (rng.random(n) * N_SLICES).astype(np.int8)

    resid = rng.standard_normal(n) * settings.residual_phase_std_rad
    dtheta = (sa.astype(np.int16) - sb) % N_SLICES
    delta = 2.0 * math.pi * dtheta / N_SLICES + resid

    mu_a = np.asarray(pa.intensities)[ia]
    mu_b = np.asarray(pb.intensities)[ib]
    p0, p1 = click_probability_arrays(mu_a, mu_b, delta, settings.link,
                                      settings.detectors, settings.noise)
    # One uniform decides the joint detector outcome.
    u = rng.random(n)
    none_p = (1.0 - p0) * (1.0 - p1)
    only0_p = none_p + p0 * (1.0 - p1)
    only1_p = only0_p + (1.0 - p0) * p1
    c0 = (u >= none_p) & (u < only0_p)
    c1 = (u >= only0_p) & (u < only1_p)
    herald = c0 | c1

    code = ((za * 4 + ia) * 2 + zb) * 4 + ib
    n_codes = 128
    win_counts = np.bincount(code, minlength=n_codes)
    her_counts = np.bincount(code[herald], minlength=n_codes)

    table = CountsTable(n_windows=n)
    for c, cat in _CODE_TO_CAT.items():
        table.windows[cat] = int(win_counts[c])
        table.heralds[cat] = int(her_counts[c])

    matched = (~za) & (~zb) & (ia == ib) & ((dtheta == 0) | (dtheta == 8)) & herald
    # The wrong detector fired: slice difference 0 targets detector 0,
    # difference 8 targets detector 1.
    wrong = np.where(dtheta == 0, c1, c0)
    for level, tot_attr, err_attr in ((1, "x11_total", "x11_errors"),
                                      (2, "x22_total", "x22_errors")):
        m = matched & (ia == level)
        setattr(table, tot_attr, int(m.sum()))
        setattr(table, err_attr, int((m & wrong).sum()))
    return table


def simulate(settings: EngineSettings, n_windows: int, seed: int = 0,
             chunk_count: int = 1) -> CountsTable:
    """Simulate ``n_windows`` windows and return merged counts.

    ``chunk_count`` only groups the underlying fixed-size blocks into
    batches (e.g. to bound memory or report progress); the merged
    result is identical for any chunking of the same run.
    """
    if n_windows < 0:
        raise ValueError("n_windows must be nonnegative")
    if chunk_count < 1:
        raise ValueError("chunk_count must be >= 1")
    n_blocks = (n_windows + BLOCK - 1) // BLOCK
    total = CountsTable()
    for b in range(n_blocks):
        n = min(BLOCK, n_windows - b * BLOCK)
        total.merge(run_block(settings, seed, b, n))
    return total


def _herald_prob_given_delta(mu_a: float, mu_b: float, delta: np.ndarray,
                             settings: EngineSettings) -> np.ndarray:
    p0, p1 = click_probability_arrays(
        np.full(delta.shape, mu_a), np.full(delta.shape, mu_b), delta,
        settings.link, settings.detectors, settings.noise)
    return p0 * (1.0 - p1) + p1 * (1.0 - p0)


def expected_counts(settings: EngineSettings, n_windows: int,
                    gh_nodes: int = 17) -> CountsTable:
    """Analytic expectation of every :class:`CountsTable` entry.

    Herald probabilities are averaged over the 16 slice differences and,
    when a residual phase std is set, over the Gaussian residual via
    Gauss-Hermite quadrature.  Entries are expected values (floats cast
    into the integer-count table only at the caller's peril: the table
    returned here keeps them as floats).
    """
    pa, pb = settings.party_a, settings.party_b
    sigma = settings.residual_phase_std_rad
    if sigma > 0:
        nodes, weights = np.polynomial.hermite_e.hermegauss(gh_nodes)
        weights = weights / weights.sum()
        offsets = nodes * sigma
    else:
        offsets = np.zeros(1)
        weights = np.ones(1)

    dtheta = np.arange(N_SLICES)
    base = 2.0 * math.pi * dtheta / N_SLICES
    # delta grid: (slice difference, quadrature node)
    delta = base[:, None] + offsets[None, :]

    def class_prob(basis: str, i: int, p: PartySettings) -> float:
        if basis == "Z":
            pz = p.p_signal_window
            return pz * (p.epsilon_send if i == 3 else 1.0 - p.epsilon_send)
        px = 1.0 - p.p_signal_window
        return px * (p.p_mu0, p.p_mu1, p.p_mu2)[i]

    table = CountsTable(n_windows=n_windows)
    herald_given = {}
    for cat in CATEGORIES:
        ia, ib = int(cat[2]), int(cat[3])
        mu_a, mu_b = pa.intensities[ia], pb.intensities[ib]
        h = _herald_prob_given_delta(mu_a, mu_b, delta, settings)
        h_avg = float((h @ weights).mean())
        herald_given[cat] = h
        prob = class_prob(cat[0], ia, pa) * class_prob(cat[1], ib, pb)
        table.windows[cat] = prob * n_windows
        table.heralds[cat] = prob * n_windows * h_avg

    for level, tot_attr, err_attr in ((1, "x11_total", "x11_errors"),
                                      (2, "x22_total", "x22_errors")):
        cat = f"XX{level}{level}"
        mu_a, mu_b = pa.intensities[level], pb.intensities[level]
        prob = class_prob("X", level, pa) * class_prob("X", level, pb) / N_SLICES
        p0, p1 = click_probability_arrays(
            np.full(delta.shape, mu_a), np.full(delta.shape, mu_b), delta,
            settings.link, settings.detectors, settings.noise)
        excl0 = p0 * (1.0 - p1)   # only detector 0 fired
        excl1 = p1 * (1.0 - p0)
        tot = err = 0.0
        for d, wrong in ((0, excl1), (8, excl0)):
            tot += float(herald_given[cat][d] @ weights)
            err += float(wrong[d] @ weights)
        setattr(table, tot_attr, prob * n_windows * tot)
        setattr(table, err_attr, prob * n_windows * err)
    return table
