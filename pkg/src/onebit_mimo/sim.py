"""Monte-Carlo experiment engine.

Three harnesses live here: single-cell SER sweeps over an SNR grid,
training-based channel-estimation sweeps, and the multicell adaptation
where out-of-cell interference is folded into an effective SINR and
near-far effects scale the effective channel columns.

Reproducibility contract: trial (point, t) always uses the counter-based
child stream ``point_index * trials + t`` of the experiment seed, trials
are partitioned into fixed blocks, and block results are merged in block
order.  The outputs are therefore bit-identical for any worker count;
the parallelism degree only decides whether blocks run inline or in a
process pool.  Detector dispatch goes through the module-level
``DETECTOR_DISPATCH`` table so tests can interpose probes (patched
dispatch is only visible to inline execution, so such tests run at
parallelism 1).
"""

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from . import chanest, detectors
from .detectors import DetectorOutput, NmlConfig, SearchSpaceTooLargeError
from .model import (
    Constellation,
    draw_rayleigh_channel,
    draw_symbols,
    expand_real,
    indices_to_symbols,
    make_constellation,
    sign_refine,
    transmit,
)
from .numerics import RngStream, draw_std_complex_gaussian

__all__ = [
    "DETECTOR_ORDER",
    "ESTIMATOR_ORDER",
    "SCENARIO_ORDER",
    "DETECTOR_DISPATCH",
    "TRIAL_BLOCK",
    "CsiModel",
    "SweepConfig",
    "ChanestSweepConfig",
    "MulticellConfig",
    "MulticellDrop",
    "SweepPoint",
    "ChanestPoint",
    "MulticellPoint",
    "SweepResult",
    "apply_csi_model",
    "run_ser_sweep",
    "run_chanest_sweep",
    "hex_centers",
    "point_in_hexagon",
    "drop_users",
    "multicell_sinr",
    "run_multicell_sweep",
]

DETECTOR_ORDER = ("ML", "NML1", "NML2", "ZF")

ESTIMATOR_ORDER = ("ML", "ZF")

SCENARIO_ORDER = ("uncoordinated", "coordinated")

TRIAL_BLOCK = 256

_CSI_KINDS = ("perfect", "perfect_cdi", "cdi_with_error")


@dataclass(frozen=True)
class CsiModel:
    """What the detectors know about the channel.

    ``perfect`` hands over the true matrix; ``perfect_cdi`` keeps only
    each antenna row's direction (rescaled to norm sqrt(K));
    ``cdi_with_error`` additionally mixes in a random unit direction
    scaled by sqrt(nmse) before renormalizing.
    """

    kind: str = "perfect"
    nmse: float = 0.0

    def __post_init__(self):
        if self.kind not in _CSI_KINDS:
            raise ValueError("csi kind must be one of %s" % (_CSI_KINDS,))
        if not (self.nmse >= 0.0 and math.isfinite(self.nmse)):
            raise ValueError("nmse must be finite and >= 0")
        if self.kind != "cdi_with_error" and self.nmse != 0.0:
            raise ValueError("nmse is only meaningful for cdi_with_error")


@dataclass(frozen=True)
class SweepConfig:
    """A single-cell SER sweep: K users, N_r one-bit chains, an SNR grid.

    ``detectors`` is canonicalized to the fixed order ML, NML1, NML2,
    ZF.  Selecting ML requires ``order ** k`` within the enumeration
    cap (checked here so bad configs fail before any compute).
    """

    k: int
    n_r: int
    constellation: Constellation
    snr_grid_db: Tuple[float, ...]
    detectors: Tuple[str, ...]
    trials_per_point: int
    master_seed: int
    csi_model: CsiModel = CsiModel()
    nml: NmlConfig = NmlConfig()

    def __post_init__(self):
        if self.k < 1 or self.n_r < 1:
            raise ValueError("k and n_r must be positive integers")
        grid = tuple(float(s) for s in self.snr_grid_db)
        if not grid or not all(math.isfinite(s) for s in grid):
            raise ValueError("snr_grid_db must be nonempty and finite")
        object.__setattr__(self, "snr_grid_db", grid)
        picked = set(self.detectors)
        if not picked or not picked.issubset(DETECTOR_ORDER):
            raise ValueError(
                "detectors must be a nonempty subset of %s" % (DETECTOR_ORDER,)
            )
        object.__setattr__(
            self, "detectors", tuple(d for d in DETECTOR_ORDER if d in picked)
        )
        if self.trials_per_point < 1:
            raise ValueError("trials_per_point must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must fit in an unsigned 64-bit int")
        if "ML" in picked:
            space = self.constellation.order ** self.k
            if space > detectors.ENUMERATION_CAP:
                raise SearchSpaceTooLargeError(
                    "M^K = %d exceeds the enumeration cap %d; drop ML "
                    "from this sweep" % (space, detectors.ENUMERATION_CAP)
                )


@dataclass(frozen=True)
class ChanestSweepConfig:
    """A channel-estimation sweep: per-antenna K-user channels, pilot
    length T, fresh unitary training per draw."""

    k: int
    t: int
    snr_grid_db: Tuple[float, ...]
    estimators: Tuple[str, ...]
    draws_per_point: int
    master_seed: int
    nml: NmlConfig = NmlConfig()

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be a positive integer")
        if self.t <= self.k:
            raise ValueError("training length t must exceed k")
        grid = tuple(float(s) for s in self.snr_grid_db)
        if not grid or not all(math.isfinite(s) for s in grid):
            raise ValueError("snr_grid_db must be nonempty and finite")
        object.__setattr__(self, "snr_grid_db", grid)
        picked = set(self.estimators)
        if not picked or not picked.issubset(ESTIMATOR_ORDER):
            raise ValueError(
                "estimators must be a nonempty subset of %s" % (ESTIMATOR_ORDER,)
            )
        object.__setattr__(
            self, "estimators", tuple(e for e in ESTIMATOR_ORDER if e in picked)
        )
        if self.draws_per_point < 1:
            raise ValueError("draws_per_point must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must fit in an unsigned 64-bit int")


def _default_8psk() -> Constellation:
    return make_constellation("psk", 8)


@dataclass(frozen=True)
class MulticellConfig:
    """Hexagonal-layout multicell setting.

    Defaults are the reference parameter set: 57 cells of radius 500 m,
    K = 4 users per cell, N_r = 64, 23 dBm terminals, pathloss
    ``131.1 + 42.8 log10(d_km)`` dB, 5 MHz bandwidth, -174 dBm/Hz noise
    density, 5 dB noise figure, 100 m minimum BS-user distance, 8PSK.
    """

    n_cells: int = 57
    cell_radius_m: float = 500.0
    k: int = 4
    n_r: int = 64
    tx_power_dbm: float = 23.0
    pathloss_const_db: float = 131.1
    pathloss_slope_db: float = 42.8
    bandwidth_hz: float = 5e6
    noise_density_dbm_hz: float = -174.0
    noise_figure_db: float = 5.0
    min_dist_m: float = 100.0
    coordinated_halfwidth_m: float = 20.0
    constellation: Constellation = field(default_factory=_default_8psk)
    nml: NmlConfig = NmlConfig()

    def __post_init__(self):
        if self.n_cells < 1:
            raise ValueError("n_cells must be >= 1")
        if self.k < 1 or self.n_r < 1:
            raise ValueError("k and n_r must be positive integers")
        if not self.cell_radius_m > 0 or not self.bandwidth_hz > 0:
            raise ValueError("cell radius and bandwidth must be positive")
        if not 0 < self.min_dist_m < self.cell_radius_m:
            raise ValueError("min_dist_m must lie in (0, cell_radius_m)")
        if not self.coordinated_halfwidth_m >= 0:
            raise ValueError("coordinated_halfwidth_m must be >= 0")

    def noise_power_dbm(self) -> float:
        return (
            self.noise_density_dbm_hz
            + 10.0 * math.log10(self.bandwidth_hz)
            + self.noise_figure_db
        )

    def noise_power_w(self) -> float:
        return 10.0 ** ((self.noise_power_dbm() - 30.0) / 10.0)

    def received_power_w(self, dist_m) -> np.ndarray:
        """Linear received power at a BS from a terminal ``dist_m`` away."""
        dist_m = np.asarray(dist_m, dtype=np.float64)
        pl_db = self.pathloss_const_db + self.pathloss_slope_db * np.log10(
            dist_m / 1000.0
        )
        return 10.0 ** ((self.tx_power_dbm - pl_db - 30.0) / 10.0)


@dataclass(frozen=True)
class MulticellDrop:
    """One realization of user positions, reduced to the distances that
    matter: center-cell users to the center BS, and all out-of-cell
    users to the center BS."""

    center_dist_m: np.ndarray
    interferer_dist_m: np.ndarray


@dataclass(frozen=True)
class SweepPoint:
    """Accumulated results of one (snr, detector) cell of a sweep."""

    snr_db: float
    detector: str
    trials: int
    symbol_errors: int
    symbols: int
    ser: float
    mean_iterations: Optional[float]
    mean_candidates: Optional[float]
    wall_time_s: float


@dataclass(frozen=True)
class ChanestPoint:
    """Accumulated results of one (snr, estimator) cell of a sweep."""

    snr_db: float
    t: int
    estimator: str
    draws: int
    mse: float
    nmse: float
    wall_time_s: float


@dataclass(frozen=True)
class MulticellPoint:
    """Accumulated results of one (scenario, d, detector) cell."""

    scenario: str
    d_m: float
    detector: str
    trials: int
    errors: int
    decisions: int
    error_rate: float
    wall_time_s: float


@dataclass(frozen=True)
class SweepResult:
    """Ordered collection of per-cell results from one harness run."""

    points: tuple


def _run_ml(rows, q, h, constellation, k, rho, cfg) -> DetectorOutput:
    return detectors.detect_ml_exhaustive(rows, constellation, k, rho)


def _run_nml1(rows, q, h, constellation, k, rho, cfg) -> DetectorOutput:
    return detectors.detect_nml_one_stage(rows, constellation, k, rho, cfg)


def _run_nml2(rows, q, h, constellation, k, rho, cfg) -> DetectorOutput:
    return detectors.detect_nml_two_stage(rows, h, constellation, k, rho, cfg)


def _run_zf(rows, q, h, constellation, k, rho, cfg) -> DetectorOutput:
    return detectors.detect_zf(h, q, constellation)


DETECTOR_DISPATCH = {
    "ML": _run_ml,
    "NML1": _run_nml1,
    "NML2": _run_nml2,
    "ZF": _run_zf,
}


def apply_csi_model(H_true, model: CsiModel, rng: RngStream) -> np.ndarray:
    """The channel matrix as the detectors will see it.

    ``perfect`` returns the input unchanged.  The CDI variants rescale
    every receive-antenna row to norm sqrt(K); ``cdi_with_error`` first
    perturbs each row's direction with an independent unit vector scaled
    by sqrt(nmse).  The error draw consumes ``n_r * k`` complex samples
    from ``rng`` (none for the other kinds).
    """
    H_true = np.asarray(H_true, dtype=np.complex128)
    if H_true.ndim != 2:
        raise ValueError("H_true must be a matrix")
    if model.kind == "perfect":
        return H_true
    n_r, k = H_true.shape
    norms = np.linalg.norm(H_true, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("a zero channel row has no direction")
    unit = H_true / norms[:, None]
    if model.kind == "cdi_with_error":
        e = draw_std_complex_gaussian(rng, n_r * k).reshape(n_r, k)
        e_norms = np.linalg.norm(e, axis=1)
        if np.any(e_norms == 0.0):
            raise ValueError("degenerate zero error draw")
        unit = unit + math.sqrt(model.nmse) * (e / e_norms[:, None])
        mixed = np.linalg.norm(unit, axis=1)
        if np.any(mixed == 0.0):
            raise ValueError("error draw cancelled a channel direction")
        unit = unit / mixed[:, None]
    return math.sqrt(k) * unit


def _merge_blocks(blocks):
    """Fold per-block accumulator dicts in block order."""
    total: Dict[str, list] = {}
    for block in blocks:
        for name, acc in block.items():
            if name not in total:
                total[name] = [0, 0, 0.0, 0, 0.0, 0, 0.0]
            t = total[name]
            t[0] += acc[0]
            t[1] += acc[1]
            t[2] += acc[2]
            t[3] += acc[3]
            t[4] += acc[4]
            t[5] += acc[5]
            t[6] += acc[6]
    return total


def _accumulate(acc, out: DetectorOutput, errors: int, decisions: int,
                elapsed: float):
    acc[0] += errors
    acc[1] += decisions
    if out.iterations is not None:
        acc[2] += float(out.iterations)
        acc[3] += 1
    if out.candidate_set_size is not None:
        acc[4] += float(out.candidate_set_size)
        acc[5] += 1
    acc[6] += elapsed


def _ser_block(cfg: SweepConfig, point_idx: int, rho: float, start: int,
               size: int):
    """Run trials [start, start + size) of one SNR point."""
    acc = {name: [0, 0, 0.0, 0, 0.0, 0, 0.0] for name in cfg.detectors}
    const = cfg.constellation
    for t in range(start, start + size):
        sub = RngStream(cfg.master_seed, point_idx * cfg.trials_per_point + t)
        h = draw_rayleigh_channel(sub, cfg.n_r, cfg.k)
        idx = draw_symbols(sub, const, cfg.k)
        x = indices_to_symbols(const, idx)
        _, q = transmit(h, x, rho, rng=sub)
        h_known = apply_csi_model(h, cfg.csi_model, sub)
        rows = sign_refine(expand_real(h_known), q)
        for name in cfg.detectors:
            t0 = time.perf_counter()
            out = DETECTOR_DISPATCH[name](
                rows, q, h_known, const, cfg.k, rho, cfg.nml
            )
            elapsed = time.perf_counter() - t0
            errors = sum(
                1 for i in range(cfg.k) if out.symbols[i] != int(idx[i])
            )
            _accumulate(acc[name], out, errors, cfg.k, elapsed)
    return acc


def _blocks(total: int):
    for start in range(0, total, TRIAL_BLOCK):
        yield start, min(TRIAL_BLOCK, total - start)


def _run_blocked(fn, args_list, parallelism: int):
    """Execute block tasks and return their results in block order."""
    if parallelism <= 1:
        return [fn(*args) for args in args_list]
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        futures = [pool.submit(fn, *args) for args in args_list]
        return [f.result() for f in futures]


def run_ser_sweep(cfg: SweepConfig, parallelism: int = 1) -> SweepResult:
    """Paired-trial SER sweep over the SNR grid.

    Every selected detector sees the same channel, symbols, noise, and
    quantized observation within a trial, so detector differences are
    paired samples.  Symbol errors are counted over all K users.
    """
    points = []
    for p, snr_db in enumerate(cfg.snr_grid_db):
        rho = 10.0 ** (snr_db / 10.0)
        args = [
            (cfg, p, rho, start, size)
            for start, size in _blocks(cfg.trials_per_point)
        ]
        merged = _merge_blocks(_run_blocked(_ser_block, args, parallelism))
        for name in cfg.detectors:
            e, n, it_s, it_n, ca_s, ca_n, det_wall = merged[name]
            points.append(
                SweepPoint(
                    snr_db=snr_db,
                    detector=name,
                    trials=cfg.trials_per_point,
                    symbol_errors=e,
                    symbols=n,
                    ser=e / n,
                    mean_iterations=(it_s / it_n) if it_n else None,
                    mean_candidates=(ca_s / ca_n) if ca_n else None,
                    wall_time_s=det_wall,
                )
            )
    return SweepResult(points=tuple(points))


def _chanest_block(cfg: ChanestSweepConfig, point_idx: int, rho: float,
                   start: int, size: int):
    acc = {name: [0.0, 0.0, 0.0] for name in cfg.estimators}
    for d in range(start, start + size):
        sub = RngStream(cfg.master_seed, point_idx * cfg.draws_per_point + d)
        block = chanest.make_unitary_training(cfg.k, cfg.t, sub)
        g = draw_std_complex_gaussian(sub, cfg.k)
        g_r = np.concatenate([g.real, g.imag])
        signs = chanest.observe_training(g_r, block, rho, rng=sub)
        for name in cfg.estimators:
            t0 = time.perf_counter()
            if name == "ML":
                est = chanest.estimate_ml(block, signs, rho, cfg.nml)
            else:
                est = chanest.estimate_zf(block, signs)
            elapsed = time.perf_counter() - t0
            acc[name][0] += chanest.mse(g_r, est)
            acc[name][1] += chanest.nmse(g_r, est)
            acc[name][2] += elapsed
    return acc


def run_chanest_sweep(cfg: ChanestSweepConfig,
                      parallelism: int = 1) -> SweepResult:
    """Paired-draw channel-estimation sweep over the SNR grid.

    Each draw generates a fresh unitary pilot block, a fresh CN(0, I_K)
    channel, and one-bit training observations; both estimators consume
    the same observation.  Reported MSE and NMSE are averages over
    draws.
    """
    points = []
    for p, snr_db in enumerate(cfg.snr_grid_db):
        rho = 10.0 ** (snr_db / 10.0)
        args = [
            (cfg, p, rho, start, size)
            for start, size in _blocks(cfg.draws_per_point)
        ]
        results = _run_blocked(_chanest_block, args, parallelism)
        merged: Dict[str, list] = {}
        for block in results:
            for name, acc in block.items():
                if name not in merged:
                    merged[name] = [0.0, 0.0, 0.0]
                merged[name][0] += acc[0]
                merged[name][1] += acc[1]
                merged[name][2] += acc[2]
        for name in cfg.estimators:
            mse_sum, nmse_sum, wall = merged[name]
            points.append(
                ChanestPoint(
                    snr_db=snr_db,
                    t=cfg.t,
                    estimator=name,
                    draws=cfg.draws_per_point,
                    mse=mse_sum / cfg.draws_per_point,
                    nmse=nmse_sum / cfg.draws_per_point,
                    wall_time_s=wall,
                )
            )
    return SweepResult(points=tuple(points))


def hex_centers(n_cells: int, radius_m: float) -> np.ndarray:
    """Centers of the ``n_cells`` innermost cells of a hexagonal tiling.

    The center cell sits at the origin; neighbors are sqrt(3) * radius
    apart.  Lattice points are ranked by (rounded distance, angle) so the
    selection is deterministic and fills rings inside out.
    """
    step = math.sqrt(3.0) * radius_m
    v1 = step * np.array([math.cos(math.pi / 6.0), math.sin(math.pi / 6.0)])
    v2 = step * np.array([0.0, 1.0])
    span = 6
    pts = []
    for i in range(-span, span + 1):
        for j in range(-span, span + 1):
            pts.append(i * v1 + j * v2)
    pts = np.array(pts)
    dist = np.linalg.norm(pts, axis=1)
    ang = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2.0 * math.pi)
    order = np.lexsort((np.round(ang, 9), np.round(dist, 6)))
    if n_cells > pts.shape[0]:
        raise ValueError("layout span too small for %d cells" % n_cells)
    return pts[order[:n_cells]]


def point_in_hexagon(p, center, radius_m: float) -> bool:
    """Membership in the flat-top hexagon of circumradius ``radius_m``."""
    dx = p[0] - center[0]
    dy = p[1] - center[1]
    apothem = math.sqrt(3.0) / 2.0 * radius_m
    half = math.sqrt(3.0) / 2.0
    return (
        abs(dy) <= apothem + 1e-9
        and abs(half * dx + 0.5 * dy) <= apothem + 1e-9
        and abs(-half * dx + 0.5 * dy) <= apothem + 1e-9
    )


_DROP_RETRIES = 1000


def _uniform_in_cell(gen, center, radius_m: float, min_dist_m: float):
    """Uniform point in a hexagonal cell, at least min_dist from its BS."""
    half_h = math.sqrt(3.0) / 2.0 * radius_m
    for _ in range(_DROP_RETRIES):
        x = center[0] + gen.uniform(-radius_m, radius_m)
        y = center[1] + gen.uniform(-half_h, half_h)
        if not point_in_hexagon((x, y), center, radius_m):
            continue
        if math.hypot(x - center[0], y - center[1]) < min_dist_m:
            continue
        return x, y
    raise RuntimeError(
        "could not place a user after %d rejections" % _DROP_RETRIES
    )


def drop_users(cfg: MulticellConfig, scenario: str, d_m: float,
               rng: RngStream) -> MulticellDrop:
    """One random user placement.

    Center cell: ``uncoordinated`` puts the typical user (index 0) at
    distance exactly ``d_m`` with uniform angle and the other K-1 users
    uniformly in the cell; ``coordinated`` puts every user at a uniform
    distance in ``d_m +- coordinated_halfwidth_m``, uniform angle.  Ring
    placements are not clipped to the hexagon.  Out-of-cell users are
    uniform in their own cell.  All placements respect the minimum
    BS-user distance to the serving BS.
    """
    if scenario not in SCENARIO_ORDER:
        raise ValueError("scenario must be one of %s" % (SCENARIO_ORDER,))
    if scenario == "coordinated":
        if not d_m - cfg.coordinated_halfwidth_m >= cfg.min_dist_m:
            raise ValueError(
                "d - halfwidth must respect the minimum BS-user distance"
            )
    elif not d_m >= cfg.min_dist_m:
        raise ValueError("d must respect the minimum BS-user distance")
    gen = rng.generator()
    center_dist = np.empty(cfg.k, dtype=np.float64)
    if scenario == "uncoordinated":
        gen.uniform(0.0, 2.0 * math.pi)
        center_dist[0] = d_m
        for u in range(1, cfg.k):
            x, y = _uniform_in_cell(
                gen, (0.0, 0.0), cfg.cell_radius_m, cfg.min_dist_m
            )
            center_dist[u] = math.hypot(x, y)
    else:
        for u in range(cfg.k):
            r = gen.uniform(
                d_m - cfg.coordinated_halfwidth_m,
                d_m + cfg.coordinated_halfwidth_m,
            )
            gen.uniform(0.0, 2.0 * math.pi)
            center_dist[u] = r
    centers = hex_centers(cfg.n_cells, cfg.cell_radius_m)
    interferer = np.empty((cfg.n_cells - 1) * cfg.k, dtype=np.float64)
    pos = 0
    for c in range(1, cfg.n_cells):
        for _ in range(cfg.k):
            x, y = _uniform_in_cell(
                gen, tuple(centers[c]), cfg.cell_radius_m, cfg.min_dist_m
            )
            interferer[pos] = math.hypot(x, y)
            pos += 1
    return MulticellDrop(center_dist_m=center_dist,
                         interferer_dist_m=interferer)


def multicell_sinr(cfg: MulticellConfig, drop: MulticellDrop) -> float:
    """Effective SINR of the center cell for one drop.

    The mean received power of the center-cell users over the summed
    received power of all out-of-cell users (the Gaussian-approximated
    interference) plus thermal noise.  Per-user deviations from the mean
    are applied as channel column scalings, not here.
    """
    p_users = cfg.received_power_w(drop.center_dist_m)
    p_bar = float(np.mean(p_users))
    if drop.interferer_dist_m.size:
        interference = float(
            np.sum(cfg.received_power_w(drop.interferer_dist_m))
        )
    else:
        interference = 0.0
    return p_bar / (interference + cfg.noise_power_w())


def _multicell_block(cfg: MulticellConfig, scen_idx: int, d_idx: int,
                     n_d: int, d_m: float, det_names: Tuple[str, ...],
                     trials: int, seed: int, start: int, size: int):
    scenario = SCENARIO_ORDER[scen_idx]
    const = cfg.constellation
    acc = {name: [0, 0, 0.0, 0, 0.0, 0, 0.0] for name in det_names}
    for t in range(start, start + size):
        sid = (scen_idx * n_d + d_idx) * trials + t
        sub = RngStream(seed, sid)
        drop = drop_users(cfg, scenario, d_m, sub)
        rho_mc = multicell_sinr(cfg, drop)
        p_users = cfg.received_power_w(drop.center_dist_m)
        weights = np.sqrt(p_users / np.mean(p_users))
        h = draw_rayleigh_channel(sub, cfg.n_r, cfg.k) * weights[None, :]
        idx = draw_symbols(sub, const, cfg.k)
        x = indices_to_symbols(const, idx)
        _, q = transmit(h, x, rho_mc, rng=sub)
        rows = sign_refine(expand_real(h), q)
        for name in det_names:
            t0 = time.perf_counter()
            out = DETECTOR_DISPATCH[name](
                rows, q, h, const, cfg.k, rho_mc, cfg.nml
            )
            elapsed = time.perf_counter() - t0
            if scenario == "uncoordinated":
                errors = 1 if out.symbols[0] != int(idx[0]) else 0
                decisions = 1
            else:
                errors = sum(
                    1 for i in range(cfg.k) if out.symbols[i] != int(idx[i])
                )
                decisions = cfg.k
            _accumulate(acc[name], out, errors, decisions, elapsed)
    return acc


def run_multicell_sweep(cfg: MulticellConfig, d_grid: Sequence[float],
                        detectors_used: Sequence[str], trials: int,
                        seed: int, parallelism: int = 1) -> SweepResult:
    """Error rates over both dropping scenarios and a distance grid.

    The uncoordinated scenario reports the typical user's error rate;
    the coordinated scenario averages all K center-cell users.  Each
    trial redraws geometry, fading, symbols, and noise; near-far effects
    scale the channel columns by the square root of each user's received
    power relative to the center-cell mean.
    """
    d_grid = [float(d) for d in d_grid]
    if not d_grid:
        raise ValueError("d_grid must be nonempty")
    picked = set(detectors_used)
    if not picked or not picked.issubset(DETECTOR_ORDER):
        raise ValueError(
            "detectors must be a nonempty subset of %s" % (DETECTOR_ORDER,)
        )
    det_names = tuple(d for d in DETECTOR_ORDER if d in picked)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0 <= seed < 2**64:
        raise ValueError("seed must fit in an unsigned 64-bit int")
    if "ML" in picked:
        space = cfg.constellation.order ** cfg.k
        if space > detectors.ENUMERATION_CAP:
            raise SearchSpaceTooLargeError(
                "M^K = %d exceeds the enumeration cap" % space
            )
    points = []
    for scen_idx, scenario in enumerate(SCENARIO_ORDER):
        for d_idx, d_m in enumerate(d_grid):
            args = [
                (cfg, scen_idx, d_idx, len(d_grid), d_m, det_names,
                 trials, seed, start, size)
                for start, size in _blocks(trials)
            ]
            merged = _merge_blocks(
                _run_blocked(_multicell_block, args, parallelism)
            )
            for name in det_names:
                e, n, _, _, _, _, det_wall = merged[name]
                points.append(
                    MulticellPoint(
                        scenario=scenario,
                        d_m=d_m,
                        detector=name,
                        trials=trials,
                        errors=e,
                        decisions=n,
                        error_rate=e / n,
                        wall_time_s=det_wall,
                    )
                )
    return SweepResult(points=tuple(points))
