"""Named experiments and suite runners behind the command-line interface.

Every runner is deterministic given the configured seed: instance k draws
from ``default_rng([seed, k])`` and results merge in instance order, so the
report body is byte-identical for any thread count.  Wall-clock timings are
kept out of the report body and written separately.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .cubes import CubeFamily, GridCube, dyadic_descendants, is_dyadically_complete
from .errors import ConfigError
from .estimates import DEFAULT_RATIO_CAPS, theorem_main_evaluate
from .generators import (
    FAMILY_CLASSES,
    FUNCTION_CLASSES,
    make_function,
    random_complete_family,
    random_family,
)
from .grid import GridFunction, PixelSet, variation
from .maximal import maximal_family, maximal_global, maximal_local, variation_ratio
from .sparse import (
    accumulate_q2_cubes,
    default_contraction,
    disjoint_select,
    greedy_sparse,
    sparse_pairwise_violations,
)

SCHEMA_VERSION = 1


@dataclass
class ExperimentConfig:
    seed: int = 0
    dimension: int = 2
    grid: int = 32
    h: float = 1.0
    function_class: str = "simple"
    family_class: str = "random-complete"
    repetitions: int = 20
    family_seeds: int = 6
    threads: int = 1
    deep_instances: int = 2
    checkerboard_n_max: int = 6
    geom_samples: int = 100_000
    caps: dict = field(default_factory=lambda: dict(DEFAULT_RATIO_CAPS))

    def __post_init__(self):
        if self.dimension not in (1, 2, 3):
            raise ConfigError(f"dimension {self.dimension} not in {{1,2,3}}")
        if self.grid < 2:
            raise ConfigError("grid must have at least 2 cells per axis")
        if self.h <= 0:
            raise ConfigError("h must be positive")
        if self.function_class not in FUNCTION_CLASSES:
            raise ConfigError(f"unknown function class {self.function_class!r}")
        if self.family_class not in FAMILY_CLASSES:
            raise ConfigError(f"unknown family class {self.family_class!r}")
        if self.repetitions < 1 or self.threads < 1:
            raise ConfigError("repetitions and threads must be positive")
        self.caps = {int(k): float(v) for k, v in self.caps.items()}

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**obj)

    def to_json(self) -> dict:
        out = asdict(self)
        out["caps"] = {str(k): v for k, v in self.caps.items()}
        del out["threads"]  # execution parameter, not part of the report body
        return out

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.grid,) * self.dimension


def _instance_rng(seed: int, k: int) -> np.random.Generator:
    return np.random.default_rng([seed, k])


def _parallel(fn, count: int, threads: int) -> list:
    if threads <= 1:
        return [fn(k) for k in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, range(count)))


def _report_skeleton(command: str, cfg: ExperimentConfig) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "command": command,
        "config": cfg.to_json(),
        "assertions": [],
        "results": {},
        "constants": {},
    }


def _assert(report: dict, name: str, passed: bool, detail: str = "") -> None:
    report["assertions"].append({"name": name, "passed": bool(passed), "detail": detail})


def report_passed(report: dict) -> bool:
    return all(a["passed"] for a in report["assertions"])


# ---------------------------------------------------------------- ratio suite

def run_ratio_suite(cfg: ExperimentConfig) -> dict:
    """Variation ratios of the global maximal operator on generated functions.

    Also records (never asserts) instances where the maximal operator is
    superadditive on the gradient level: var M(f+g) > var M f + var M g.
    """
    report = _report_skeleton("ratio", cfg)

    def one(k: int) -> tuple[float, bool]:
        rng = _instance_rng(cfg.seed, k)
        f = make_function(rng, cfg.function_class, cfg.dims, cfg.h)
        ratio = variation_ratio(f, maximal_global(f))
        g = make_function(rng, cfg.function_class, cfg.dims, cfg.h)
        fg = GridFunction(f.dims, f.h, f.values + g.values)
        superadd = variation(maximal_global(fg).func) > \
            variation(maximal_global(f).func) + variation(maximal_global(g).func)
        return ratio, superadd

    rows = _parallel(one, cfg.repetitions, cfg.threads)
    ratios = [float(r) for r, _ in rows]
    report["results"]["ratios"] = ratios
    report["results"]["superadditive_instances"] = [k for k, (_, s) in enumerate(rows) if s]
    report["constants"]["ratio_max"] = max(ratios)
    report["constants"]["ratio_median"] = float(np.median(ratios))
    if cfg.dimension == 1:
        bad = [r for r in ratios if r > 1.0 + 1e-9]
        _assert(report, "one_dimensional_non_increase", not bad,
                f"{len(bad)} ratios above 1+1e-9" if bad else "all ratios <= 1+1e-9")
    _assert(report, "ratios_finite", all(math.isfinite(r) for r in ratios))
    return report


# -------------------------------------------------------------- checkerboard

def checkerboard_family(n: int, n_max: int) -> CubeFamily:
    """Large dyadic cubes of the 4x4 box plus the even-parity scale-n subcells
    of the centered unit square, on the grid with cell 2^-n_max."""
    unit = 2 ** n_max            # cells per unit length
    box = 4 * unit
    cubes = [GridCube((0, 0), box)]
    for qx in (0, 2 * unit):
        for qy in (0, 2 * unit):
            cubes.append(GridCube((qx, qy), 2 * unit))
    sub = 2 ** (n_max - n)       # cells per parity subcell
    for n1 in range(2 ** n):
        for n2 in range(2 ** n):
            if (n1 + n2) % 2 == 0:
                cubes.append(GridCube((unit + n1 * sub, unit + n2 * sub), sub))
    return CubeFamily(cubes)


def run_checkerboard(n_max: int = 6, seed: int = 0) -> dict:
    """Family-average maximal function of a unit-square indicator whose
    variation grows geometrically with the parity-cell depth."""
    cfg = ExperimentConfig(seed=seed, dimension=2, grid=4 * 2 ** n_max,
                           h=2.0 ** (-n_max), checkerboard_n_max=n_max)
    report = _report_skeleton("checkerboard", cfg)
    unit = 2 ** n_max
    dims = (4 * unit, 4 * unit)
    vals = np.zeros(dims)
    vals[unit:2 * unit, unit:2 * unit] = 1.0
    f = GridFunction(dims, 2.0 ** (-n_max), vals.ravel())

    variations = []
    incomplete_each = []
    for n in range(0, n_max + 1):
        fam = checkerboard_family(n, n_max)
        mf = maximal_family(f, fam.with_averages(f), include_f=False)
        variations.append(variation(mf.func))
        if n >= 1:
            ok, witness = is_dyadically_complete(fam)
            incomplete_each.append(not ok and witness is not None)
    ratios = [variations[i + 1] / variations[i] for i in range(len(variations) - 1)]
    report["results"]["n"] = list(range(0, n_max + 1))
    report["results"]["variation"] = [float(v) for v in variations]
    report["results"]["growth_ratios"] = [float(r) for r in ratios]
    window = [float(ratios[n]) for n in range(2, n_max)]
    _assert(report, "geometric_growth",
            all(1.5 <= r <= 2.5 for r in window),
            f"ratios for n=2..{n_max - 1}: {[round(r, 3) for r in window]}")
    _assert(report, "families_not_dyadically_complete", all(incomplete_each),
            "witness found for every n >= 1")
    return report


# ------------------------------------------------------------------ dumbbell

DUMBBELL_INTEGRAL = 1.0 / 6.0  # exact integral of the corner ramp over its support


def dumbbell_domain(h: float) -> tuple[GridFunction, PixelSet]:
    """The two-chamber domain (-5,5)x(-10,0) joined to (-1,1)x[0,2) by a neck,
    with the ramp max(0, -14 - x - y) discretized by exact cell averages."""
    nx = round(10 / h)
    ny = round(12 / h)
    dims = (nx, ny)
    xc = -5.0 + (np.arange(nx) + 0.5) * h
    yc = -10.0 + (np.arange(ny) + 0.5) * h
    lower = (yc < 0)
    neckx = (np.abs(xc) < 1)
    necky = (yc >= 0) & (yc < 2)
    omega = np.zeros(dims, dtype=bool)
    omega[:, lower] = True
    omega[np.ix_(neckx, necky)] = True

    def antideriv(t):
        return np.where(t > 0, t ** 3 / 6.0, 0.0)

    # cell average of max(0, 1 - u - v), u = x + 5, v = y + 10
    u0 = (xc - 0.5 * h) + 5.0
    v0 = (yc - 0.5 * h) + 10.0
    w = 1.0 - np.add.outer(u0, v0)
    integral = antideriv(w) - 2.0 * antideriv(w - h) + antideriv(w - 2.0 * h)
    vals = integral / (h * h)
    vals[~omega] = 0.0
    return GridFunction(dims, h, vals.ravel()), PixelSet(dims, omega)


def run_dumbbell(seed: int = 0, resolutions=(0.25, 0.125, 0.0625)) -> dict:
    cfg = ExperimentConfig(seed=seed, dimension=2, grid=4, h=resolutions[0])
    report = _report_skeleton("dumbbell", cfg)
    target = DUMBBELL_INTEGRAL / 100.0
    rows = []
    all_ok_neck = True
    all_ok_lower = True
    all_ok_jump = True
    for h in resolutions:
        f, omega = dumbbell_domain(h)
        mf = maximal_local(f, omega)
        yc = -10.0 + (np.arange(f.dims[1]) + 0.5) * h
        neck_cells = omega.mask & (yc >= 0)[None, :]
        lower_cells = omega.mask & (yc < 0)[None, :]
        neck_max = float(np.max(np.abs(mf.array[neck_cells])))
        lower_min = float(np.min(mf.array[lower_cells]))
        var_m = variation(mf.func, omega)
        ok_neck = neck_max == 0.0
        ok_lower = lower_min >= target * (1 - 1e-12)
        jump_floor = 2.0 * target * (1 - 1e-9)  # waist length 2 times the chamber level
        ok_jump = var_m >= jump_floor
        all_ok_neck &= ok_neck
        all_ok_lower &= ok_lower
        all_ok_jump &= ok_jump
        rows.append({"h": h, "neck_max": neck_max, "lower_min": lower_min,
                     "target": target, "variation": float(var_m)})
    report["results"]["rows"] = rows
    _assert(report, "neck_values_zero", all_ok_neck)
    _assert(report, "lower_chamber_floor", all_ok_lower,
            f"floor {target!r}")
    _assert(report, "jump_persists_under_refinement", all_ok_jump)
    return report


# ------------------------------------------------------------- theorem suite

def _theorem_instance(cfg: ExperimentConfig, k: int) -> dict:
    rng = _instance_rng(cfg.seed, k)
    f = make_function(rng, cfg.function_class, cfg.dims, cfg.h)
    fam = random_complete_family(rng, cfg.dims, cfg.family_seeds).with_averages(f)
    rep = theorem_main_evaluate(
        f, fam, cap=cfg.caps[cfg.dimension], deep=(k < cfg.deep_instances))
    row = {
        "instance": k, "family_size": len(fam),
        "lhs": rep.lhs, "rhs": rep.rhs, "ratio": rep.ratio,
        "within_cap": rep.within_cap,
        "subterms": rep.subterms,
    }
    if rep.deep is not None:
        row["deep"] = {key: rep.deep[key] for key in rep.deep if key != "bases"}
    if k == 0:
        row["per_lambda"] = {key: np.asarray(v).tolist()
                             for key, v in rep.lam_table.items()}
    return row


def run_theorem_suite(cfg: ExperimentConfig) -> dict:
    report = _report_skeleton("theorem", cfg)
    rows = _parallel(lambda k: _theorem_instance(cfg, k), cfg.repetitions, cfg.threads)
    report["results"]["instances"] = rows
    finite = [r["ratio"] for r in rows if math.isfinite(r["ratio"]) and r["rhs"] > 0]
    report["constants"]["ratio_max"] = max(finite) if finite else 0.0
    report["constants"]["ratio_median"] = float(np.median(finite)) if finite else 0.0
    _assert(report, "all_within_cap", all(r["within_cap"] for r in rows),
            f"cap {cfg.caps[cfg.dimension]}")
    return report


def refine_instance(f: GridFunction, fam: CubeFamily) -> tuple[GridFunction, CubeFamily]:
    """The same function/family shape at doubled grid resolution.

    Each cell splits into 2^d children carrying the parent value and every
    cube doubles its anchor and side, so averages and level sets are the
    exact refinements of the coarse ones.
    """
    arr = f.array
    for ax in range(f.d):
        arr = np.repeat(arr, 2, axis=ax)
    f2 = GridFunction(arr.shape, f.h / 2.0, arr.ravel())
    cubes = [GridCube(tuple(2 * a for a in c.anchor), 2 * c.side) for c in fam.cubes]
    return f2, CubeFamily(cubes).with_averages(f2)


def run_refinement_stability(cfg: ExperimentConfig, pairs: int = 12) -> dict:
    """Max main-inequality ratio at the base resolution and at double
    resolution for identical shapes; reports the relative change."""
    report = _report_skeleton("theorem-refinement", cfg)
    coarse = []
    fine = []
    for k in range(pairs):
        rng = _instance_rng(cfg.seed, 10_000 + k)
        f = make_function(rng, cfg.function_class, cfg.dims, cfg.h)
        fam = random_complete_family(rng, cfg.dims, cfg.family_seeds).with_averages(f)
        rep1 = theorem_main_evaluate(f, fam, cap=cfg.caps[cfg.dimension], deep=False)
        f2, fam2 = refine_instance(f, fam)
        rep2 = theorem_main_evaluate(f2, fam2, cap=cfg.caps[cfg.dimension], deep=False)
        if rep1.rhs > 0 and rep2.rhs > 0:
            coarse.append(rep1.ratio)
            fine.append(rep2.ratio)
    mx1, mx2 = max(coarse), max(fine)
    change = abs(mx2 - mx1) / mx1 if mx1 > 0 else 0.0
    report["results"]["coarse_ratios"] = [float(r) for r in coarse]
    report["results"]["fine_ratios"] = [float(r) for r in fine]
    report["constants"]["max_ratio_coarse"] = mx1
    report["constants"]["max_ratio_fine"] = mx2
    report["constants"]["relative_change"] = change
    _assert(report, "max_ratio_stable_under_refinement", change < 0.2,
            f"relative change {change:.4f}")
    return report


# -------------------------------------------------------------- sparse audit

def run_sparse_audit(cfg: ExperimentConfig) -> dict:
    """Postcondition audits of the greedy selection and of the
    bounded-overlap thinning, on pipeline-grown and raw random inputs."""
    report = _report_skeleton("sparse-audit", cfg)

    def one(k: int) -> dict:
        rng = _instance_rng(cfg.seed, k)
        if k % 2 == 0:
            # genuine pipeline: spiky function, completion family with the box
            f = make_function(rng, "spikes", cfg.dims, cfg.h)
            fam = random_complete_family(rng, cfg.dims, cfg.family_seeds).with_averages(f)
            q2 = accumulate_q2_cubes(f, fam)
        else:
            # raw input: the greedy postconditions hold for any cube set
            f = make_function(rng, cfg.function_class, cfg.dims, cfg.h)
            count = int(rng.integers(cfg.family_seeds * 8, 200))
            q2 = random_family(rng, cfg.dims, count, pow2=False).with_averages(f)
        sp = greedy_sparse(f, q2)
        violations = sparse_pairwise_violations(sp, f)
        # bounded-overlap instance: bases are power-of-two selected cubes,
        # the per-base collections are random dyadic descendants
        eps = default_contraction(f.d)
        bases = [c for c in sp.cubes if not (c.side & (c.side - 1))]
        d_map = {}
        for q0 in bases:
            dy = dyadic_descendants(q0)
            pick = [c for c in dy.cubes if rng.random() < 0.35
                    and not any(c.contains_cube(s) and c != s for s in bases)]
            if pick:
                d_map[q0] = pick
        overlap_c = 0
        if d_map:
            fl = disjoint_select(CubeFamily(list(d_map)), d_map, eps, f)
            overlap_c = fl.overlap_constant
        return {"instance": k, "input_cubes": len(q2), "selected": len(sp),
                "violations": len(violations), "overlap_C": overlap_c}

    rows = _parallel(one, cfg.repetitions, cfg.threads)
    report["results"]["instances"] = rows
    worst_c = max((r["overlap_C"] for r in rows), default=0)
    report["constants"]["overlap_C_max"] = worst_c
    report["constants"]["selected_max"] = max((r["selected"] for r in rows), default=0)
    _assert(report, "greedy_pairwise_postconditions",
            all(r["violations"] == 0 for r in rows))
    _assert(report, "overlap_constant_cap", worst_c <= 4 ** cfg.dimension,
            f"observed {worst_c} <= 4^d")
    return report


# ---------------------------------------------------------------- geom suite

def run_geom_suite(cfg: ExperimentConfig) -> dict:
    from . import geom

    report = _report_skeleton("geom", cfg)
    samples = cfg.geom_samples
    checks = {}
    for d in (2, 3):
        bound = math.pi / 2 - math.asin(1 / math.sqrt(d))
        mx = geom.cube_angle_check(d, samples, seed=cfg.seed)
        checks[f"cube_angle_d{d}"] = {"max": mx, "bound": bound}
        _assert(report, f"cube_angle_within_bound_d{d}", mx <= bound + 1e-9)
        cover = geom.cube_cover_check(0.1, samples, d=d, seed=cfg.seed)
        checks[f"cube_cover_d{d}"] = {"failures": cover.failures,
                                      "delta": cover.delta,
                                      "min_margin": cover.min_margin}
        _assert(report, f"cube_cover_zero_failures_d{d}", cover.failures == 0)
        eps = math.asin(1 / math.sqrt(d)) / 2
        n = geom.min_angle_search(eps, max(10_000, samples // 10), d=d, seed=cfg.seed)
        checks[f"min_angle_d{d}"] = {"eps": eps, "smallest_passing_N": n}
    blow = geom.lipschitz_blowup_check(1.0, 1.0, 0.1, max(samples, 10_000),
                                       d=2, seed=cfg.seed)
    checks["lipschitz_blowup"] = {"estimate": blow.estimate, "bound": blow.bound,
                                  "stderr": blow.stderr}
    _assert(report, "lipschitz_blowup_below_bound",
            blow.estimate + 5 * blow.stderr <= blow.bound)
    for K in (1.0, 2.0):
        lb = geom.large_boundary_in_ball_check(K, max(100, samples // 500), seed=cfg.seed)
        checks[f"large_boundary_K{K:g}"] = {"max_ratio": lb.max_ratio,
                                            "trials": lb.trials}
        _assert(report, f"large_boundary_finite_K{K:g}", math.isfinite(lb.max_ratio))
    report["results"]["geom_checks"] = checks
    return report
