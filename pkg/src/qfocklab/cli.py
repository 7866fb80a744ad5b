"""Experiment runner and verification harness.

Subcommands: ``verify``, ``decay``, ``threshold``, ``ao-decay``,
``torus``.  Flags override an optional JSON config file; every report
embeds the fully resolved configuration.  Exit codes: 0 all checks
pass, 1 a verification check failed, 2 configuration/usage error.
The CLI performs no mathematics of its own; every number in a report
comes from a library call.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import ao as ao_mod
from . import cohomology as coh
from . import torus as torus_mod
from .errors import ConfigError, QFockError
from .gradient import (
    fit_log_slope,
    gamma,
    gradient_map,
    nabla_pairing_two_ways,
    schatten_diagnostic,
)
from .numerics import hermitian_eig
from .partitions import (
    SegmentShape,
    crossing_number,
    enumerate_pair_partitions,
)
from .qfock import FockParams, annihilation, creation, r_star, r_star3, symmetrizer
from .reports import format_number, render_csv, render_json, write_csv, write_json
from .wick import Element, product_direct, product_partition, product_triple, wick

CONDITIONING_Q_CAP = 0.8


@dataclass
class ExperimentConfig:
    command: str
    q: float = 0.5
    dim: int = 2
    max_level: int = 6
    p: float = 2.0
    word_a: list[int] = field(default_factory=lambda: [1])
    word_b: list[int] = field(default_factory=lambda: [1])
    word_x: list[int] = field(default_factory=lambda: [1])
    word_y: list[int] = field(default_factory=lambda: [1])
    window: int = 16
    seed: int = 42
    tol: float | None = None
    out: str | None = None
    json_out: str | None = None
    grid: str = "0.30:0.70:0.05"
    route: str = "rstar"
    model: str = "ou"
    semigroup: str = "poisson"
    l: int = 1
    m: int = 1
    time_t: float = 0.0

    def validate(self) -> None:
        if abs(self.q) > CONDITIONING_Q_CAP:
            raise ConfigError(
                f"|q| = {abs(self.q)} outside the supported conditioning range "
                f"<= {CONDITIONING_Q_CAP}"
            )
        if self.dim < 1:
            raise ConfigError(f"dim must be >= 1, got {self.dim}")
        if self.max_level < 0:
            raise ConfigError(f"max_level must be >= 0, got {self.max_level}")
        if self.p != float("inf") and self.p < 1:
            raise ConfigError(f"p must be >= 1, got {self.p}")
        if self.window < 1:
            raise ConfigError(f"window must be >= 1, got {self.window}")
        for name in ("word_a", "word_b", "word_x", "word_y"):
            word = getattr(self, name)
            if any(not 1 <= i <= self.dim for i in word):
                raise ConfigError(f"{name} indices must lie in 1..{self.dim}")
        if self.route not in ("direct", "partition", "rstar"):
            raise ConfigError(f"unknown route {self.route!r}")
        if self.model not in ("ou", "torus"):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.semigroup not in ("heat", "poisson"):
            raise ConfigError(f"unknown semigroup {self.semigroup!r}")

    def fock_params(self) -> FockParams:
        try:
            return FockParams(q=self.q, dim=self.dim, max_level=self.max_level)
        except QFockError as exc:
            raise ConfigError(str(exc)) from exc

    def as_dict(self) -> dict:
        return asdict(self)


def parse_grid(spec: str) -> list[float]:
    try:
        lo, hi, step = (float(part) for part in spec.split(":"))
    except ValueError as exc:
        raise ConfigError(f"grid must be lo:hi:step, got {spec!r}") from exc
    if step <= 0 or hi < lo:
        raise ConfigError(f"bad grid bounds {spec!r}")
    count = int(round((hi - lo) / step))
    values = [round(lo + i * step, 12) for i in range(count + 1)]
    return [v for v in values if v <= hi + 1e-12]


def parse_word(text: str) -> list[int]:
    if not text:
        return []
    try:
        return [int(part) for part in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"word must be comma-separated indices, got {text!r}") from exc


# ---------------------------------------------------------------------------
# verification checks
# ---------------------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    residual: float
    tolerance: float
    seconds: float

    @property
    def passed(self) -> bool:
        return self.residual < self.tolerance


def _relative_gap(left: Element, right: Element) -> float:
    scale = max(left.q_norm(), right.q_norm(), 1.0)
    return (left - right).q_norm() / scale


def _check_partitions(cfg, params):
    shapes = [(1, 1), (2, 1), (1, 1, 1), (2, 2), (3, 2)]
    mismatches = 0
    for sizes in shapes:
        shape = SegmentShape(sizes)
        seen = set()
        for part in enumerate_pair_partitions(shape):
            if (part.pairs, part.singletons) in seen:
                mismatches += 1
            seen.add((part.pairs, part.singletons))
            cr = crossing_number(part)
            slow_c = sum(
                1
                for a in part.pairs
                for b in part.pairs
                if a != b and a[0] < b[0] < a[1] < b[1]
            )
            slow_d = sum(
                1 for l, r in part.pairs for s in part.singletons if l < s < r
            )
            if (cr.regular, cr.degenerate) != (slow_c, slow_d):
                mismatches += 1
    fig = crossing_number(
        next(
            p
            for p in enumerate_pair_partitions(SegmentShape((4, 4, 3)))
            if p.pairs == ((2, 7), (4, 9), (8, 10))
        )
    )
    if (fig.regular, fig.degenerate, fig.total) != (2, 5, 7):
        mismatches += 1
    return float(mismatches), 0.5


def _check_gram_positivity(cfg, params):
    worst = -np.inf
    for q in sorted({params.q, 0.8, -0.8}):
        pp = FockParams(q=q, dim=params.dim, max_level=params.max_level)
        for m in range(min(params.max_level, 5) + 1):
            w, _ = hermitian_eig(symmetrizer(pp, m))
            worst = max(worst, -float(w[0]))
    return max(worst, 0.0), 1e-12


def _check_rstar(cfg, params):
    worst = 0.0
    combos = [(1, 1), (1, 2), (2, 1), (2, 2)]
    for n, k in combos:
        if n + k > params.max_level:
            continue
        lhs = symmetrizer(params, n + k)
        rhs = np.kron(symmetrizer(params, n), symmetrizer(params, k)) @ r_star(params, n, k)
        worst = max(worst, float(np.linalg.norm(lhs - rhs) / max(np.linalg.norm(lhs), 1.0)))
    for n, k, l in [(1, 1, 1), (2, 1, 1), (1, 2, 1)]:
        if n + k + l > params.max_level:
            continue
        got = r_star3(params, n, k, l)
        left = np.kron(r_star(params, n, k), np.eye(params.dim**l)) @ r_star(params, n + k, l)
        right = np.kron(np.eye(params.dim**n), r_star(params, k, l)) @ r_star(params, n, k + l)
        scale = max(np.linalg.norm(got), 1.0)
        worst = max(worst, float(np.linalg.norm(got - left) / scale))
        worst = max(worst, float(np.linalg.norm(got - right) / scale))
    return worst, 1e-11


def _check_annihilation(cfg, params):
    worst = 0.0
    for i in range(params.dim):
        xi = np.zeros(params.dim)
        xi[i] = 1.0
        lhs = annihilation(params, xi)
        rhs = creation(params, xi).gram_adjoint()
        for key in set(lhs.blocks) | set(rhs.blocks):
            gap = np.abs(
                np.asarray(lhs.blocks.get(key, 0.0)) - np.asarray(rhs.blocks.get(key, 0.0))
            )
            worst = max(worst, float(np.max(gap)))
    return worst, 1e-10


def _check_wick_triangle(cfg, params):
    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    for _ in range(10):
        levels = rng.integers(1, 3, size=3)
        while int(levels.sum()) > params.max_level:
            levels = rng.integers(1, 3, size=3)
        syms = [rng.standard_normal((params.dim,) * int(n)) for n in levels]
        direct = product_direct(params, syms)
        part = Element.from_vector(product_partition(params, syms))
        trip = Element.from_vector(product_triple(params, *syms))
        worst = max(worst, _relative_gap(part, direct), _relative_gap(trip, direct))
    return worst, 1e-9


def _check_psi_triangle(cfg, params):
    rng = np.random.default_rng(cfg.seed + 1)
    worst = 0.0
    for n, k in [(1, 1), (2, 1)]:
        a = wick(params, rng.standard_normal((params.dim,) * n))
        b = wick(params, rng.standard_normal((params.dim,) * k))
        cap = max(params.max_level - 4, 0)
        base = gradient_map(a, b, cfg.time_t, "direct", max_source=cap)
        for route in ("partition", "rstar"):
            other = gradient_map(a, b, cfg.time_t, route, max_source=cap)
            for key in set(base.realized.blocks) | set(other.realized.blocks):
                gap = np.abs(
                    np.asarray(base.realized.blocks.get(key, 0.0))
                    - np.asarray(other.realized.blocks.get(key, 0.0))
                )
                worst = max(worst, float(np.max(gap)))
    return worst, 1e-8


def _check_gamma_positivity(cfg, params):
    rng = np.random.default_rng(cfg.seed + 2)
    worst = 0.0
    for _ in range(6):
        x = Element(params, {1: rng.standard_normal(params.dim), 2: rng.standard_normal((params.dim,) * 2)})
        xi = Element(params, {0: rng.standard_normal(()), 1: rng.standard_normal(params.dim)})
        val = gamma(x, x).mul(xi).q_inner(xi).real
        scale = max(xi.q_norm() ** 2, 1.0)
        worst = max(worst, -val / scale)
    return max(worst, 0.0), 1e-9


def _check_nabla_pairing(cfg, params):
    rng = np.random.default_rng(cfg.seed + 3)
    worst = 0.0
    for _ in range(6):
        def rand(level):
            return Element(params, {level: rng.standard_normal((params.dim,) * level)})

        lhs, rhs = nabla_pairing_two_ways(
            rand(1), rand(1), (rand(2), rand(1)), (rand(1), rand(2)), params
        )
        scale = max(abs(lhs), abs(rhs), 1.0)
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst, 1e-8


def _rows_to_residual(rows):
    return max(r.residual for r in rows)


def _check_leibniz(cfg, params):
    return _rows_to_residual(coh.verify_leibniz(params, seed=cfg.seed, samples=20)), 1e-8


def _check_d_squared(cfg, params):
    return _rows_to_residual(coh.verify_bar_square(params, seed=cfg.seed, samples=10)), 1e-8


def _check_prefix(cfg, params):
    return (
        _rows_to_residual(coh.verify_prefix_anticommutes(params, seed=cfg.seed, samples=20)),
        1e-8,
    )


def _check_s_isometry(cfg, params):
    model = ao_mod.build_ou_model(params)
    rep = ao_mod.s_isometry_report(model)
    torus_gram = torus_mod.poisson_s_gram(12)
    torus_dev = float(np.max(np.abs(torus_gram - np.eye(torus_gram.shape[0]))))
    return max(rep.max_deviation, torus_dev), 1e-8


def _check_filtration(cfg, params):
    model = ao_mod.build_ou_model(params, check=False)
    worst = 0.0
    cap = min(params.max_level, 5)
    for m in range(cap + 1):
        for n in range(cap + 1 - m):
            worst = max(worst, ao_mod.filtration_check(model, m, n))
    return worst, 1e-9


VERIFY_CHECKS = [
    ("partition_bruteforce", _check_partitions),
    ("gram_positivity", _check_gram_positivity),
    ("rstar_identities", _check_rstar),
    ("annihilation_adjoint", _check_annihilation),
    ("wick_triangle", _check_wick_triangle),
    ("psi_triangle", _check_psi_triangle),
    ("gamma_positivity", _check_gamma_positivity),
    ("nabla_pairing", _check_nabla_pairing),
    ("leibniz", _check_leibniz),
    ("d_squared", _check_d_squared),
    ("prefix_anticommutator", _check_prefix),
    ("s_isometry", _check_s_isometry),
    ("filtration", _check_filtration),
]


def cmd_verify(cfg: ExperimentConfig) -> int:
    params = cfg.fock_params()
    results = []
    for name, fn in VERIFY_CHECKS:
        start = time.perf_counter()
        residual, default_tol = fn(cfg, params)
        tol = default_tol if cfg.tol is None else cfg.tol
        res = CheckResult(name, float(residual), float(tol), time.perf_counter() - start)
        results.append(res)
        status = "PASS" if res.passed else "FAIL"
        print(
            f"[{status}] {name}: residual={format_number(res.residual)} "
            f"tol={format_number(res.tolerance)} ({res.seconds:.2f}s)"
        )
    payload = {
        "config": cfg.as_dict(),
        "checks": [
            {
                "name": r.name,
                "residual": r.residual,
                "tolerance": r.tolerance,
                "passed": r.passed,
            }
            for r in results
        ],
        "passed": all(r.passed for r in results),
        "failed_checks": [r.name for r in results if not r.passed],
    }
    if cfg.out:
        write_json(cfg.out, payload)
    return 0 if payload["passed"] else 1


def cmd_decay(cfg: ExperimentConfig) -> int:
    params = cfg.fock_params()
    a = wick(params, cfg.word_a)
    b = wick(params, cfg.word_b)
    psi = gradient_map(a, b, cfg.time_t, cfg.route)
    report = schatten_diagnostic(psi, cfg.p)
    header = ["m", "level_norm", "sp_bound", "partial_sum", "ratio"]
    rows = [
        [r.level, r.level_norm, r.sp_bound, r.partial_sum, r.ratio]
        for r in report.rows
    ]
    csv_text = render_csv(header, rows)
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(csv_text)
    else:
        sys.stdout.write(csv_text)
    fitted = [(r.level, r.level_norm) for r in report.rows if r.level_norm > 0 and r.level >= 1]
    slope, intercept = (float("nan"), float("nan"))
    if len(fitted) >= 2:
        slope, intercept = fit_log_slope(*zip(*fitted))
    payload = {
        "config": cfg.as_dict(),
        "ratio_estimate": report.ratio_estimate,
        "verdict": report.verdict,
        "truncated_schatten_norm": report.truncated_schatten_norm,
        "fitted_log_slope": slope,
        "fitted_log_intercept": intercept,
        "log_abs_q": float(np.log(abs(params.q))) if params.q else None,
    }
    if cfg.json_out:
        write_json(cfg.json_out, payload)
    print(
        f"decay: {len(rows)} rows, verdict={report.verdict}, "
        f"fitted slope={format_number(slope)}"
    )
    return 0


def cmd_threshold(cfg: ExperimentConfig) -> int:
    grid = parse_grid(cfg.grid)
    header = ["q", "ratio_estimate", "predicted_ratio", "verdict"]
    rows = []
    verdicts = []
    for q in grid:
        if abs(q) > CONDITIONING_Q_CAP:
            raise ConfigError(f"grid point {q} outside |q| <= {CONDITIONING_Q_CAP}")
        params = FockParams(q=q, dim=cfg.dim, max_level=cfg.max_level)
        a = wick(params, cfg.word_a)
        b = wick(params, cfg.word_b)
        report = schatten_diagnostic(gradient_map(a, b, 0.0, cfg.route), cfg.p)
        rows.append([q, report.ratio_estimate, report.threshold_ratio, report.verdict])
        verdicts.append(report.verdict)
    csv_text = render_csv(header, rows)
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(csv_text)
    else:
        sys.stdout.write(csv_text)
    flips = [
        (grid[i], grid[i + 1])
        for i in range(len(verdicts) - 1)
        if verdicts[i] != verdicts[i + 1]
    ]
    payload = {
        "config": cfg.as_dict(),
        "predicted_threshold": cfg.dim ** (-1.0 / cfg.p),
        "verdict_flips": flips,
        "flip_count": len(flips),
    }
    if cfg.json_out:
        write_json(cfg.json_out, payload)
    print(f"threshold: {len(rows)} grid points, {len(flips)} verdict flip(s)")
    return 0


def cmd_ao_decay(cfg: ExperimentConfig) -> int:
    if cfg.model == "ou":
        params = cfg.fock_params()
        model = ao_mod.build_ou_model(params)
        x = Element.word(params, cfg.word_x)
        y = Element.word(params, cfg.word_y)
        table = ao_mod.ou_t_decay_table(model, x, y)
        factor = 0.5
        values = [v for *_, v in table]
    else:
        table = torus_mod.poisson_t_decay(cfg.l, cfg.m, cfg.window)
        factor = 2.0
        # the torus trend statistic weights each block norm by its mode
        values = [j * v for j, _, v in table]
    header = ["n", "lambda_n", "block_norm"]
    rows = [[n, lam, v] for n, lam, v in table]
    csv_text = render_csv(header, rows)
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(csv_text)
    else:
        sys.stdout.write(csv_text)
    if cfg.model == "torus":
        # head statistic over modes [K/8, K/4], tail over [K/2, K]
        window = len(values)
        head = max(values[window // 8 - 1 : window // 4])
        tail = max(values[window // 2 - 1 :])
        verdict = ao_mod.DecayVerdict(head, tail, factor)
    else:
        verdict = ao_mod.decay_verdict(values, factor)
    payload = {
        "config": cfg.as_dict(),
        "head": verdict.head,
        "tail": verdict.tail,
        "factor": verdict.factor,
        "trend_pass": verdict.trend_pass,
    }
    if cfg.json_out:
        write_json(cfg.json_out, payload)
    print(
        f"ao-decay[{cfg.model}]: head={format_number(verdict.head)} "
        f"tail={format_number(verdict.tail)} trend_pass={verdict.trend_pass}"
    )
    return 0


def cmd_torus(cfg: ExperimentConfig) -> int:
    builder = torus_mod.heat_psi if cfg.semigroup == "heat" else torus_mod.poisson_psi
    pm = builder(cfg.l, cfg.m, cfg.window)
    table = pm.table()
    header = ["k", "coefficient"]
    rows = [[k, coeff] for k, coeff in table]
    csv_text = render_csv(header, rows)
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(csv_text)
    else:
        sys.stdout.write(csv_text)
    nonzero = [k for k, coeff in table if coeff != 0]
    payload = {
        "config": cfg.as_dict(),
        "nonzero_count": len(nonzero),
        "support": nonzero,
        "rank_bound": torus_mod.poisson_rank_bound(cfg.l, cfg.m)
        if cfg.semigroup == "poisson"
        else None,
    }
    if cfg.json_out:
        write_json(cfg.json_out, payload)
    print(f"torus[{cfg.semigroup}]: {len(rows)} modes, {len(nonzero)} nonzero")
    return 0


COMMANDS = {
    "verify": cmd_verify,
    "decay": cmd_decay,
    "threshold": cmd_threshold,
    "ao-decay": cmd_ao_decay,
    "torus": cmd_torus,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qfocklab",
        description="Truncated q-Fock laboratory: verification and decay reports",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", help="JSON config file; flags override it")
        cmd.add_argument("--q", type=float)
        cmd.add_argument("--dim", type=int)
        cmd.add_argument("--max-level", type=int, dest="max_level")
        cmd.add_argument("--p", type=float)
        cmd.add_argument("--word-a", dest="word_a")
        cmd.add_argument("--word-b", dest="word_b")
        cmd.add_argument("--word-x", dest="word_x")
        cmd.add_argument("--word-y", dest="word_y")
        cmd.add_argument("--window", type=int)
        cmd.add_argument("--seed", type=int)
        cmd.add_argument("--tol", type=float)
        cmd.add_argument("--out")
        cmd.add_argument("--json-out", dest="json_out")
        cmd.add_argument("--grid")
        cmd.add_argument("--route")
        cmd.add_argument("--model")
        cmd.add_argument("--semigroup")
        cmd.add_argument("-l", type=int)
        cmd.add_argument("-m", type=int)
        cmd.add_argument("--time", type=float, dest="time_t")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    base: dict = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            base = json.load(fh)
        unknown = set(base) - set(ExperimentConfig.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = ExperimentConfig(command=args.command, **base)
    for name in ExperimentConfig.__dataclass_fields__:
        if name == "command":
            continue
        got = getattr(args, name, None)
        if got is not None:
            if name.startswith("word_") and isinstance(got, str):
                got = parse_word(got)
            setattr(cfg, name, got)
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except QFockError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
