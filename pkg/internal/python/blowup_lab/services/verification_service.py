"""
Verification service: the numerical acceptance suite behind `verify-all`.

Each module contributes named checks (profile.*, operator.*, qb.*, modes.*)
that are evaluated per dimension and collected into one report. A check
that raises is recorded as failed with the error attached; the run goes on.
"""

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from internal.python.blowup_lab.linop.coercivity import coercivity_probe
from internal.python.blowup_lab.linop.kernel import TkFamily, generate_Tk
from internal.python.blowup_lab.linop.operators import (
    OperatorContext,
    apply_A,
    apply_Astar,
    apply_L,
    make_context,
    operator_scale,
    relative_residual,
)
from internal.python.blowup_lab.linop.orthogonality import (
    PhiMDirection,
    build_PhiM,
    expected_identity,
    identity_matrix,
    orthogonality_defects,
)
from internal.python.blowup_lab.models.config import ModesConfig, OperatorConfig, ProfileConfig, QbConfig
from internal.python.blowup_lab.models.errors import BlowupLabError, CheckResult, FileError, UsageError
from internal.python.blowup_lab.modes.dynamics import instability_experiment, integrate_system
from internal.python.blowup_lab.modes.linearization import build_Al, closed_form_spectrum
from internal.python.blowup_lab.modes.system import (
    explicit_coefficients,
    explicit_residual,
    explicit_solution,
    make_mode_system,
)
from internal.python.blowup_lab.numerics.fitting import fit_power_law, observed_order
from internal.python.blowup_lab.numerics.grid import GridFunction, inner_product, make_grid
from internal.python.blowup_lab.profile.ground_state import (
    ProfilePack,
    gamma_exponent,
    lamq_tail_exponent,
    solve_Q,
    spectral_params,
    wronskian_residual,
)
from internal.python.blowup_lab.qb.approximate_profile import ScalingReport, residual_scaling
from internal.python.blowup_lab.qb.corrections import CorrectionFamily, build_Sk, homogeneity_check

DEFAULT_DIMENSIONS = (7, 8, 11)
SCALING_DIMENSION = 8
REPORT_NAME = "verify_report.json"

ROUNDOFF_FLOOR = 1e-10
ADJOINT_PAIRS = 32
ADJOINT_TOL = 1e-7
TK_ROUND_TRIP_TOL = 1e-3
TK_TAIL_TOL = 0.02
PHI_DEFECT_TOL = 1e-8
PHI_M_FACTORS = (0.5, 1.0, 2.0)
PHI_GROWTH_SLACK = 0.5
IDENTITY_TOL = 1e-3
RESIDUAL_EXPONENT_TOL = 0.3
HOMOGENEITY_TOL = 1e-12
EXPLICIT_TOL = 1e-14
SPECTRUM_TOL = 1e-10
RATE_TOL = 0.01
INSTABILITY_TOL = 0.1


def _negated_coefficients(gamma: float, ell: int, L: int) -> np.ndarray:
    return -explicit_coefficients(gamma, ell, L)


# Deliberate defects used to prove that the suite catches them.
FAULTS: Dict[str, Callable[[float, int, int], np.ndarray]] = {
    "ck_sign": _negated_coefficients,
}


@dataclass
class OperatorArtifacts:
    ctx: OperatorContext
    tks: TkFamily
    phis: Dict[float, PhiMDirection]
    k_coercivity: int
    coercivity: float


@dataclass
class QbArtifacts:
    ctx: OperatorContext
    tks: TkFamily
    corrections: CorrectionFamily
    scaling: Optional[ScalingReport]


@dataclass
class VerificationReport:
    """All check results of one verify-all run."""
    dimensions: List[int]
    checks: List[CheckResult] = field(default_factory=list)
    fault: Optional[str] = None

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failed(self) -> List[str]:
        return [check.name for check in self.checks if not check.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dimensions": self.dimensions,
            "fault": self.fault,
            "passed": self.passed,
            "failed": self.failed,
            "checks": [check.to_dict() for check in self.checks],
        }

    def write(self, out_dir: Path) -> Path:
        path = Path(out_dir) / REPORT_NAME
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
        except OSError as exc:
            raise FileError(f"could not write verification report: {exc}", path=str(path)) from exc
        return path


Operator = Callable[[OperatorContext, GridFunction], GridFunction]


def _norm(f: GridFunction) -> float:
    return math.sqrt(max(inner_product(f, f), 0.0))


def at_most(name: str, value: float, bound: float, **details: Any) -> CheckResult:
    return CheckResult(name=name, passed=bool(value <= bound), value=float(value),
                       expected=0.0, tolerance=bound, details=details)


def near(name: str, value: float, expected: float, tol: float, **details: Any) -> CheckResult:
    return CheckResult(name=name, passed=bool(abs(value - expected) <= tol), value=float(value),
                       expected=float(expected), tolerance=tol, details=details)


def holds(name: str, flag: bool, message: str = "", **details: Any) -> CheckResult:
    return CheckResult(name=name, passed=bool(flag), message=message, details=details)


def refinement_order(coarse: float, fine: float) -> Tuple[bool, float]:
    """(passed, order) for errors on grids n and 2n; roundoff-level errors pass outright."""
    if fine <= ROUNDOFF_FLOOR:
        return True, float("inf")
    if coarse <= 0.0:
        return False, 0.0
    order = observed_order([coarse, fine])
    return order >= 3.0, order


class VerificationService:
    """Runs the per-module checks for a list of dimensions."""

    def __init__(self,
                 profile_config: Optional[ProfileConfig] = None,
                 operator_config: Optional[OperatorConfig] = None,
                 qb_config: Optional[QbConfig] = None,
                 modes_config: Optional[ModesConfig] = None,
                 seed: int = 0,
                 fault: Optional[str] = None,
                 logger: Optional[logging.Logger] = None):
        """
        Initialize the service.

        Args:
            profile_config: Grid for the ground-state checks
            operator_config: Grid and sizes for the operator checks
            qb_config: Parameters of the approximate-profile checks
            modes_config: Parameters of the b-system checks
            seed: Seed for every sampled check
            fault: Name of a deliberate defect to inject (see FAULTS)
            logger: Logger instance
        """
        if fault is not None and fault not in FAULTS:
            raise UsageError(f"unknown fault '{fault}'", known=sorted(FAULTS))
        self.profile_config = profile_config or ProfileConfig()
        self.operator_config = operator_config or OperatorConfig()
        self.qb_config = qb_config or QbConfig()
        self.modes_config = modes_config or ModesConfig()
        self.seed = seed
        self.fault = fault
        self.logger = logger or logging.getLogger(__name__)
        self._packs: Dict[Tuple[int, float, float, int], ProfilePack] = {}
        self._operator: Dict[int, OperatorArtifacts] = {}
        self._qb: Dict[int, QbArtifacts] = {}

    def pack(self, d: int, y_min: float, y_max: float, n: int) -> ProfilePack:
        key = (d, y_min, y_max, n)
        if key not in self._packs:
            self._packs[key] = solve_Q(make_grid(d, y_min, y_max, n))
        return self._packs[key]

    def _guarded(self, name: str, fn: Callable[[], List[CheckResult]]) -> List[CheckResult]:
        try:
            return fn()
        except BlowupLabError as exc:
            self.logger.error("check group %s raised %s", name, exc.message, exc_info=True)
            return [CheckResult(name=name, passed=False, message=exc.message,
                                details=exc.to_dict())]
        except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            self.logger.error("check group %s failed numerically: %s", name, exc, exc_info=True)
            return [CheckResult(name=name, passed=False, message=str(exc),
                                details={"error_type": type(exc).__name__})]

    # -- profile -------------------------------------------------------------

    def gamma_checks(self) -> List[CheckResult]:
        dims = range(7, 65)
        gammas = [gamma_exponent(d) for d in dims]
        deltas = [spectral_params(d)[1] for d in dims]
        return [
            near("profile.gamma_7", gamma_exponent(7), 2.0, 0.0),
            holds("profile.gamma_range", all(1.0 < g <= 2.0 for g in gammas),
                  min=min(gammas), max=max(gammas)),
            holds("profile.delta_range", all(0.0 < v < 1.0 for v in deltas),
                  min=min(deltas), max=max(deltas)),
        ]

    def profile_checks(self, d: int) -> List[CheckResult]:
        cfg = self.profile_config
        pack = self.pack(d, cfg.y_min, cfg.y_max, cfg.n)
        gamma = pack.gamma
        coarse = self.pack(d, cfg.y_min, cfg.y_max, cfg.n // 2)
        ok, order = refinement_order(wronskian_residual(coarse), wronskian_residual(pack))
        return [
            near(f"profile.q_limit[d={d}]", float(pack.Q.values[-1]), math.pi / 2, 1e-3),
            near(f"profile.tail_exponent[d={d}]", pack.measured_gamma, gamma, 0.01 * gamma),
            near(f"profile.lamq_tail[d={d}]", lamq_tail_exponent(pack), -gamma, 0.01 * gamma),
            holds(f"profile.lamq_positive[d={d}]", bool(np.all(pack.LamQ.values > 0.0)),
                  min=float(np.min(pack.LamQ.values))),
            holds(f"profile.wronskian_order[d={d}]", ok, order=order,
                  residual=wronskian_residual(pack)),
        ]

    # -- operator ------------------------------------------------------------

    def _operator_context(self, d: int, n: Optional[int] = None) -> OperatorContext:
        cfg = self.operator_config
        return make_context(self.pack(d, cfg.y_min, cfg.y_max, n or cfg.n))

    def _lamq_residual(self, ctx: OperatorContext) -> float:
        lamq = ctx.pack.LamQ
        plain = GridFunction(lamq.grid, lamq.values, lamq.origin_exponent, lamq.tail_exponent)
        residual = apply_L(ctx, plain).values
        mask = ctx.grid.interior(6, y_hi=ctx.grid.y_max / 10.0)
        return relative_residual(residual, operator_scale(ctx, plain), mask)

    def _bump_pairs(self, ctx: OperatorContext) -> List[Tuple[GridFunction, GridFunction]]:
        """
        Seeded pairs of Gaussian bumps in log y, each scaled by y^{-(d-1)/2}.

        The scaling keeps the mass of u w y^{d-1} between the two centers, so
        the pairing integrands vanish at both ends of the grid.
        """
        rng = np.random.default_rng(self.seed)
        x = ctx.grid.x
        balance = -0.5 * (ctx.d - 1) * x
        pairs = []
        for _ in range(ADJOINT_PAIRS):
            bumps = []
            for _ in range(2):
                center, width = rng.uniform(-1.0, 2.0), rng.uniform(0.6, 1.0)
                vals = np.exp(-0.5 * ((x - center) / width) ** 2 + balance)
                bumps.append(GridFunction(ctx.grid, vals, 1, 0.0))
            pairs.append((bumps[0], bumps[1]))
        return pairs

    def _pairing_defect(self, ctx: OperatorContext, op: Operator, adjoint: Operator) -> float:
        """Largest |<op u, w> - <u, adjoint w>| / (|op u| |w| + |u| |adjoint w|) over the pairs."""
        worst = 0.0
        for u, w in self._bump_pairs(ctx):
            op_u, adj_w = op(ctx, u), adjoint(ctx, w)
            left = inner_product(op_u, w)
            right = inner_product(u, adj_w)
            scale = _norm(op_u) * _norm(w) + _norm(u) * _norm(adj_w)
            if scale > 0.0:
                worst = max(worst, abs(left - right) / scale)
        return worst

    def adjointness_defect(self, ctx: OperatorContext) -> float:
        """Defect of <A u, w> = <u, A* w>."""
        return self._pairing_defect(ctx, apply_A, apply_Astar)

    def symmetry_defect(self, ctx: OperatorContext) -> float:
        """Defect of <L u, w> = <u, L w>."""
        return self._pairing_defect(ctx, apply_L, apply_L)

    def operator_artifacts(self, d: int) -> OperatorArtifacts:
        """T_k, Phi_M over the M sweep, and the sampled coercivity ratio, cached per d."""
        if d in self._operator:
            return self._operator[d]
        cfg = self.operator_config
        ctx = self._operator_context(d)
        tks = generate_Tk(ctx, cfg.K)
        L = min(cfg.L, tks.K)
        phis = {factor * cfg.M: build_PhiM(ctx, tks, factor * cfg.M, L) for factor in PHI_M_FACTORS}
        k_coercive = cfg.k_coercivity if cfg.k_coercivity is not None else ctx.pack.hbar + 1
        ratio = coercivity_probe(ctx, phis[cfg.M], k_coercive, cfg.samples, self.seed)
        self._operator[d] = OperatorArtifacts(ctx, tks, phis, k_coercive, ratio)
        return self._operator[d]

    def operator_checks(self, d: int) -> List[CheckResult]:
        cfg = self.operator_config
        art = self.operator_artifacts(d)
        ctx, tks = art.ctx, art.tks
        coarse = self._operator_context(d, cfg.n // 2)
        checks: List[CheckResult] = []
        ok, order = refinement_order(self._lamq_residual(coarse), self._lamq_residual(ctx))
        checks.append(holds(f"operator.lamq_kernel_order[d={d}]", ok, order=order))
        checks.append(at_most(f"operator.adjointness[d={d}]", self.adjointness_defect(ctx),
                              ADJOINT_TOL, pairs=ADJOINT_PAIRS))
        checks.append(at_most(f"operator.symmetry[d={d}]", self.symmetry_defect(ctx),
                              ADJOINT_TOL, pairs=ADJOINT_PAIRS))

        gamma = ctx.pack.gamma
        for k in range(1, min(cfg.K, 3) + 1):
            checks.append(at_most(f"operator.tk_round_trip[d={d},k={k}]", tks.round_trip[k - 1],
                                  TK_ROUND_TRIP_TOL))
            expected = 2.0 * k - gamma
            checks.append(near(f"operator.tk_tail[d={d},k={k}]", tks.measured_tail[k],
                               expected, TK_TAIL_TOL * max(abs(expected), 1.0)))

        for M, phi in art.phis.items():
            worst = max(orthogonality_defects(phi, tks))
            checks.append(at_most(f"operator.phi_orthogonality[d={d},M={M:g}]", worst,
                                  PHI_DEFECT_TOL))
        phi = art.phis[cfg.M]
        defect = float(np.max(np.abs(identity_matrix(phi, tks) - expected_identity(phi.L))))
        checks.append(at_most(f"operator.phi_identity[d={d},M={cfg.M:g}]", defect, IDENTITY_TOL))

        radii = sorted(art.phis)
        for k in range(1, phi.L + 1):
            fit = fit_power_law(radii, [abs(art.phis[M].c[k]) for M in radii])
            checks.append(at_most(f"operator.phi_coefficient_growth[d={d},k={k}]", fit.exponent,
                                  2.0 * k + PHI_GROWTH_SLACK, radii=radii))

        checks.append(holds(f"operator.coercivity[d={d}]", art.coercivity > 0.0,
                            value=art.coercivity, k=art.k_coercivity, samples=cfg.samples))
        return checks

    # -- approximate profile ---------------------------------------------------

    def qb_artifacts(self, d: int) -> QbArtifacts:
        """Corrections for the configured L and, at d = 8, the residual scaling sweep."""
        if d in self._qb:
            return self._qb[d]
        cfg = self.qb_config
        ctx = make_context(self.pack(d, cfg.y_min, cfg.y_max, cfg.n))
        tks = generate_Tk(ctx, cfg.L)
        corrections = build_Sk(ctx, tks, cfg.L)
        scaling = None
        if d == SCALING_DIMENSION:
            system = make_mode_system(d, cfg.ell, cfg.L)
            scaling = residual_scaling(ctx, tks, corrections, system, cfg.b1_window,
                                       cfg.scaling_eta, cfg.M)
        self._qb[d] = QbArtifacts(ctx, tks, corrections, scaling)
        return self._qb[d]

    def qb_checks(self, d: int) -> List[CheckResult]:
        cfg = self.qb_config
        art = self.qb_artifacts(d)
        rng = np.random.default_rng(self.seed)
        b = cfg.b1 ** np.arange(1, cfg.L + 1) * rng.uniform(0.5, 1.0, cfg.L)
        checks = [at_most(f"qb.homogeneity[d={d}]", homogeneity_check(art.corrections, b, 2.0),
                          HOMOGENEITY_TOL)]
        if art.scaling is not None:
            fit = art.scaling.weighted[0]
            checks.append(near(f"qb.residual_scaling[d={d}]", fit.exponent,
                               art.scaling.expected_weighted[0], RESIDUAL_EXPONENT_TOL,
                               residual=fit.residual))
        return checks

    # -- b-system ----------------------------------------------------------------

    def _regimes(self, d: int) -> List[int]:
        gamma = gamma_exponent(d)
        return [ell for ell in (1, 2, 3) if 2 * ell > gamma]

    def _rule(self) -> Callable[[float, int, int], np.ndarray]:
        return FAULTS[self.fault] if self.fault else explicit_coefficients

    def _explicit_checks(self, d: int, ell: int) -> List[CheckResult]:
        system = make_mode_system(d, ell, max(ell, self.modes_config.L), self._rule())
        lin = build_Al(system.gamma, ell)
        expected = closed_form_spectrum(system.gamma, ell)
        return [
            at_most(f"modes.explicit_solution[d={d},ell={ell}]",
                    explicit_residual(system, self.modes_config.s0), EXPLICIT_TOL),
            at_most(f"modes.spectrum[d={d},ell={ell}]",
                    float(np.max(np.abs(np.sort(lin.eigenvalues.real) - expected))), SPECTRUM_TOL),
            near(f"modes.unstable_count[d={d},ell={ell}]", lin.unstable_count, ell - 1, 0.0),
        ]

    def _rate_checks(self, d: int, ell: int) -> List[CheckResult]:
        cfg = self.modes_config
        system = make_mode_system(d, ell, ell, self._rule())
        traj = integrate_system(system, explicit_solution(system, cfg.s0), cfg.s0,
                                cfg.s0 * 10.0 ** cfg.decades)
        t_exp = traj.t_fit.exponent if traj.t_fit is not None else float("nan")
        s_exp = traj.s_fit.exponent if traj.s_fit is not None else float("nan")
        target, s_target = system.t_exponent(), system.s_exponent()
        return [
            near(f"modes.t_rate[d={d},ell={ell}]", t_exp, target, RATE_TOL * target,
                 outcome=traj.outcome),
            near(f"modes.s_rate[d={d},ell={ell}]", s_exp, s_target, RATE_TOL * abs(s_target),
                 outcome=traj.outcome),
        ]

    def _instability_checks(self, d: int) -> List[CheckResult]:
        cfg = self.modes_config
        system = make_mode_system(d, 2, 2, self._rule())
        result = instability_experiment(system, cfg.eps, self.seed, cfg.s0)
        worst = max(abs(m["mean_fitted"] - m["expected"]) for m in result["modes"])
        return [at_most(f"modes.instability[d={d}]", worst, INSTABILITY_TOL)]

    def modes_checks(self, d: int) -> List[CheckResult]:
        """Explicit solution, spectrum, rates and instability; each part fails on its own."""
        regimes = self._regimes(d)
        checks: List[CheckResult] = []
        for ell in regimes:
            checks.extend(self._guarded(f"modes.explicit[d={d},ell={ell}]",
                                        lambda ell=ell: self._explicit_checks(d, ell)))
        checks.extend(self._guarded(f"modes.rates[d={d}]",
                                    lambda: self._rate_checks(d, regimes[0])))
        if 2 in regimes:
            checks.extend(self._guarded(f"modes.instability[d={d}]",
                                        lambda: self._instability_checks(d)))
        return checks

    # -- driver ------------------------------------------------------------------

    def dimension_checks(self, d: int) -> List[CheckResult]:
        results: List[CheckResult] = []
        for group, fn in (("profile", self.profile_checks), ("operator", self.operator_checks),
                          ("qb", self.qb_checks), ("modes", self.modes_checks)):
            group_results = self._guarded(f"{group}[d={d}]", lambda: fn(d))
            failed = [r.name for r in group_results if not r.passed]
            self.logger.info("%s checks for d=%d: %d run, %d failed", group, d,
                             len(group_results), len(failed))
            results.extend(group_results)
        return results

    def run(self, dimensions: Sequence[int], threads: int = 1) -> VerificationReport:
        """
        Run every check group for each dimension.

        Args:
            dimensions: Space dimensions to verify (each >= 7)
            threads: Dimensions verified concurrently

        Returns:
            VerificationReport: all results, failing ones included
        """
        dims = [int(d) for d in dimensions]
        if not dims:
            raise UsageError("verify-all needs at least one dimension")
        if any(d < 7 for d in dims):
            raise UsageError("dimensions must be >= 7", dimensions=dims)
        report = VerificationReport(dimensions=dims, fault=self.fault)
        report.checks.extend(self._guarded("profile.gamma", self.gamma_checks))
        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            for results in pool.map(self.dimension_checks, dims):
                report.checks.extend(results)
        return report
