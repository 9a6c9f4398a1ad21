"""
Randomized verification suites.

Every check draws its instances from one seeded generator and records how many
instances were examined, how many failed, the worst slack observed and the first
failing witness. A negative slack means the property was violated.
"""

import logging
import math
import time
import typing as t

import numpy as np
from pydantic import BaseModel

from lionskit.derivation import (
    b_orthogonal,
    induced_contraction,
    is_maximal_admissible,
    random_contraction,
    random_instance,
    spectral_boundary_structure,
    z_phi,
)
from lionskit.derivation.sample import CONTRACTION_KINDS
from lionskit.evolution import (
    convergence_study,
    dense_derivation_solve,
    discrete_ibp_check,
    discretize,
    preset_problem,
    propagator_contraction,
    random_problem,
    solve_all_at_once,
    solve_shooting,
)
from lionskit.evolution.model import EvolutionProblem, GelfandTriple
from lionskit.evolution.presets import ZeroForcing, constant_form
from lionskit.evolution.solver import discrete_stability
from lionskit.exceptions import ArgumentError, LionsKitError
from lionskit.hilbert import InnerSpace, LinearMap, principal_angles
from lionskit.model import SuiteCounts, Tolerances
from lionskit.rtl import (
    check_dissipative_dual,
    perturbation_beta,
    random_coercive,
    random_dissipative,
    verify_operator_rtl,
    verify_perturbation,
)
from lionskit.util import make_rng

logger = logging.getLogger(__name__)

SUITE_NAMES = ("rtl", "derivation", "evolution")
RESOLVENT_TS = (0.1, 1.0, 10.0)
CONVERGENCE_STEPS = (16, 32, 64, 128, 256, 512)


def jsonable(value: t.Any) -> t.Any:
    """Witnesses as plain JSON: arrays become lists, complex numbers ``[re, im]`` pairs."""
    if isinstance(value, np.ndarray):
        return [jsonable(item) for item in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [jsonable(item) for item in value]
    if isinstance(value, dict):
        return {str(key): jsonable(item) for key, item in value.items()}
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


class InvariantResult(BaseModel):
    name: str
    passed: bool
    count: int
    failures: int
    worst_slack: t.Optional[float] = None
    witness: t.Any = None
    elapsed: t.Optional[float] = None


class SuiteReport(BaseModel):
    suite: str
    seed: int
    results: t.List[InvariantResult] = []
    elapsed: t.Optional[float] = None

    @property
    def passed(self) -> bool:
        return all(result.passed for result in self.results)

    @property
    def failed(self) -> t.List[InvariantResult]:
        return [result for result in self.results if not result.passed]


class Tally:
    """
    Accumulates the outcome of one invariant over many instances.
    """

    def __init__(self, name: str):
        self.name = name
        self.count = 0
        self.failures = 0
        self.worst_slack: t.Optional[float] = None
        self.witness: t.Any = None
        self.started = time.perf_counter()

    def record(self, slack: float, passed: t.Optional[bool] = None, witness: t.Any = None, count: int = 1):
        passed = slack >= 0 if passed is None else passed
        self.count += count
        if math.isfinite(slack):
            self.worst_slack = slack if self.worst_slack is None else min(self.worst_slack, slack)
        if not passed:
            self.failures += 1
            if self.witness is None:
                self.witness = jsonable(witness)

    def error(self, ex: Exception, context: t.Any = None):
        self.count += 1
        self.failures += 1
        if self.witness is None:
            self.witness = {"error": ex.__class__.__name__, "message": str(ex), "context": jsonable(context)}

    def result(self, timing: bool) -> InvariantResult:
        elapsed = time.perf_counter() - self.started
        result = InvariantResult(
            name=self.name,
            passed=self.failures == 0 and self.count > 0,
            count=self.count,
            failures=self.failures,
            worst_slack=self.worst_slack,
            witness=self.witness,
            elapsed=elapsed if timing else None,
        )
        level = logging.INFO if result.passed else logging.ERROR
        logger.log(
            level,
            f"{self.name}: {'passed' if result.passed else 'FAILED'} "
            f"({self.count - self.failures}/{self.count}, worst slack {self.worst_slack}, {elapsed:.2f}s)",
        )
        return result


def _random_space(rng: np.random.Generator, dim: int, complex_: bool) -> InnerSpace:
    return InnerSpace.random(rng, dim, complex_=complex_)


def check_operator_rtl(rng, tol: Tolerances, counts: SuiteCounts) -> Tally:
    """
    Bounded-below operators have minimal-norm witnesses within ``1 / beta``; operators
    without a lower bound expose a functional without any witness.
    """
    tally = Tally("operator-representation")
    for index in range(counts.operators):
        complex_ = bool(index % 2)
        domain_dim = int(rng.integers(1, 9))
        codomain_dim = int(rng.integers(domain_dim, 13))
        domain = _random_space(rng, domain_dim, complex_)
        codomain = _random_space(rng, codomain_dim, complex_)
        op = LinearMap.random(rng, domain, codomain)
        if index % 10 == 9 and domain_dim > 1:
            # Rank-deficient: drop the last singular direction in whitened coordinates.
            u, s, vh = np.linalg.svd(op.whitened(), full_matrices=False)
            s[-1] = 0.0
            op = LinearMap.from_whitened(domain, codomain, (u * s) @ vh)
        try:
            report = verify_operator_rtl(op, trials=counts.functionals, seed=rng, tol=tol.rank)
        except LionsKitError as ex:
            tally.error(ex, {"index": index})
            continue
        if report.bounded:
            slack = 1.0 + tol.rank - report.normalized_max_ratio
            witness = {"index": index, "beta": report.beta, "max_ratio": report.max_ratio}
        else:
            slack = (report.unreachable_residual or 0.0) - 0.5
            witness = {"index": index, "kernel_direction": report.kernel_direction}
        tally.record(slack, passed=report.passed and slack >= 0, witness=witness)
    return tally


def check_dissipative_dual_agreement(rng, tol: Tolerances, counts: SuiteCounts) -> Tally:
    """
    Direct dissipativity and the dual resolvent bound agree, for dissipative and
    non-dissipative operators alike.
    """
    tally = Tally("dissipativity-duality")
    for index in range(counts.operators):
        complex_ = bool(index % 2)
        space = _random_space(rng, int(rng.integers(1, 11)), complex_)
        op = random_dissipative(rng, space, rank=int(rng.integers(0, space.dim + 1)))
        if index % 3 == 2:
            op = op + LinearMap.identity(space) * float(rng.uniform(0.05, 1.0))
        try:
            report = check_dissipative_dual(op, RESOLVENT_TS, tol=tol.dissipativity)
        except LionsKitError as ex:
            tally.error(ex, {"index": index})
            continue
        if report.dissipative:
            slack = min(sample.gain for sample in report.samples) - 1.0 + tol.dissipativity * max(RESOLVENT_TS)
        else:
            slack = 1.0 - min(sample.gain for sample in report.samples)
        tally.record(slack, passed=report.agree, witness={"index": index, "margin": report.margin})
    return tally


def check_perturbation(rng, tol: Tolerances, counts: SuiteCounts) -> Tally:
    """
    ``||(A - B) v||^2 >= beta^2 (||v||^2 + ||B v||^2)`` with the explicit constant,
    including purely Hermitian ``A``, plus the hand-checked value ``beta^2 = 1/3``.
    """
    tally = Tally("perturbation-constant")
    plane = InnerSpace.euclidean(2)
    reference = perturbation_beta(LinearMap(plane, plane, np.array([[1.0, 1.0], [-1.0, 1.0]])))
    gap = abs(reference.beta_squared - 1.0 / 3.0)
    tally.record(tol.contraction - gap, witness={"beta_squared": reference.beta_squared})

    for index in range(counts.perturbation_pairs):
        complex_ = bool(index % 2)
        space = _random_space(rng, int(rng.integers(1, 11)), complex_)
        skew = 0.0 if index % 5 == 0 else float(rng.uniform(0.1, 3.0))
        op_a = random_coercive(rng, space, alpha=float(rng.uniform(0.1, 2.0)), skew=skew)
        op_b = random_dissipative(rng, space)
        try:
            beta = perturbation_beta(op_a).beta
            report = verify_perturbation(
                op_a, op_b, beta, trials=counts.perturbation_vectors, seed=rng, tol=tol.dissipativity
            )
        except LionsKitError as ex:
            tally.error(ex, {"index": index})
            continue
        slack = min(report.worst_slack, report.worst_sum_slack) + tol.dissipativity
        tally.record(slack, witness={"index": index, "beta": beta, "violation": report.violation})
    return tally


def _random_structure(rng: np.random.Generator, index: int):
    complex_ = bool(index % 2)
    boundary_dim = int(rng.integers(1, 4))
    initial_rank = final_rank = boundary_dim
    kind = CONTRACTION_KINDS[index % len(CONTRACTION_KINDS)]
    if kind == "rank-deficient":
        initial_rank = int(rng.integers(1, boundary_dim + 1))
        final_rank = int(rng.integers(1, boundary_dim + 1))
    instance, bs = random_instance(
        rng,
        test_dim=int(rng.integers(1, 4)),
        boundary_dim=boundary_dim,
        initial_rank=initial_rank,
        final_rank=final_rank,
        complex_=complex_,
    )
    return instance, bs, random_contraction(rng, bs, kind=kind)


def check_b_orthogonal(rng, tol: Tolerances, counts: SuiteCounts) -> Tally:
    """
    The ``b``-orthogonal of ``Z_Phi`` is ``Z_Phi*``, and taking it twice returns ``Z_Phi``.
    For the spectral structure of the same instance, the ``b``-orthogonal of ``ker B1``
    is ``ker B0``.
    """
    tally = Tally("b-orthogonal-duality")
    for index in range(counts.structures):
        try:
            instance, bs, cbc = _random_structure(rng, index)
            subspace = z_phi(cbc)
            orthogonal = b_orthogonal(bs, subspace)
            adjoint_space = z_phi(cbc.adjoint())
            twice = b_orthogonal(bs, orthogonal)
            spectral = spectral_boundary_structure(instance, tol=tol.eigen_split)
            spectral_orthogonal = b_orthogonal(spectral, spectral.ker_B1)
        except LionsKitError as ex:
            tally.error(ex, {"index": index})
            continue
        dims = [orthogonal.dim, adjoint_space.dim, twice.dim, spectral_orthogonal.dim, spectral.ker_B0.dim]
        if dims[0] != dims[1] or dims[2] != subspace.dim or dims[3] != dims[4]:
            tally.record(-1.0, witness={"index": index, "dims": dims})
            continue
        largest = max(
            float(principal_angles(orthogonal, adjoint_space).max(initial=0.0)),
            float(principal_angles(twice, subspace).max(initial=0.0)),
            float(principal_angles(spectral_orthogonal, spectral.ker_B0).max(initial=0.0)),
        )
        tally.record(tol.subspace - largest, witness={"index": index, "largest_angle": largest})
    return tally


def check_maximality(rng, tol: Tolerances, counts: SuiteCounts) -> Tally:
    """
    Every extension of ``Z_Phi`` by one more direction contains a vector with ``b(v, v) > 0``.
    """
    tally = Tally("maximal-admissibility")
    for index in range(counts.maximality_instances):
        try:
            instance, bs, cbc = _random_structure(rng, index)
            certificate = is_maximal_admissible(
                bs,
                z_phi(cbc),
                instance.R,
                candidates=counts.maximality_candidates,
                seed=rng,
                tol=tol.maximality,
                form_tol=tol.form_sign,
            )
        except LionsKitError as ex:
            tally.error(ex, {"index": index})
            continue
        slack = certificate.smallest_extension_value - tol.maximality if certificate.candidates else 0.0
        tally.record(
            slack,
            passed=bool(certificate) or certificate.candidates == 0,
            witness={"index": index, "escaping_candidate": certificate.escaping_candidate},
        )
    return tally


def check_induced_contraction(rng, tol: Tolerances, counts: SuiteCounts) -> Tally:
    """
    The contraction induced by ``Z_Psi`` is ``Psi`` again.
    """
    tally = Tally("induced-contraction")
    for index in range(counts.contractions):
        try:
            _, bs, cbc = _random_structure(rng, index)
            induced = induced_contraction(bs, z_phi(cbc), form_tol=tol.form_sign)
        except LionsKitError as ex:
            tally.error(ex, {"index": index})
            continue
        gap = (induced.effective - cbc.effective).operator_norm()
        tally.record(tol.induced_gap - gap, witness={"index": index, "gap": gap})
    return tally


def check_discrete_ibp(rng, tol: Tolerances, counts: SuiteCounts) -> Tally:
    """
    Discrete integration by parts holds exactly on random grid functions.
    """
    tally = Tally("discrete-integration-by-parts")
    batches = max(1, min(10, counts.ibp_pairs))
    per_batch = max(1, counts.ibp_pairs // batches)
    for index in range(batches):
        n = int(rng.integers(1, 6))
        steps = int(rng.integers(2, 201))
        try:
            problem = random_problem(rng, n)
            report = discrete_ibp_check(discretize(problem, steps), trials=per_batch, seed=rng, tol=tol.ibp)
        except LionsKitError as ex:
            tally.error(ex, {"batch": index})
            continue
        tally.record(
            tol.ibp - report.max_residual,
            witness={"n": n, "N": steps, "residual": report.max_residual},
            count=report.trials,
        )
    return tally


def _order_slack(orders: t.Sequence[float], expected: float, width: float) -> float:
    if not orders:
        return -math.inf
    return width - max(abs(order - expected) for order in orders)


def check_convergence(tol: Tolerances, preset: str, asymptotic: int) -> Tally:
    """
    Observed orders of the theta-scheme: one for implicit Euler, two for the midpoint rule.
    Only the last ``asymptotic`` orders of the sweep are checked.
    """
    tally = Tally(f"convergence-{preset}")
    try:
        problem = preset_problem(preset)
        table = convergence_study(problem, CONVERGENCE_STEPS, thetas=(1.0, 0.5))
    except LionsKitError as ex:
        tally.error(ex, {"preset": preset})
        return tally
    for theta, expected, width in ((1.0, 1.0, 0.15), (0.5, 2.0, 0.2)):
        orders = table.orders(theta)[-asymptotic:]
        tally.record(
            _order_slack(orders, expected, width),
            witness={"theta": theta, "orders": orders, "errors": table.errors(theta)},
        )
    if preset == "forced-periodic":
        solution = solve_all_at_once(problem, CONVERGENCE_STEPS[-1], theta=0.5, diagnostics=False)
        residual = float(abs(solution.initial - solution.final).max())
        tally.record(1e-12 - residual, witness={"boundary_residual": residual})
    return tally


def _relative_gap(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.abs(a - b).max() / max(1.0, float(np.abs(b).max())))


def check_cross_solver(rng, tol: Tolerances, counts: SuiteCounts) -> Tally:
    """
    Shooting, the sparse all-at-once system and the dense derivation problem agree.
    """
    tally = Tally("cross-solver-agreement")
    for index in range(counts.problems):
        n = int(rng.integers(1, 5))
        steps = int(rng.choice([4, 8, 16]))
        theta = float(rng.choice([0.5, 1.0]))
        try:
            problem = random_problem(rng, n)
            reference = solve_all_at_once(problem, steps, theta, diagnostics=False)
            shooting = solve_shooting(problem, steps, theta, diagnostics=False)
            dense = dense_derivation_solve(
                problem,
                steps,
                theta,
                boundary_tol=tol.boundary_residual,
                residual_tol=tol.solver_residual,
                wdp_tol=tol.wdp_residual,
            )
        except LionsKitError as ex:
            tally.error(ex, {"index": index})
            continue
        gap = max(_relative_gap(shooting.values, reference.values), _relative_gap(dense.values, reference.values))
        tally.record(tol.agreement - gap, witness={"index": index, "n": n, "N": steps, "theta": theta, "gap": gap})
    return tally


def check_stability(rng, tol: Tolerances, counts: SuiteCounts) -> Tally:
    """
    With ``y0 = 0`` the solution obeys ``||u||_W <= ||f||_{V'} / beta'`` and ``beta' > 0``.
    """
    tally = Tally("stability-bound")
    for index in range(counts.problems):
        n = int(rng.integers(1, 4))
        steps = int(rng.choice([4, 8, 16]))
        theta = float(rng.choice([0.5, 1.0]))
        try:
            problem = random_problem(rng, n, zero_datum=True)
            disc = discretize(problem, steps, theta)
            beta = discrete_stability(disc)
            solution = solve_all_at_once(problem, steps, theta, diagnostics=False)
        except LionsKitError as ex:
            tally.error(ex, {"index": index})
            continue
        bound = disc.load_norm() / beta
        norm = disc.w_norm(solution.flat())
        slack = (bound * (1.0 + tol.agreement) - norm) / max(1.0, bound)
        tally.record(slack, passed=beta > 0 and slack >= 0, witness={"index": index, "beta": beta, "norm": norm})
    return tally


def _scalar_problem(coefficient: float) -> EvolutionProblem:
    triple = GelfandTriple.euclidean(1)
    return EvolutionProblem(
        triple=triple,
        form=constant_form([[coefficient]], triple),
        forcing=ZeroForcing(1),
        horizon=1.0,
        phi=np.zeros((1, 1)),
        y0=np.array([1.0]),
        name=f"scalar-{coefficient:g}",
    )


def check_propagator(tol: Tolerances) -> Tally:
    """
    ``||S_h||_H < 1`` on coercive presets, and ``(1 + 1/N)^-N`` for the scalar decay.
    """
    tally = Tally("propagator-contraction")
    for name in ("decay", "forced-periodic", "rotation", "constant"):
        for theta in (0.5, 1.0):
            try:
                norm = propagator_contraction(preset_problem(name), 32, theta, strict=True)
            except LionsKitError as ex:
                tally.error(ex, {"preset": name, "theta": theta})
                continue
            tally.record(1.0 - norm, passed=norm < 1.0, witness={"preset": name, "theta": theta, "norm": norm})
    scalar = _scalar_problem(1.0)
    for steps in (4, 16, 64, 256):
        expected = (1.0 + 1.0 / steps) ** (-steps)
        try:
            norm = propagator_contraction(scalar, steps, 1.0, strict=True)
        except LionsKitError as ex:
            tally.error(ex, {"N": steps})
            continue
        tally.record(tol.contraction - abs(norm - expected), witness={"N": steps, "norm": norm, "expected": expected})
    return tally


def rtl_suite(rng, tol: Tolerances, counts: SuiteCounts) -> t.List[Tally]:
    return [
        check_operator_rtl(rng, tol, counts),
        check_dissipative_dual_agreement(rng, tol, counts),
        check_perturbation(rng, tol, counts),
    ]


def derivation_suite(rng, tol: Tolerances, counts: SuiteCounts) -> t.List[Tally]:
    return [
        check_b_orthogonal(rng, tol, counts),
        check_maximality(rng, tol, counts),
        check_induced_contraction(rng, tol, counts),
    ]


def evolution_suite(rng, tol: Tolerances, counts: SuiteCounts) -> t.List[Tally]:
    return [
        check_discrete_ibp(rng, tol, counts),
        check_convergence(tol, "decay", asymptotic=5),
        check_convergence(tol, "forced-periodic", asymptotic=3),
        check_cross_solver(rng, tol, counts),
        check_stability(rng, tol, counts),
        check_propagator(tol),
    ]


SUITES: t.Dict[str, t.Callable[..., t.List[Tally]]] = {
    "rtl": rtl_suite,
    "derivation": derivation_suite,
    "evolution": evolution_suite,
}


def run_suite(
    name: str,
    seed: int = 7,
    tolerances: t.Optional[Tolerances] = None,
    counts: t.Optional[SuiteCounts] = None,
    timing: bool = False,
) -> SuiteReport:
    """
    Run one suite, or all of them, with a fixed seed.
    """
    if name != "all" and name not in SUITES:
        raise ArgumentError(f"Unknown suite: {name}")
    tolerances = tolerances or Tolerances()
    counts = counts or SuiteCounts()
    names = SUITE_NAMES if name == "all" else (name,)
    rng = make_rng(seed)
    started = time.perf_counter()
    report = SuiteReport(suite=name, seed=seed)
    for suite in names:
        logger.info(f"Running suite '{suite}' with seed {seed}")
        for tally in SUITES[suite](rng, tolerances, counts):
            report.results.append(tally.result(timing))
    elapsed = time.perf_counter() - started
    logger.info(f"Suite '{name}' finished in {elapsed:.2f}s: {len(report.failed)} of {len(report.results)} failed")
    if timing:
        report.elapsed = elapsed
    return report

