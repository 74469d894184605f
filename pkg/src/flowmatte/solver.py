"""Sparse system assembly and the alpha solves.

The three affinity flows combine into one positive semidefinite matrix; the
known-to-unknown flow and the trimap enter through diagonal terms.  Two
solve paths exist: the full path uses the known-to-unknown estimates with
their confidences, the reduced path drops them (for highly transparent
objects where those estimates mislead).  A third entry point regularizes an
externally produced matte with pixel-wise loyalty weights.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import cg

from .core import (FOREGROUND, Params, SolverError, UNKNOWN, check_same_size,
                   region_masks)
from .flows import (KtoUFlow, build_cm_flow, build_intra_u_flow,
                    build_ktou_flow, build_local_flow)
from .trimming import (TransparencyDecision, classify_transparency, edge_trim,
                       patch_trim)


@dataclass
class SolveReport:
    """Iteration count, achieved relative residual, and wall time."""

    iterations: int
    relative_residual: float
    wall_time: float


def affinity_laplacian(graph: sparse.spmatrix) -> sparse.csr_matrix:
    """Graph Laplacian ``diag(row sums) - W`` of an affinity matrix."""
    graph = graph.tocsr()
    degrees = np.asarray(graph.sum(axis=1)).ravel()
    return (sparse.diags(degrees) - graph).tocsr()


def assemble_flow_laplacian(cm_flow: sparse.spmatrix,
                            intra_u_flow: sparse.spmatrix,
                            local_flow: sparse.spmatrix,
                            params: Params) -> sparse.csr_matrix:
    """Combine the three affinity flows into the quadratic-form matrix.

    The color-mixture term enters through its normal equations (its graph is
    one-directional), the intra-unknown and local terms as weighted graph
    Laplacians.  The result is symmetric positive semidefinite.
    """
    n = cm_flow.shape[0]
    for graph in (intra_u_flow, local_flow):
        if graph.shape != (n, n):
            raise ValueError("flow matrices must share one shape")
    cm_lap = affinity_laplacian(cm_flow)
    combined = (cm_lap.T @ cm_lap
                + params.uu_strength * affinity_laplacian(intra_u_flow)
                + params.local_strength * affinity_laplacian(local_flow))
    return combined.tocsr()


def solve_spd(system: sparse.spmatrix, rhs: np.ndarray, start: np.ndarray,
              params: Params):
    """Diagonally preconditioned conjugate gradients.

    Returns ``(solution, SolveReport)``; raises :class:`SolverError` when
    the tolerance is not met within the iteration budget.
    """
    system = system.tocsr()
    rhs = np.asarray(rhs, dtype=np.float64)
    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm == 0.0:
        # The system matrix is positive definite in every caller, so a zero
        # right-hand side has the zero solution.
        return np.zeros_like(rhs), SolveReport(0, 0.0, 0.0)
    diag = system.diagonal()
    inv_diag = np.where(diag > 0, 1.0 / np.where(diag > 0, diag, 1.0), 1.0)
    precond = sparse.diags(inv_diag)
    iterations = 0

    def count(_):
        nonlocal iterations
        iterations += 1

    begin = time.perf_counter()
    solution, info = cg(system, rhs, x0=np.asarray(start, dtype=np.float64),
                        rtol=params.cg_tol, atol=0.0,
                        maxiter=params.cg_max_iter, M=precond, callback=count)
    elapsed = time.perf_counter() - begin
    residual = float(np.linalg.norm(rhs - system @ solution)) / rhs_norm
    report = SolveReport(iterations, residual, elapsed)
    if info != 0:
        raise SolverError(
            f"conjugate gradients stopped after {iterations} iterations "
            f"at relative residual {residual:.3e} "
            f"(requested {params.cg_tol:.1e})", report)
    return solution, report


def _known_alpha(trimap: np.ndarray) -> np.ndarray:
    return (trimap == FOREGROUND).ravel().astype(np.float64)


def _known_indicator(trimap: np.ndarray) -> np.ndarray:
    return (trimap != UNKNOWN).ravel().astype(np.float64)


def solve_e1(flow_laplacian: sparse.spmatrix, ktou: KtoUFlow,
             trimap: np.ndarray, params: Params):
    """Full solve: flows plus confidence-weighted known-to-unknown estimates.

    Returns ``(matte, SolveReport)`` with the matte clipped to [0, 1].
    """
    n = flow_laplacian.shape[0]
    known = _known_indicator(trimap)
    estimate = _known_alpha(trimap)
    confidence = np.zeros(n)
    confidence[ktou.pixels] = ktou.confidence
    estimate[ktou.pixels] = ktou.fg_weight
    weight = params.known_weight * known + params.ku_strength * confidence
    system = flow_laplacian + sparse.diags(weight)
    solution, report = solve_spd(system, weight * estimate, estimate, params)
    return np.clip(solution, 0.0, 1.0).reshape(trimap.shape), report


def solve_e2(flow_laplacian: sparse.spmatrix, trimap: np.ndarray,
             params: Params):
    """Reduced solve: flows and trimap constraints only."""
    known = _known_indicator(trimap)
    alpha_known = _known_alpha(trimap)
    weight = params.known_weight * known
    system = flow_laplacian + sparse.diags(weight)
    start = alpha_known + 0.5 * (1.0 - known)
    solution, report = solve_spd(system, weight * alpha_known, start, params)
    return np.clip(solution, 0.0, 1.0).reshape(trimap.shape), report


def regularize_matte(flow_laplacian: sparse.spmatrix, trimap: np.ndarray,
                     alpha_hat: np.ndarray, loyalty: np.ndarray,
                     params: Params):
    """Smooth an external alpha estimate against the flows.

    ``alpha_hat`` is the estimate and ``loyalty`` its pixel-wise trust in
    [0, 1]; both span the whole image but only unknown-region values enter
    the loyalty term.  With zero loyalty this reduces exactly to the
    reduced solve.
    """
    check_same_size(alpha_hat, trimap)
    check_same_size(loyalty, trimap)
    loyalty = np.asarray(loyalty, dtype=np.float64)
    if loyalty.min() < 0.0 or loyalty.max() > 1.0:
        raise ValueError("loyalty weights must lie in [0, 1]")
    known = _known_indicator(trimap)
    alpha_known = _known_alpha(trimap)
    unknown = 1.0 - known
    trust = params.loyalty_strength * loyalty.ravel() * unknown
    weight = params.known_weight * known + trust
    system = flow_laplacian + sparse.diags(weight)
    rhs = params.known_weight * known * alpha_known \
        + trust * np.asarray(alpha_hat, dtype=np.float64).ravel()
    start = alpha_known + 0.5 * unknown
    solution, report = solve_spd(system, rhs, start, params)
    return np.clip(solution, 0.0, 1.0).reshape(trimap.shape), report


def matting_energy(alpha: np.ndarray, trimap: np.ndarray,
                   cm_flow: sparse.spmatrix, intra_u_flow: sparse.spmatrix,
                   local_flow: sparse.spmatrix, ktou: KtoUFlow | None,
                   params: Params) -> dict:
    """Evaluate the terms of the matting objective at a given alpha.

    Returns the individual terms plus ``total`` (with the known-to-unknown
    term when ``ktou`` is given).  Symmetric-graph terms count each
    unordered pixel pair once, so ``total`` is, up to a constant, exactly
    the quadratic objective the solves minimize.
    """
    flat = np.asarray(alpha, dtype=np.float64).ravel()
    cm_lap = affinity_laplacian(cm_flow)
    cm_resid = cm_lap @ flat
    term_cm = float(cm_resid @ cm_resid)
    term_uu = float(flat @ (affinity_laplacian(intra_u_flow) @ flat))
    term_local = float(flat @ (affinity_laplacian(local_flow) @ flat))
    known_gap = flat - _known_alpha(trimap)
    term_trimap = float(np.sum(_known_indicator(trimap) * known_gap ** 2))
    terms = {
        "color_mixture": term_cm,
        "intra_unknown": term_uu,
        "local": term_local,
        "trimap": term_trimap,
    }
    total = (term_cm + params.uu_strength * term_uu
             + params.local_strength * term_local
             + params.known_weight * term_trimap)
    if ktou is not None:
        gap = flat[ktou.pixels] - ktou.fg_weight
        terms["known_to_unknown"] = float(np.sum(ktou.confidence * gap ** 2))
        total += params.ku_strength * terms["known_to_unknown"]
    terms["total"] = total
    return terms


@dataclass
class PipelineResult:
    """Everything the end-to-end alpha estimation produces."""

    matte: np.ndarray
    report: SolveReport
    used_reduced: bool
    transparency: TransparencyDecision | None
    trimmed_trimap: np.ndarray
    ktou: KtoUFlow | None
    timings: dict


def run_pipeline(image: np.ndarray, trimap: np.ndarray, params: Params,
                 force: str | None = None, trim: bool = True) -> PipelineResult:
    """Estimate an alpha matte from an image and trimap.

    ``force`` may be ``"full"`` or ``"reduced"`` to bypass the transparency
    classifier; ``trim=False`` skips both trimming passes.
    """
    check_same_size(image, trimap)
    if force not in (None, "full", "reduced"):
        raise ValueError("force must be None, 'full', or 'reduced'")
    timings = {}
    clock = time.perf_counter

    begin = clock()
    if trim:
        working = patch_trim(image, edge_trim(image, trimap, params), params)
    else:
        working = np.array(trimap, copy=True)
    timings["trimming"] = clock() - begin

    fg, bg, unk = region_masks(working)
    if unk.size == 0:
        matte = _known_alpha(working).reshape(trimap.shape)
        return PipelineResult(matte, SolveReport(0, 0.0, 0.0), True, None,
                              working, None, timings)

    transparency = None
    if force is None:
        if fg.size and bg.size:
            begin = clock()
            transparency = classify_transparency(image, working, params)
            timings["classifier"] = clock() - begin
            use_reduced = transparency.use_e2
        else:
            warnings.warn("one known region is empty; skipping the "
                          "known-to-unknown flow", stacklevel=2)
            use_reduced = True
    else:
        use_reduced = force == "reduced"

    begin = clock()
    cm_flow = build_cm_flow(image, working, params)
    intra_u = build_intra_u_flow(image, working, params) if unk.size >= 2 \
        else sparse.csr_matrix(cm_flow.shape)
    local = build_local_flow(image, working, params)
    ktou = None if use_reduced else build_ktou_flow(image, working, params)
    timings["flows"] = clock() - begin

    begin = clock()
    flow_laplacian = assemble_flow_laplacian(cm_flow, intra_u, local, params)
    timings["assembly"] = clock() - begin

    begin = clock()
    if use_reduced:
        matte, report = solve_e2(flow_laplacian, working, params)
    else:
        matte, report = solve_e1(flow_laplacian, ktou, working, params)
    timings["solve"] = clock() - begin

    # Pixels the trimming passes marked as known are pinned exactly.
    flat = matte.ravel()
    flat[fg] = 1.0
    flat[bg] = 0.0
    return PipelineResult(matte, report, use_reduced, transparency, working,
                          ktou, timings)


def run_regularization(image: np.ndarray, trimap: np.ndarray,
                       alpha_hat: np.ndarray, loyalty: np.ndarray,
                       params: Params, trim: bool = True) -> PipelineResult:
    """Regularize an external alpha estimate end to end.

    Shares the trimming and flow construction of :func:`run_pipeline`, then
    solves with the loyalty term instead of the known-to-unknown flow.
    """
    check_same_size(image, trimap)
    timings = {}
    clock = time.perf_counter

    begin = clock()
    if trim:
        working = patch_trim(image, edge_trim(image, trimap, params), params)
    else:
        working = np.array(trimap, copy=True)
    timings["trimming"] = clock() - begin

    fg, bg, unk = region_masks(working)
    if unk.size == 0:
        matte = _known_alpha(working).reshape(trimap.shape)
        return PipelineResult(matte, SolveReport(0, 0.0, 0.0), True, None,
                              working, None, timings)

    begin = clock()
    cm_flow = build_cm_flow(image, working, params)
    intra_u = build_intra_u_flow(image, working, params) if unk.size >= 2 \
        else sparse.csr_matrix(cm_flow.shape)
    local = build_local_flow(image, working, params)
    timings["flows"] = clock() - begin

    begin = clock()
    flow_laplacian = assemble_flow_laplacian(cm_flow, intra_u, local, params)
    timings["assembly"] = clock() - begin

    begin = clock()
    matte, report = regularize_matte(flow_laplacian, working, alpha_hat,
                                     loyalty, params)
    timings["solve"] = clock() - begin

    flat = matte.ravel()
    flat[fg] = 1.0
    flat[bg] = 0.0
    return PipelineResult(matte, report, True, None, working, None, timings)
