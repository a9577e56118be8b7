"""Adapted-chart quotients: descent checks, model reduction, kernel analysis.

The quotient data is presented in normal form: chart coordinates split into
fiber and base, frame sections split into kernel and invariant.  Descent of
the algebroid and of a linear form are verified coordinate-wise; passing
models are reduced by substituting the fiber reference values (box center)
into the surviving coefficients.

The kernel path derives the quotient from the form itself: constant-rank
tests, kernel compatibility of eta, involutivity of the tangent kernel, the
induced partial connection (solvability, flatness) and the eta transport
condition, then an alignment test that either emits the adapted quotient
spec or refuses with NOT-ADAPTED.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .algebroid import AlgebroidModel, LinearForm, PointEval, evaluate_model
from .expr import Expression, substitute
from .geometry import (
    DegreeMismatch,
    FormField,
    FormValue,
    insert_index,
    rank_and_kernel,
    sorted_indices,
)
from .report import CheckReport, Verdict, indeterminate, residual_leaf, skipped
from .sampling import box_center


class NotBasic(Exception):
    """Raised when a reduction is requested without passing descent checks."""


class SubstitutionDomainError(Exception):
    pass


@dataclass
class QuotientSpec:
    """Fiber/base coordinate split plus kernel/invariant frame split."""

    fiber_coords: tuple[str, ...]
    base_coords: tuple[str, ...]
    kernel_sections: tuple[str, ...]
    invariant_sections: tuple[str, ...]

    @staticmethod
    def build(model: AlgebroidModel, fiber: Sequence[str],
              kernel: Sequence[str]) -> "QuotientSpec":
        for name in fiber:
            if name not in model.chart:
                raise ValueError(f"unknown fiber coordinate {name!r}")
        for name in kernel:
            if name not in model.frame:
                raise ValueError(f"unknown kernel section {name!r}")
        base = tuple(c for c in model.chart if c not in fiber)
        invariant = tuple(f for f in model.frame if f not in kernel)
        return QuotientSpec(tuple(fiber), base, tuple(kernel), invariant)

    def is_trivial(self) -> bool:
        return not self.fiber_coords and not self.kernel_sections

    def fiber_idx(self, model: AlgebroidModel) -> list[int]:
        return [model.coord_index(c) for c in self.fiber_coords]

    def base_idx(self, model: AlgebroidModel) -> list[int]:
        return [model.coord_index(c) for c in self.base_coords]

    def kernel_idx(self, model: AlgebroidModel) -> list[int]:
        return [model.frame_index(f) for f in self.kernel_sections]

    def invariant_idx(self, model: AlgebroidModel) -> list[int]:
        return [model.frame_index(f) for f in self.invariant_sections]


@dataclass
class QuotientVerdict:
    algebroid_basic: CheckReport
    form_basic: CheckReport
    quotient_model: Optional[tuple[AlgebroidModel, LinearForm]]
    notes: str = ""


def _update_worst(worst, value, point):
    return (value, point) if value > worst[0] else worst


def check_algebroid_descent(model: AlgebroidModel, Q: QuotientSpec,
                            samples: Sequence[Sequence[float]], tol: float) -> CheckReport:
    """The four coordinate conditions for the algebroid to drop to the base:
    kernel anchors are vertical, invariant anchors project without fiber
    dependence, brackets against kernel sections stay in the kernel, and
    invariant brackets have fiber-independent invariant coefficients."""
    fiber = Q.fiber_idx(model)
    base = Q.base_idx(model)
    kernel = Q.kernel_idx(model)
    invariant = Q.invariant_idx(model)

    w_vert = (0.0, None)
    w_inv = (0.0, None)
    w_ideal = (0.0, None)
    w_brinv = (0.0, None)
    for p in samples:
        ev = evaluate_model(model, None, p)
        for kk in kernel:
            for i in base:
                w_vert = _update_worst(w_vert, abs(ev.rho_values[kk, i]), p)
        for al in invariant:
            for i in base:
                g = ev.rho[al][i].gradient
                for l in fiber:
                    w_inv = _update_worst(w_inv, abs(g[l]), p)
        for kk in kernel:
            for a in range(model.rank):
                for beta in invariant:
                    w_ideal = _update_worst(w_ideal, abs(ev.c_value(kk, a, beta)), p)
        for ai, al in enumerate(invariant):
            for be in invariant[ai + 1:]:
                for ga in invariant:
                    g = ev.c_grad(al, be, ga)
                    for l in fiber:
                        w_brinv = _update_worst(w_brinv, abs(g[l]), p)
    rep = CheckReport("algebroid-descent")
    rep.add(residual_leaf("anchor-vertical", w_vert[0], tol, w_vert[1]))
    rep.add(residual_leaf("anchor-invariance", w_inv[0], tol, w_inv[1]))
    rep.add(residual_leaf("bracket-ideal", w_ideal[0], tol, w_ideal[1]))
    rep.add(residual_leaf("bracket-invariance", w_brinv[0], tol, w_brinv[1]))
    return rep.finalize()


def check_form_descent(model: AlgebroidModel, form: LinearForm, Q: QuotientSpec,
                       samples: Sequence[Sequence[float]], tol: float) -> CheckReport:
    """Kernel sections must be killed by mu and eta; invariant components
    must be horizontal (no fiber indices) and fiber-independent."""
    fiber = set(Q.fiber_idx(model))
    kernel = Q.kernel_idx(model)
    invariant = Q.invariant_idx(model)

    w_kmu = (0.0, None)
    w_keta = (0.0, None)
    w_horiz = (0.0, None)
    w_inv = (0.0, None)
    for p in samples:
        ev = evaluate_model(model, form, p)
        for kk in kernel:
            w_kmu = _update_worst(w_kmu, ev.mu[kk].max_abs(), p)
            w_keta = _update_worst(w_keta, ev.eta[kk].max_abs(), p)
        for al in invariant:
            for fv in (ev.mu[al], ev.eta[al]):
                for idx, jet in fv.coeffs.items():
                    if fiber.intersection(idx):
                        w_horiz = _update_worst(w_horiz, abs(jet.value), p)
                    else:
                        for l in fiber:
                            w_inv = _update_worst(w_inv, abs(jet.gradient[l]), p)
    rep = CheckReport("form-descent")
    rep.add(residual_leaf("kernel-mu", w_kmu[0], tol, w_kmu[1]))
    rep.add(residual_leaf("kernel-eta", w_keta[0], tol, w_keta[1]))
    rep.add(residual_leaf("horizontality", w_horiz[0], tol, w_horiz[1]))
    rep.add(residual_leaf("invariance", w_inv[0], tol, w_inv[1]))
    return rep.finalize()


def _remap_form_field(f: FormField, old_chart: Sequence[str], Q: QuotientSpec,
                      values: dict[str, float]) -> FormField:
    """Keep base-index coefficients, substitute fiber values, re-index."""
    new_chart = Q.base_coords
    old_to_new = {old_chart.index(c): i for i, c in enumerate(new_chart)}
    coeffs = {}
    for idx, e in f.coeffs.items():
        if any(i not in old_to_new for i in idx):
            continue
        new_idx = tuple(sorted(old_to_new[i] for i in idx))
        coeffs[new_idx] = substitute(e, values, new_chart)
    return FormField(f.degree, len(new_chart), coeffs)


def reduce_model(model: AlgebroidModel, form: LinearForm, Q: QuotientSpec,
                 box: list[tuple[float, float]],
                 verified: Optional[tuple[CheckReport, CheckReport]] = None
                 ) -> tuple[AlgebroidModel, LinearForm]:
    """Build the reduced model on the base chart.

    Fiber coordinates are substituted by the box-center reference values; the
    descent checks certify fiber-independence, so any in-box value gives the
    same reduction up to tolerance.
    """
    if verified is not None:
        for rep in verified:
            if rep.verdict != Verdict.PASS:
                raise NotBasic(f"descent check {rep.name!r} did not pass")
    center = box_center(box)
    values = {name: float(center[model.coord_index(name)]) for name in Q.fiber_coords}
    invariant = Q.invariant_idx(model)
    base = Q.base_idx(model)
    new_chart = Q.base_coords
    pos = {a: i for i, a in enumerate(invariant)}

    anchor: dict[int, dict[int, Expression]] = {}
    for a in invariant:
        row = {}
        for i, e in model.anchor.get(a, {}).items():
            if i in base:
                row[new_chart.index(model.chart[i])] = substitute(e, values, new_chart)
        if row:
            anchor[pos[a]] = row

    structure: dict[tuple[int, int], dict[int, Expression]] = {}
    for (a, b), comps in model.structure.items():
        if a in pos and b in pos:
            kept = {pos[c]: substitute(e, values, new_chart)
                    for c, e in comps.items() if c in pos}
            if kept:
                structure[(pos[a], pos[b])] = kept

    new_model = AlgebroidModel(new_chart, tuple(Q.invariant_sections), anchor, structure)
    mu = [_remap_form_field(form.mu[a], model.chart, Q, values) for a in invariant]
    eta = None
    twist = None
    if form.twist is not None:
        twist = _remap_form_field(form.twist, model.chart, Q, values)
        if len(twist.coeffs) != len(form.twist.coeffs):
            raise SubstitutionDomainError("twist carries fiber indices; not reducible")
    elif form.eta is not None:
        eta = [_remap_form_field(form.eta[a], model.chart, Q, values) for a in invariant]
    return new_model, LinearForm(form.degree, mu, eta, twist)


# ----------------------------------------------------------------------
# Kernel-reducibility analysis.


def _sharp_with_grad(ev: PointEval, values: list[FormValue], degree: int):
    """Sharp matrix (rows over (section, multi-index), cols over coords) and
    its coordinate gradient d[i] = partial_i N."""
    n = ev.model.dim
    Js = sorted_indices(n, degree - 1)
    m = len(values) * len(Js)
    N = np.zeros((m, n))
    dN = np.zeros((n, m, n))
    row = 0
    for val in values:
        for J in Js:
            for i in range(n):
                ins = insert_index(i, J)
                if ins is None:
                    continue
                sign, I = ins
                jet = val.coeffs.get(I)
                if jet is None:
                    continue
                N[row, i] = sign * jet.value
                dN[:, row, i] = sign * jet.gradient
            row += 1
    return N, dN


def _mu_matrix_with_grad(ev: PointEval):
    n, r = ev.model.dim, ev.model.rank
    rows = sorted_indices(n, ev.form.degree - 1)
    M = np.zeros((len(rows), r))
    dM = np.zeros((n, len(rows), r))
    for a, mv in enumerate(ev.mu):
        for r_i, idx in enumerate(rows):
            jet = mv.coeffs.get(idx)
            if jet is None:
                continue
            M[r_i, a] = jet.value
            dM[:, r_i, a] = jet.gradient
    return M, dM


def _kernel_projector(N: np.ndarray, dN: np.ndarray, rank_tol: float):
    """Orthogonal projector onto ker N and its coordinate derivatives.

    For locally constant rank,  dP = -N+ dN P - (N+ dN P)^T.
    """
    n = N.shape[1]
    if not np.any(N):
        return np.eye(n), np.zeros((n, n, n)), np.zeros((n, 0))
    Np = np.linalg.pinv(N, rcond=rank_tol)
    P = np.eye(n) - Np @ N
    dP = np.zeros((n, n, n))
    for i in range(n):
        T = Np @ dN[i] @ P
        dP[i] = -T - T.T
    return P, dP, Np


def _smooth_kernel_fields(P: np.ndarray, dP: np.ndarray, W0: np.ndarray):
    """Project the pinned basis through the moving kernel projector."""
    V = P @ W0
    dV = np.einsum("iab,bj->iaj", dP, W0)
    return V, dV


def _rank_constancy(name: str, results, samples, rank_tol) -> tuple[CheckReport, int]:
    ranks = [r.rank for r in results]
    first = ranks[0]
    for idx, rk in enumerate(ranks):
        if rk != first:
            j0 = ranks.index(first)
            note = (f"rank {first} at sample {j0} vs rank {rk} at sample {idx}; "
                    "jump may be genuine or a tolerance artifact")
            rep = indeterminate(name, note, witness=samples[idx])
            rep.data = {"witnesses": [list(map(float, samples[j0])),
                                      list(map(float, samples[idx]))]}
            return rep, first
    rep = residual_leaf(name, 0.0, 1.0, notes=f"constant rank {first}")
    return rep, first


def kernel_reduction_report(model: AlgebroidModel, form: LinearForm,
                            samples: Sequence[Sequence[float]], tol: float,
                            rank_tol: float, box: list[tuple[float, float]]
                            ) -> tuple[CheckReport, Optional[QuotientSpec]]:
    """Full kernel-reducibility analysis; emits the adapted quotient spec when
    the kernels line up with coordinate axes and frame sections."""
    if form.degree < 2:
        raise DegreeMismatch("kernel reduction needs degree >= 2")
    n, r, k = model.dim, model.rank, form.degree
    rep = CheckReport("kernel-reduction")

    evs = [evaluate_model(model, form, p) for p in samples]
    mu_mats = [_mu_matrix_with_grad(ev) for ev in evs]
    sharp_mats = [_sharp_with_grad(ev, ev.mu, k - 1) for ev in evs]

    mu_kers = [rank_and_kernel(M, rank_tol) for M, _ in mu_mats]
    sharp_kers = [rank_and_kernel(N, rank_tol) for N, _ in sharp_mats]

    c1, _ = _rank_constancy("mu-rank", mu_kers, samples, rank_tol)
    c2, _ = _rank_constancy("mu-sharp-rank", sharp_kers, samples, rank_tol)
    rep.add(c1)
    rep.add(c2)
    if c1.verdict != Verdict.PASS or c2.verdict != Verdict.PASS:
        for name in ("eta-kernels", "involutivity", "image-solvability",
                     "flatness", "eta-parallel", "alignment"):
            rep.add(skipped(name, "rank structure not constant"))
        return rep.finalize(), None

    # (3) kernels of mu sit inside the kernels of eta
    w3 = (0.0, None)
    eta_zero = form.eta_is_zero()
    for ev, p, mk, sk in zip(evs, samples, mu_kers, sharp_kers):
        if eta_zero:
            break
        Meta = ev.eta_matrix()
        if mk.nullity:
            w3 = _update_worst(w3, float(np.max(np.abs(Meta @ mk.kernel_basis), initial=0.0)), p)
        Neta = ev.eta_sharp_matrix()
        if sk.nullity:
            w3 = _update_worst(w3, float(np.max(np.abs(Neta @ sk.kernel_basis), initial=0.0)), p)
    rep.add(residual_leaf("eta-kernels", w3[0], tol, w3[1]))

    # smooth kernel frame pinned at the box center
    center = box_center(box)
    ev0 = evaluate_model(model, form, center)
    N0, _ = _sharp_with_grad(ev0, ev0.mu, k - 1)
    sk0 = rank_and_kernel(N0, rank_tol)
    W0 = sk0.kernel_basis
    d_ker = W0.shape[1]

    M0, _ = _mu_matrix_with_grad(ev0)
    _, s0, vt0 = np.linalg.svd(M0) if np.any(M0) else (None, np.zeros(min(M0.shape)), np.eye(r))
    mu_rank0 = int(np.sum(s0 > rank_tol * s0[0])) if s0.size and s0[0] > 0 else 0
    Cmpl = vt0[:mu_rank0].T  # complement frame of ker(mu), constant sections

    proj_cache = []
    for (N, dN) in sharp_mats:
        P, dP, _ = _kernel_projector(N, dN, rank_tol)
        V, dV = _smooth_kernel_fields(P, dP, W0)
        proj_cache.append((P, V, dV))

    # (4) involutivity of the tangent kernel
    w4 = (0.0, None)
    if d_ker >= 2:
        for (P, V, dV), p in zip(proj_cache, samples):
            for j in range(d_ker):
                for l in range(j + 1, d_ker):
                    b = np.einsum("i,ia->a", V[:, j], dV[:, :, l]) \
                        - np.einsum("i,ia->a", V[:, l], dV[:, :, j])
                    out = (np.eye(n) - P) @ b
                    resid = float(np.max(np.abs(out), initial=0.0)) \
                        / max(1.0, float(np.max(np.abs(b), initial=0.0)))
                    w4 = _update_worst(w4, resid, p)
        rep.add(residual_leaf("involutivity", w4[0], tol, w4[1]))
    else:
        rep.add(residual_leaf("involutivity", 0.0, tol,
                              notes="kernel foliation has rank <= 1"))

    # (5) solvability of the connection equation inside the image of mu
    Is = sorted_indices(n, k - 1)
    if k == 2:
        rep.add(skipped("image-solvability",
                        "automatic for 2-forms: image of mu is the annihilator "
                        "of the sharp kernel"))
    else:
        w5 = (0.0, None)
        for ev, (M, _dM), (P, V, dV), p in zip(evs, mu_mats, proj_cache, samples):
            if d_ker == 0:
                break
            Mp = np.linalg.pinv(M, rcond=rank_tol) if np.any(M) else np.zeros((r, M.shape[0]))
            proj_out = np.eye(M.shape[0]) - M @ Mp
            for a in range(r):
                target = ev.dmu[a] + ev.eta[a]
                for j in range(d_ker):
                    rhs = target.interior_vec(V[:, j]).values_on(Is)
                    resid = float(np.max(np.abs(proj_out @ rhs), initial=0.0)) \
                        / max(1.0, float(np.max(np.abs(rhs), initial=0.0)))
                    w5 = _update_worst(w5, resid, p)
        rep.add(residual_leaf("image-solvability", w5[0], tol, w5[1]))

    # (6) flatness and (7) eta transport of the induced partial connection
    s_cmp = Cmpl.shape[1]
    w6 = (0.0, None)
    w7 = (0.0, None)
    have_connection = d_ker > 0 and s_cmp > 0
    for ev, (M, dM), (P, V, dV), p in zip(evs, mu_mats, proj_cache, samples):
        if not have_connection:
            break
        B = M @ Cmpl
        dB = np.einsum("irc,cs->irs", dM, Cmpl)
        Bp = np.linalg.pinv(B, rcond=rank_tol)
        BtBinv = Bp @ Bp.T
        proj_out = np.eye(B.shape[0]) - B @ Bp
        dBp = np.zeros((n,) + Bp.shape)
        for i in range(n):
            dBp[i] = -Bp @ dB[i] @ Bp + BtBinv @ dB[i].T @ proj_out

        # D[alpha][row I, col i] = coeffs of i_{d_i}(d mu(c_alpha) + eta-part)
        D = np.zeros((s_cmp, len(Is), n))
        dD = np.zeros((n, s_cmp, len(Is), n))
        eta_c = []
        deta_c = []
        for al in range(s_cmp):
            dmu_c = FormValue.zero(k, n)
            e_c = FormValue.zero(k, n)
            de_c = FormValue.zero(k + 1, n)
            for a in range(r):
                ca = float(Cmpl[a, al])
                if ca != 0.0:
                    dmu_c = dmu_c + ev.dmu[a].scaled(ca)
                    e_c = e_c + ev.eta[a].scaled(ca)
                    de_c = de_c + ev.deta[a].scaled(ca)
            eta_c.append(e_c)
            deta_c.append(de_c)
            for r_i, I in enumerate(Is):
                for i in range(n):
                    ins = insert_index(i, I)
                    if ins is None:
                        continue
                    sign, L = ins
                    jet = dmu_c.coeffs.get(L)
                    if jet is None:
                        continue
                    D[al, r_i, i] = sign * jet.value
                    if jet.gradient is not None:
                        dD[:, al, r_i, i] = sign * jet.gradient

        gammas = []
        dgammas = []
        for l in range(d_ker):
            rhs = np.einsum("ari,i->ra", D, V[:, l])          # (len(Is), s_cmp)
            gam = Bp @ rhs                                     # (s_cmp, s_cmp): [beta, alpha]
            dgam = np.zeros((n, s_cmp, s_cmp))
            for i in range(n):
                drhs = np.einsum("ari,i->ra", dD[i], V[:, l]) \
                    + np.einsum("ari,i->ra", D, dV[i][:, l])
                dgam[i] = dBp[i] @ rhs + Bp @ drhs
            gammas.append(gam)
            dgammas.append(dgam)

        for j in range(d_ker):
            for l in range(j + 1, d_ker):
                br = np.einsum("i,ia->a", V[:, j], dV[:, :, l]) \
                    - np.einsum("i,ia->a", V[:, l], dV[:, :, j])
                rhs_br = np.einsum("ari,i->ra", D, br)
                gam_br = Bp @ rhs_br
                dir_l = np.einsum("i,iab->ab", V[:, j], dgammas[l])
                dir_j = np.einsum("i,iab->ab", V[:, l], dgammas[j])
                R = dir_l - dir_j + gammas[j] @ gammas[l] - gammas[l] @ gammas[j] - gam_br
                w6 = _update_worst(w6, float(np.max(np.abs(R), initial=0.0)), p)

        if not eta_zero:
            for l in range(d_ker):
                for al in range(s_cmp):
                    resid_form = deta_c[al].interior_vec(V[:, l])
                    for be in range(s_cmp):
                        gb = float(gammas[l][be, al])
                        if gb != 0.0:
                            resid_form = resid_form - eta_c[be].scaled(gb)
                    w7 = _update_worst(w7, resid_form.max_abs(), p)

    if have_connection and d_ker >= 2:
        rep.add(residual_leaf("flatness", w6[0], tol, w6[1]))
    else:
        rep.add(residual_leaf("flatness", 0.0, tol,
                              notes="connection is trivially flat (kernel rank <= 1 "
                                    "or full-kernel mu)"))
    rep.add(residual_leaf("eta-parallel", w7[0], tol, w7[1]))

    # alignment with coordinate axes and frame sections
    derived: Optional[QuotientSpec] = None
    fiber_ok = [True] * n
    for (P, _V, _dV) in proj_cache:
        off = np.abs(np.eye(n) - P)  # column i holds (I-P) e_i
        for i in range(n):
            if float(np.max(off[:, i], initial=0.0)) > max(tol, 1e-9):
                fiber_ok[i] = False
    kern_ok = [True] * r
    for mk, (M, _dM) in zip(mu_kers, mu_mats):
        if mk.nullity == 0:
            kern_ok = [False] * r
            break
        Pk = mk.kernel_basis @ mk.kernel_basis.T
        off = np.abs(np.eye(r) - Pk)
        for a in range(r):
            if float(np.max(off[:, a], initial=0.0)) > max(tol, 1e-9):
                kern_ok[a] = False
    fiber_axes = [i for i in range(n) if fiber_ok[i]]
    kernel_axes = [a for a in range(r) if kern_ok[a]]
    d_mu_ker = mu_kers[0].nullity

    align_notes = []
    aligned = True
    if len(fiber_axes) != d_ker:
        aligned = False
        align_notes.append(f"sharp kernel (dim {d_ker}) is not a coordinate span; "
                           f"{len(fiber_axes)} axis directions fit")
    if len(kernel_axes) != d_mu_ker:
        aligned = False
        align_notes.append(f"mu kernel (dim {d_mu_ker}) is not a frame-section span; "
                           f"{len(kernel_axes)} frame directions fit")
    if aligned:
        cand = QuotientSpec.build(model,
                                  [model.chart[i] for i in fiber_axes],
                                  [model.frame[a] for a in kernel_axes])
        desc_a = check_algebroid_descent(model, cand, samples, tol)
        desc_f = check_form_descent(model, form, cand, samples, tol)
        if desc_a.verdict == Verdict.PASS and desc_f.verdict == Verdict.PASS:
            derived = cand
            note = (f"adapted quotient: fiber {list(cand.fiber_coords)}, "
                    f"kernel {list(cand.kernel_sections)}")
            child = residual_leaf("alignment", 0.0, tol, notes=note)
            child.data = {"fiber": list(cand.fiber_coords),
                          "kernel": list(cand.kernel_sections)}
            rep.add(child)
        else:
            worst_child = max((desc_a, desc_f), key=lambda c: c.max_residual)
            rep.add(indeterminate(
                "alignment",
                "NOT-ADAPTED: kernels align with axes but the frame does not "
                f"trivialize the transport (descent residual {worst_child.max_residual:.3e})",
                residual=worst_child.max_residual))
    else:
        angle = _misalignment_angle(proj_cache, mu_kers, n, r, d_ker, d_mu_ker)
        rep.add(indeterminate(
            "alignment",
            "NOT-ADAPTED: " + "; ".join(align_notes) + f"; worst axis angle {angle:.3e} rad",
            residual=angle))
    return rep.finalize(), derived


def _misalignment_angle(proj_cache, mu_kers, n, r, d_ker, d_mu_ker) -> float:
    """Best-case maximal angle between the kernels and any coordinate span."""
    worst = 0.0
    for (P, _V, _dV) in proj_cache:
        if d_ker:
            res = sorted(float(np.linalg.norm((np.eye(n) - P)[:, i])) for i in range(n))
            worst = max(worst, float(np.arcsin(min(1.0, res[d_ker - 1]))))
    for mk in mu_kers:
        if mk.nullity:
            Pk = mk.kernel_basis @ mk.kernel_basis.T
            res = sorted(float(np.linalg.norm((np.eye(r) - Pk)[:, a])) for a in range(r))
            worst = max(worst, float(np.arcsin(min(1.0, res[mk.nullity - 1]))))
    return worst
