"""Lie algebroid models in a fixed frame, and fiberwise-linear forms on them.

A model is a chart plus structure functions: anchor components rho^i_a(x) and
bracket coefficients C^c_ab(x) stored for a < b.  A linear k-form is carried
by its two component families: mu(e_a) of degree k-1 and eta(e_a) of degree k,
where eta may instead be derived from a closed twist form chi of degree k+1
as eta(e) = -i_{rho(e)} chi.

Checks here are pointwise: algebroid axioms (Jacobi, anchor morphism) and the
bracket-compatibility equations tying (mu, eta) to the algebroid.  The module
also evaluates the induced linear form on the total space and its kernel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .expr import Expression, Jet2, eval_jet2
from .geometry import (
    ArityMismatch,
    DegreeMismatch,
    FormField,
    FormValue,
    LinearSubspaceResult,
    insert_index,
    rank_and_kernel,
    sorted_indices,
)
from .report import CheckReport, residual_leaf


class EvaluationError(Exception):
    def __init__(self, message: str, point: Sequence[float]):
        self.point = [float(v) for v in point]
        super().__init__(f"{message} at point {self.point}")


@dataclass
class AlgebroidModel:
    """Chart, frame and structure functions of a Lie algebroid."""

    chart: tuple[str, ...]
    frame: tuple[str, ...]
    anchor: dict[int, dict[int, Expression]]          # a -> i -> rho^i_a
    structure: dict[tuple[int, int], dict[int, Expression]]  # (a<b) -> c -> C^c_ab

    def __post_init__(self):
        for (a, b) in self.structure:
            if not (0 <= a < b < self.rank):
                raise ValueError(f"bracket key ({a},{b}) must satisfy a < b")

    @property
    def dim(self) -> int:
        return len(self.chart)

    @property
    def rank(self) -> int:
        return len(self.frame)

    def coord_index(self, name: str) -> int:
        return self.chart.index(name)

    def frame_index(self, name: str) -> int:
        return self.frame.index(name)


@dataclass
class LinearForm:
    """Components of a fiberwise-linear k-form in the model frame.

    Exactly one of ``eta`` (explicit per-section k-forms) or ``twist`` (a
    chart form of degree k+1, with eta derived by anchor contraction) may be
    set; both absent means eta = 0.
    """

    degree: int
    mu: list[FormField]
    eta: Optional[list[FormField]] = None
    twist: Optional[FormField] = None

    def __post_init__(self):
        if self.degree < 1:
            raise DegreeMismatch("linear form degree must be >= 1")
        if self.eta is not None and self.twist is not None:
            raise ValueError("give either explicit eta or a twist, not both")
        for f in self.mu:
            if f.degree != self.degree - 1:
                raise DegreeMismatch("mu components must have degree k-1")
        if self.eta is not None:
            for f in self.eta:
                if f.degree != self.degree:
                    raise DegreeMismatch("eta components must have degree k")
        if self.twist is not None and self.twist.degree != self.degree + 1:
            raise DegreeMismatch("twist must have degree k+1")

    def eta_is_zero(self) -> bool:
        if self.twist is not None:
            return self.twist.is_zero()
        return self.eta is None or all(f.is_zero() for f in self.eta)


@dataclass
class TotalSpacePoint:
    base: np.ndarray
    fiber: np.ndarray

    def __post_init__(self):
        self.base = np.asarray(self.base, dtype=float)
        self.fiber = np.asarray(self.fiber, dtype=float)


class PointEval:
    """All jets of a (model, form) pair at one sample point, computed once."""

    def __init__(self, model: AlgebroidModel, form: Optional[LinearForm],
                 point: Sequence[float]):
        self.model = model
        self.form = form
        self.point = np.asarray(point, dtype=float)
        n, r = model.dim, model.rank
        zero = Jet2.constant(0.0, n)

        self.rho: list[list[Jet2]] = []
        for a in range(r):
            row = [zero] * n
            for i, e in model.anchor.get(a, {}).items():
                row[i] = eval_jet2(e, self.point)
            self.rho.append(row)
        self.rho_values = np.array([[j.value for j in row] for row in self.rho])

        # C[a][b][c] jets, antisymmetric in (a, b)
        self.C: dict[tuple[int, int], dict[int, Jet2]] = {}
        for (a, b), comps in model.structure.items():
            self.C[(a, b)] = {c: eval_jet2(e, self.point) for c, e in comps.items()}

        if form is not None:
            self.mu: list[FormValue] = [f.at(self.point) for f in form.mu]
            self.chi: Optional[FormValue] = None
            if form.twist is not None:
                self.chi = form.twist.at(self.point)
                self.eta = [self.chi.interior(self.rho[a]).scaled(-1.0) for a in range(r)]
            elif form.eta is not None:
                self.eta = [f.at(self.point) for f in form.eta]
            else:
                self.eta = [FormValue.zero(form.degree, n) for _ in range(r)]
            self._dmu: Optional[list[FormValue]] = None
            self._deta: Optional[list[FormValue]] = None

    # -- structure function access --------------------------------------

    def c_value(self, a: int, b: int, c: int) -> float:
        if a == b:
            return 0.0
        if a < b:
            j = self.C.get((a, b), {}).get(c)
            return 0.0 if j is None else j.value
        j = self.C.get((b, a), {}).get(c)
        return 0.0 if j is None else -j.value

    def c_grad(self, a: int, b: int, c: int) -> np.ndarray:
        if a == b:
            return np.zeros(self.model.dim)
        if a < b:
            j = self.C.get((a, b), {}).get(c)
            return np.zeros(self.model.dim) if j is None else j.gradient
        j = self.C.get((b, a), {}).get(c)
        return np.zeros(self.model.dim) if j is None else -j.gradient

    # -- form data --------------------------------------------------------

    @property
    def dmu(self) -> list[FormValue]:
        if self._dmu is None:
            self._dmu = [m.d() for m in self.mu]
        return self._dmu

    @property
    def deta(self) -> list[FormValue]:
        if self._deta is None:
            self._deta = [e.d() for e in self.eta]
        return self._deta

    def mu_matrix(self) -> np.ndarray:
        """Coefficient matrix of mu: rows = sorted (k-1)-indices, cols = frame."""
        n = self.model.dim
        k = self.form.degree
        rows = sorted_indices(n, k - 1)
        M = np.zeros((len(rows), self.model.rank))
        for a, mv in enumerate(self.mu):
            for r_i, idx in enumerate(rows):
                M[r_i, a] = mv.coeff_value(idx)
        return M

    def sharp_matrix(self, values: list[FormValue], degree: int) -> np.ndarray:
        """Matrix of v -> (i_v values[a])_a acting on tangent vectors.

        Rows run over (frame section, sorted (degree-1)-index); columns over
        coordinates.
        """
        n = self.model.dim
        Js = sorted_indices(n, degree - 1)
        M = np.zeros((len(values) * len(Js), n))
        row = 0
        for a, val in enumerate(values):
            for J in Js:
                for i in range(n):
                    ins = insert_index(i, J)
                    if ins is None:
                        continue
                    sign, I = ins
                    M[row, i] = sign * val.coeff_value(I)
                row += 1
        return M

    def mu_sharp_matrix(self) -> np.ndarray:
        return self.sharp_matrix(self.mu, self.form.degree - 1)

    def eta_matrix(self) -> np.ndarray:
        n = self.model.dim
        rows = sorted_indices(n, self.form.degree)
        M = np.zeros((len(rows), self.model.rank))
        for a, ev in enumerate(self.eta):
            for r_i, idx in enumerate(rows):
                M[r_i, a] = ev.coeff_value(idx)
        return M

    def eta_sharp_matrix(self) -> np.ndarray:
        return self.sharp_matrix(self.eta, self.form.degree)


def evaluate_model(model: AlgebroidModel, form: Optional[LinearForm],
                   point: Sequence[float]) -> PointEval:
    try:
        return PointEval(model, form, point)
    except Exception as exc:  # domain errors carry the point for the report
        if isinstance(exc, EvaluationError):
            raise
        raise EvaluationError(str(exc), point) from exc


# ----------------------------------------------------------------------
# Algebroid axioms.

def check_algebroid_axioms(model: AlgebroidModel, samples: Sequence[Sequence[float]],
                           tol: float) -> CheckReport:
    """Jacobi identity and anchor-bracket morphism, on frame triples/pairs.

    Frame form of the Jacobi identity (for outputs e and triples a < b < c):

        sum_cyc C^d_ab C^e_dc  -  sum_cyc rho^i_a d_i C^e_bc  =  0.
    """
    r, n = model.rank, model.dim
    worst_j = (0.0, None)
    worst_m = (0.0, None)
    for p in samples:
        ev = evaluate_model(model, None, p)
        # Jacobi
        for a in range(r):
            for b in range(a + 1, r):
                for c in range(b + 1, r):
                    cyc = ((a, b, c), (b, c, a), (c, a, b))
                    for e_out in range(r):
                        total = 0.0
                        for (x, y, z) in cyc:
                            for d in range(r):
                                cd = ev.c_value(x, y, d)
                                if cd != 0.0:
                                    total += cd * ev.c_value(d, z, e_out)
                            grad = ev.c_grad(y, z, e_out)
                            total -= float(ev.rho_values[x] @ grad)
                        if abs(total) > worst_j[0]:
                            worst_j = (abs(total), p)
        # anchor morphism
        for a in range(r):
            for b in range(a + 1, r):
                for i in range(n):
                    total = 0.0
                    for c in range(r):
                        total += ev.rho_values[c, i] * ev.c_value(a, b, c)
                    for j in range(n):
                        total += ev.rho_values[b, j] * ev.rho[a][i].gradient[j]
                        total -= ev.rho_values[a, j] * ev.rho[b][i].gradient[j]
                    if abs(total) > worst_m[0]:
                        worst_m = (abs(total), p)
    rep = CheckReport("axioms")
    rep.add(residual_leaf("jacobi", worst_j[0], tol, worst_j[1]))
    rep.add(residual_leaf("anchor-morphism", worst_m[0], tol, worst_m[1]))
    return rep.finalize()


# ----------------------------------------------------------------------
# Compatibility equations for (mu, eta).

def _pair_residuals(ev: PointEval, a: int, b: int) -> tuple[float, float, float]:
    """Residual coefficients of the three compatibility equations for the
    ordered frame pair (a, b).  Bracket sections contribute through the
    structure functions only: mu([e_a,e_b]) = C^c_ab mu(e_c)."""
    model, form = ev.model, ev.form
    n = model.dim
    r1 = ev.mu[b].interior(ev.rho[a]) + ev.mu[a].interior(ev.rho[b])

    r2 = FormValue.zero(form.degree - 1, n)
    r3 = FormValue.zero(form.degree, n)
    for c in range(model.rank):
        cv = ev.c_value(a, b, c)
        if cv != 0.0:
            r2 = r2 + ev.mu[c].scaled(cv)
            r3 = r3 + ev.eta[c].scaled(cv)
    r2 = r2 - ev.mu[b].lie(ev.rho[a]) + ev.dmu[a].interior(ev.rho[b]) \
        + ev.eta[a].interior(ev.rho[b])
    r3 = r3 - ev.eta[b].lie(ev.rho[a]) + ev.deta[a].interior(ev.rho[b])
    return r1.max_abs(), r2.max_abs(), r3.max_abs()


def im_residuals(model: AlgebroidModel, form: LinearForm,
                 samples: Sequence[Sequence[float]], tol: float) -> CheckReport:
    """Max residuals of the three bracket-compatibility equations over all
    ordered frame pairs and samples."""
    worst = [(0.0, None), (0.0, None), (0.0, None)]
    for p in samples:
        ev = evaluate_model(model, form, p)
        for a in range(model.rank):
            for b in range(model.rank):
                res = _pair_residuals(ev, a, b)
                for i in range(3):
                    if res[i] > worst[i][0]:
                        worst[i] = (res[i], p)
    rep = CheckReport("form-compatibility")
    rep.add(residual_leaf("antisymmetry", worst[0][0], tol, worst[0][1]))
    rep.add(residual_leaf("mu-bracket", worst[1][0], tol, worst[1][1]))
    rep.add(residual_leaf("eta-bracket", worst[2][0], tol, worst[2][1]))
    return rep.finalize()


def section_pair_residuals(model: AlgebroidModel, form: LinearForm,
                           f_coeffs: Sequence[Expression], g_coeffs: Sequence[Expression],
                           point: Sequence[float]) -> tuple[float, float, float]:
    """Compatibility residuals for two expression-coefficient sections.

    Used by the property test that frame-pair checks imply the equations for
    arbitrary sections e = f^a e_a, e' = g^b e_b with

        [e, e'] = f^a g^b C^c_ab e_c + f^a (rho_a . grad g^c) e_c
                  - g^b (rho_b . grad f^c) e_c.
    """
    ev = evaluate_model(model, form, point)
    n, r = model.dim, model.rank
    fj = [eval_jet2(e, point) for e in f_coeffs]
    gj = [eval_jet2(e, point) for e in g_coeffs]

    def section_data(coeff_jets):
        rho = [Jet2.constant(0.0, n) for _ in range(n)]
        for a in range(r):
            for i in range(n):
                rho[i] = rho[i] + coeff_jets[a] * ev.rho[a][i]
        mu = FormValue.zero(form.degree - 1, n)
        eta = FormValue.zero(form.degree, n)
        for a in range(r):
            mu = mu + ev.mu[a].jet_scaled(coeff_jets[a])
            eta = eta + ev.eta[a].jet_scaled(coeff_jets[a])
        return rho, mu, eta

    rho_f, mu_f, eta_f = section_data(fj)
    rho_g, mu_g, eta_g = section_data(gj)

    # bracket coefficients as jets (order drops by one through the gradients)
    bracket = []
    for c in range(r):
        total = Jet2.constant(0.0, n)
        for a in range(r):
            for b in range(r):
                cv = ev.c_value(a, b, c) if a != b else 0.0
                if cv != 0.0:
                    total = total + (fj[a] * gj[b]).scaled(cv)
        for a in range(r):
            dg = Jet2.constant(0.0, n)
            df = Jet2.constant(0.0, n)
            for i in range(n):
                dg = dg + ev.rho[a][i] * gj[c].partial(i)
                df = df + ev.rho[a][i] * fj[c].partial(i)
            total = total + fj[a] * dg - gj[a] * df
        bracket.append(total)

    mu_br = FormValue.zero(form.degree - 1, n)
    eta_br = FormValue.zero(form.degree, n)
    for c in range(r):
        mu_br = mu_br + ev.mu[c].jet_scaled(bracket[c])
        eta_br = eta_br + ev.eta[c].jet_scaled(bracket[c])

    r1 = mu_g.interior(rho_f) + mu_f.interior(rho_g)
    r2 = mu_br - mu_g.lie(rho_f) + mu_f.d().interior(rho_g) + eta_f.interior(rho_g)
    r3 = eta_br - eta_g.lie(rho_f) + eta_f.d().interior(rho_g)
    return r1.max_abs(), r2.max_abs(), r3.max_abs()


# ----------------------------------------------------------------------
# The induced linear form on the total space.

def linear_form_value(model: AlgebroidModel, form: LinearForm, pE: TotalSpacePoint,
                      tangents: Sequence[tuple[Sequence[float], Sequence[float]]]) -> float:
    """Evaluate the linear form at the total-space point on tangent vectors.

    In frame coordinates (x, u) the form reads

        du^a ^ mu(e_a)  +  u^a (d mu(e_a) + eta(e_a)),

    and each tangent is a pair (v, udot) of base and fiber components.
    """
    k = form.degree
    if len(tangents) != k:
        raise ArityMismatch(f"need {k} tangents, got {len(tangents)}")
    if len(pE.fiber) != model.rank or len(pE.base) != model.dim:
        raise ArityMismatch("total-space point does not match model dimensions")
    ev = evaluate_model(model, form, pE.base)
    vs = [np.asarray(t[0], dtype=float) for t in tangents]
    uds = [np.asarray(t[1], dtype=float) for t in tangents]

    total = 0.0
    for a in range(model.rank):
        # wedge of du^a with the (k-1)-form mu(e_a)
        for j in range(k):
            rest = vs[:j] + vs[j + 1:]
            sign = -1.0 if j % 2 else 1.0
            total += sign * uds[j][a] * ev.mu[a].evaluate(rest)
        ua = float(pE.fiber[a])
        if ua != 0.0:
            total += ua * (ev.dmu[a] + ev.eta[a]).evaluate(vs)
    return total


def kernel_at(model: AlgebroidModel, form: LinearForm, pE: TotalSpacePoint,
              rank_tol: float = 1e-8) -> LinearSubspaceResult:
    """Kernel of the linear form at (x, u), solved on (v, udot) in R^{n+r}.

    The defining system is i_v mu(e_a) = 0 for all a together with
    udot^a mu(e_a) = -u^a i_v(d mu(e_a) + eta(e_a)).
    """
    n, r, k = model.dim, model.rank, form.degree
    ev = evaluate_model(model, form, pE.base)
    Js = sorted_indices(n, k - 2) if k >= 2 else []
    Is = sorted_indices(n, k - 1)

    rows = []
    for a in range(r):
        for J in Js:
            row = np.zeros(n + r)
            for i in range(n):
                ins = insert_index(i, J)
                if ins is None:
                    continue
                sign, I = ins
                row[i] = sign * ev.mu[a].coeff_value(I)
            rows.append(row)
    combo = [(ev.dmu[a] + ev.eta[a]).scaled(float(pE.fiber[a])) for a in range(r)]
    for I in Is:
        row = np.zeros(n + r)
        for a in range(r):
            row[n + a] = ev.mu[a].coeff_value(I)
            cba = combo[a]
            for i in range(n):
                ins = insert_index(i, I)
                if ins is None:
                    continue
                sign, L = ins
                row[i] += sign * cba.coeff_value(L)
        rows.append(row)
    M = np.array(rows) if rows else np.zeros((0, n + r))
    return rank_and_kernel(M, rank_tol)


def restricted_model(model: AlgebroidModel, form: LinearForm,
                     keep: Sequence[str]) -> tuple[AlgebroidModel, LinearForm]:
    """Restrict to the subbundle spanned by the named frame sections.

    The kept set must be bracket-closed; any stored bracket coefficient from a
    kept pair onto a dropped section raises.
    """
    idx = sorted(model.frame_index(name) for name in keep)
    pos = {old: new for new, old in enumerate(idx)}
    anchor = {pos[a]: dict(model.anchor.get(a, {})) for a in idx}
    structure: dict[tuple[int, int], dict[int, Expression]] = {}
    for (a, b), comps in model.structure.items():
        if a in pos and b in pos:
            for c in comps:
                if c not in pos:
                    raise ValueError(f"frame subset not bracket-closed: "
                                     f"[{model.frame[a]},{model.frame[b]}] hits {model.frame[c]}")
            structure[(pos[a], pos[b])] = {pos[c]: e for c, e in comps.items()}
    sub = AlgebroidModel(model.chart, tuple(model.frame[a] for a in idx), anchor, structure)
    mu = [form.mu[a] for a in idx]
    eta = None if form.eta is None else [form.eta[a] for a in idx]
    return sub, LinearForm(form.degree, mu, eta, form.twist)
