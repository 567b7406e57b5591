"""Obstacle reaction as a constrained minimization over contact multipliers.

Each contact node j contributes one unilateral constraint: the first-order
normal velocity it receives from the total rotation density must be
nonnegative. The admissible reaction density minimizing the exponentially
weighted elastic energy is supported below the contact points and is linear
in a vector of nonnegative multipliers, one per contact (the tip contact also
carries the elongation term). The dual problem in those multipliers is a
bound-constrained quadratic program

    minimize  0.5 mu^T G mu - b^T mu   subject to  mu >= 0

solved by projected coordinate descent with a tiny ridge for tie-breaking.
An exhaustive active-set enumeration solver over all 2^m subsets serves as an
independent cross-check for small contact counts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .errors import (
    EmptyContactSet,
    InfeasibleReaction,
    MaxIterationsExceeded,
    NoCandidateFeasible,
    PenetrationExceeded,
    TooManyContacts,
)
from .obstacles import Scene, outer_normal, signed_distances

if TYPE_CHECKING:
    from .stepper import StemState


@dataclass
class ContactSet:
    """Grown nodes lying within the contact band of the scene."""

    nodes: np.ndarray
    arclengths: np.ndarray
    normals: np.ndarray
    phi: np.ndarray
    tip: bool

    @property
    def size(self) -> int:
        return int(self.nodes.size)


def detect_contacts(
    stem: "StemState",
    scene: Scene,
    eps_contact: float,
    eps_penetration: float | None = None,
) -> ContactSet:
    """Nodes with signed distance at most eps_contact.

    Every grown node must satisfy phi >= -eps_penetration; a deeper node is a
    hard failure. Normals are queried in a band wide enough to cover both
    tolerances.
    """
    if eps_penetration is None:
        eps_penetration = 0.05 * stem.ds
    gamma = stem.gamma[: stem.n_grown + 1]
    phi = signed_distances(scene, gamma)
    worst = int(np.argmin(phi)) if phi.size else 0
    if phi.size and phi[worst] < -eps_penetration:
        raise PenetrationExceeded(worst, float(-phi[worst]), eps_penetration)
    mask = phi <= eps_contact
    nodes = np.nonzero(mask)[0]
    band = max(10.0 * eps_contact, 2.0 * eps_penetration)
    normals = np.array(
        [outer_normal(scene, gamma[v], band_width=band) for v in nodes]
    ).reshape(nodes.size, 3)
    return ContactSet(
        nodes=nodes,
        arclengths=stem.s[nodes] if nodes.size else np.zeros(0),
        normals=normals,
        phi=phi[nodes],
        tip=bool(nodes.size and nodes[-1] == stem.n_grown),
    )


@dataclass
class ConstraintSystem:
    """Discrete contact constraints at one instant.

    Row j acts on the density through the arm field a_j(sigma_i) =
    (gamma_j - gamma_i) x n_j, supported on nodes below the contact. The
    right-hand side b folds in the growth-law drive, the tip elongation term,
    and the penetration pushback. `weights` are the energy weights
    ds * exp(beta (t - sigma_i)); the Gram matrix lives in the inverse metric.
    """

    contacts: ContactSet
    gamma: np.ndarray
    s: np.ndarray
    ds: float
    t: float
    beta: float
    b: np.ndarray
    weights: np.ndarray
    tip_row: int | None
    tip_tangent: np.ndarray | None
    _gram: np.ndarray | None = field(default=None, repr=False)

    @property
    def metric_weights(self) -> np.ndarray:
        """Quadrature-times-decay weights ds * exp(-beta (t - sigma_i))."""
        return self.ds * np.exp(-self.beta * (self.t - self.s))

    def row(self, j: int) -> np.ndarray:
        """Materialize a_j(sigma_i) for every node i."""
        v = int(self.contacts.nodes[j])
        out = np.zeros((self.s.size, 3))
        out[:v] = np.cross(self.gamma[v] - self.gamma[:v], self.contacts.normals[j])
        return out

    def rows(self) -> np.ndarray:
        return np.stack([self.row(j) for j in range(self.contacts.size)])

    def gram(self) -> np.ndarray:
        if self._gram is None:
            self._gram = _gram_matrix(self)
        return self._gram


def _gram_matrix(system: ConstraintSystem) -> np.ndarray:
    """G_jl = sum_i w_i <a_j(sigma_i), a_l(sigma_i)>, w_i = ds e^{-beta(t-s_i)}.

    Expanding the arms around the node positions turns the sum into prefix
    sums cut off at min(node_j, node_l), which keeps assembly O(n + m^2)
    instead of O(m^2 n).
    """
    nodes = system.contacts.nodes
    nrm = system.contacts.normals
    gam = system.gamma
    w = system.metric_weights
    m = nodes.size

    u = np.cross(gam[nodes], nrm)
    s0 = np.concatenate([[0.0], np.cumsum(w)])
    s1 = np.concatenate([np.zeros((1, 3)), np.cumsum(w[:, None] * gam, axis=0)])
    sq = np.concatenate([[0.0], np.cumsum(w * np.einsum("id,id->i", gam, gam))])
    s2 = np.concatenate(
        [
            np.zeros((1, 3, 3)),
            np.cumsum(np.einsum("i,ia,ib->iab", w, gam, gam), axis=0),
        ]
    )

    cut = np.minimum.outer(nodes, nodes)
    term1 = s0[cut] * (u @ u.T)
    # <u_j, S1_c x n_l> written as <S1_c, n_l x u_j>
    x = np.cross(nrm[None, :, :], u[:, None, :])
    term2 = np.einsum("jld,jld->jl", s1[cut], x)
    term4 = sq[cut] * (nrm @ nrm.T) - np.einsum(
        "jlab,ja,lb->jl", s2[cut], nrm, nrm
    )
    g = term1 - term2 - term2.T + term4
    return 0.5 * (g + g.T)


def linear_rates(system: ConstraintSystem, density: np.ndarray) -> np.ndarray:
    """Per-row first-order normal velocity produced by a rotation density.

    Quadrature matches the cumulative-rotation rule of the stepper
    (left-endpoint rectangles); the tip row adds the elongation term.
    """
    nodes = system.contacts.nodes
    nrm = system.contacts.normals
    gam = system.gamma
    ds = system.ds

    p1 = np.concatenate([np.zeros((1, 3)), np.cumsum(ds * density, axis=0)])
    vx = np.concatenate(
        [np.zeros((1, 3)), np.cumsum(ds * np.cross(density, gam), axis=0)]
    )
    swirl = np.cross(p1[nodes], gam[nodes]) - vx[nodes]
    vals = np.einsum("jd,jd->j", swirl, nrm)
    if system.tip_row is not None:
        vals[system.tip_row] += float(system.tip_tangent @ nrm[system.tip_row])
    return vals


def assemble_constraints(
    stem: "StemState",
    contacts: ContactSet,
    law,
    kappa: float,
    dt: float,
) -> ConstraintSystem:
    """Build the constraint system for the current state.

    b_j = pushback - (drive rate), so the constraint (A omega)_j >= b_j says
    the reaction must cancel whatever inward velocity the growth law alone
    would produce, plus expel any existing penetration at rate
    kappa * depth / dt.
    """
    if contacts.size == 0:
        raise EmptyContactSet("assemble_constraints needs at least one contact")
    from .growth import psi_field

    n = stem.n_grown
    gam = stem.gamma[: n + 1]
    s = stem.s[: n + 1]
    t = stem.t
    tip_row = int(contacts.size - 1) if contacts.tip else None
    tip_tangent = stem.k[n].copy() if contacts.tip else None

    system = ConstraintSystem(
        contacts=contacts,
        gamma=gam,
        s=s,
        ds=stem.ds,
        t=t,
        beta=law.beta,
        b=np.zeros(contacts.size),
        weights=stem.ds * np.exp(law.beta * (t - s)),
        tip_row=tip_row,
        tip_tangent=tip_tangent,
    )
    psi = psi_field(law, t, s, gam, stem.k[: n + 1])
    drive = linear_rates(system, psi)
    pushback = kappa * np.maximum(0.0, -contacts.phi) / dt
    system.b = pushback - drive
    return system


@dataclass
class ReactionSolution:
    mu: np.ndarray
    omega: np.ndarray
    slack: np.ndarray
    energy: float
    kkt_residual: float
    sweeps: int

    @property
    def active(self) -> np.ndarray:
        return self.mu > 0.0


def density_from_multipliers(system: ConstraintSystem, mu: np.ndarray) -> np.ndarray:
    """Reaction density omega_i = e^{-beta(t-s_i)} sum_j mu_j a_j(sigma_i).

    Evaluated with suffix sums over contacts above each node.
    """
    nodes = system.contacts.nodes
    nrm = system.contacts.normals
    gam = system.gamma
    m = nodes.size
    u = np.cross(gam[nodes], nrm)

    suf_u = np.zeros((m + 1, 3))
    suf_n = np.zeros((m + 1, 3))
    np.cumsum((mu[:, None] * u)[::-1], axis=0, out=suf_u[1:])
    np.cumsum((mu[:, None] * nrm)[::-1], axis=0, out=suf_n[1:])
    suf_u = suf_u[::-1]
    suf_n = suf_n[::-1]

    idx = np.searchsorted(nodes, np.arange(gam.shape[0]), side="right")
    rho = suf_u[idx] - np.cross(gam, suf_n[idx])
    decay = np.exp(-system.beta * (system.t - system.s))
    return decay[:, None] * rho


def _cd_sweeps(
    g: np.ndarray,
    b: np.ndarray,
    mu: np.ndarray,
    order: np.ndarray,
    ridge: float,
    scale: float,
    budget: int,
) -> tuple[float, int]:
    """Run up to budget cyclic projected-descent sweeps in place.

    Returns the ridged projected-gradient residual and the sweeps consumed;
    stops early once the residual confirms below scale against a fresh
    gradient.
    """
    diag = np.diag(g) + ridge
    r = g @ mu - b
    resid = np.inf
    for sweep in range(1, budget + 1):
        for j in order:
            grad = r[j] + ridge * mu[j]
            new = mu[j] - grad / diag[j]
            if new < 0.0:
                new = 0.0
            d = new - mu[j]
            if d != 0.0:
                mu[j] = new
                r += d * g[:, j]
        grad = r + ridge * mu
        resid = float(np.max(np.abs(mu - np.maximum(0.0, mu - grad))))
        if resid <= scale:
            r = g @ mu - b
            grad = r + ridge * mu
            resid = float(np.max(np.abs(mu - np.maximum(0.0, mu - grad))))
            if resid <= scale:
                return resid, sweep
    return resid, budget


def solve_reaction(
    system: ConstraintSystem,
    tol: float = 1e-10,
    max_sweeps: int = 10_000,
    ridge: float = 1e-12,
    warm_start: np.ndarray | None = None,
) -> ReactionSolution:
    """Minimize the weighted reaction energy subject to the contact constraints.

    Solves the nonnegative dual by projected coordinate descent, warm-startable
    with the multipliers of a nearby solve. Raises when a constraint row with
    no leverage demands positive velocity (a jam-adjacent configuration) or
    when the sweep budget runs out.
    """
    m = system.contacts.size
    if m == 0:
        raise EmptyContactSet("solve_reaction needs at least one contact")
    g = system.gram()
    b = system.b
    diag = np.diag(g)
    bscale = 1.0 + float(np.max(np.abs(b)))
    dead = diag <= 1e-20 * max(1.0, float(np.max(diag)))
    if np.any(dead & (b > 1e-12 * bscale)):
        j = int(np.nonzero(dead & (b > 1e-12 * bscale))[0][0])
        raise InfeasibleReaction(
            f"contact row {j} (node {int(system.contacts.nodes[j])}) has no "
            f"leverage but demands rate {b[j]:.3e}"
        )

    mu = np.zeros(m)
    if warm_start is not None and warm_start.shape == (m,):
        mu = np.maximum(warm_start, 0.0)
        mu[dead] = 0.0
    order = np.nonzero(~dead)[0]
    scale = tol * bscale

    def certificate(x: np.ndarray) -> float:
        """Worst violation across optimality and complementarity, as a ratio.

        Optimality is the projected-gradient residual over scale;
        complementarity is max |x_j slack_j| relative to the product of the
        data and multiplier magnitudes — the sharpest bound evaluating
        G x - b in double precision can certify. A value <= 1 means the
        candidate is acceptable on both counts.
        """
        slack = g @ x - b
        opt = float(np.max(np.abs(x - np.maximum(0.0, x - slack)))) / scale
        comp_scale = 1e-9 * bscale * (1.0 + float(np.max(x)))
        comp = float(np.max(np.abs(x * slack))) / comp_scale
        return max(opt, comp)

    # The descent discovers the active face; on ill-conditioned faces its tail
    # converges slowly, so after every chunk of sweeps the exact face system is
    # solved and the candidate accepted once the unridged certificate clears
    # the tolerance.
    chunk = 25
    sweeps = 0
    while True:
        _, used = _cd_sweeps(g, b, mu, order, ridge, scale, min(chunk, max_sweeps - sweeps))
        sweeps += used
        cand = _polish_active_set(g, b, mu)
        cert_c = certificate(cand)
        cert_m = cert_c if cand is mu else certificate(mu)
        if cert_c <= min(1.0, cert_m):
            mu = cand
            break
        if cert_m <= 1.0:
            break
        if cand is not mu and cert_c < cert_m:
            mu = cand
        if sweeps >= max_sweeps:
            worst = min(cert_c, cert_m)
            raise MaxIterationsExceeded(worst * scale, scale, sweeps)

    slack = g @ mu - b
    resid = float(np.max(np.abs(mu - np.maximum(0.0, mu - slack))))
    omega = density_from_multipliers(system, mu)
    energy = 0.5 * float(mu @ (g @ mu))
    return ReactionSolution(
        mu=mu,
        omega=omega,
        slack=slack,
        energy=energy,
        kkt_residual=resid,
        sweeps=sweeps,
    )


def _polish_active_set(g: np.ndarray, b: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Re-solve the equality system on the active set found by the descent.

    The descent iterate satisfies the ridged optimality conditions, which
    leaves a slack offset of order ridge times mu on active rows; solving the
    unridged face system removes it. The face system is Jacobi-equilibrated
    and the solution refined so the active-row slack (and with it the
    complementarity product) reaches round-off level even when the face is
    ill-conditioned. The polished point is kept only if it stays dual and
    primal feasible.
    """
    act = np.nonzero(mu > 0.0)[0]
    if act.size == 0:
        return mu
    sub = g[np.ix_(act, act)]
    d = np.sqrt(np.maximum(np.diag(sub), 1e-300))
    scaled = sub / d[:, None] / d[None, :]
    rhs = b[act] / d
    y, *_ = np.linalg.lstsq(scaled, rhs, rcond=None)
    for _ in range(2):
        res = rhs - scaled @ y
        y += np.linalg.lstsq(scaled, res, rcond=None)[0]
    mu_a = y / d
    if float(np.min(mu_a)) < -1e-12 * (1.0 + float(np.max(np.abs(mu_a)))):
        return mu
    cand = np.zeros_like(mu)
    cand[act] = np.maximum(mu_a, 0.0)
    slack = g @ cand - b
    if float(np.min(slack)) < -1e-9 * (1.0 + float(np.max(np.abs(b)))):
        return mu
    return cand


def check_kkt(system: ConstraintSystem, sol: ReactionSolution) -> dict:
    """Certificate residuals for an accepted solve.

    Stationarity is re-verified from materialized rows for small systems
    (independent of the suffix-sum evaluation path).
    """
    g = system.gram()
    slack = g @ sol.mu - system.b
    comp = float(np.max(np.abs(sol.mu * slack))) if sol.mu.size else 0.0
    feas = float(np.min(slack)) if slack.size else 0.0
    dual = float(np.min(sol.mu)) if sol.mu.size else 0.0
    out = {
        "complementarity": comp,
        "feasibility": feas,
        "dual_sign": dual,
        "stationarity": 0.0,
    }
    if system.contacts.size <= 64:
        rows = system.rows()
        decay = np.exp(-system.beta * (system.t - system.s))
        rebuilt = decay[:, None] * np.einsum("j,jid->id", sol.mu, rows)
        out["stationarity"] = float(np.max(np.abs(rebuilt - sol.omega)))
    return out


@dataclass
class OracleSolution:
    mu: np.ndarray
    omega: np.ndarray
    slack: np.ndarray
    energy: float
    active: np.ndarray
    degenerate: bool
    n_candidates: int


def oracle_solve_reaction(
    system: ConstraintSystem, max_contacts: int = 12
) -> OracleSolution:
    """Exhaustive active-set enumeration solve, for cross-checking.

    Tries every subset of contacts as the active set, solves the equality
    system on it, and keeps the candidates that are primal and dual feasible.
    Convexity makes every survivor a global minimizer; disagreement between
    survivors (or a near-singular active block, or a vanishing active
    multiplier) marks the system as degenerate.
    """
    m = system.contacts.size
    if m == 0:
        raise EmptyContactSet("oracle needs at least one contact")
    if m > max_contacts:
        raise TooManyContacts(f"{m} contacts exceed the enumeration limit {max_contacts}")

    rows = system.rows()
    w = system.metric_weights
    flat = rows.reshape(m, -1)
    g = (rows * w[None, :, None]).reshape(m, -1) @ flat.T
    g = 0.5 * (g + g.T)
    b = system.b
    feas_tol = 1e-8 * (1.0 + float(np.max(np.abs(b))))

    candidates = []
    degenerate = False
    for mask in range(1 << m):
        act = [j for j in range(m) if mask >> j & 1]
        mu = np.zeros(m)
        if act:
            sub = g[np.ix_(act, act)]
            try:
                mu_a = np.linalg.solve(sub, b[act])
            except np.linalg.LinAlgError:
                mu_a, *_ = np.linalg.lstsq(sub, b[act], rcond=None)
                if np.max(np.abs(sub @ mu_a - b[act])) > feas_tol:
                    continue
                degenerate = True
            if np.min(mu_a) < -1e-10 * (1.0 + float(np.max(np.abs(mu_a)))):
                continue
            mu[act] = np.maximum(mu_a, 0.0)
            if np.linalg.cond(sub) > 1e10:
                degenerate = True
        slack = g @ mu - b
        if np.min(slack) < -feas_tol:
            continue
        candidates.append((mu, slack))
    if not candidates:
        raise NoCandidateFeasible(f"no active set among 2^{m} is feasible")

    decay = np.exp(-system.beta * (system.t - system.s))
    omegas = [
        decay[:, None] * np.einsum("j,jid->id", mu, rows) for mu, _ in candidates
    ]
    spread = 0.0
    for om in omegas[1:]:
        spread = max(spread, float(np.max(np.abs(om - omegas[0]))))
    if len(candidates) > 1:
        supports = {tuple(np.nonzero(mu > 0)[0]) for mu, _ in candidates}
        if len(supports) > 1:
            degenerate = True
    if spread > 1e-7 * (1.0 + float(np.max(np.abs(omegas[0])))):
        degenerate = True

    best = int(np.argmin([float(mu @ mu) for mu, _ in candidates]))
    mu, slack = candidates[best]
    if mu.size and np.any(mu > 0):
        if float(np.min(mu[mu > 0])) < 1e-8 * (1.0 + float(np.max(mu))):
            degenerate = True
    return OracleSolution(
        mu=mu,
        omega=omegas[best],
        slack=slack,
        energy=0.5 * float(mu @ (g @ mu)),
        active=mu > 0.0,
        degenerate=degenerate,
        n_candidates=len(candidates),
    )


def reaction_velocity(stem: "StemState", omega: np.ndarray, s: float) -> np.ndarray:
    """Velocity of the material point at arclength s under a rotation density.

    v(s) = integral over [0, s] of omega(sigma) x (gamma(s) - gamma(sigma)),
    left-endpoint rectangles, linear interpolation of positions inside a cell.
    """
    n = stem.n_grown
    if s < -1e-12 or s > stem.t + 1e-9 * max(1.0, stem.t):
        raise ValueError(f"arclength {s} outside the grown range [0, {stem.t}]")
    s = min(max(s, 0.0), stem.t)
    ds = stem.ds
    gam = stem.gamma
    whole = min(int(np.floor(s / ds + 1e-12)), n)
    frac = s - whole * ds
    pos = gam[whole]
    if frac > 0.0 and whole < n:
        pos = gam[whole] + (frac / ds) * (gam[whole + 1] - gam[whole])
    v = np.zeros(3)
    if whole > 0:
        v = ds * np.sum(np.cross(omega[:whole], pos - gam[:whole]), axis=0)
    if frac > 0.0:
        v = v + frac * np.cross(omega[whole], pos - gam[whole])
    return v
