"""Fractional Sobolev energies of sphere maps.

The seminorm E_{s,p}(u, Omega) is the double integral over Omega x Omega
of |u(x) - u(y)|^p / |x - y|^(n + sp), with chordal (ambient Euclidean)
distances throughout. Two independent evaluation routes:

* energy_mc: unbiased stratified Monte Carlo. x is uniform in the region;
  y is sampled in dyadic geodesic shells around x with exact shell-measure
  weights. The innermost ball (geodesic radius pi * 2^-J) is never
  sampled; its contribution is bounded in closed form from the map's
  Lipschitz hint and carried as a certified remainder.
* energy_quadrature: a deterministic product rule (outer low-discrepancy
  lattice, inner geodesic-polar grid with dyadic radial bands accumulating
  at the singularity) used as a cross-checking oracle on the whole sphere.

Determinism: estimates are bit-identical given (map, params, region, n,
seed); every stratum draws from its own counter-based substream and the
reduction order is fixed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import EstimationError, ParameterError
from .geometry import (
    GeodesicBall,
    cap_area,
    geodesic_distances,
    geodesic_step,
    sample_shell_radii,
    sample_uniform_many,
    shell_measure,
    sphere_area,
    sphere_lattice,
    tangent_directions,
)
from .maps import SphereMap
from . import _kernels

DEFAULT_SHELLS = 40
QUAD_MIN_BAND_EXP = 34  # inner radial grid reaches pi * 2^-34
QUAD_PAIR_BUDGET = 10 ** 9


# ---------------------------------------------------------------------------
# Parameters and regions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnergyParams:
    """Exponents of E_{s,p} on S^n; critical pins sp = n."""

    s: float
    p: float
    n: int
    critical: bool = False

    def __post_init__(self):
        if not (0.0 < self.s < 1.0):
            raise ParameterError(f"s must lie in (0,1), got {self.s}")
        if self.p <= 1.0:
            raise ParameterError(f"p must exceed 1, got {self.p}")
        if self.n not in (2, 3):
            raise ParameterError(f"unsupported sphere dimension {self.n}")
        if self.critical and abs(self.s * self.p - self.n) > 1e-12:
            raise ParameterError(
                f"critical regime needs s*p = n, got {self.s * self.p} != {self.n}"
            )

    @property
    def kernel_exponent(self) -> float:
        return self.n + self.s * self.p


@dataclass(frozen=True)
class Region:
    """Integration region on S^dim: the whole sphere, a geodesic ball, a
    ball complement, or a concentric ball difference (outer minus inner)."""

    variant: str
    dim: int
    outer: GeodesicBall | None = None
    inner: GeodesicBall | None = None

    def __post_init__(self):
        if self.variant not in ("whole", "ball", "complement", "difference"):
            raise ParameterError(f"unknown region variant {self.variant!r}")
        if self.variant != "whole":
            if self.outer is None:
                raise ParameterError("region needs its ball")
            if self.outer.center.dim != self.dim:
                raise ParameterError("region ball does not live on S^dim")
        if self.variant == "difference":
            if self.inner is None:
                raise ParameterError("difference region needs an inner ball")
            gap = geodesic_distances(
                self.inner.center.coords[None, :], self.outer.center.coords
            )[0]
            if gap > 1e-12:
                raise ParameterError("difference region supports concentric balls only")
            if not (self.inner.radius < self.outer.radius):
                raise ParameterError("difference region needs inner radius < outer radius")
        if self.measure() <= 0.0:
            raise ParameterError("region has no measure")

    def measure(self) -> float:
        if self.variant == "whole":
            return sphere_area(self.dim)
        if self.variant == "ball":
            return cap_area(self.dim, self.outer.radius)
        if self.variant == "complement":
            return sphere_area(self.dim) - cap_area(self.dim, self.outer.radius)
        return cap_area(self.dim, self.outer.radius) - cap_area(self.dim, self.inner.radius)

    def sample(self, n: int, rng):
        """n points uniform in the region, shape (n, dim+1)."""
        if self.variant == "whole":
            return sample_uniform_many(self.dim, n, rng)
        lo, hi = self._radial_range()
        c = self.outer.center.coords
        base = np.broadcast_to(c, (n, c.shape[0])).copy()
        dirs = tangent_directions(base, rng)
        t = sample_shell_radii(self.dim, lo, hi, n, rng)
        return geodesic_step(base, dirs, t)

    def contains(self, pts):
        if self.variant == "whole":
            return np.ones(pts.shape[0], dtype=bool)
        lo, hi = self._radial_range()
        d = geodesic_distances(pts, self.outer.center.coords)
        return (d >= lo) & (d <= hi)

    def _radial_range(self):
        if self.variant == "ball":
            return 0.0, self.outer.radius
        if self.variant == "complement":
            return self.outer.radius, float(np.pi)
        return self.inner.radius, self.outer.radius

    def to_dict(self):
        out = {"variant": self.variant, "dim": self.dim}
        if self.outer is not None:
            out["outer"] = {"center": self.outer.center.coords.tolist(),
                            "radius": self.outer.radius}
        if self.inner is not None:
            out["inner"] = {"center": self.inner.center.coords.tolist(),
                            "radius": self.inner.radius}
        return out


def whole_sphere(dim: int) -> Region:
    return Region("whole", dim)


def ball_region(ball: GeodesicBall) -> Region:
    return Region("ball", ball.center.dim, outer=ball)


def complement_region(ball: GeodesicBall) -> Region:
    return Region("complement", ball.center.dim, outer=ball)


def difference_region(outer: GeodesicBall, inner: GeodesicBall) -> Region:
    return Region("difference", outer.center.dim, outer=outer, inner=inner)


@dataclass(frozen=True)
class EnergyEstimate:
    """A Monte Carlo energy value with its provenance."""

    value: float
    std_error: float
    n_samples: int
    params: EnergyParams
    region: Region
    seed: int
    tail_bound: float
    strata_profile: list = field(repr=False)

    def to_json(self) -> str:
        return json.dumps(
            {
                "value": self.value,
                "std_error": self.std_error,
                "n_samples": self.n_samples,
                "s": self.params.s,
                "p": self.params.p,
                "n": self.params.n,
                "region": self.region.to_dict(),
                "seed": self.seed,
                "tail_bound": self.tail_bound,
                "strata": self.strata_profile,
            },
            sort_keys=True,
        )


# ---------------------------------------------------------------------------
# Monte Carlo estimator
# ---------------------------------------------------------------------------

def energy_mc(u: SphereMap, params: EnergyParams, region: Region, n: int,
              rng, n_shells: int = DEFAULT_SHELLS) -> EnergyEstimate:
    """Unbiased stratified MC estimate of E_{s,p}(u, region).

    rng is an integer seed or a numpy Generator (a Generator contributes a
    seed drawn from its state). Total pair budget n splits evenly over the
    dyadic shells; the unsampled innermost ball contributes only through
    tail_bound, computed from the map's lipschitz_hint.
    """
    if u.domain_dim != params.n:
        raise ParameterError(
            f"map domain S^{u.domain_dim} does not match params.n = {params.n}"
        )
    if region.dim != params.n:
        raise ParameterError("region dimension does not match params.n")
    if n < 1_000:
        raise ParameterError("energy_mc needs at least 1000 samples")
    seed = int(rng.integers(2 ** 62)) if hasattr(rng, "integers") else int(rng)
    if (region.variant == "whole" and u.supports is not None
            and u.basepoint is not None):
        return _energy_mc_split(u, params, region, n, seed, n_shells)
    mdim = params.n
    measure = region.measure()
    exponent = params.kernel_exponent
    edges = np.pi * 2.0 ** (-np.arange(n_shells + 1, dtype=np.float64))
    t_min = float(edges[-1])
    per = n // n_shells
    extra = n - per * n_shells
    total = 0.0
    var_total = 0.0
    profile = []
    for j in range(n_shells):
        t_hi, t_lo = float(edges[j]), float(edges[j + 1])
        n_j = per + (1 if j < extra else 0)
        if n_j < 2:
            raise ParameterError("too few samples per stratum; raise n")
        gen = np.random.Generator(
            np.random.Philox(key=np.array([seed, j], dtype=np.uint64))
        )
        w_j = shell_measure(mdim, t_lo, t_hi)
        mean_j, var_j = _stratum_moments(
            u, params, region, n_j, gen, t_lo, t_hi, exponent
        )
        contrib = measure * w_j * mean_j
        se2 = (measure * w_j) ** 2 * var_j / n_j
        total += contrib
        var_total += se2
        profile.append({
            "j": j, "t_lo": t_lo, "t_hi": t_hi, "weight": w_j,
            "n": n_j, "contribution": contrib, "std_error": float(np.sqrt(se2)),
        })
    tail = lipschitz_tail_bound(u, params, measure, t_min)
    return EnergyEstimate(
        value=float(total), std_error=float(np.sqrt(var_total)), n_samples=n,
        params=params, region=region, seed=seed, tail_bound=tail,
        strata_profile=profile,
    )


def _energy_mc_split(u, params, region, n, seed, n_shells) -> EnergyEstimate:
    """Whole-sphere estimate for maps constant outside declared supports.

    With W the union of support balls, pairs outside W x W contribute
    nothing, so E(u, S^n) = E(W x W) + 2 E(W x W^c) exactly. One pass
    samples x uniformly in W (stratified per ball and per dyadic shell in
    the step length) and weights each pair by 2 - 1{y in W}. This removes
    the dead weight of samples far from small supports, where the plain
    estimator's variance blows up.
    """
    balls = list(u.supports)
    if not balls:
        return EnergyEstimate(  # constant map: the energy vanishes exactly
            value=0.0, std_error=0.0, n_samples=n, params=params,
            region=region, seed=seed, tail_bound=0.0, strata_profile=[],
        )
    mdim = params.n
    exponent = params.kernel_exponent
    areas = np.array([cap_area(mdim, ball.radius) for ball in balls])
    m_w = float(np.sum(areas))
    centers = np.array([ball.center.coords for ball in balls])
    radii = np.array([ball.radius for ball in balls])
    alloc = _largest_remainder(n * areas / m_w)
    edges = np.pi * 2.0 ** (-np.arange(n_shells + 1, dtype=np.float64))
    t_min = float(edges[-1])
    total = 0.0
    var_total = 0.0
    profile = []
    for i, ball in enumerate(balls):
        n_i = int(alloc[i])
        per = n_i // n_shells
        extra = n_i - per * n_shells
        src = ball_region(ball)
        for j in range(n_shells):
            t_hi, t_lo = float(edges[j]), float(edges[j + 1])
            n_ij = per + (1 if j < extra else 0)
            if n_ij < 2:
                raise ParameterError("too few samples per stratum; raise n")
            gen = np.random.Generator(np.random.Philox(
                key=np.array([seed, (i + 1) * 2 ** 32 + j], dtype=np.uint64)
            ))
            w_j = shell_measure(mdim, t_lo, t_hi)
            mean_ij, var_ij = _split_stratum_moments(
                u, params, src, centers, radii, n_ij, gen, t_lo, t_hi, exponent
            )
            contrib = areas[i] * w_j * mean_ij
            se2 = (areas[i] * w_j) ** 2 * var_ij / n_ij
            total += contrib
            var_total += se2
            profile.append({
                "ball": i, "j": j, "t_lo": t_lo, "t_hi": t_hi, "weight": w_j,
                "n": n_ij, "contribution": contrib,
                "std_error": float(np.sqrt(se2)),
            })
    tail = lipschitz_tail_bound(u, params, 2.0 * m_w, t_min)
    return EnergyEstimate(
        value=float(total), std_error=float(np.sqrt(var_total)), n_samples=n,
        params=params, region=region, seed=seed, tail_bound=tail,
        strata_profile=profile,
    )


def _split_stratum_moments(u, params, src, centers, radii, n_ij, gen,
                           t_lo, t_hi, exponent, chunk: int = 262_144):
    """Moments of K(x,y) (2 - 1{y in W}) with x uniform in one support ball."""
    p = params.p
    count = 0
    acc = 0.0
    acc2 = 0.0
    while count < n_ij:
        m = min(chunk, n_ij - count)
        x = src.sample(m, gen)
        dirs = tangent_directions(x, gen)
        t = sample_shell_radii(params.n, t_lo, t_hi, m, gen)
        y = geodesic_step(x, dirs, t)
        in_w = np.zeros(m, dtype=bool)
        for c, r in zip(centers, radii):
            in_w |= geodesic_distances(y, c) <= r
        du = np.linalg.norm(u.eval_many(x) - u.eval_many(y), axis=1)
        chord = 2.0 * np.sin(0.5 * t)
        vals = du ** p / chord ** exponent * np.where(in_w, 1.0, 2.0)
        acc += float(np.sum(vals))
        acc2 += float(np.sum(vals * vals))
        count += m
    mean = acc / n_ij
    var = max(acc2 / n_ij - mean * mean, 0.0) * n_ij / max(n_ij - 1, 1)
    return mean, var


def _largest_remainder(target):
    """Integer allocation summing to round(sum(target)), proportional."""
    floor = np.floor(target).astype(int)
    rem = target - floor
    short = int(round(float(np.sum(target)))) - int(np.sum(floor))
    order = np.argsort(-rem, kind="stable")
    floor[order[:short]] += 1
    return floor


def _stratum_moments(u, params, region, n_j, gen, t_lo, t_hi, exponent,
                     chunk: int = 262_144):
    """Sample mean and variance of K(x,y) 1_region(y) on one shell."""
    p = params.p
    count = 0
    acc = 0.0
    acc2 = 0.0
    while count < n_j:
        m = min(chunk, n_j - count)
        x = region.sample(m, gen)
        dirs = tangent_directions(x, gen)
        t = sample_shell_radii(params.n, t_lo, t_hi, m, gen)
        y = geodesic_step(x, dirs, t)
        keep = region.contains(y)
        vals = np.zeros(m)
        if np.any(keep):
            du = np.linalg.norm(u.eval_many(x[keep]) - u.eval_many(y[keep]), axis=1)
            chord = 2.0 * np.sin(0.5 * t[keep])
            vals[keep] = du ** p / chord ** exponent
        acc += float(np.sum(vals))
        acc2 += float(np.sum(vals * vals))
        count += m
    mean = acc / n_j
    var = max(acc2 / n_j - mean * mean, 0.0) * n_j / max(n_j - 1, 1)
    return mean, var


def lipschitz_tail_bound(u: SphereMap, params: EnergyParams, measure: float,
                         eps: float) -> float:
    """Certified bound on the pair-integral over geodesic gaps below eps.

    With L the geodesic Lipschitz constant: |u(x)-u(y)|^p <= L^p t^p while
    the chordal kernel obeys |x-y| >= (2/pi) t, so the inner integral is at
    most sigma_{n-1} L^p (pi/2)^(n+sp) eps^((1-s)p) / ((1-s)p).
    """
    if u.lipschitz_hint is None:
        raise ParameterError(
            "map carries no lipschitz_hint; cannot certify the near-diagonal tail"
        )
    L = float(u.lipschitz_hint)
    if L == 0.0:
        return 0.0
    n, s, p = params.n, params.s, params.p
    sigma = sphere_area(n - 1)
    power = (1.0 - s) * p
    return (
        measure * sigma * L ** p * (np.pi / 2.0) ** params.kernel_exponent
        * eps ** power / power
    )


# ---------------------------------------------------------------------------
# Deterministic quadrature oracle
# ---------------------------------------------------------------------------

def energy_quadrature(u: SphereMap, params: EnergyParams, resolution: int,
                      angular: int | None = None) -> float:
    """Deterministic product-rule value of E_{s,p}(u, S^n).

    resolution counts outer lattice points; the inner geodesic-polar rule
    uses 4-point Gauss-Legendre on dyadic radial bands down to
    pi * 2^-34 and an angular lattice (sqrt-of-resolution points by
    default). Converges to the Monte Carlo limit as resolution grows.
    """
    if u.domain_dim != params.n:
        raise ParameterError("map domain does not match params.n")
    n = params.n
    n_ang = int(angular if angular is not None else max(48, round(resolution ** 0.5)))
    n_bands = QUAD_MIN_BAND_EXP
    n_gauss = 4
    pairs = resolution * n_ang * n_bands * n_gauss
    if pairs > QUAD_PAIR_BUDGET:
        raise ParameterError(
            f"quadrature would evaluate {pairs:.2e} pairs, over the 1e9 budget"
        )
    X = sphere_lattice(n, resolution)
    frames = _kernels.oriented_frames(X)
    if n == 2:
        ang = 2.0 * np.pi * (np.arange(n_ang) + 0.5) / n_ang
        omega = np.column_stack([np.cos(ang), np.sin(ang)])
        w_ang = 2.0 * np.pi / n_ang
    else:
        omega = sphere_lattice(2, n_ang)
        w_ang = 4.0 * np.pi / n_ang
    # unit tangents at every outer point for every angular node: (N, A, d)
    dirs = np.einsum("ndm,am->nad", frames, omega)
    ux = u.eval_many(X)
    nodes, weights = np.polynomial.legendre.leggauss(n_gauss)
    exponent = params.kernel_exponent
    p = params.p
    total = 0.0
    outer_w = sphere_area(n) / resolution
    for band in range(n_bands):
        hi = np.pi * 2.0 ** (-band)
        lo = 0.5 * hi
        t = 0.5 * (hi - lo) * (nodes + 1.0) + lo
        w_t = 0.5 * (hi - lo) * weights * np.sin(t) ** (n - 1)
        for ti, wi in zip(t, w_t):
            Y = np.cos(ti) * X[:, None, :] + np.sin(ti) * dirs
            uy = u.eval_many(Y.reshape(-1, n + 1)).reshape(resolution, n_ang, -1)
            du = np.linalg.norm(uy - ux[:, None, :], axis=2)
            chord = 2.0 * np.sin(0.5 * ti)
            total += outer_w * wi * w_ang * float(np.sum(du ** p)) / chord ** exponent
    return total


# ---------------------------------------------------------------------------
# Inequality checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GluingReport:
    """Smallest constant making the ball/annulus gluing inequality hold."""

    c_star: float
    c_star_std_error: float
    holds: bool
    lhs: EnergyEstimate
    ball_term: EnergyEstimate
    annulus_term: EnergyEstimate
    eta: float
    rho: float


def check_gluing_bound(u: SphereMap, A: Region, eta: float, rho: float,
                       params: EnergyParams, center, n: int = 200_000,
                       seed: int = 0) -> GluingReport:
    """Check E(u,A) <= (1 + C/(1-eta)^(sp+1)) E(u,B(rho))
                      + (1 + C eta^m/(1-eta)) E(u, A minus B(eta rho)).

    The ball sits at the given center; the annulus B(rho) minus B(eta rho)
    must lie inside A. Reports the smallest C >= 0 that makes the
    inequality hold for the estimated energies, with propagated error, and
    whether some C <= 1e6 suffices within 3 standard errors.
    """
    if not (0.0 < eta < 1.0):
        raise ParameterError(f"eta must lie in (0,1), got {eta}")
    cpt = np.asarray(center.coords if hasattr(center, "coords") else center, float)
    ball_rho = GeodesicBall(_as_point(cpt), rho)
    ball_eta = GeodesicBall(_as_point(cpt), eta * rho)
    if A.variant == "whole":
        rest = complement_region(ball_eta)
    elif A.variant == "ball":
        gap = geodesic_distances(cpt[None, :], A.outer.center.coords)[0]
        if gap > 1e-12 or rho > A.outer.radius:
            raise ParameterError("annulus is not inside the region A")
        rest = difference_region(A.outer, ball_eta)
    else:
        raise ParameterError("gluing check supports whole-sphere or ball regions")
    e_a = energy_mc(u, params, A, n, seed)
    e_ball = energy_mc(u, params, ball_region(ball_rho), n, seed + 1)
    e_rest = energy_mc(u, params, rest, n, seed + 2)
    sp = params.s * params.p
    m = params.n
    denom = (
        e_ball.value / (1.0 - eta) ** (sp + 1.0)
        + e_rest.value * eta ** m / (1.0 - eta)
    )
    gap = e_a.value - e_ball.value - e_rest.value
    if denom <= 0.0:
        c_star, c_se = (0.0, 0.0) if gap <= 0.0 else (np.inf, np.inf)
    else:
        c_star = max(0.0, gap / denom)
        c_se = (
            np.sqrt(e_a.std_error ** 2 + e_ball.std_error ** 2 + e_rest.std_error ** 2)
            / denom
        )
    holds = bool(c_star - 3.0 * c_se <= 1e6)
    return GluingReport(float(c_star), float(c_se), holds, e_a, e_ball, e_rest,
                        eta, rho)


@dataclass(frozen=True)
class PatchingReport:
    """Both sides of the disjoint-support patching inequality."""

    lhs: EnergyEstimate
    rhs_total: float
    rhs_std_error: float
    ratio: float
    holds: bool
    piece_estimates: list


def check_patching_bound(pieces, patched: SphereMap, params: EnergyParams,
                         n: int = 200_000, seed: int = 0) -> PatchingReport:
    """Check E(patched, S^n) <= 2^p sum_i E(piece_i, S^n) within 3 SE.

    The pieces must be exactly the maps the patched map was assembled
    from (background included); each contributes its whole-sphere energy
    to the right-hand side.
    """
    desc_kids = patched.descriptor.get("children", [])
    if [u.descriptor for u in pieces] != desc_kids:
        raise ParameterError("patched map was not assembled from these pieces")
    region = whole_sphere(params.n)
    lhs = energy_mc(patched, params, region, n, seed)
    piece_estimates = [
        energy_mc(u, params, region, n, seed + 1 + i) for i, u in enumerate(pieces)
    ]
    rhs = 2.0 ** params.p * sum(e.value for e in piece_estimates)
    rhs_se = 2.0 ** params.p * float(
        np.sqrt(sum(e.std_error ** 2 for e in piece_estimates))
    )
    slack = 3.0 * (lhs.std_error + rhs_se)
    ratio = lhs.value / rhs if rhs > 0 else np.inf
    return PatchingReport(lhs, float(rhs), rhs_se, float(ratio),
                          bool(lhs.value <= rhs + slack), piece_estimates)


@dataclass(frozen=True)
class FiberRatioReport:
    """E_{s,p}(v o h, S^3) / E_{s,p}(v, S^2) with uncertainty."""

    ratio: float | None
    ratio_std_error: float | None
    e3: EnergyEstimate
    e2: EnergyEstimate
    undefined: bool


def fiber_energy_comparison(v: SphereMap, s: float, n: int = 200_000,
                            seed: int = 0) -> FiberRatioReport:
    """Compare the energy of v o h on S^3 against that of v on S^2.

    Uses p = 3/s on both sides (the critical pairing on S^3; on S^2 the
    kernel exponent is then 2 + sp = 5). A constant v has both energies
    zero and the ratio is reported as undefined.
    """
    from .maps import composed_with_hopf

    p = 3.0 / s
    e3 = energy_mc(composed_with_hopf(v), EnergyParams(s, p, 3, critical=True),
                   whole_sphere(3), n, seed)
    e2 = energy_mc(v, EnergyParams(s, p, 2), whole_sphere(2), n, seed + 1)
    if e2.value == 0.0:
        return FiberRatioReport(None, None, e3, e2, undefined=True)
    ratio = e3.value / e2.value
    rel3 = (e3.std_error / e3.value) ** 2 if e3.value > 0 else 0.0
    rel2 = (e2.std_error / e2.value) ** 2
    rel = np.sqrt(rel3 + rel2)
    return FiberRatioReport(float(ratio), float(ratio * rel), e3, e2,
                            undefined=False)


def _as_point(coords):
    from .geometry import sphere_point

    return sphere_point(coords)
