"""Joint-distribution feasibility for a 2x2 correlation experiment.

Observed statistics consist of four correlators E(A_x B_y) and eight
conditional marginals (each station's mean under each remote setting).
They admit a single joint distribution over the quadruple
(A_x0, A_x1, B_y0, B_y1) of +-1 variables, a probabilistic coupling,
exactly when a linear feasibility problem has a solution: find sixteen
non-negative atom weights summing to one that reproduce the four
singleton moments and the four pairwise moments.

Necessary conditions are checked by name so infeasibility always comes
with a certificate:

* marginal consistency: a coupling forces each station's marginal to be
  the same under both remote settings;
* per-pair realizability: each pair (e_a, e_b, e_ab) must itself be a
  valid two-variable distribution, i.e. all four cells
  (1 + a*e_a + b*e_b + a*b*e_ab)/4 must be non-negative;
* the eight CHSH inequalities |S| <= 2.

Given the first two, the CHSH inequalities are also sufficient, which is
what `chsh_characterization` captures and what the randomized
cross-validation in the test suite exercises.

The solver is a self-contained textbook phase-one simplex with Bland's
rule.  It runs over floats by default and over exact rationals when
``exact=True``, in which case a feasible verdict is a theorem about the
given rational inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from pathlib import Path

from .core import DiscreteDistribution, SettingPair, _as_fraction
from .errors import BellsimError

# Atom order for witnesses: quadruples (a_x0, a_x1, b_y0, b_y1).
ATOMS = tuple(product((1, -1), repeat=4))

MOMENT_TOL = 1e-9


@dataclass(frozen=True, init=False)
class JointSpec:
    """The eight marginal numbers and four correlators under test.

    ``e_a[(x, y)]`` is station A's marginal at setting x measured while the
    remote station used y (and symmetrically for ``e_b``); a coupling can
    only exist when that dependence on the remote setting is absent.
    Values may be floats or exact rationals.
    """

    settings_a: tuple
    settings_b: tuple
    e_ab: dict
    e_a: dict
    e_b: dict

    def __init__(self, settings_a, settings_b, e_ab, e_a, e_b):
        settings_a = tuple(settings_a)
        settings_b = tuple(settings_b)
        if len(settings_a) != 2 or len(settings_b) != 2:
            raise BellsimError("a joint spec needs exactly two settings per station")
        pairs = [SettingPair(x, y) for x in settings_a for y in settings_b]
        tables = {}
        for label, table in (("e_ab", e_ab), ("e_a", e_a), ("e_b", e_b)):
            table = {SettingPair(*k): v for k, v in dict(table).items()}
            for sp in pairs:
                if sp not in table:
                    raise BellsimError(f"{label}: missing entry for pair {tuple(sp)}")
                v = table[sp]
                if not -1 <= float(v) <= 1:
                    raise BellsimError(f"{label}{tuple(sp)} = {float(v)} outside [-1, 1]")
            tables[label] = table
        object.__setattr__(self, "settings_a", settings_a)
        object.__setattr__(self, "settings_b", settings_b)
        object.__setattr__(self, "e_ab", tables["e_ab"])
        object.__setattr__(self, "e_a", tables["e_a"])
        object.__setattr__(self, "e_b", tables["e_b"])

    def pairs(self) -> list[SettingPair]:
        return [SettingPair(x, y) for x in self.settings_a for y in self.settings_b]

    @classmethod
    def from_correlation_set(cls, cs) -> "JointSpec":
        pairs = cs.pair_order()
        return cls(cs.settings_a, cs.settings_b,
                   {sp: cs.pairs[sp].e_ab for sp in pairs},
                   {sp: cs.pairs[sp].e_a for sp in pairs},
                   {sp: cs.pairs[sp].e_b for sp in pairs})

    @classmethod
    def from_exact_results(cls, results: dict, settings_a, settings_b) -> "JointSpec":
        results = {SettingPair(*k): v for k, v in results.items()}
        return cls(settings_a, settings_b,
                   {sp: r.e_ab for sp, r in results.items()},
                   {sp: r.e_a for sp, r in results.items()},
                   {sp: r.e_b for sp, r in results.items()})


@dataclass(frozen=True)
class CouplingResult:
    feasible: bool
    witness: "DiscreteDistribution | None"   # over the 16 sign quadruples
    certificate: "str | None"                # named violated constraint
    residual: "float | None"                 # phase-one optimum (L1 mismatch)


def marginal_consistency(spec: JointSpec, tol: float = MOMENT_TOL) -> tuple[bool, list[str]]:
    """Does each station's marginal ignore the remote setting?"""
    (x0, x1), (y0, y1) = spec.settings_a, spec.settings_b
    offenders = []
    for x in (x0, x1):
        d = float(spec.e_a[SettingPair(x, y0)]) - float(spec.e_a[SettingPair(x, y1)])
        if abs(d) > tol:
            offenders.append(f"e_a({x!r}) differs across remote settings by {d}")
    for y in (y0, y1):
        d = float(spec.e_b[SettingPair(x0, y)]) - float(spec.e_b[SettingPair(x1, y)])
        if abs(d) > tol:
            offenders.append(f"e_b({y!r}) differs across remote settings by {d}")
    return not offenders, offenders


def pairwise_realizability(spec: JointSpec, tol: float = MOMENT_TOL) -> tuple[bool, list[str]]:
    """Is each pair's (e_a, e_b, e_ab) a valid two-variable distribution?"""
    offenders = []
    for sp in spec.pairs():
        ea = float(spec.e_a[sp])
        eb = float(spec.e_b[sp])
        eab = float(spec.e_ab[sp])
        for a, b in product((1, -1), repeat=2):
            cell = (1 + a * ea + b * eb + a * b * eab) / 4
            if cell < -tol / 4:
                offenders.append(
                    f"pair {tuple(sp)}: cell (a={a:+d}, b={b:+d}) has probability {cell}"
                )
    return not offenders, offenders


def _sign_patterns():
    for signs in product((1, -1), repeat=4):
        if signs.count(-1) % 2 == 1:
            yield signs


def chsh_statistics(spec: JointSpec) -> list[tuple[str, float]]:
    """All eight odd-minus sign combinations of the spec's correlators."""
    es = [spec.e_ab[sp] for sp in spec.pairs()]
    out = []
    for signs in _sign_patterns():
        pattern = "".join("+" if s > 0 else "-" for s in signs)
        out.append((pattern, sum(s * e for s, e in zip(signs, es))))
    return out


def chsh_characterization(spec: JointSpec, tol: float = MOMENT_TOL) -> bool:
    """True when all eight CHSH combinations satisfy |S| <= 2.

    With consistent marginals and realizable pairs this is equivalent to
    the existence of a coupling, so it serves as the closed-form oracle for
    the feasibility solver.
    """
    return all(abs(v) <= 2 + tol for _, v in chsh_statistics(spec))


# --------------------------------------------------------------------------
# Phase-one simplex


def solve_phase_one(rows, rhs, exact: bool = False):
    """Minimise the L1 constraint mismatch of ``A x = b, x >= 0``.

    Textbook phase-one: one artificial variable per equation, minimise
    their sum with Bland's rule (termination guaranteed).  Returns
    ``(optimum, x)``; the optimum is zero exactly when the system is
    feasible.  With ``exact=True`` all arithmetic is rational and the
    verdict is exact for the given inputs.
    """
    m = len(rhs)
    n = len(rows[0])
    if exact:
        zero, one = Fraction(0), Fraction(1)
        rows = [[_as_fraction(v) for v in row] for row in rows]
        rhs = [_as_fraction(v) for v in rhs]
        eps = zero
    else:
        zero, one = 0.0, 1.0
        rows = [[float(v) for v in row] for row in rows]
        rhs = [float(v) for v in rhs]
        eps = 1e-12

    tab = []
    for i in range(m):
        sign = one if rhs[i] >= 0 else -one
        row = [sign * v for v in rows[i]]
        row += [one if j == i else zero for j in range(m)]
        row.append(sign * rhs[i])
        tab.append(row)
    basis = [n + i for i in range(m)]

    # Reduced costs c_j - z_j for cost c = (0,...,0, 1,...,1).
    width = n + m
    reduced = [zero] * width
    for j in range(width):
        col_sum = sum(tab[i][j] for i in range(m))
        cost = one if j >= n else zero
        reduced[j] = cost - col_sum

    while True:
        entering = next((j for j in range(width) if reduced[j] < -eps), None)
        if entering is None:
            break
        pivot_row = None
        best = None
        for i in range(m):
            coeff = tab[i][entering]
            if coeff > eps:
                ratio = tab[i][-1] / coeff
                if best is None or ratio < best or (ratio == best and basis[i] < basis[pivot_row]):
                    best = ratio
                    pivot_row = i
        if pivot_row is None:
            raise BellsimError("phase-one simplex became unbounded; inputs are malformed")
        piv = tab[pivot_row][entering]
        tab[pivot_row] = [v / piv for v in tab[pivot_row]]
        for i in range(m):
            if i != pivot_row and tab[i][entering] != zero:
                f = tab[i][entering]
                tab[i] = [v - f * w for v, w in zip(tab[i], tab[pivot_row])]
        f = reduced[entering]
        reduced = [v - f * w for v, w in zip(reduced, tab[pivot_row][:-1])]
        basis[pivot_row] = entering

    optimum = sum(tab[i][-1] for i in range(m) if basis[i] >= n)
    x = [zero] * n
    for i, j in enumerate(basis):
        if j < n:
            x[j] = tab[i][-1]
    return optimum, x


def _moment_system(spec: JointSpec, exact: bool):
    """Rows and targets: normalisation, 4 singleton moments, 4 pairwise moments."""
    conv = _as_fraction if exact else float
    half = Fraction(1, 2) if exact else 0.5
    (x0, x1), (y0, y1) = spec.settings_a, spec.settings_b
    rows = [[1] * len(ATOMS)]
    rhs = [conv(1)]
    # Common marginal per station setting: average the two remote versions
    # (they agree within tolerance once marginal_consistency has passed).
    singles = [
        (0, (spec.e_a[SettingPair(x0, y0)], spec.e_a[SettingPair(x0, y1)])),
        (1, (spec.e_a[SettingPair(x1, y0)], spec.e_a[SettingPair(x1, y1)])),
        (2, (spec.e_b[SettingPair(x0, y0)], spec.e_b[SettingPair(x1, y0)])),
        (3, (spec.e_b[SettingPair(x0, y1)], spec.e_b[SettingPair(x1, y1)])),
    ]
    for slot, (v1, v2) in singles:
        rows.append([atom[slot] for atom in ATOMS])
        rhs.append((conv(v1) + conv(v2)) * half)
    for i, x in enumerate((x0, x1)):
        for j, y in enumerate((y0, y1)):
            rows.append([atom[i] * atom[2 + j] for atom in ATOMS])
            rhs.append(conv(spec.e_ab[SettingPair(x, y)]))
    return rows, rhs


def coupling_feasibility(spec: JointSpec, tol: float = MOMENT_TOL,
                         exact: bool = False) -> CouplingResult:
    """Decide whether a joint distribution reproduces the spec's moments.

    Feasible results carry a witness distribution over the sixteen sign
    quadruples whose moments match the spec within ``tol``.  Infeasible
    results name a violated constraint: marginal consistency, a negative
    per-pair cell, or a CHSH combination beyond 2.  Infeasibility is a
    result, not an error.
    """
    consistent, offenders = marginal_consistency(spec, tol)
    if not consistent:
        return CouplingResult(False, None, "marginal-consistency: " + offenders[0],
                              residual=None)
    rows, rhs = _moment_system(spec, exact)
    optimum, x = solve_phase_one(rows, rhs, exact=exact)
    residual = float(optimum)
    if residual <= tol:
        probs = [v if v > 0 else 0 for v in x]
        witness = DiscreteDistribution(ATOMS, probs)
        return CouplingResult(True, witness, None, residual=residual)
    for pattern, value in chsh_statistics(spec):
        if abs(float(value)) > 2 + tol:
            return CouplingResult(
                False, None,
                f"CHSH pattern {pattern}: |S| = {abs(float(value))} > 2",
                residual=residual)
    realizable, offenders = pairwise_realizability(spec, tol)
    if not realizable:
        return CouplingResult(False, None, "pairwise-realizability: " + offenders[0],
                              residual=residual)
    return CouplingResult(False, None,
                          f"no joint distribution matches the moments "
                          f"(L1 mismatch {residual})", residual=residual)


# --------------------------------------------------------------------------
# Moments of explicit joints


def joint_moments(dist: DiscreteDistribution, settings_a, settings_b) -> JointSpec:
    """Read a JointSpec off an explicit distribution over sign quadruples."""
    settings_a = tuple(settings_a)
    settings_b = tuple(settings_b)
    e_a = {}
    e_b = {}
    e_ab = {}
    for i, x in enumerate(settings_a):
        for j, y in enumerate(settings_b):
            sp = SettingPair(x, y)
            e_a[sp] = sum(p * atom[i] for atom, p in dist.items())
            e_b[sp] = sum(p * atom[2 + j] for atom, p in dist.items())
            e_ab[sp] = sum(p * atom[i] * atom[2 + j] for atom, p in dist.items())
    return JointSpec(settings_a, settings_b, e_ab, e_a, e_b)


def lf_coupling() -> DiscreteDistribution:
    """Pushforward of a fair six-sided die through the quadruple map
    ``l -> (1**l, (-1)**l, 1**(l+1), (-1)**(l+1))`` for settings +-1.

    The result has exactly two atoms, (1, 1, 1, -1) and (1, -1, 1, 1),
    each with probability 1/2; its pairwise moments are (1, 0, 0, -1) in
    the pair order ((1,1), (1,-1), (-1,1), (-1,-1)).
    """
    weights: dict[tuple, Fraction] = {}
    for lam in range(1, 7):
        quad = (1 ** lam, (-1) ** lam, 1 ** (lam + 1), (-1) ** (lam + 1))
        weights[quad] = weights.get(quad, Fraction(0)) + Fraction(1, 6)
    return DiscreteDistribution(tuple(weights), tuple(weights.values()))


# --------------------------------------------------------------------------
# Randomized spec generation (the cross-validation workhorse)


def random_consistent_spec(generator, zero_marginals: bool = False,
                           settings_a=(1, 2), settings_b=(1, 2)) -> JointSpec:
    """Random spec satisfying the coupling problem's premises.

    Marginals are setting-independent by construction and each correlator
    is drawn uniformly inside its per-pair realizability envelope
    ``[|e_a + e_b| - 1, 1 - |e_a - e_b|]``, so the spec describes four
    genuine two-variable distributions and the CHSH criterion is an exact
    oracle for feasibility.
    """
    if zero_marginals:
        ma = {x: 0.0 for x in settings_a}
        mb = {y: 0.0 for y in settings_b}
    else:
        ma = {x: generator.uniform(-1, 1) for x in settings_a}
        mb = {y: generator.uniform(-1, 1) for y in settings_b}
    e_a = {}
    e_b = {}
    e_ab = {}
    for x in settings_a:
        for y in settings_b:
            sp = SettingPair(x, y)
            lo = abs(ma[x] + mb[y]) - 1
            hi = 1 - abs(ma[x] - mb[y])
            e_ab[sp] = generator.uniform(lo, hi)
            e_a[sp] = ma[x]
            e_b[sp] = mb[y]
    return JointSpec(settings_a, settings_b, e_ab, e_a, e_b)


# --------------------------------------------------------------------------
# Serialisation


def jointspec_to_dict(spec: JointSpec) -> dict:
    def table(t):
        return [[sp.x, sp.y, float(t[sp])] for sp in spec.pairs()]

    return {
        "settings_a": list(spec.settings_a),
        "settings_b": list(spec.settings_b),
        "e_ab": table(spec.e_ab),
        "e_a": table(spec.e_a),
        "e_b": table(spec.e_b),
    }


def jointspec_from_dict(data: dict) -> JointSpec:
    def table(rows):
        return {SettingPair(x, y): v for x, y, v in rows}

    try:
        return JointSpec(tuple(data["settings_a"]), tuple(data["settings_b"]),
                         table(data["e_ab"]), table(data["e_a"]), table(data["e_b"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise BellsimError(f"malformed joint spec: {exc}") from exc


def save_jointspec(spec: JointSpec, path) -> None:
    Path(path).write_text(json.dumps(jointspec_to_dict(spec), indent=2, sort_keys=True) + "\n",
                          encoding="ascii")


def load_jointspec(path) -> JointSpec:
    try:
        data = json.loads(Path(path).read_text(encoding="ascii"))
    except json.JSONDecodeError as exc:
        raise BellsimError(f"{path}: not valid JSON: {exc}") from exc
    return jointspec_from_dict(data)


def coupling_result_to_dict(result: CouplingResult) -> dict:
    out = {
        "feasible": result.feasible,
        "certificate": result.certificate,
        "residual": result.residual,
    }
    if result.witness is not None:
        out["witness"] = [
            {"atom": list(atom), "p": float(p)}
            for atom, p in result.witness.items()
        ]
    return out
