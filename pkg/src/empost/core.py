"""Domain model for multi-segment interconnect trees.

Holds the material constants, the tree topology (junctions with L/U/R/D
slots, segments with initial stress profiles), the scaling scheme used to
bring stress, space and time to comparable magnitudes, and tree validation.

Sign conventions
----------------
Every segment has its own coordinate ``x`` running from ``node_minus``
(x = 0, left or bottom end) to ``node_plus`` (x = L, right or top end).
A positive current density drives a positive force ``G`` along +x.
A horizontal segment occupies the R slot of its minus junction and the L
slot of its plus junction; a vertical segment occupies U at its minus
(bottom) junction and D at its plus (top) junction.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

ELECTRON_VOLT = 1.602176634e-19  # J
SLOTS = ("L", "U", "R", "D")
ORIENTATIONS = ("horizontal", "vertical")
VOID_ENDS = ("none", "at_minus", "at_plus")
JUNCTION_KINDS = ("interior", "blocked_terminal", "void_node")


# ---------------------------------------------------------------------------
# Material physics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MaterialParams:
    """Physical constants shared by every segment of a tree (SI units, E_a in eV)."""

    e_charge: float = 1.6e-19
    rho: float = 2.2e-8
    z_star: float = 10.0
    omega_atomic: float = 8.78e-30
    bulk_modulus_B: float = 1e11
    d0: float = 5.2e-5
    ea: float = 1.1
    k_boltzmann: float = 1.380649e-23
    temperature: float = 373.15
    sigma_crit: float = 5e8
    delta_void: float | None = None

    def __post_init__(self):
        for name in ("e_charge", "rho", "z_star", "omega_atomic", "bulk_modulus_B",
                     "d0", "ea", "k_boltzmann", "temperature", "sigma_crit"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"material parameter {name} must be positive, got {value!r}")
        if self.delta_void is not None and not self.delta_void > 0:
            raise ValueError("delta_void must be positive when given")


def drive_force(current_density, mat: MaterialParams):
    """EM driving force G = e*rho*J*Z*/Omega in Pa/m (sign follows J)."""
    return mat.e_charge * mat.rho * current_density * mat.z_star / mat.omega_atomic


def diffusivity(mat: MaterialParams) -> float:
    """Stress diffusivity kappa = D_a*B*Omega/(k_B*T) with Arrhenius D_a, in m^2/s."""
    kt = mat.k_boltzmann * mat.temperature
    d_a = mat.d0 * math.exp(-mat.ea * ELECTRON_VOLT / kt)
    return d_a * mat.bulk_modulus_B * mat.omega_atomic / kt


# ---------------------------------------------------------------------------
# Initial stress profiles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InitialStressProfile:
    """Initial stress h(u) on [0, L].

    ``constant``: h = value.
    ``piecewise_linear``: linear interpolation of ``values`` at ``knots``
    (absolute positions in metres, first knot 0, last knot L).
    ``cosine_mode``: h = offset + amplitude*cos(wavenumber*pi*u/L).
    """

    kind: str
    value: float = 0.0
    knots: tuple[float, ...] = ()
    values: tuple[float, ...] = ()
    offset: float = 0.0
    amplitude: float = 0.0
    wavenumber: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "piecewise_linear", "cosine_mode"):
            raise ValueError(f"unsupported initial stress kind {self.kind!r}")
        object.__setattr__(self, "knots", tuple(float(k) for k in self.knots))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if self.kind == "piecewise_linear":
            if len(self.knots) < 2 or len(self.knots) != len(self.values):
                raise ValueError("piecewise_linear needs >= 2 knots with one value each")
            if any(b <= a for a, b in zip(self.knots, self.knots[1:])):
                raise ValueError("piecewise_linear knots must be strictly increasing")
            if self.knots[0] != 0.0:
                raise ValueError("piecewise_linear first knot must be 0")
        numbers = (self.value, self.offset, self.amplitude, self.wavenumber, *self.knots, *self.values)
        if not all(math.isfinite(v) for v in numbers):
            raise ValueError("initial stress profile contains non-finite numbers")

    @classmethod
    def constant(cls, value: float) -> "InitialStressProfile":
        return cls("constant", value=float(value))

    @classmethod
    def linear(cls, length: float, at_minus: float, at_plus: float) -> "InitialStressProfile":
        return cls("piecewise_linear", knots=(0.0, float(length)), values=(float(at_minus), float(at_plus)))

    @classmethod
    def cosine(cls, amplitude: float, wavenumber: float, offset: float = 0.0) -> "InitialStressProfile":
        return cls("cosine_mode", offset=float(offset), amplitude=float(amplitude), wavenumber=float(wavenumber))

    def check_length(self, length: float) -> bool:
        if self.kind != "piecewise_linear":
            return True
        return math.isclose(self.knots[-1], length, rel_tol=1e-9, abs_tol=0.0)

    def evaluate(self, u, length: float):
        u = np.asarray(u, dtype=float)
        if self.kind == "constant":
            return np.full_like(u, self.value)
        if self.kind == "piecewise_linear":
            knots = np.array(self.knots)
            knots[-1] = length
            return np.interp(u, knots, self.values)
        return self.offset + self.amplitude * np.cos(self.wavenumber * np.pi * u / length)

    def slope_at(self, end: str, length: float) -> float:
        """One-sided derivative dh/du at the ``minus`` (u=0) or ``plus`` (u=L) end."""
        if self.kind == "constant":
            return 0.0
        if self.kind == "piecewise_linear":
            k, v = self.knots, self.values
            if end == "minus":
                return (v[1] - v[0]) / (k[1] - k[0])
            return (v[-1] - v[-2]) / (length - k[-2])
        w = self.wavenumber * np.pi / length
        u = 0.0 if end == "minus" else length
        return float(-self.amplitude * w * np.sin(w * u))

    def pieces(self, length: float) -> list[tuple[float, float, float, float]]:
        """Linear pieces (u0, u1, a, b) with h(u) = a + b*u on [u0, u1]."""
        if self.kind == "constant":
            return [(0.0, length, self.value, 0.0)]
        if self.kind != "piecewise_linear":
            raise ValueError("cosine_mode profiles have no linear pieces")
        knots = list(self.knots)
        knots[-1] = length
        out = []
        for (u0, h0), (u1, h1) in zip(zip(knots, self.values), zip(knots[1:], self.values[1:])):
            b = (h1 - h0) / (u1 - u0)
            out.append((u0, u1, h0 - b * u0, b))
        return out

    def mean(self, length: float) -> float:
        if self.kind == "constant":
            return self.value
        if self.kind == "piecewise_linear":
            return sum(0.5 * (a + b * u0 + a + b * u1) * (u1 - u0) for u0, u1, a, b in self.pieces(length)) / length
        w = self.wavenumber * np.pi
        if w == 0.0:
            return self.offset + self.amplitude
        return self.offset + self.amplitude * math.sin(w) / w

    def reflected(self, length: float) -> "InitialStressProfile":
        """Profile of h(L - u)."""
        if self.kind == "constant":
            return self
        if self.kind == "piecewise_linear":
            knots = [length - k for k in reversed(self.knots)]
            knots[0], knots[-1] = 0.0, length
            return replace(self, knots=knots, values=tuple(reversed(self.values)))
        raise ValueError("cosine_mode profiles are not closed under reflection")

    def scaled(self, k_x: float, k_sigma: float) -> "InitialStressProfile":
        """Profile in scaled coordinates: h_sc(k_x*u) = k_sigma*h(u)."""
        if self.kind == "constant":
            return replace(self, value=self.value * k_sigma)
        if self.kind == "piecewise_linear":
            return replace(self, knots=tuple(k * k_x for k in self.knots),
                           values=tuple(v * k_sigma for v in self.values))
        return replace(self, offset=self.offset * k_sigma, amplitude=self.amplitude * k_sigma)

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        if self.kind == "piecewise_linear":
            return {"kind": "piecewise_linear", "knots": list(self.knots), "values": list(self.values)}
        return {"kind": "cosine_mode", "offset": self.offset, "amplitude": self.amplitude,
                "wavenumber": self.wavenumber}

    @classmethod
    def from_dict(cls, d: Mapping) -> "InitialStressProfile":
        kind = d["kind"]
        if kind == "constant":
            return cls.constant(d["value"])
        if kind == "piecewise_linear":
            return cls("piecewise_linear", knots=tuple(d["knots"]), values=tuple(d["values"]))
        return cls.cosine(d["amplitude"], d.get("wavenumber", 1.0), d.get("offset", 0.0))


# ---------------------------------------------------------------------------
# Topology
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Segment:
    id: str
    node_minus: str
    node_plus: str
    length: float
    width: float
    current_density: float
    orientation: str = "horizontal"
    void_end: str = "none"
    initial_stress: InitialStressProfile = field(default_factory=lambda: InitialStressProfile.constant(0.0))

    def slot_at(self, end: str) -> str:
        """Junction slot this segment occupies at its ``minus`` or ``plus`` end."""
        if self.orientation == "horizontal":
            return "R" if end == "minus" else "L"
        return "U" if end == "minus" else "D"

    def node(self, end: str) -> str:
        return self.node_minus if end == "minus" else self.node_plus


@dataclass(frozen=True)
class Junction:
    id: str
    slots: Mapping[str, str | None]
    kind: str = "interior"

    def __post_init__(self):
        object.__setattr__(self, "slots", {s: self.slots.get(s) for s in SLOTS})

    @property
    def occupied(self) -> list[str]:
        """Occupied slot names in (L, U, R, D) order."""
        return [s for s in SLOTS if self.slots[s] is not None]


@dataclass(frozen=True)
class ScalingConstants:
    k_x: float = 1e-5
    k_t: float = 1e-7
    k_sigma: float = 1e-8

    def __post_init__(self):
        if not all(math.isfinite(v) and v != 0 for v in (self.k_x, self.k_t, self.k_sigma)):
            raise ValueError("scaling constants must be finite and nonzero")


@dataclass(frozen=True)
class InterconnectTree:
    junctions: tuple[Junction, ...]
    segments: tuple[Segment, ...]
    material: MaterialParams = field(default_factory=MaterialParams)
    scaling: ScalingConstants = field(default_factory=ScalingConstants)

    def __post_init__(self):
        object.__setattr__(self, "junctions", tuple(self.junctions))
        object.__setattr__(self, "segments", tuple(self.segments))

    def segment(self, sid: str) -> Segment:
        for s in self.segments:
            if s.id == sid:
                return s
        raise KeyError(sid)

    def junction(self, jid: str) -> Junction:
        for j in self.junctions:
            if j.id == jid:
                return j
        raise KeyError(jid)

    def segment_index(self, sid: str) -> int:
        return [s.id for s in self.segments].index(sid)

    @property
    def interior_junctions(self) -> list[Junction]:
        return [j for j in self.junctions if j.kind == "interior"]

    @property
    def currents(self) -> np.ndarray:
        return np.array([s.current_density for s in self.segments])

    def with_currents(self, currents: Sequence[float]) -> "InterconnectTree":
        segs = tuple(replace(s, current_density=float(c)) for s, c in zip(self.segments, currents))
        return replace(self, segments=segs)

    def with_initial_stress(self, profiles: Mapping[str, InitialStressProfile]) -> "InterconnectTree":
        segs = tuple(replace(s, initial_stress=profiles.get(s.id, s.initial_stress)) for s in self.segments)
        return replace(self, segments=segs)

    def void_segment(self) -> Segment | None:
        for s in self.segments:
            if s.void_end != "none":
                return s
        return None


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    ids: tuple[str, ...] = ()

    def __str__(self):
        return f"{self.code}: {self.message}"


class TreeValidationError(ValueError):
    def __init__(self, diagnostics: Sequence[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


def validate_tree(tree: InterconnectTree) -> list[Diagnostic]:
    """Check every tree invariant; returns all violations (empty list when ok)."""
    diags: list[Diagnostic] = []
    add = lambda code, msg, *ids: diags.append(Diagnostic(code, msg, tuple(ids)))  # noqa: E731

    jids = [j.id for j in tree.junctions]
    sids = [s.id for s in tree.segments]
    for dup in sorted({i for i in jids if jids.count(i) > 1}):
        add("duplicate id", f"junction id {dup} used more than once", dup)
    for dup in sorted({i for i in sids if sids.count(i) > 1}):
        add("duplicate id", f"segment id {dup} used more than once", dup)
    junctions = {j.id: j for j in tree.junctions}

    for s in tree.segments:
        if not (math.isfinite(s.length) and s.length > 0):
            add("invalid length", f"segment {s.id} has nonpositive length", s.id)
        if not (math.isfinite(s.width) and s.width > 0):
            add("invalid width", f"segment {s.id} has nonpositive width", s.id)
        if not math.isfinite(s.current_density):
            add("invalid current", f"segment {s.id} has non-finite current density", s.id)
        if s.orientation not in ORIENTATIONS:
            add("invalid orientation", f"segment {s.id} orientation {s.orientation!r}", s.id)
        if s.void_end not in VOID_ENDS:
            add("invalid void end", f"segment {s.id} void_end {s.void_end!r}", s.id)
        if s.node_minus == s.node_plus:
            add("self loop", f"segment {s.id} starts and ends at {s.node_minus}", s.id)
        if s.length > 0 and not s.initial_stress.check_length(s.length):
            add("initial stress domain", f"segment {s.id} initial stress knots do not end at L", s.id)
        for end in ("minus", "plus"):
            jid = s.node(end)
            if jid not in junctions:
                add("dangling endpoint", f"segment {s.id} references missing junction {jid}", s.id, jid)
                continue
            if s.orientation in ORIENTATIONS:
                slot = s.slot_at(end)
                if junctions[jid].slots.get(slot) != s.id:
                    add("slot mismatch", f"segment {s.id} should occupy slot {slot} of junction {jid}", s.id, jid)

    seg_by_id = {s.id: s for s in tree.segments}
    for j in tree.junctions:
        if j.kind not in JUNCTION_KINDS:
            add("invalid junction kind", f"junction {j.id} kind {j.kind!r}", j.id)
        occ = j.occupied
        for slot in occ:
            sid = j.slots[slot]
            seg = seg_by_id.get(sid)
            if seg is None:
                add("dangling slot", f"junction {j.id} slot {slot} references missing segment {sid}", j.id, sid)
                continue
            ends = [e for e in ("minus", "plus") if seg.node(e) == j.id and seg.slot_at(e) == slot]
            if not ends:
                add("slot mismatch", f"junction {j.id} slot {slot} holds segment {sid} which is not incident there", j.id, sid)
        if j.kind == "interior" and len(occ) < 2:
            add("interior degree", f"interior junction {j.id} has {len(occ)} occupied slots", j.id)
        if j.kind in ("blocked_terminal", "void_node") and len(occ) != 1:
            add("terminal degree", f"terminal junction {j.id} has {len(occ)} occupied slots", j.id)

    void_segs = [s for s in tree.segments if s.void_end != "none"]
    void_nodes = [j for j in tree.junctions if j.kind == "void_node"]
    if len(void_segs) > 1:
        add("multiple voids", "more than one segment carries a void: " + ", ".join(s.id for s in void_segs),
            *[s.id for s in void_segs])
    if len(void_nodes) > 1:
        add("multiple voids", "more than one void node: " + ", ".join(j.id for j in void_nodes),
            *[j.id for j in void_nodes])
    for s in void_segs:
        if s.void_end not in ("at_minus", "at_plus"):
            continue
        jid = s.node("minus" if s.void_end == "at_minus" else "plus")
        if jid in junctions and junctions[jid].kind != "void_node":
            add("void mismatch", f"segment {s.id} void end sits on non-void junction {jid}", s.id, jid)
    for j in void_nodes:
        occ = j.occupied
        if len(occ) == 1:
            seg = seg_by_id.get(j.slots[occ[0]])
            if seg is not None:
                void_end = "at_minus" if seg.node_minus == j.id else "at_plus"
                if seg.void_end != void_end:
                    add("void mismatch", f"void node {j.id} is not the void end of segment {seg.id}", j.id, seg.id)

    # connectivity and cycles over well-formed edges only
    edges = [(s.node_minus, s.node_plus) for s in tree.segments
             if s.node_minus in junctions and s.node_plus in junctions]
    if tree.junctions:
        adj: dict[str, list[str]] = {j: [] for j in junctions}
        for a, b in edges:
            adj[a].append(b)
            adj[b].append(a)
        seen = {tree.junctions[0].id}
        queue = deque(seen)
        while queue:
            for nb in adj[queue.popleft()]:
                if nb not in seen:
                    seen.add(nb)
                    queue.append(nb)
        missing = sorted(set(junctions) - seen)
        if missing:
            add("disconnected", "junctions unreachable from " + tree.junctions[0].id + ": " + ", ".join(missing), *missing)
        elif len(edges) != len(junctions) - 1:
            add("cycle", f"tree has {len(edges)} segments for {len(junctions)} junctions (not a tree)")
    return diags


def require_valid(tree: InterconnectTree) -> None:
    diags = validate_tree(tree)
    if diags:
        raise TreeValidationError(diags)


# ---------------------------------------------------------------------------
# Numerical model: per-segment kappa and G, optionally scaled
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SegmentModel:
    """Numbers a solver needs for one segment (physical or scaled units)."""

    id: str
    length: float
    kappa: float
    drive: float
    initial_stress: InitialStressProfile
    void_end: str = "none"


@dataclass(frozen=True)
class TreeModel:
    """A tree with kappa and G evaluated for one current sample."""

    tree: InterconnectTree
    segments: tuple[SegmentModel, ...]
    delta_void: float | None = None
    scaling: ScalingConstants | None = None  # set when the model lives in scaled units

    @property
    def scaled(self) -> bool:
        return self.scaling is not None

    def segment(self, sid: str) -> SegmentModel:
        return self.segments[self.tree.segment_index(sid)]


def tree_model(tree: InterconnectTree, currents: Sequence[float] | None = None,
               initial_stress: Mapping[str, InitialStressProfile] | None = None) -> TreeModel:
    """Evaluate kappa and G for every segment, optionally overriding currents and h."""
    kappa = diffusivity(tree.material)
    if currents is None:
        currents = tree.currents
    currents = np.asarray(currents, dtype=float)
    if currents.shape != (len(tree.segments),):
        raise ValueError(f"expected {len(tree.segments)} current densities, got shape {currents.shape}")
    initial_stress = initial_stress or {}
    segs = tuple(
        SegmentModel(s.id, s.length, kappa, drive_force(float(j), tree.material),
                     initial_stress.get(s.id, s.initial_stress), s.void_end)
        for s, j in zip(tree.segments, currents)
    )
    return TreeModel(tree, segs, tree.material.delta_void)


def scale_problem(model: TreeModel | InterconnectTree, sc: ScalingConstants,
                  t_grid=None, x_grids: Mapping[str, Sequence[float]] | None = None):
    """Apply x_sc = k_x x, t_sc = k_t t, kappa_sc = k_x^2/k_t kappa, G_sc = k_sigma/k_x G, sigma_sc = k_sigma sigma.

    Returns ``(scaled_model, scaled_t_grid, scaled_x_grids)``; grids are
    ``None`` when not supplied.
    """
    if isinstance(model, InterconnectTree):
        model = tree_model(model)
    if model.scaled:
        raise ValueError("model is already scaled")
    segs = tuple(
        replace(s, length=s.length * sc.k_x, kappa=s.kappa * sc.k_x ** 2 / sc.k_t,
                drive=s.drive * sc.k_sigma / sc.k_x, initial_stress=s.initial_stress.scaled(sc.k_x, sc.k_sigma))
        for s in model.segments
    )
    delta = None if model.delta_void is None else model.delta_void * sc.k_x
    scaled = replace(model, segments=segs, delta_void=delta, scaling=sc)
    t_sc = None if t_grid is None else np.asarray(t_grid, dtype=float) * sc.k_t
    x_sc = None if x_grids is None else {k: np.asarray(v, dtype=float) * sc.k_x for k, v in x_grids.items()}
    return scaled, t_sc, x_sc


def unscale_model(model: TreeModel) -> TreeModel:
    sc = model.scaling
    if sc is None:
        raise ValueError("model is not scaled")
    segs = tuple(
        replace(s, length=s.length / sc.k_x, kappa=s.kappa * sc.k_t / sc.k_x ** 2,
                drive=s.drive * sc.k_x / sc.k_sigma,
                initial_stress=s.initial_stress.scaled(1.0 / sc.k_x, 1.0 / sc.k_sigma))
        for s in model.segments
    )
    delta = None if model.delta_void is None else model.delta_void / sc.k_x
    return replace(model, segments=segs, delta_void=delta, scaling=None)


@dataclass(frozen=True)
class StressField:
    """Stress samples of one segment on an (x, t) grid; ``values`` has shape (len(x), len(t))."""

    segment_id: str
    x_grid: np.ndarray
    t_grid: np.ndarray
    values: np.ndarray
    scaled: bool = False

    def __post_init__(self):
        x = np.asarray(self.x_grid, dtype=float)
        t = np.asarray(self.t_grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.shape != (x.size, t.size):
            raise ValueError(f"values shape {v.shape} does not match grids ({x.size}, {t.size})")
        if np.any(np.diff(x) <= 0) or np.any(np.diff(t) <= 0):
            raise ValueError("grids must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValueError(f"non-finite stress values in segment {self.segment_id}")
        object.__setattr__(self, "x_grid", x)
        object.__setattr__(self, "t_grid", t)
        object.__setattr__(self, "values", v)


def unscale_stress(field_: StressField, sc: ScalingConstants) -> StressField:
    """Map a scaled field back to physical units (values / k_sigma, grids / k_x and / k_t)."""
    if not field_.scaled:
        raise ValueError(f"stress field of segment {field_.segment_id} is already in physical units")
    return StressField(field_.segment_id, field_.x_grid / sc.k_x, field_.t_grid / sc.k_t,
                       field_.values / sc.k_sigma, scaled=False)


def scale_stress(field_: StressField, sc: ScalingConstants) -> StressField:
    if field_.scaled:
        raise ValueError("stress field is already scaled")
    return StressField(field_.segment_id, field_.x_grid * sc.k_x, field_.t_grid * sc.k_t,
                       field_.values * sc.k_sigma, scaled=True)


@dataclass(frozen=True)
class EvaluationPoint:
    """A segment end at a given time, where boundary stress is sampled."""

    segment_id: str
    endpoint: str
    time: float

    def __post_init__(self):
        if self.endpoint not in ("minus", "plus"):
            raise ValueError("endpoint must be 'minus' or 'plus'")
        if not self.time >= 0:
            raise ValueError("evaluation time must be nonnegative")


# ---------------------------------------------------------------------------
# Helpers for building initial conditions
# ---------------------------------------------------------------------------


def steady_nucleation_stress(tree: InterconnectTree, currents: Sequence[float] | None = None
                             ) -> dict[str, InitialStressProfile]:
    """Steady-state stress of the blocked (void-free) tree: linear per segment.

    Each segment satisfies dsigma/dx = -G, stress is continuous at junctions
    and the total integrated stress is zero (stress-free start).  Used to
    provide pre-established initial stress for fixtures.
    """
    model = tree_model(tree, currents)
    node_val: dict[str, float] = {tree.junctions[0].id: 0.0}
    incident: dict[str, list[int]] = {j.id: [] for j in tree.junctions}
    for i, s in enumerate(tree.segments):
        incident[s.node_minus].append(i)
        incident[s.node_plus].append(i)
    queue = deque([tree.junctions[0].id])
    while queue:
        jid = queue.popleft()
        for i in incident[jid]:
            s, m = tree.segments[i], model.segments[i]
            drop = m.drive * s.length
            if s.node_minus == jid and s.node_plus not in node_val:
                node_val[s.node_plus] = node_val[jid] - drop
                queue.append(s.node_plus)
            elif s.node_plus == jid and s.node_minus not in node_val:
                node_val[s.node_minus] = node_val[jid] + drop
                queue.append(s.node_minus)
    total = sum(0.5 * s.length * (node_val[s.node_minus] + node_val[s.node_plus]) for s in tree.segments)
    shift = -total / sum(s.length for s in tree.segments)
    return {
        s.id: InitialStressProfile.linear(s.length, node_val[s.node_minus] + shift, node_val[s.node_plus] + shift)
        for s in tree.segments
    }


def uniform_x_grids(tree: InterconnectTree, n_x: int = 30) -> dict[str, np.ndarray]:
    return {s.id: np.linspace(0.0, s.length, n_x) for s in tree.segments}


def iter_segment_ends(tree: InterconnectTree) -> Iterable[tuple[Segment, str, Junction]]:
    for s in tree.segments:
        for end in ("minus", "plus"):
            yield s, end, tree.junction(s.node(end))
