"""Footstep plans: manual line/turn/stand/stairs generators, a grid A* planner
for curved paths, goal sampling, and plain-text I/O."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import InvalidArgument, PlanningFailure

LEFT, RIGHT, EITHER = "left", "right", "either"
MODES = ("forward", "backward", "lateral", "turn", "stand", "stairs", "curved")
LINE_DIRECTIONS = ("forward", "backward", "lateral+", "lateral-")

GOAL_LOW = (0.0, -1.0, -math.pi / 2)
GOAL_HIGH = (0.0, 1.0, math.pi / 2)


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=np.float64) + np.pi, 2.0 * np.pi) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    return float(w) if np.ndim(w) == 0 else w


def _side_sign(side: str) -> float:
    return 1.0 if side == LEFT else -1.0


def _other(side: str) -> str:
    return RIGHT if side == LEFT else LEFT


@dataclass(frozen=True)
class Footstep:
    x: float
    y: float
    z: float
    heading: float
    side: str = EITHER

    def __post_init__(self):
        if self.side not in (LEFT, RIGHT, EITHER):
            raise InvalidArgument(f"unknown side {self.side!r}")
        if not math.isfinite(self.z):
            raise InvalidArgument("z must be finite")
        h = wrap_angle(self.heading)
        if h != self.heading:
            object.__setattr__(self, "heading", h)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.heading])


@dataclass(frozen=True)
class FootstepPlan:
    steps: tuple[Footstep, ...]
    mode: str
    foot_spread: float = 0.0
    step_length: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        if self.mode not in MODES:
            raise InvalidArgument(f"unknown plan mode {self.mode!r}")

    def __len__(self) -> int:
        return len(self.steps)

    def __getitem__(self, k) -> Footstep:
        return self.steps[k]

    @property
    def is_stand(self) -> bool:
        return self.mode == "stand"

    def as_array(self) -> np.ndarray:
        """(n, 4) array of x, y, z, heading."""
        if not self.steps:
            return np.zeros((0, 4))
        return np.array([s.as_array() for s in self.steps])

    def sides(self) -> list[str]:
        return [s.side for s in self.steps]


@dataclass
class OccupancyGrid:
    resolution: float
    cells: np.ndarray  # (height, width) bool, row index = y cell
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=bool)
        if self.resolution <= 0:
            raise InvalidArgument("resolution must be positive")
        if self.cells.ndim != 2 or min(self.cells.shape) < 1:
            raise InvalidArgument("grid needs at least one cell")

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @classmethod
    def empty(cls, x_min, y_min, x_max, y_max, resolution=0.05) -> "OccupancyGrid":
        w = int(math.ceil((x_max - x_min) / resolution))
        h = int(math.ceil((y_max - y_min) / resolution))
        return cls(resolution, np.zeros((h, w), dtype=bool), (x_min, y_min, 0.0))

    def to_cell(self, x: float, y: float) -> tuple[int, int]:
        ox, oy, oth = self.origin
        dx, dy = x - ox, y - oy
        c, s = math.cos(oth), math.sin(oth)
        lx, ly = c * dx + s * dy, -s * dx + c * dy
        return int(math.floor(lx / self.resolution)), int(math.floor(ly / self.resolution))

    def cell_center(self, i: int, j: int) -> tuple[float, float]:
        ox, oy, oth = self.origin
        lx, ly = (i + 0.5) * self.resolution, (j + 0.5) * self.resolution
        c, s = math.cos(oth), math.sin(oth)
        return ox + c * lx - s * ly, oy + s * lx + c * ly

    def inside(self, x: float, y: float) -> bool:
        i, j = self.to_cell(x, y)
        return 0 <= i < self.width and 0 <= j < self.height

    def is_free(self, x: float, y: float) -> bool:
        i, j = self.to_cell(x, y)
        return 0 <= i < self.width and 0 <= j < self.height and not self.cells[j, i]

    def segment_free(self, x0, y0, x1, y1) -> bool:
        n = max(1, int(math.ceil(math.hypot(x1 - x0, y1 - y0) / (0.5 * self.resolution))))
        for k in range(n + 1):
            t = k / n
            if not self.is_free(x0 + t * (x1 - x0), y0 + t * (y1 - y0)):
                return False
        return True


# -- manual generators ------------------------------------------------------


def _check_positive(**kw):
    for name, v in kw.items():
        if not v > 0:
            raise InvalidArgument(f"{name} must be positive, got {v}")


def gen_line_plan(direction: str, step_length: float, foot_spread: float, n_steps: int) -> FootstepPlan:
    """Alternating steps about a straight axis; every heading stays at 0.

    forward/backward walk along x with the first step on the right foot.
    lateral+/lateral- walk along +y/-y leading with the foot on that side;
    sidestep lengths must stay below twice the spread so feet never cross.
    """
    _check_positive(step_length=step_length, foot_spread=foot_spread)
    if n_steps < 1:
        raise InvalidArgument("n_steps must be at least 1")
    if direction not in LINE_DIRECTIONS:
        raise InvalidArgument(f"unknown direction {direction!r}")
    steps = []
    if direction in ("forward", "backward"):
        sign = 1.0 if direction == "forward" else -1.0
        side = RIGHT
        for k in range(1, n_steps + 1):
            steps.append(Footstep(sign * k * step_length, _side_sign(side) * foot_spread, 0.0, 0.0, side))
            side = _other(side)
        mode = direction
    else:
        if step_length >= 2.0 * foot_spread:
            raise InvalidArgument("lateral step_length must be below twice the foot spread")
        sign = 1.0 if direction == "lateral+" else -1.0
        side = LEFT if sign > 0 else RIGHT
        for k in range(1, n_steps + 1):
            steps.append(Footstep(0.0, sign * k * step_length + _side_sign(side) * foot_spread, 0.0, 0.0, side))
            side = _other(side)
        mode = "lateral"
    return FootstepPlan(tuple(steps), mode, foot_spread, step_length)


def gen_stand() -> FootstepPlan:
    return FootstepPlan((Footstep(0.0, 0.0, 0.0, 0.0, EITHER),), "stand")


def gen_turn_in_place(total_yaw: float, yaw_per_step: float, foot_spread: float) -> FootstepPlan:
    """Feet placed on a circle of radius ``foot_spread`` about the origin.

    Step k sits beside the origin at heading ``k * yaw_per_step`` (the last
    one clamped to ``total_yaw``); the lead foot is on the turning side.
    """
    if yaw_per_step == 0 or abs(yaw_per_step) > math.pi / 6 + 1e-12:
        raise InvalidArgument("yaw_per_step must satisfy 0 < |yaw_per_step| <= pi/6")
    _check_positive(foot_spread=foot_spread)
    if total_yaw == 0:
        return gen_stand()
    if math.copysign(1.0, total_yaw) != math.copysign(1.0, yaw_per_step):
        raise InvalidArgument("total_yaw and yaw_per_step must share a sign")
    n = int(math.ceil(total_yaw / yaw_per_step - 1e-9))
    side = LEFT if yaw_per_step > 0 else RIGHT
    steps = []
    for k in range(1, n + 1):
        th = total_yaw if k == n else k * yaw_per_step
        sgn = _side_sign(side)
        x, y = -sgn * foot_spread * math.sin(th), sgn * foot_spread * math.cos(th)
        steps.append(Footstep(x, y, 0.0, th, side))
        side = _other(side)
    return FootstepPlan(tuple(steps), "turn", foot_spread, 0.0)


def apply_stairs(plan: FootstepPlan, rise: float) -> FootstepPlan:
    """Raise step k (1-based) to ``k * rise``; treads are one step_length long."""
    if plan.mode not in ("forward", "stairs"):
        raise InvalidArgument("stairs need a forward line plan")
    if rise == 0:
        return plan
    steps = tuple(replace(s, z=(k + 1) * rise) for k, s in enumerate(plan.steps))
    return FootstepPlan(steps, "stairs", plan.foot_spread, plan.step_length)


def sample_goal(rng_seed) -> tuple[float, float, float]:
    """Uniform goal pose in the box from (0, -1, -pi/2) to (0, 1, pi/2)."""
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    g = rng.uniform(GOAL_LOW, GOAL_HIGH)
    return float(g[0]), float(g[1]), float(g[2])


# -- search planner ---------------------------------------------------------


@dataclass(frozen=True)
class PlannerParams:
    step_length: float = 0.35
    foot_spread: float = 0.15
    max_yaw: float = math.pi / 8
    goal_tolerance: float = 0.1
    goal_yaw_tolerance: float = math.radians(10.0)
    max_expansions: int = 200_000
    # fraction of a nominal step charged extra for non-straight primitives
    turn_penalty: float = 0.05
    yaw_bins: int = 64
    # weighted A*: trades optimality for far fewer expansions
    heuristic_weight: float = 4.0


def _primitives(p: PlannerParams):
    L, Y = p.step_length, p.max_yaw
    prims = [
        (L, 0.0, 0.0), (0.6 * L, 0.0, 0.0), (0.3 * L, 0.0, 0.0), (-0.3 * L, 0.0, 0.0),
        (0.0, 0.3 * L, 0.0), (0.0, -0.3 * L, 0.0),
        (0.6 * L, 0.0, Y / 2), (0.6 * L, 0.0, -Y / 2),
        (0.3 * L, 0.0, Y), (0.3 * L, 0.0, -Y),
        (0.0, 0.0, Y), (0.0, 0.0, -Y),
        (0.0, 0.3 * L, Y), (0.0, -0.3 * L, -Y),
        (0.0, 0.3 * L, -Y), (0.0, -0.3 * L, Y),
    ]
    return prims


def _reachable(grid: OccupancyGrid, start, goal) -> bool:
    """4-connected flood fill over free cells."""
    si, sj = grid.to_cell(*start)
    gi, gj = grid.to_cell(*goal)
    seen = np.zeros_like(grid.cells)
    stack = [(si, sj)]
    seen[sj, si] = True
    while stack:
        i, j = stack.pop()
        if (i, j) == (gi, gj):
            return True
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ni, nj = i + di, j + dj
            if 0 <= ni < grid.width and 0 <= nj < grid.height and not seen[nj, ni] and not grid.cells[nj, ni]:
                seen[nj, ni] = True
                stack.append((ni, nj))
    return False


def plan_curved(grid: OccupancyGrid, start, goal, params: PlannerParams | None = None,
                first_side: str = RIGHT) -> FootstepPlan:
    """A* over (x, y, yaw, next foot) with a fixed stepping primitive set.

    The search state is the walking-axis pose; each expansion moves it by a
    primitive expressed in its own frame and drops the next foot beside the
    new pose at +/- foot_spread.  Stops once the pose is within the goal
    tolerances.
    """
    p = params or PlannerParams()
    sx, sy, sth = map(float, start)
    gx, gy, gth = map(float, goal)
    for name, (x, y) in (("start", (sx, sy)), ("goal", (gx, gy))):
        if not grid.inside(x, y):
            raise InvalidArgument(f"{name} lies outside the grid")
        if not grid.is_free(x, y):
            raise InvalidArgument(f"{name} cell is occupied")
    if not _reachable(grid, (sx, sy), (gx, gy)):
        raise PlanningFailure("goal is not connected to start through free cells")

    prims = _primitives(p)
    L = p.step_length
    res = min(grid.resolution, 0.05)
    yaw_q = 2.0 * math.pi / p.yaw_bins

    def at_goal(x, y, th):
        return math.hypot(x - gx, y - gy) <= p.goal_tolerance and abs(wrap_angle(th - gth)) <= p.goal_yaw_tolerance

    def heuristic(x, y, th):
        d = max(0.0, math.hypot(x - gx, y - gy) - p.goal_tolerance) / L
        a = max(0.0, abs(wrap_angle(th - gth)) - p.goal_yaw_tolerance) / p.max_yaw
        return max(d, a)

    def key(x, y, th, side):
        return (round(x / res), round(y / res), round(wrap_angle(th) / yaw_q), side)

    start_side = first_side
    if at_goal(sx, sy, sth):
        sg = _side_sign(start_side)
        fx, fy = sx - sg * p.foot_spread * math.sin(sth), sy + sg * p.foot_spread * math.cos(sth)
        return FootstepPlan((Footstep(fx, fy, 0.0, sth, start_side),), "curved", p.foot_spread, L)

    w_h = p.heuristic_weight
    counter = 0
    open_heap = [(heuristic(sx, sy, sth), 0.0, counter, (sx, sy, sth, start_side))]
    parents: dict = {key(sx, sy, sth, start_side): None}
    nodes = {key(sx, sy, sth, start_side): (sx, sy, sth, start_side, None)}
    best_g = {key(sx, sy, sth, start_side): 0.0}
    closed = set()
    expansions = 0
    while open_heap:
        _, g, _, (x, y, th, side) = heapq.heappop(open_heap)
        k = key(x, y, th, side)
        if k in closed:
            continue
        closed.add(k)
        if at_goal(x, y, th) and k != key(sx, sy, sth, start_side):
            return _backtrack(nodes, parents, k, p)
        expansions += 1
        if expansions > p.max_expansions:
            break
        c, s = math.cos(th), math.sin(th)
        sg = _side_sign(side)
        for dx, dy, dth in prims:
            # a sidestep toward the swing foot only; the other would cross the legs
            if dy != 0.0 and math.copysign(1.0, dy) != sg:
                continue
            nx, ny = x + c * dx - s * dy, y + s * dx + c * dy
            nth = wrap_angle(th + dth)
            fx = nx - sg * p.foot_spread * math.sin(nth)
            fy = ny + sg * p.foot_spread * math.cos(nth)
            if not (grid.is_free(nx, ny) and grid.is_free(fx, fy) and grid.segment_free(x, y, nx, ny)):
                continue
            step_cost = 1.0 + (p.turn_penalty if (dth != 0.0 or dy != 0.0 or dx != L) else 0.0)
            ng = g + step_cost
            nside = _other(side)
            nk = key(nx, ny, nth, nside)
            if nk in closed or ng >= best_g.get(nk, math.inf):
                continue
            best_g[nk] = ng
            parents[nk] = k
            nodes[nk] = (nx, ny, nth, nside, (fx, fy, nth, side))
            counter += 1
            heapq.heappush(open_heap, (ng + w_h * heuristic(nx, ny, nth), ng, counter, (nx, ny, nth, nside)))
    raise PlanningFailure("search exhausted without reaching the goal")


def _backtrack(nodes, parents, k, p: PlannerParams) -> FootstepPlan:
    steps = []
    while parents[k] is not None:
        fx, fy, fth, fside = nodes[k][4]
        steps.append(Footstep(fx, fy, 0.0, fth, fside))
        k = parents[k]
    steps.reverse()
    return FootstepPlan(tuple(steps), "curved", p.foot_spread, p.step_length)


def walking_axis(plan: FootstepPlan) -> np.ndarray:
    """Recover the axis pose (x, y, yaw) behind each step of a sided plan."""
    out = []
    for s in plan.steps:
        sg = _side_sign(s.side)
        out.append((s.x + sg * plan.foot_spread * math.sin(s.heading),
                    s.y - sg * plan.foot_spread * math.cos(s.heading), s.heading))
    return np.array(out)


# -- file I/O ---------------------------------------------------------------


def plan_to_text(plan: FootstepPlan) -> str:
    lines = [
        f"# mode {plan.mode}",
        f"# foot_spread {plan.foot_spread!r}",
        f"# step_length {plan.step_length!r}",
        "# x y z heading side",
    ]
    for s in plan.steps:
        lines.append(f"{s.x!r} {s.y!r} {s.z!r} {s.heading!r} {s.side}")
    return "\n".join(lines) + "\n"


def plan_from_text(text: str) -> FootstepPlan:
    meta = {"mode": "forward", "foot_spread": "0.0", "step_length": "0.0"}
    steps = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] in meta:
                meta[parts[0]] = parts[1]
            continue
        x, y, z, th, side = line.split()
        steps.append(Footstep(float(x), float(y), float(z), float(th), side))
    return FootstepPlan(tuple(steps), meta["mode"], float(meta["foot_spread"]), float(meta["step_length"]))


def save_plan(plan: FootstepPlan, path) -> None:
    Path(path).write_text(plan_to_text(plan))


def load_plan(path) -> FootstepPlan:
    return plan_from_text(Path(path).read_text())


def grid_to_text(grid: OccupancyGrid) -> str:
    ox, oy, oth = grid.origin
    lines = [
        f"resolution {grid.resolution!r}",
        f"width {grid.width}",
        f"height {grid.height}",
        f"origin {ox!r} {oy!r} {oth!r}",
    ]
    for row in grid.cells:
        lines.append(" ".join("1" if c else "0" for c in row))
    return "\n".join(lines) + "\n"


def grid_from_text(text: str) -> OccupancyGrid:
    """Header lines (resolution, width, height, origin) then one 0/1 row per y cell."""
    header: dict[str, list[str]] = {}
    rows = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        head, *rest = line.split()
        if head in ("resolution", "width", "height", "origin"):
            header[head] = rest
        else:
            rows.append([int(v) for v in line.split()])
    try:
        res = float(header["resolution"][0])
        w, h = int(header["width"][0]), int(header["height"][0])
    except KeyError as exc:
        raise InvalidArgument(f"grid header misses {exc.args[0]}") from None
    origin = tuple(float(v) for v in header.get("origin", ["0", "0", "0"]))
    if len(origin) == 2:
        origin = (*origin, 0.0)
    cells = np.array(rows, dtype=bool)
    if cells.shape != (h, w):
        raise InvalidArgument(f"grid body is {cells.shape}, header says {(h, w)}")
    return OccupancyGrid(res, cells, origin)


def load_grid(path) -> OccupancyGrid:
    return grid_from_text(Path(path).read_text())


def save_grid(grid: OccupancyGrid, path) -> None:
    Path(path).write_text(grid_to_text(grid))
