"""Deterministic two-player grid RTS.

Both players act simultaneously; each env step resolves sub-steps in a fixed
order (move -> attack -> harvest -> produce), so there is no turn-order
asymmetry. Everything iterates in unit-id order: (seed, action sequence)
fully determines a trajectory, bit for bit.
"""

from __future__ import annotations

import numpy as np

from . import constants as C
from .types import MatchOutcome, Observation, Order, PlayerState, StructuredAction, Unit


def cheby(ax, ay, bx, by) -> int:
    return max(abs(ax - bx), abs(ay - by))


# deterministic spawn ring around a producing building
_RING = sorted(
    [(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1) if (dx, dy) != (0, 0)]
    + [(dx, dy) for dx in (-2, -1, 0, 1, 2) for dy in (-2, -1, 0, 1, 2) if max(abs(dx), abs(dy)) == 2],
    key=lambda d: (max(abs(d[0]), abs(d[1])), d[1], d[0]),
)


class Game:
    def __init__(self, seed: int, variant: str = "triton_toy",
                 max_steps: int = C.MAX_STEPS, record_events: bool = True):
        if variant not in C.MAP_VARIANTS:
            raise ValueError(f"unknown map variant {variant!r}; "
                             f"choose from {sorted(C.MAP_VARIANTS)}")
        self.seed = int(seed)
        self.variant = variant
        self.max_steps = max_steps
        self.record_events = record_events
        self.step_count = 0
        self.done = False
        self.outcome: MatchOutcome | None = None
        self.units: dict[int, Unit] = {}
        self.players = (PlayerState(), PlayerState())
        self.events: list[dict] = []
        self.attrition = 0            # minerals carried by workers that died
        self._next_uid = 0
        self._obs_cache: dict[int, Observation] = {}
        self._height = self._height_plane(variant)
        self._setup(variant)

    # ------------------------------------------------------------ construction

    def _height_plane(self, variant: str) -> np.ndarray:
        layout = C.MAP_VARIANTS[variant]
        patches = layout["minerals"][0] + layout["minerals"][1]
        h = np.zeros((C.GRID, C.GRID), dtype=np.float32)
        for x in range(C.GRID):
            for y in range(C.GRID):
                d = min(cheby(x, y, px, py) for px, py in patches)
                h[x, y] = d / C.GRID
        return h

    def _spawn(self, type_id: int, player: int, x: int, y: int, *,
               progress: float = 1.0, remaining: int = 0) -> Unit:
        u = Unit(uid=self._next_uid, type=type_id, player=player, x=x, y=y,
                 hp=C.UNIT_HP.get(type_id, 1), build_progress=progress,
                 remaining=remaining)
        self._next_uid += 1
        self.units[u.uid] = u
        return u

    def _setup(self, variant: str) -> None:
        layout = C.MAP_VARIANTS[variant]
        for patches in layout["minerals"]:
            for px, py in patches:
                self._spawn(C.MINERAL, -1, px, py, remaining=C.MINERAL_PATCH_AMOUNT)
        for p, (bx, by) in enumerate(layout["bases"]):
            self._spawn(C.BASE, p, bx, by)
            sign = 1 if p == 0 else -1   # mirrored spawns keep 180-degree symmetry
            for k in range(C.INITIAL_WORKERS):
                dx, dy = _RING[k]
                self._spawn(C.WORKER, p, min(max(bx + sign * dx, 0), C.GRID - 1),
                            min(max(by + sign * dy, 0), C.GRID - 1))

    # ------------------------------------------------------------ bookkeeping

    def _event(self, player: int, kind: str, payload: dict) -> None:
        if self.record_events:
            self.events.append({"step": self.step_count, "player": player,
                                "kind": kind, "payload": payload})

    def player_units(self, player: int) -> list[Unit]:
        return [u for uid, u in sorted(self.units.items()) if u.player == player]

    def entity_count(self, player: int) -> int:
        return sum(1 for u in self.units.values() if u.player == player)

    def supply_used(self, player: int) -> int:
        return sum(C.SUPPLY_COST[u.type] for u in self.units.values()
                   if u.player == player and u.type in C.MOBILE_TYPES)

    def supply_cap(self, player: int) -> int:
        bases = sum(1 for u in self.units.values()
                    if u.player == player and u.type == C.BASE and u.complete)
        return min(bases * C.SUPPLY_PER_BASE, C.MAX_UNITS)

    def _static_free(self) -> np.ndarray:
        free = np.ones((C.GRID, C.GRID), dtype=bool)
        for u in self.units.values():
            if u.is_building or u.type == C.MINERAL:
                free[u.x, u.y] = False
        return free

    def visibility(self, player: int) -> np.ndarray:
        vis = np.zeros((C.GRID, C.GRID), dtype=bool)
        for u in self.units.values():
            if u.player != player:
                continue
            r = C.VISION[u.type]
            x0, x1 = max(0, u.x - r), min(C.GRID, u.x + r + 1)
            y0, y1 = max(0, u.y - r), min(C.GRID, u.y + r + 1)
            vis[x0:x1, y0:y1] = True
        return vis

    def _groups(self, player: int, vis: np.ndarray):
        mine = [u for uid, u in sorted(self.units.items()) if u.player == player]
        enemy = [u for uid, u in sorted(self.units.items())
                 if u.player == 1 - player and vis[u.x, u.y]]
        neutral = [u for uid, u in sorted(self.units.items())
                   if u.player == -1 and u.remaining > 0]
        return mine, enemy, neutral

    # ------------------------------------------------------------ observation

    def observe(self, player: int) -> Observation:
        cached = self._obs_cache.get(player)
        if cached is not None and cached.step == self.step_count and not self.done:
            return cached
        vis = self.visibility(player)
        mine, enemy, neutral = self._groups(player, vis)
        groups = (mine, enemy, neutral)

        n = C.MAX_UNITS
        unit_type = np.zeros((3, n), dtype=np.int32)
        unit_owner = np.zeros((3, n), dtype=np.int32)
        unit_cont = np.zeros((3, n, Observation.CONT_FEATS), dtype=np.float32)
        unit_mask = np.zeros((3, n), dtype=np.float32)
        slot_uid = np.full((3, n), -1, dtype=np.int32)
        for g, members in enumerate(groups):
            for i, u in enumerate(members[:n]):
                unit_type[g, i] = u.type
                unit_owner[g, i] = g
                maxhp = C.UNIT_HP.get(u.type, 1)
                hp_frac = u.remaining / C.MINERAL_PATCH_AMOUNT if u.type == C.MINERAL \
                    else u.hp / maxhp
                idle = 1.0 if (not u.orders and not u.train_queue) else 0.0
                unit_cont[g, i] = (u.x / C.GRID, u.y / C.GRID, hp_frac,
                                   u.build_progress, u.carrying / C.CARRY_AMOUNT,
                                   min(u.attack_cd, 5) / 5.0, idle,
                                   len(u.train_queue) / 3.0)
                unit_mask[g, i] = 1.0
                slot_uid[g, i] = u.uid

        spatial = np.zeros((C.GRID, C.GRID, C.SPATIAL_CHANNELS), dtype=np.float32)
        spatial[:, :, 0] = self._height
        spatial[:, :, 1] = vis
        rel = spatial[:, :, 2]
        for u in neutral:
            rel[u.x, u.y] = max(rel[u.x, u.y], 0.25)
        for u in enemy:
            rel[u.x, u.y] = max(rel[u.x, u.y], 0.5)
        for u in mine:
            rel[u.x, u.y] = 1.0
        spatial[:, :, 3] = self._static_free()

        ps = self.players[player]
        counts = {t: 0 for t in range(C.N_CONSTRUCTIBLE)}
        for u in mine:
            counts[u.type] += 1
        scalar = np.array([
            min(ps.minerals / 200.0, 2.0),
            self.supply_used(player) / C.MAX_UNITS,
            self.supply_cap(player) / C.MAX_UNITS,
            self.step_count / self.max_steps,
            counts[C.WORKER] / 16.0,
            counts[C.LIGHT] / 16.0,
            counts[C.RAIDER] / 16.0,
            counts[C.SIEGE] / 16.0,
            counts[C.BASE] / 4.0,
            counts[C.BARRACKS] / 4.0,
            counts[C.FACTORY] / 4.0,
            len(enemy) / 16.0,
        ], dtype=np.float32)

        obs = Observation(
            player=player, step=self.step_count, scalar=scalar, spatial=spatial,
            unit_type=unit_type, unit_owner=unit_owner, unit_cont=unit_cont,
            unit_mask=unit_mask, slot_uid=slot_uid,
            **self._legality(player, mine, enemy, neutral),
        )
        self._obs_cache[player] = obs
        return obs

    def _legality(self, player: int, mine, enemy, neutral) -> dict:
        n = C.MAX_UNITS
        ps = self.players[player]
        action_mask = np.zeros(C.N_ACTIONS, dtype=bool)
        select_mask = np.zeros((C.N_ACTIONS, n), dtype=bool)
        target_mask = np.zeros((C.N_ACTIONS, 3 * n), dtype=bool)
        position_mask = np.zeros((C.N_ACTIONS, C.GRID * C.GRID), dtype=bool)
        free = self._static_free().reshape(-1)
        count = len(mine)
        cap_room = count < C.MAX_UNITS
        owned_complete = {u.type for u in mine if u.complete}

        action_mask[C.NOOP] = True
        for a in range(C.N_ACTIONS):
            if a == C.NOOP:
                continue
            eligible = C.SELECTABLE[a]
            for i, u in enumerate(mine[:n]):
                if u.type in eligible and u.complete:
                    select_mask[a, i] = True
            has_sel = select_mask[a].any()
            if a in (C.MOVE, C.STOP):
                action_mask[a] = has_sel
                if a == C.MOVE:
                    position_mask[a, :] = True
            elif a == C.ATTACK:
                for j, u in enumerate(enemy[:n]):
                    target_mask[a, n + j] = True
                action_mask[a] = has_sel and bool(target_mask[a].any())
            elif a == C.HARVEST:
                for j, u in enumerate(neutral[:n]):
                    target_mask[a, 2 * n + j] = True
                action_mask[a] = has_sel and bool(target_mask[a].any())
            elif a in C.BUILD_ACTION_TYPE:
                btype = C.BUILD_ACTION_TYPE[a]
                req = C.TECH_REQUIREMENT[btype]
                position_mask[a, :] = free
                action_mask[a] = (has_sel and cap_room
                                  and ps.minerals >= C.MINERAL_COST[btype]
                                  and (req is None or req in owned_complete)
                                  and bool(free.any()))
            elif a in C.TRAIN_ACTION_TYPE:
                ttype = C.TRAIN_ACTION_TYPE[a]
                room = self.supply_used(player) + C.SUPPLY_COST[ttype] <= self.supply_cap(player)
                action_mask[a] = (has_sel and cap_room and room
                                  and ps.minerals >= C.MINERAL_COST[ttype])
            if not action_mask[a]:
                select_mask[a, :] = False
                target_mask[a, :] = False
                position_mask[a, :] = False
        return {"action_mask": action_mask, "select_mask": select_mask,
                "target_mask": target_mask, "position_mask": position_mask}

    # ------------------------------------------------------------ acting

    def legality_masks(self, player: int) -> dict:
        obs = self.observe(player)
        return {"action_mask": obs.action_mask, "select_mask": obs.select_mask,
                "target_mask": obs.target_mask, "position_mask": obs.position_mask}

    def _resolve_slot(self, obs: Observation, group: int, slot: int) -> Unit | None:
        uid = int(obs.slot_uid[group, slot])
        return self.units.get(uid) if uid >= 0 else None

    def _validate(self, obs: Observation, act: StructuredAction) -> bool:
        a = act.action_id
        if not (0 <= a < C.N_ACTIONS) or not obs.action_mask[a]:
            return False
        if not (1 <= act.delay <= C.DELAY_CHOICES):
            return False
        used = C.HEAD_USAGE[a]
        if C.HEAD_SELECTED_UNITS in used:
            sel = act.selected_units
            if not sel or len(sel) > C.MAX_SELECTED or len(set(sel)) != len(sel):
                return False
            if not all(0 <= s < C.MAX_UNITS and obs.select_mask[a, s] for s in sel):
                return False
        if C.HEAD_TARGET_UNIT in used:
            t = act.target_unit
            if t is None or not (0 <= t < 3 * C.MAX_UNITS) or not obs.target_mask[a, t]:
                return False
        if C.HEAD_TARGET_POSITION in used:
            pos = act.target_position
            if pos is None or not (0 <= pos < C.GRID * C.GRID) or not obs.position_mask[a, pos]:
                return False
        return True

    def _apply_action(self, player: int, act: StructuredAction) -> None:
        obs = self.observe(player)
        self._event(player, "action", {"action": act.to_dict()})
        if not self._validate(obs, act):
            self._event(player, "illegal_action", {"action": act.to_dict()})
            return
        a = act.action_id
        if a == C.NOOP:
            return
        ps = self.players[player]
        units = [self._resolve_slot(obs, 0, s) for s in act.selected_units]
        units = [u for u in units if u is not None and u.player == player]

        if a in C.TRAIN_ACTION_TYPE:
            ttype = C.TRAIN_ACTION_TYPE[a]
            cost = C.MINERAL_COST[ttype]
            for u in units:
                if ps.minerals < cost or len(u.train_queue) >= 3:
                    continue
                ps.minerals -= cost
                ps.spent += cost
                if act.queued or not u.train_queue:
                    u.train_queue.append(ttype)
                else:
                    u.train_queue = [ttype]
                    u.train_progress = 0
            return

        if a in C.BUILD_ACTION_TYPE:
            btype = C.BUILD_ACTION_TYPE[a]
            x, y = divmod(act.target_position, C.GRID)
            order = Order("build", x=x, y=y, build_type=btype)
            worker = units[0]
            self._assign(worker, order, act.queued)
            return

        if a == C.STOP:
            for u in units:
                u.orders = []
            return

        if a == C.MOVE:
            x, y = divmod(act.target_position, C.GRID)
            for u in units:
                self._assign(u, Order("move", x=x, y=y), act.queued)
            return

        if a in (C.ATTACK, C.HARVEST):
            group = 1 if a == C.ATTACK else 2
            target = self._resolve_slot(obs, group, act.target_unit - group * C.MAX_UNITS)
            if target is None:
                self._event(player, "illegal_action", {"action": act.to_dict(),
                                                       "reason": "stale_target"})
                return
            kind = "attack" if a == C.ATTACK else "harvest"
            for u in units:
                self._assign(u, Order(kind, target_uid=target.uid), act.queued)

    @staticmethod
    def _assign(unit: Unit, order: Order, queued: int) -> None:
        if queued and unit.orders:
            unit.orders.append(order)
        else:
            unit.orders = [order]

    # ------------------------------------------------------------ simulation

    def step_env(self, actions: dict[int, StructuredAction] | None = None) -> None:
        """Apply this step's decisions (if any) and advance one env step."""
        if self.done:
            raise RuntimeError("step_env called after the match ended")
        if actions:
            for player in sorted(actions):
                act = actions[player]
                if act is not None:
                    self._apply_action(player, act)
        self._tick_cooldowns()
        self._substep_move()
        self._substep_attack()
        self._substep_harvest()
        self._substep_produce()
        self.step_count += 1
        self._obs_cache.clear()
        self._check_end()

    def _tick_cooldowns(self) -> None:
        for u in self.units.values():
            if u.attack_cd > 0:
                u.attack_cd -= 1
            if u.move_cd > 0:
                u.move_cd -= 1

    def _order_destination(self, u: Unit, order: Order):
        if order.kind == "move":
            return order.x, order.y, 0
        if order.kind == "attack":
            t = self.units.get(order.target_uid)
            if t is None:
                return None
            return t.x, t.y, C.UNIT_RANGE[u.type]
        if order.kind == "harvest":
            if u.carrying > 0:
                base = self._nearest(u, lambda v: v.player == u.player
                                     and v.type == C.BASE and v.complete)
                return None if base is None else (base.x, base.y, 1)
            t = self.units.get(order.target_uid)
            if t is None or t.remaining <= 0:
                t = self._nearest(u, lambda v: v.player == -1 and v.remaining > 0)
                if t is None:
                    return None
                order.target_uid = t.uid
            return t.x, t.y, 1
        if order.kind == "build":
            return order.x, order.y, 1
        return None

    def _nearest(self, u: Unit, pred) -> Unit | None:
        best = None
        best_key = None
        for uid, v in sorted(self.units.items()):
            if not pred(v):
                continue
            key = (cheby(u.x, u.y, v.x, v.y), uid)
            if best_key is None or key < best_key:
                best, best_key = v, key
        return best

    def _substep_move(self) -> None:
        for uid in sorted(self.units):
            u = self.units.get(uid)
            if u is None or u.is_building or u.type == C.MINERAL:
                continue
            order = u.current_order()
            if order is None:
                continue
            if order.kind == "attack" and order.target_uid not in self.units:
                u.orders.pop(0)
                continue
            dest = self._order_destination(u, order)
            if dest is None:
                u.orders.pop(0)
                continue
            tx, ty, reach = dest
            if cheby(u.x, u.y, tx, ty) <= reach:
                continue
            if u.move_cd > 0:
                continue
            dx, dy = tx - u.x, ty - u.y
            if abs(dx) >= abs(dy) and dx != 0:
                u.x += 1 if dx > 0 else -1
            elif dy != 0:
                u.y += 1 if dy > 0 else -1
            u.move_cd = C.MOVE_COOLDOWN[u.type]

    def _substep_attack(self) -> None:
        damage: dict[int, int] = {}
        hitters: list[tuple[Unit, Unit]] = []
        for uid in sorted(self.units):
            u = self.units[uid]
            if u.type not in C.MOBILE_TYPES or not u.complete or u.attack_cd > 0:
                continue
            order = u.current_order()
            target = None
            if order is not None and order.kind == "attack":
                t = self.units.get(order.target_uid)
                if t is not None and cheby(u.x, u.y, t.x, t.y) <= C.UNIT_RANGE[u.type]:
                    target = t
            elif order is None and u.type in C.MILITARY_TYPES:
                # idle military units fight back on their own
                target = self._nearest(
                    u, lambda v, me=u: v.player == 1 - me.player
                    and cheby(me.x, me.y, v.x, v.y) <= C.UNIT_RANGE[me.type])
            if target is None:
                continue
            dmg = C.UNIT_DMG[u.type]
            if C.COUNTERS.get(u.type) == target.type:
                dmg *= 2
            damage[target.uid] = damage.get(target.uid, 0) + dmg
            hitters.append((u, target))
            u.attack_cd = C.ATTACK_COOLDOWN[u.type]
        for tid, dmg in sorted(damage.items()):
            t = self.units.get(tid)
            if t is None:
                continue
            t.hp -= dmg
            if t.hp <= 0:
                self.attrition += t.carrying
                self._event(t.player, "kill",
                            {"uid": tid, "type": t.type, "by": 1 - t.player})
                del self.units[tid]

    def _substep_harvest(self) -> None:
        for uid in sorted(self.units):
            u = self.units.get(uid)
            if u is None or u.type != C.WORKER:
                continue
            order = u.current_order()
            if order is None or order.kind != "harvest":
                continue
            if u.carrying == 0:
                t = self.units.get(order.target_uid)
                if t is not None and t.remaining > 0 and cheby(u.x, u.y, t.x, t.y) <= 1:
                    take = min(C.CARRY_AMOUNT, t.remaining)
                    t.remaining -= take
                    u.carrying = take
            else:
                base = self._nearest(u, lambda v: v.player == u.player
                                     and v.type == C.BASE and v.complete)
                if base is not None and cheby(u.x, u.y, base.x, base.y) <= 1:
                    ps = self.players[u.player]
                    ps.minerals += u.carrying
                    ps.harvested += u.carrying
                    self._event(u.player, "deposit", {"amount": u.carrying})
                    u.carrying = 0

    def _substep_produce(self) -> None:
        free = None
        for uid in sorted(self.units):
            u = self.units.get(uid)
            if u is None:
                continue
            if u.is_building and not u.complete:
                u.build_progress = min(1.0, u.build_progress + 1.0 / C.BUILD_TIME[u.type])
                if u.complete:
                    self._event(u.player, "construct", {"type": u.type, "uid": u.uid})
                continue
            if u.is_building and u.train_queue:
                u.train_progress += 1
                ttype = u.train_queue[0]
                if u.train_progress >= C.TRAIN_TIME[ttype]:
                    if self.entity_count(u.player) >= C.MAX_UNITS:
                        continue  # hold until there is room
                    if free is None:
                        free = self._static_free()
                    sx, sy = u.x, u.y
                    sign = 1 if u.player == 0 else -1
                    for dx, dy in _RING:
                        nx, ny = u.x + sign * dx, u.y + sign * dy
                        if 0 <= nx < C.GRID and 0 <= ny < C.GRID and free[nx, ny]:
                            sx, sy = nx, ny
                            break
                    unit = self._spawn(ttype, u.player, sx, sy)
                    self._event(u.player, "construct", {"type": ttype, "uid": unit.uid})
                    u.train_queue.pop(0)
                    u.train_progress = 0
                continue
            if u.type == C.WORKER:
                order = u.current_order()
                if order is None or order.kind != "build":
                    continue
                if cheby(u.x, u.y, order.x, order.y) > 1:
                    continue
                ps = self.players[u.player]
                cost = C.MINERAL_COST[order.build_type]
                free = self._static_free()
                blocked = not free[order.x, order.y]
                if blocked or ps.minerals < cost or self.entity_count(u.player) >= C.MAX_UNITS:
                    self._event(u.player, "build_dropped",
                                {"type": order.build_type,
                                 "reason": "blocked" if blocked else "resources"})
                    u.orders.pop(0)
                    continue
                ps.minerals -= cost
                ps.spent += cost
                b = self._spawn(order.build_type, u.player, order.x, order.y,
                                progress=1.0 / C.BUILD_TIME[order.build_type])
                self._event(u.player, "build_start", {"type": order.build_type, "uid": b.uid})
                u.orders.pop(0)
                free = None

    def _check_end(self) -> None:
        has_base = [any(u.player == p and u.type == C.BASE for u in self.units.values())
                    for p in (0, 1)]
        winner: int | None = None
        over = False
        if not has_base[0] and not has_base[1]:
            over, winner = True, None
        elif not has_base[1]:
            over, winner = True, 0
        elif not has_base[0]:
            over, winner = True, 1
        elif self.step_count >= self.max_steps:
            over, winner = True, None
        if over:
            self.done = True
            stats = {
                p: {"minerals": self.players[p].minerals,
                    "harvested": self.players[p].harvested,
                    "spent": self.players[p].spent,
                    "entities": self.entity_count(p)}
                for p in (0, 1)
            }
            self.outcome = MatchOutcome(winner=winner, end_step=self.step_count, stats=stats)
            self._event(-1, "end", {"winner": winner, "step": self.step_count})

    # ------------------------------------------------------------ rewards

    def terminal_rewards(self) -> tuple[float, float]:
        if not self.done or self.outcome is None:
            return 0.0, 0.0
        return self.outcome.reward(0), self.outcome.reward(1)
