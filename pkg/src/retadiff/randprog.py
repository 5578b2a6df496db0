"""Seeded random program pairs for differential fuzzing.

Programs are built from structured segments (arithmetic runs, forks,
counted loops, IO reads) so that every generated loop is either counted
with an immediate limit or driven by a declared IO range; both keep the
bound derivable and the simulation finite.  The update is a small set of
mutations applied to the segment structure.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

DATA_REGS = (0, 1, 2, 3, 6)
LOOP_REGS = (4, 5)
IO_REG = 3
ARITH_OPS = ("add", "sub", "mul")
COND_OPS = ("beq", "bne", "blt", "bge", "bgt", "ble")


@dataclass
class GeneratedPair:
    seed: int
    old_text: str
    new_text: str
    domains: dict[int, tuple[int, int]]
    has_io: bool


@dataclass
class _Line:
    text: str
    mutable: bool = True  # arithmetic payload the mutator may touch


@dataclass
class _Segment:
    kind: str  # straight | fork | loop
    lines: list[_Line] = field(default_factory=list)
    body: list["_Segment"] = field(default_factory=list)
    header: str = ""
    counter: int | None = None
    limit: int = 0
    step: int = 1
    while_style: bool = False
    cond: str = ""
    fork_reg: int = 0
    fork_imm: int = 0
    then_lines: list[_Line] = field(default_factory=list)
    else_lines: list[_Line] = field(default_factory=list)


class _Builder:
    def __init__(self, rng: random.Random, use_io: bool):
        self.rng = rng
        self.use_io = use_io
        self.label_counter = 0

    def fresh(self, stem: str) -> str:
        self.label_counter += 1
        return f"{stem}{self.label_counter}"

    def arith_line(self) -> _Line:
        rng = self.rng
        kind = rng.randrange(10)
        dst = rng.choice(DATA_REGS)
        if kind < 6:
            op = rng.choice(ARITH_OPS)
            src = rng.choice(DATA_REGS)
            if rng.random() < 0.5:
                return _Line(f"{op} r{dst}, r{src}, #{rng.randint(0, 5)}")
            src2 = rng.choice(DATA_REGS)
            return _Line(f"{op} r{dst}, r{src}, r{src2}")
        if kind == 6:
            return _Line(f"movi r{dst}, #{rng.randint(-8, 15)}")
        if kind == 7:
            return _Line(f"sdiv r{dst}, r{rng.choice(DATA_REGS)}, #{rng.randint(1, 4)}")
        if kind == 8:
            return _Line(f"str r{dst}, [r7, #{rng.randint(0, 15)}]")
        return _Line(f"ldr r{dst}, [r7, #{rng.randint(0, 15)}]")

    def straight(self, n: int) -> _Segment:
        seg = _Segment(kind="straight")
        for _ in range(n):
            seg.lines.append(self.arith_line())
        if self.use_io and self.rng.random() < 0.35:
            seg.lines.insert(
                self.rng.randrange(len(seg.lines) + 1), _Line("io sense", mutable=False)
            )
        return seg

    def fork(self) -> _Segment:
        rng = self.rng
        seg = _Segment(
            kind="fork",
            cond=rng.choice(COND_OPS),
            fork_reg=rng.choice(DATA_REGS),
            fork_imm=rng.randint(-2, 12),
        )
        for _ in range(rng.randint(1, 3)):
            seg.then_lines.append(self.arith_line())
        for _ in range(rng.randint(1, 3)):
            seg.else_lines.append(self.arith_line())
        return seg

    def loop(self, depth: int) -> _Segment:
        rng = self.rng
        counter = LOOP_REGS[depth]
        step = rng.choice((1, 1, 1, 2, 3))
        iters = rng.randint(1, 12 if depth else 24)
        seg = _Segment(
            kind="loop",
            counter=counter,
            limit=step * iters,
            step=step,
            while_style=rng.random() < 0.4,
        )
        inner: list[_Segment] = [self.straight(rng.randint(1, 3))]
        if rng.random() < 0.4:
            inner.append(self.fork())
        if depth == 0 and rng.random() < 0.35:
            inner.append(self.loop(1))
        if rng.random() < 0.3:
            inner.append(self.straight(rng.randint(1, 2)))
        seg.body = inner
        return seg

    def program(self) -> list[_Segment]:
        rng = self.rng
        segs: list[_Segment] = [self.straight(rng.randint(1, 4))]
        for _ in range(rng.randint(1, 3)):
            r = rng.random()
            if r < 0.45:
                segs.append(self.loop(0))
            elif r < 0.7:
                segs.append(self.fork())
            else:
                segs.append(self.straight(rng.randint(1, 4)))
        return segs


def _render(segs: list[_Segment], use_io: bool, io_range: tuple[int, int]) -> str:
    lines: list[str] = []
    if use_io:
        lines.append(f".io sense 1 3 r{IO_REG} {io_range[0]} {io_range[1]}")
    counter = [0]

    def fresh(stem: str) -> str:
        counter[0] += 1
        return f"{stem}{counter[0]}"

    def emit_segment(seg: _Segment):
        if seg.kind == "straight":
            for ln in seg.lines:
                lines.append(f"    {ln.text}")
        elif seg.kind == "fork":
            then_label = fresh("t")
            join_label = fresh("j")
            lines.append(f"    cmp r{seg.fork_reg}, #{seg.fork_imm}")
            lines.append(f"    {seg.cond} {then_label}")
            for ln in seg.else_lines:
                lines.append(f"    {ln.text}")
            lines.append(f"    b {join_label}")
            lines.append(f"{then_label}:")
            for ln in seg.then_lines:
                lines.append(f"    {ln.text}")
            lines.append(f"{join_label}: nop")
        elif seg.kind == "loop":
            head = fresh("L")
            done = fresh("d")
            c = seg.counter
            lines.append(f"    movi r{c}, #0")
            if seg.while_style:
                lines.append(f"{head}: cmp r{c}, #{seg.limit}")
                lines.append(f"    bge {done}")
                for sub in seg.body:
                    emit_segment(sub)
                lines.append(f"    add r{c}, r{c}, #{seg.step}")
                lines.append(f"    b {head}")
                lines.append(f"{done}: nop")
            else:
                lines.append(f"{head}: nop")
                for sub in seg.body:
                    emit_segment(sub)
                lines.append(f"    add r{c}, r{c}, #{seg.step}")
                lines.append(f"    cmp r{c}, #{seg.limit}")
                lines.append(f"    blt {head}")

    lines.append("main: nop")
    for seg in segs:
        emit_segment(seg)
    lines.append("    halt")
    return "\n".join(lines) + "\n"


def _all_segments(segs: list[_Segment]) -> list[_Segment]:
    out = []
    for s in segs:
        out.append(s)
        out.extend(_all_segments(s.body))
    return out


def _mutate(segs: list[_Segment], rng: random.Random) -> None:
    """Apply one structural mutation in place."""
    everything = _all_segments(segs)
    arith_holders = [
        (s, lst)
        for s in everything
        for lst in ((s.lines,) if s.kind != "fork" else (s.then_lines, s.else_lines))
        if any(ln.mutable for ln in lst)
    ]
    choice = rng.random()
    loops = [s for s in everything if s.kind == "loop"]
    forks = [s for s in everything if s.kind == "fork"]

    if choice < 0.22 and loops:
        lp = rng.choice(loops)
        if rng.random() < 0.5:
            lp.limit = max(1, lp.limit + rng.choice((-2, -1, 1, 2)) * lp.step)
        else:
            new_iters = rng.randint(1, 24)
            lp.limit = lp.step * new_iters
        return
    if choice < 0.35 and forks:
        fk = rng.choice(forks)
        if rng.random() < 0.5:
            fk.fork_imm += rng.choice((-3, -1, 1, 3))
        else:
            fk.cond = rng.choice(COND_OPS)
        return
    if choice < 0.55 and arith_holders:
        seg, lst = rng.choice(arith_holders)
        candidates = [i for i, ln in enumerate(lst) if ln.mutable]
        idx = rng.choice(candidates)
        old = lst[idx].text
        parts = old.split()
        if parts[0] in ARITH_OPS and rng.random() < 0.6:
            others = [o for o in ARITH_OPS if o != parts[0]]
            lst[idx] = _Line(" ".join([rng.choice(others)] + parts[1:]))
        elif "#" in old:
            head, _, imm = old.rpartition("#")
            imm_val = int(imm.rstrip("]"))
            bump = rng.choice((-2, -1, 1, 2))
            suffix = "]" if imm.endswith("]") else ""
            lst[idx] = _Line(f"{head}#{imm_val + bump}{suffix}")
        else:
            lst[idx] = _Line(old.replace("r", "r", 1))  # no-op fallback
        return
    if choice < 0.75:
        builder = _Builder(rng, use_io=False)
        target = rng.choice([t for t in everything if t.kind == "straight"] or segs)
        if target.kind == "straight":
            target.lines.insert(rng.randrange(len(target.lines) + 1), builder.arith_line())
        return
    if choice < 0.9 and arith_holders:
        seg, lst = rng.choice(arith_holders)
        candidates = [i for i, ln in enumerate(lst) if ln.mutable]
        if len([ln for ln in lst if ln.mutable]) > 1:
            del lst[rng.choice(candidates)]
        return
    # Wrap a straight segment's tail in a new conditional guard.
    straights = [s for s in everything if s.kind == "straight" and len(s.lines) >= 2]
    if straights:
        s = rng.choice(straights)
        guarded = _Segment(
            kind="fork",
            cond=rng.choice(COND_OPS),
            fork_reg=rng.choice(DATA_REGS),
            fork_imm=rng.randint(-2, 10),
            then_lines=s.lines[-2:],
            else_lines=[_Line("nop", mutable=False)],
        )
        del s.lines[-2:]
        idx = None
        for holder in (segs, *[p.body for p in everything]):
            if s in holder:
                idx = (holder, holder.index(s))
                break
        if idx is not None:
            holder, pos = idx
            holder.insert(pos + 1, guarded)


def generate_pair(seed: int) -> GeneratedPair:
    rng = random.Random(seed)
    use_io = rng.random() < 0.4
    io_range = (0, rng.randint(1, 7))
    builder = _Builder(rng, use_io)
    segs = builder.program()
    old_text = _render(segs, use_io, io_range)
    while old_text.count("\n") > 56:  # keep programs at most ~60 instructions
        segs = segs[:-1] if len(segs) > 1 else [builder.straight(2)]
        old_text = _render(segs, use_io, io_range)
    for _ in range(rng.randint(1, 3)):
        _mutate(segs, rng)
    new_text = _render(segs, use_io, io_range)

    n_inputs = rng.randint(0, 3)
    domains: dict[int, tuple[int, int]] = {}
    for r in (0, 1, 2)[:n_inputs]:
        lo = rng.randint(-4, 4)
        domains[r] = (lo, lo + rng.randint(0, 15))
    return GeneratedPair(
        seed=seed, old_text=old_text, new_text=new_text, domains=domains, has_io=use_io
    )
