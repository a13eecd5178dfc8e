from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class TraceLine:
    time: float
    sender: str
    receiver: str
    kind: str
    hm: bytes = b""
    detail: str = ""

    def format(self) -> str:
        prefix = self.hm[:4].hex() if self.hm else "-"
        line = f"{self.time:9.1f}  {self.sender:<10} -> {self.receiver:<10} {self.kind:<18} {prefix}"
        return f"{line}  {self.detail}" if self.detail else line


@dataclass
class ProtocolTrace:
    """One line per protocol message: time, sender role, receiver role, kind, h(M) prefix."""

    lines: list[TraceLine] = field(default_factory=list)

    def log(self, time, sender, receiver, kind, hm=b"", detail=""):
        self.lines.append(TraceLine(float(time), sender, receiver, kind, hm, detail))

    def render(self) -> str:
        return "\n".join(line.format() for line in self.lines)
