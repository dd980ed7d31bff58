"""Datagram transports: a deterministic simulated network and real UDP.

Both expose ``send(frame, now)`` (to every peer) and ``receive(now)``
(frames that have arrived). UDP ignores ``now``.
"""

from __future__ import annotations

import heapq
import logging
import os
import random
import socket
from dataclasses import dataclass
from typing import Sequence

log = logging.getLogger(__name__)

BIND_ENV = "SARSIM_BIND"


@dataclass(frozen=True)
class LinkModel:
    loss: float = 0.0  # per-frame drop probability
    latency_s: float = 0.0
    jitter_s: float = 0.0  # extra uniform delay in [0, jitter_s]

    def __post_init__(self):
        if not 0.0 <= self.loss <= 1.0:
            raise ValueError("loss probability must lie in [0, 1]")
        if self.latency_s < 0 or self.jitter_s < 0:
            raise ValueError("latency and jitter must be non-negative")


class SimNetwork:
    """In-process network driven by the simulation clock.

    Each directed link has its own seeded generator, so adding a node never
    changes the loss pattern of existing links.
    """

    def __init__(self, seed: int | str = 0, default_link: LinkModel = LinkModel()):
        self.seed = seed
        self.default_link = default_link
        self._links: dict[tuple[int, int], LinkModel] = {}
        self._rngs: dict[tuple[int, int], random.Random] = {}
        self._nodes: list[int] = []
        self._queues: dict[int, list[tuple[float, int, bytes]]] = {}
        self._counter = 0
        self.sent = 0
        self.dropped = 0
        self.delivered = 0

    def set_link(self, src: int, dst: int, model: LinkModel) -> None:
        self._links[(src, dst)] = model

    def endpoint(self, node_id: int) -> "SimEndpoint":
        if node_id not in self._nodes:
            self._nodes.append(node_id)
            self._nodes.sort()
            self._queues[node_id] = []
        return SimEndpoint(self, node_id)

    def _rng(self, src: int, dst: int) -> random.Random:
        rng = self._rngs.get((src, dst))
        if rng is None:
            rng = self._rngs[(src, dst)] = random.Random(f"{self.seed}:link:{src}->{dst}")
        return rng

    def transmit(self, src: int, frame: bytes, now: float) -> None:
        for dst in self._nodes:
            if dst == src:
                continue
            link = self._links.get((src, dst), self.default_link)
            rng = self._rng(src, dst)
            self.sent += 1
            lost = link.loss > 0.0 and rng.random() < link.loss
            delay = link.latency_s + (rng.random() * link.jitter_s if link.jitter_s > 0.0 else 0.0)
            if lost:
                self.dropped += 1
                continue
            self._counter += 1
            heapq.heappush(self._queues[dst], (now + delay, self._counter, frame))

    def collect(self, dst: int, now: float) -> list[bytes]:
        """Pop frames for ``dst`` that are due; others stay queued."""
        queue = self._queues.get(dst)
        out = []
        while queue and queue[0][0] <= now + 1e-9:
            out.append(heapq.heappop(queue)[2])
        self.delivered += len(out)
        return out

    def pending(self) -> int:
        return sum(len(q) for q in self._queues.values())


class SimEndpoint:
    def __init__(self, network: SimNetwork, node_id: int):
        self.network = network
        self.node_id = node_id

    def send(self, frame: bytes, now: float = 0.0) -> None:
        self.network.transmit(self.node_id, frame, now)

    def receive(self, now: float = 0.0) -> list[bytes]:
        return self.network.collect(self.node_id, now)

    def close(self) -> None:
        pass


def parse_address(text: str, default_host: str = "127.0.0.1") -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep:
        return default_host, int(text)
    return host or default_host, int(port)


class UdpTransport:
    """Unicast UDP to a fixed peer list; non-blocking receive.

    The bind address falls back to ``$SARSIM_BIND`` (``host:port``).
    """

    def __init__(self, bind: tuple[str, int] | None = None, peers: Sequence[tuple[str, int]] = ()):
        if bind is None:
            env = os.environ.get(BIND_ENV)
            bind = parse_address(env) if env else ("127.0.0.1", 0)
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.bind(bind)
        self.sock.setblocking(False)
        self.peers = list(peers)
        self.send_errors = 0

    @property
    def address(self) -> tuple[str, int]:
        return self.sock.getsockname()

    def add_peer(self, addr: tuple[str, int]) -> None:
        self.peers.append(addr)

    def send(self, frame: bytes, now: float = 0.0) -> None:
        for peer in self.peers:
            try:
                self.sock.sendto(frame, peer)
            except OSError as exc:
                # no handshake, no retry: a lost datagram is just lost
                self.send_errors += 1
                log.warning("send to %s failed: %s", peer, exc)

    def receive(self, now: float = 0.0) -> list[bytes]:
        frames = []
        while True:
            try:
                data, _ = self.sock.recvfrom(2048)
            except (BlockingIOError, InterruptedError):
                break
            except OSError as exc:
                log.warning("receive failed: %s", exc)
                break
            frames.append(data)
        return frames

    def close(self) -> None:
        self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
