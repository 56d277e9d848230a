"""Control server: one simulated robot shared by any number of clients.

Transport is a plain TCP stream of newline-delimited JSON, with an optional
WebSocket gateway speaking the identical line protocol for browsers. All
client commands funnel into the engine's tick-drained queue (latest wins);
telemetry fan-out never blocks the engine - a slow client just drops
messages and sees its dropped count rise.
"""
from __future__ import annotations

import socket
import threading
import time
from collections import deque

from . import protocol
from .controllers import VelocityCommand
from .drivetrain import PidGains
from .engine import SimEngine, write_trace
from .protocol import ProtocolError, ack, error
from .scenario import CONTROLLERS, Scenario

TELEMETRY_QUEUE_CAP = 64
WATCHDOG_S = 0.5


class Session:
    """One connected client, over either transport."""

    _next_id = 0
    _id_lock = threading.Lock()

    def __init__(self, server: "RobotServer", send_line, label: str):
        with Session._id_lock:
            Session._next_id += 1
            self.id = Session._next_id
        self.server = server
        self.label = label
        self._send_line = send_line
        self._queue: deque[str] = deque()
        self._cv = threading.Condition()
        self.closed = False
        self.telemetry_every: int | None = None
        self._telemetry_countdown = 0
        self.telemetry_seq = 0
        self.dropped = 0

    def enqueue(self, line: str, droppable: bool = False) -> None:
        with self._cv:
            if self.closed:
                return
            if droppable and len(self._queue) >= TELEMETRY_QUEUE_CAP:
                self.dropped += 1
                return
            self._queue.append(line)
            self._cv.notify()

    def writer_loop(self) -> None:
        while True:
            with self._cv:
                while not self._queue and not self.closed:
                    self._cv.wait(timeout=0.5)
                if self.closed and not self._queue:
                    return
                line = self._queue.popleft()
            try:
                self._send_line(line)
            except OSError:
                self.close()
                return

    def close(self) -> None:
        with self._cv:
            self.closed = True
            self._cv.notify_all()


class RobotServer:
    def __init__(
        self,
        scenario: Scenario,
        scenario_text: str,
        *,
        bind: str = protocol.DEFAULT_BIND,
        ws_bind: str | None = None,
        throttle: float = 1.0,
        once: bool = False,
        trace_path: str | None = None,
        summary_path: str | None = None,
    ):
        self.scenario = scenario
        self.scenario_text = scenario_text
        watchdog_ticks = max(1, int(round(WATCHDOG_S / scenario.dt_control_s)))
        self.engine = SimEngine(scenario, watchdog_ticks=watchdog_ticks)
        self.throttle = throttle
        self.once = once
        self.trace_path = trace_path
        self.summary_path = summary_path
        self._bind_request = protocol.parse_bind(bind)
        self._ws_bind_request = protocol.parse_bind(ws_bind) if ws_bind else None
        self._sessions: list[Session] = []
        self._sessions_lock = threading.Lock()
        self._stop = threading.Event()
        self.finished = threading.Event()  # set when a --once run completes
        self._threads: list[threading.Thread] = []
        self._listener: socket.socket | None = None
        self._ws_server = None
        self.bound_address: tuple[str, int] | None = None
        self.ws_bound_address: tuple[str, int] | None = None

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> None:
        self._listener = socket.create_server(
            self._bind_request, reuse_port=False
        )
        self._listener.settimeout(0.2)
        self.bound_address = self._listener.getsockname()[:2]
        self._spawn(self._accept_loop, "accept")
        if self._ws_bind_request is not None:
            self._start_ws()
        self._spawn(self._engine_loop, "engine")

    def serve_forever(self) -> None:
        self.start()
        try:
            while not self._stop.is_set():
                if self.once and self.finished.is_set():
                    break
                time.sleep(0.05)
        finally:
            self.stop()

    def stop(self) -> None:
        if self._stop.is_set():
            return
        self._stop.set()
        if self._listener is not None:
            self._listener.close()
        if self._ws_server is not None:
            self._ws_server.shutdown()
        with self._sessions_lock:
            sessions = list(self._sessions)
        for s in sessions:
            s.close()
        for t in self._threads:
            if t is not threading.current_thread():
                t.join(timeout=2.0)
        self._write_outputs()

    def _write_outputs(self) -> None:
        if self.trace_path:
            write_trace(
                self.trace_path,
                self.scenario_text,
                self.engine.command_log,
                self.engine.records,
            )
        if self.summary_path:
            import json

            with open(self.summary_path, "w", encoding="utf-8") as fh:
                json.dump(self.engine.summary(), fh, indent=2, sort_keys=True)
                fh.write("\n")

    def _spawn(self, target, name: str) -> None:
        t = threading.Thread(target=target, name=f"omnibot-{name}", daemon=True)
        t.start()
        self._threads.append(t)

    # -- engine pacing -------------------------------------------------------

    def _engine_loop(self) -> None:
        next_wall = time.monotonic()
        while not self._stop.is_set():
            if self.engine.terminated:
                if self.once:
                    self.finished.set()
                    return
                time.sleep(0.02)
                next_wall = time.monotonic()
                continue
            self.engine.step()
            self._fan_out_telemetry()
            if self.throttle > 0:
                next_wall += self.scenario.dt_control_s * self.throttle
                delay = next_wall - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
                else:
                    next_wall = time.monotonic()

    def _fan_out_telemetry(self) -> None:
        with self._sessions_lock:
            targets = [
                s for s in self._sessions if not s.closed and s.telemetry_every
            ]
        if not targets:
            return
        view = None
        for s in targets:
            s._telemetry_countdown -= 1
            if s._telemetry_countdown > 0:
                continue
            s._telemetry_countdown = s.telemetry_every
            if view is None:
                view = self.engine.telemetry_view()
            s.telemetry_seq += 1
            msg = {
                "op": "telemetry",
                "seq": s.telemetry_seq,
                "dropped": s.dropped,
                **view,
            }
            s.enqueue(protocol.encode(msg), droppable=True)

    # -- TCP transport ---------------------------------------------------------

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                conn, addr = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            self._spawn(lambda c=conn, a=addr: self._client_loop(c, a), "client")

    def _client_loop(self, conn: socket.socket, addr) -> None:
        conn.settimeout(None)
        wfile = conn.makefile("w", encoding="utf-8", newline="")
        send_lock = threading.Lock()

        def send_line(line: str) -> None:
            with send_lock:
                wfile.write(line)
                wfile.flush()

        session = Session(self, send_line, label=f"tcp:{addr[0]}:{addr[1]}")
        self._register(session)
        writer = threading.Thread(target=session.writer_loop, daemon=True)
        writer.start()
        try:
            rfile = conn.makefile("r", encoding="utf-8", errors="replace", newline="\n")
            for raw in rfile:
                for out in self.handle_line(session, raw.rstrip("\n")):
                    session.enqueue(out)
                if self._stop.is_set():
                    break
        except OSError:
            pass
        finally:
            session.close()
            writer.join(timeout=1.0)
            self._unregister(session)
            try:
                conn.close()
            except OSError:
                pass

    # -- WebSocket gateway -----------------------------------------------------

    def _start_ws(self) -> None:
        from websockets.sync.server import serve as ws_serve

        def handler(ws):
            send_lock = threading.Lock()

            def send_line(line: str) -> None:
                with send_lock:
                    ws.send(line.rstrip("\n"))

            session = Session(self, send_line, label="ws")
            self._register(session)
            writer = threading.Thread(target=session.writer_loop, daemon=True)
            writer.start()
            try:
                for message in ws:
                    if isinstance(message, bytes):
                        message = message.decode("utf-8", errors="replace")
                    for out in self.handle_line(session, message):
                        session.enqueue(out)
            except Exception:
                pass
            finally:
                session.close()
                writer.join(timeout=1.0)
                self._unregister(session)

        host, port = self._ws_bind_request
        self._ws_server = ws_serve(handler, host, port)
        self.ws_bound_address = self._ws_server.socket.getsockname()[:2]
        self._spawn(self._ws_server.serve_forever, "ws")

    def _register(self, session: Session) -> None:
        with self._sessions_lock:
            self._sessions.append(session)

    def _unregister(self, session: Session) -> None:
        with self._sessions_lock:
            if session in self._sessions:
                self._sessions.remove(session)

    # -- message handling ------------------------------------------------------

    def handle_line(self, session: Session, line: str) -> list[str]:
        """Process one raw line; always returns exactly one response."""
        try:
            msg = protocol.parse_line(line)
        except ProtocolError as e:
            return [protocol.encode(error(None, str(e)))]
        seq = protocol.echo_seq(msg)
        try:
            return [protocol.encode(m) for m in self._dispatch(session, msg, seq)]
        except ProtocolError as e:
            return [protocol.encode(error(seq, str(e)))]
        except Exception as e:  # never let a handler kill the connection
            return [protocol.encode(error(seq, f"internal: {e}"))]

    def _dispatch(self, session: Session, msg: dict, seq) -> list[dict]:
        op = msg["op"]
        if op in protocol.SERVER_SENT:
            raise ProtocolError(f"{op} is server-sent")
        if op == "hello":
            return [
                ack(
                    seq,
                    server="omnibot",
                    scene=protocol.scene_description(self.scenario),
                    controller=self.engine.controller,
                )
            ]
        if op == "set_velocity":
            cmd = VelocityCommand(
                protocol.number(msg, "vx"),
                protocol.number(msg, "vy"),
                protocol.number(msg, "omega"),
            )
            self.engine.submit_command(cmd)
            return [ack(seq)]
        if op == "get_distances":
            view = self.engine.telemetry_view()
            return [ack(seq, voltages=view["ir"])]
        if op == "get_bumper":
            view = self.engine.telemetry_view()
            return [ack(seq, bumper=view["bumper"])]
        if op == "get_frame":
            camera, detection = self.engine.frame_view()
            return [protocol.frame_message(seq, camera, detection)]
        if op == "set_pid":
            wheel = protocol.integer(msg, "wheel")
            gains = PidGains(
                kp=protocol.number(msg, "kp"),
                ki=protocol.number(msg, "ki"),
                kd=protocol.number(msg, "kd"),
            )
            try:
                self.engine.set_pid_gains(wheel, gains)
            except (IndexError, ValueError) as e:
                raise ProtocolError(str(e)) from e
            return [ack(seq)]
        if op == "get_pid":
            wheel = protocol.integer(msg, "wheel")
            try:
                g = self.engine.get_pid_gains(wheel)
            except IndexError as e:
                raise ProtocolError(str(e)) from e
            return [ack(seq, wheel=wheel, kp=g.kp, ki=g.ki, kd=g.kd)]
        if op == "select_controller":
            name = msg.get("controller")
            if name not in CONTROLLERS:
                raise ProtocolError(f"unknown controller {name!r}")
            self.engine.select_controller(name)
            return [ack(seq)]
        if op == "reset":
            self.engine.reset()
            return [ack(seq)]
        if op == "subscribe_telemetry":
            rate = protocol.number(msg, "rate_hz")
            if not 1.0 <= rate <= 100.0:
                raise ProtocolError("rate_hz must be within [1, 100]")
            session.telemetry_every = max(
                1, int(round(1.0 / (rate * self.scenario.dt_control_s)))
            )
            session._telemetry_countdown = session.telemetry_every
            return [ack(seq, every_n_ticks=session.telemetry_every)]
        raise ProtocolError(f"unknown op {op!r}")
