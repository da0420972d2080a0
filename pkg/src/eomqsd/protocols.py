"""Gaussian coupling pulses and the memory / transduction schedules.

Times are in units of 1/omega_m and couplings in units of omega_m.  A pulse
Omega * exp(-(t - t_c)^2 / (w^2 pi)) has signed area w * pi * Omega.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ScheduleError

ELECTROMECHANICAL = "electromechanical"
OPTOMECHANICAL = "optomechanical"
CHANNELS = (ELECTROMECHANICAL, OPTOMECHANICAL)

# tails are cut where every pulse has fallen below this fraction of its peak
TAIL_CUTOFF = 1e-6
# the transduction sequence time, which sets the separation percentage, spans
# this many standard deviations past the outer pulse centers
WINDOW_WIDTHS = 4.0

TRANSDUCTION_KINDS = ("separated", "simultaneous", "overlapping")


@dataclass(frozen=True)
class Pulse:
    peak: float
    center: float
    width: float
    channel: str

    def __post_init__(self):
        if self.width <= 0:
            raise ScheduleError(f"pulse width must be positive, got {self.width}")
        if self.channel not in CHANNELS:
            raise ScheduleError(f"unknown channel {self.channel!r}")

    @property
    def area(self) -> float:
        return self.width * np.pi * self.peak

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.peak * np.exp(-(t - self.center) ** 2 / (self.width ** 2 * np.pi))

    @property
    def sigma(self) -> float:
        """Standard deviation of the Gaussian profile."""
        return self.width * np.sqrt(np.pi / 2.0)

    def tail_pad(self) -> float:
        """Distance from the center beyond which |value| < TAIL_CUTOFF * |peak|."""
        return self.width * np.sqrt(np.pi * np.log(2.0 / TAIL_CUTOFF))

    def to_dict(self):
        return {"peak": self.peak, "center": self.center,
                "width": self.width, "channel": self.channel}


@dataclass(frozen=True)
class PulseSchedule:
    pulses: tuple
    t_start: float
    t_end: float
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "pulses", tuple(self.pulses))
        if self.t_end <= self.t_start:
            raise ScheduleError("t_end must exceed t_start")
        for p in self.pulses:
            if not self.t_start <= p.center <= self.t_end:
                raise ScheduleError(f"pulse center {p.center} outside the schedule")
            for edge in (self.t_start, self.t_end):
                if abs(p(edge)) >= TAIL_CUTOFF * abs(p.peak) and p.peak != 0:
                    raise ScheduleError("schedule too short to contain the pulse tails")

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    def channel_pulses(self, channel):
        return [p for p in self.pulses if p.channel == channel]

    def channels_used(self):
        return {p.channel for p in self.pulses}

    def max_coupling(self) -> float:
        """Upper bound on |Omega_mu(t)| + |Omega_o(t)|."""
        return float(sum(abs(p.peak) for p in self.pulses))

    def omegas(self, times) -> np.ndarray:
        """Couplings at ``times`` as an array (len(times), 2) ordered like CHANNELS."""
        times = np.asarray(times, dtype=float)
        out = np.zeros((times.size, len(CHANNELS)))
        for p in self.pulses:
            out[:, CHANNELS.index(p.channel)] += p(times)
        return out

    def to_dict(self):
        return {"t_start": self.t_start, "t_end": self.t_end,
                "pulses": [p.to_dict() for p in self.pulses], "meta": dict(self.meta)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(Pulse(**p) for p in d["pulses"]), d["t_start"], d["t_end"],
                   meta=dict(d.get("meta", {})))


def coupling_at(schedule: PulseSchedule, channel: str, t):
    """Sum of the channel's Gaussian profiles at ``t`` (scalar or array)."""
    if channel not in CHANNELS:
        raise ScheduleError(f"unknown channel {channel!r}")
    ta = np.asarray(t, dtype=float)
    slack = 1e-9 * max(1.0, schedule.duration)
    if np.any(ta < schedule.t_start - slack) or np.any(ta > schedule.t_end + slack):
        raise ScheduleError(f"t outside [{schedule.t_start}, {schedule.t_end}]")
    val = np.zeros_like(ta)
    for p in schedule.channel_pulses(channel):
        val = val + p(ta)
    return float(val) if np.ndim(t) == 0 else val


def width_for_area(area: float, omega_peak: float) -> float:
    return abs(area) / (np.pi * abs(omega_peak))


def memory_schedule(omega_peak: float, delta_t: float, retrieval_sign: int = -1) -> PulseSchedule:
    """Storage pi pulse, wait, retrieval pulse on the electromechanical channel.

    ``delta_t`` is measured center to center.  The retrieval pulse carries the
    opposite sign by default; ``retrieval_sign=+1`` builds the same-sign
    variant for comparison.
    """
    if omega_peak <= 0:
        raise ScheduleError("omega_peak must be positive")
    if delta_t < 0:
        raise ScheduleError("delta_t must be nonnegative")
    w = width_for_area(np.pi, omega_peak)
    store = Pulse(omega_peak, 0.0, w, ELECTROMECHANICAL)
    pad = store.tail_pad()
    store = Pulse(omega_peak, pad, w, ELECTROMECHANICAL)
    fetch = Pulse(retrieval_sign * omega_peak, pad + delta_t, w, ELECTROMECHANICAL)
    return PulseSchedule((store, fetch), 0.0, 2 * pad + delta_t,
                         meta={"protocol": "memory", "delta_t": delta_t,
                               "omega_peak": omega_peak})


def sequence_edge(width: float, window_widths=WINDOW_WIDTHS) -> float:
    return window_widths * width * np.sqrt(np.pi / 2.0)


def peak_distance(separation_pct: float, width: float, window_widths=WINDOW_WIDTHS) -> float:
    """Center distance for a separation given in percent of the sequence time.

    The sequence time is the center distance plus ``window_widths`` standard
    deviations on either side.
    """
    f = abs(separation_pct) / 100.0
    if f >= 1.0:
        raise ScheduleError(f"separation {separation_pct}% leaves no room for the pulse tails")
    return f * 2 * sequence_edge(width, window_widths) / (1.0 - f)


def transduction_schedule(kind: str, area: float = None, separation: float = None,
                          omega_peak: float = 0.1, delta_t: float = None) -> PulseSchedule:
    """Electromechanical and optomechanical pulses for microwave -> optical transfer.

    ``separation`` is the signed peak distance in percent of the sequence time
    (positive: electromechanical pulse first).  For ``kind='separated'`` the
    center distance may instead be given directly as ``delta_t``.  The
    optomechanical pulse carries the sign opposite to the electromechanical
    one, so that a completed transfer maps the microwave state onto the
    optical mode without a phase flip.
    """
    if omega_peak <= 0:
        raise ScheduleError("omega_peak must be positive")
    if kind not in TRANSDUCTION_KINDS:
        raise ScheduleError(f"unknown transduction kind {kind!r}")
    if kind == "separated":
        area = np.pi
        if delta_t is None and (separation is None or separation <= 0):
            raise ScheduleError("separated pulses need a positive separation or delta_t")
    elif kind == "simultaneous":
        if separation not in (None, 0, 0.0) or delta_t not in (None, 0, 0.0):
            raise ScheduleError("simultaneous pulses have zero separation")
        area = np.sqrt(2) * np.pi if area is None else area
        separation = 0.0
    else:
        if area is None or separation is None:
            raise ScheduleError("overlapping pulses need an area and a separation")
    if area <= 0:
        raise ScheduleError("pulse area must be positive")
    w = width_for_area(area, omega_peak)
    if delta_t is not None:
        dist, sign = abs(delta_t), 1.0 if delta_t >= 0 else -1.0
    else:
        dist, sign = peak_distance(separation, w), 1.0 if separation >= 0 else -1.0
    # integrate over the full tails; the sequence time only defines the percentage
    pad = max(Pulse(omega_peak, 0.0, w, ELECTROMECHANICAL).tail_pad(), sequence_edge(w))
    first, second = pad, pad + dist
    c_mu, c_o = (first, second) if sign > 0 else (second, first)
    pulses = (Pulse(omega_peak, c_mu, w, ELECTROMECHANICAL),
              Pulse(-omega_peak, c_o, w, OPTOMECHANICAL))
    seq = dist + 2 * sequence_edge(w)
    pct = 100.0 * sign * dist / seq
    return PulseSchedule(pulses, 0.0, second + pad,
                         meta={"protocol": "transduce", "kind": kind, "area": area,
                               "separation": pct, "omega_peak": omega_peak,
                               "sequence_time": seq})


def separation_percent(schedule: PulseSchedule) -> float:
    """Signed center distance (electromechanical first is positive) in percent."""
    mu = schedule.channel_pulses(ELECTROMECHANICAL)
    op = schedule.channel_pulses(OPTOMECHANICAL)
    if len(mu) != 1 or len(op) != 1:
        raise ScheduleError("separation is defined for one pulse per channel")
    seq = schedule.meta.get("sequence_time", schedule.duration)
    return float(100.0 * (op[0].center - mu[0].center) / seq)
