"""Monte Carlo for the mixed model: paths, martingale z-tests, regression hedging.

Paths are stored on a record grid of multiples of dt. The default "event"
grid is {0, T} plus {a - dt, a} for every atom a of eta or tau: all jumps of
the preset happen on it, and W is sampled exactly there (the sum of the
Euler increments over a stretch of steps is Gaussian with the stretch length
as variance, so aggregating is exact in law).
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import payoff as payoff_expr
from .errors import ContractError
from .laws import DENSITY, MixedModel, exact_triplet

CHANNELS = ("W", "occ_eta", "occ_tau", "M", "H", "Hprime", "MH")
Z_LIMIT = 4.0


def record_steps(model: MixedModel, grid: str | Sequence[int] = "events") -> np.ndarray:
    """Step indices (multiples of dt) at which paths are recorded."""
    K = int(round(model.horizon / model.dt))
    if isinstance(grid, str):
        if grid == "full":
            return np.arange(K + 1)
        if grid != "events":
            raise ContractError(f"unknown record grid {grid!r}")
        steps = {0, K}
        for a in set(model.eta_atoms) | set(model.tau_atoms):
            s = int(round(a / model.dt))
            steps.update({s - 1, s})
        return np.array(sorted(s for s in steps if 0 <= s <= K))
    steps = np.unique(np.asarray(grid, dtype=int))
    if steps[0] != 0 or steps[-1] > K:
        raise ContractError("record grid must start at step 0 and stay within the horizon")
    return steps


@dataclass(frozen=True, eq=False)
class PathBatch:
    times: np.ndarray
    steps: np.ndarray
    channels: dict
    eta: np.ndarray
    tau: np.ndarray
    tau_atom: np.ndarray
    seed: int
    dt: float
    model: MixedModel = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.eta)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.channels[name]

    def terminal(self) -> dict:
        env = {name: v[:, -1] for name, v in self.channels.items()}
        env.update(eta=self.eta, tau=self.tau, T=np.full(self.n, float(self.model.horizon)))
        return env

    def export(self, path: str | Path, fmt: str = "csv") -> None:
        path = Path(path)
        if fmt == "csv":
            path.write_text(self.to_csv())
        elif fmt == "npz":
            meta = {"seed": self.seed, "dt": self.dt, "n": self.n, "channels": list(CHANNELS),
                    "model": self.model.name}
            with open(path, "wb") as f:
                np.savez(f, times=self.times, steps=self.steps, eta=self.eta, tau=self.tau,
                         tau_atom=self.tau_atom, meta=np.array(json.dumps(meta)),
                         **{c: self.channels[c] for c in CHANNELS})
        else:
            raise ContractError(f"unknown export format {fmt!r}")

    def to_csv(self) -> str:
        """Time-major rows: time_index, time, path, then one column per channel."""
        n, R = self.n, len(self.times)
        cols = [np.repeat(np.arange(R), n), np.repeat(self.times, n), np.tile(np.arange(n), R)]
        cols += [self.channels[c].T.reshape(-1) for c in CHANNELS]
        data = np.column_stack(cols)
        buf = io.StringIO()
        buf.write(",".join(("time_index", "time", "path") + CHANNELS) + "\n")
        np.savetxt(buf, data, delimiter=",", fmt=["%d", "%.10g", "%d"] + ["%.17g"] * len(CHANNELS))
        return buf.getvalue()


def load_npz(path: str | Path) -> dict:
    with np.load(path, allow_pickle=False) as z:
        out = {k: z[k] for k in z.files}
    out["meta"] = json.loads(str(out["meta"]))
    return out


def simulate(model: MixedModel, n: int, seed: int, grid: str | Sequence[int] = "events") -> PathBatch:
    """n paths; (eta, tau) from the joint law, W independent of them."""
    if n < 1:
        raise ContractError("need at least one path")
    rng = np.random.default_rng(seed)
    steps = record_steps(model, grid)
    times = steps * model.dt
    cells = model.cells
    probs = np.array([c[2] for c in cells])
    pick = rng.choice(len(cells), size=n, p=probs / probs.sum())
    eta = np.array([c[0] for c in cells], dtype=float)[pick]
    is_density = np.array([c[1] == DENSITY for c in cells])[pick]
    atom_val = np.array([0.0 if c[1] == DENSITY else c[1] for c in cells])[pick]
    u = rng.random(n)
    tau = np.where(is_density, model.horizon * (1.0 - u), atom_val)
    tau_atom = ~is_density
    W = np.zeros((n, len(times)))
    if model.brownian:
        dW = rng.standard_normal((n, len(times) - 1)) * np.sqrt(np.diff(times))
        W[:, 1:] = np.cumsum(dW, axis=1)
    ev = exact_triplet(model)
    ch = {
        "W": W,
        "occ_eta": (eta[:, None] <= times[None, :]).astype(float),
        "occ_tau": (tau[:, None] <= times[None, :]).astype(float),
        "M": ev.M(eta, W, times),
        "H": ev.H(tau, tau_atom, times),
        "Hprime": ev.Hprime(eta, tau, tau_atom, times),
        "MH": ev.MH(eta, tau, tau_atom, times),
    }
    return PathBatch(times, steps, ch, eta, tau, tau_atom, seed, model.dt, model)


def status_cells(batch: PathBatch, j: int) -> np.ndarray:
    """Integer label of (eta status, tau status) at record time j.

    eta status: index of eta among the model's eta values if eta <= t, else -1.
    tau status: index of the tau atom if an atomic tau occurred, -2 for a
    density tau that occurred, -1 if tau > t."""
    t = batch.times[j]
    m = batch.model
    eta_vals = np.array(m.eta_values, dtype=float)
    tau_atoms = np.array(m.tau_atoms, dtype=float)
    e = np.where(batch.eta <= t, np.searchsorted(eta_vals, batch.eta), -1)
    tau_idx = np.where(batch.tau_atom, np.searchsorted(tau_atoms, batch.tau), -2)
    s = np.where(batch.tau <= t, tau_idx, -1)
    return (e + 1) * (len(tau_atoms) + 3) + (s + 2)


def _cell_label(batch: PathBatch, j: int, code: int) -> str:
    m = batch.model
    width = len(m.tau_atoms) + 3
    e, s = divmod(int(code), width)
    e, s = e - 1, s - 2
    eta = "alive" if e < 0 else f"eta={m.eta_values[e]:g}"
    tau = "alive" if s == -1 else ("tau=density" if s == -2 else f"tau={m.tau_atoms[s]:g}")
    return f"{eta},{tau}"


def _groups(keys: np.ndarray):
    order = np.argsort(keys, kind="stable")
    uniq, start = np.unique(keys[order], return_index=True)
    bounds = list(start) + [len(keys)]
    for i, k in enumerate(uniq):
        yield int(k), order[bounds[i]:bounds[i + 1]]


@dataclass(frozen=True)
class ZTestResult:
    channel: str
    rows: tuple
    skipped: tuple

    @property
    def passed(self) -> bool:
        return not any(r["flagged"] for r in self.rows)

    def max_abs_z(self, time: float | None = None) -> float:
        zs = [abs(r["z"]) for r in self.rows if time is None or math.isclose(r["time"], time)]
        return max(zs) if zs else 0.0

    def record(self) -> dict:
        return {"channel": self.channel, "passed": self.passed, "rows": list(self.rows),
                "skipped": list(self.skipped)}


def martingale_ztest(batch: PathBatch, channel: str, limit: float = Z_LIMIT) -> ZTestResult:
    """z = mean/SE of the increments over each record interval, per
    (eta status, tau status) cell at the start of the interval."""
    if channel not in batch.channels:
        raise ContractError(f"unknown channel {channel!r}")
    X = batch.channels[channel]
    rows, skipped = [], []
    for j in range(1, len(batch.times)):
        d = X[:, j] - X[:, j - 1]
        for key, idx in _groups(status_cells(batch, j - 1)):
            label = _cell_label(batch, j - 1, key)
            if idx.size < 2:
                skipped.append({"time": float(batch.times[j]), "cell": label, "n": int(idx.size)})
                continue
            x = d[idx]
            mean = float(np.mean(x))
            var = float(np.var(x, ddof=1))
            if var <= 1e-24 * (1 + mean * mean):
                # no spread observed: allow an unseen unit jump whose frequency
                # matches the observed drift (a compensator increment)
                var = abs(mean)
            se = math.sqrt(var / idx.size)
            z = 0.0 if se == 0.0 else mean / se
            rows.append({"time": float(batch.times[j]), "cell": label, "n": int(idx.size),
                         "mean": mean, "se": se, "z": z, "flagged": abs(z) > limit})
    return ZTestResult(channel, tuple(rows), tuple(skipped))


@dataclass(frozen=True)
class MCHedge:
    basis: tuple
    v0: float
    rmse: float
    r2: float
    coefficients: tuple
    replication: np.ndarray = field(repr=False)

    def record(self) -> dict:
        return {"basis": list(self.basis), "v0": self.v0, "rmse": self.rmse, "r2": self.r2,
                "coefficients": list(self.coefficients)}


def _dot(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sum(a * b))


def hedge_mc(batch: PathBatch, payoff: str | np.ndarray,
             basis: Sequence[str] = ("M", "Hprime", "MH"), ridge: float = 1e-8,
             cond_limit: float = 1e10) -> MCHedge:
    """Regress the payoff on the basis increments of each record interval,
    per status cell at its start; replication = mean payoff + sum of gains."""
    y = payoff_expr.evaluate(payoff, batch.terminal(), batch.n) if isinstance(payoff, str) \
        else np.asarray(payoff, dtype=float)
    if y.shape != (batch.n,):
        raise ContractError("payoff must give one value per path")
    for b in basis:
        if b not in batch.channels:
            raise ContractError(f"unknown basis channel {b!r}")
    m = len(basis)
    v0 = float(np.mean(y))
    gains = np.zeros(batch.n)
    coefs = []
    for j in range(1, len(batch.times)):
        X = np.column_stack([batch.channels[b][:, j] - batch.channels[b][:, j - 1] for b in basis]) \
            if m else np.zeros((batch.n, 0))
        for key, idx in _groups(status_cells(batch, j - 1)):
            Xc = X[idx] - X[idx].mean(axis=0) if m else X[idx]
            yc = y[idx] - y[idx].mean()
            nc = idx.size
            G = np.array([[_dot(Xc[:, a], Xc[:, b]) / nc for b in range(m)] for a in range(m)])
            rhs = np.array([_dot(Xc[:, a], yc) / nc for a in range(m)])
            used_ridge = False
            cond = 1.0
            if m:
                scale = max(float(np.trace(G)) / m, 0.0)
                if scale == 0.0:
                    xi = np.zeros(m)
                    cond = math.inf
                    used_ridge = True
                else:
                    cond = float(np.linalg.cond(G))
                    if nc <= m or not np.isfinite(cond) or cond > cond_limit:
                        xi = np.linalg.solve(G + ridge * scale * np.eye(m), rhs)
                        used_ridge = True
                    else:
                        xi = np.linalg.solve(G, rhs)
                gains[idx] += X[idx] @ xi
            else:
                xi = np.zeros(0)
            coefs.append({"time": float(batch.times[j]), "cell": _cell_label(batch, j - 1, key), "n": int(nc),
                          **{f"xi_{b}": float(v) for b, v in zip(basis, xi)},
                          "cond": cond, "ridge": used_ridge})
    rep = v0 + gains
    res = y - rep
    sse = float(np.sum(res * res))
    sst = float(np.sum((y - v0) ** 2))
    r2 = 1.0 - sse / sst if sst > 0 else (1.0 if sse <= 1e-20 else 0.0)
    return MCHedge(tuple(basis), v0, math.sqrt(sse / batch.n), r2, tuple(coefs), rep)


def simulation_report(model: MixedModel, n: int, seed: int, payoff: str | None = None,
                      grid: str = "events") -> tuple[dict, PathBatch]:
    """z-tests for the triplet channels and, with a payoff, full vs reduced hedges."""
    batch = simulate(model, n, seed, grid)
    tests = {c: martingale_ztest(batch, c).record() for c in ("M", "Hprime", "MH")}
    rep = {
        "preset": model.name,
        "joint": [[e, t, p] for e, t, p in model.cells],
        "horizon": model.horizon, "dt": model.dt, "brownian": model.brownian,
        "n": n, "seed": seed, "record_times": batch.times.tolist(),
        "readings": exact_triplet(model).readings(),
        "ztests": tests,
        "all_ztests_pass": all(t["passed"] for t in tests.values()),
    }
    if payoff:
        full = hedge_mc(batch, payoff, ("M", "Hprime", "MH"))
        reduced = hedge_mc(batch, payoff, ("M", "Hprime"))
        rep["hedging"] = {"payoff": payoff, "full": full.record(), "without_MH": reduced.record()}
    return rep, batch
