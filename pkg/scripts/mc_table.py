"""Monte Carlo table over presets, path counts and step sizes: worst |z| per
channel and hedging R^2 with and without [M,H]."""
import argparse
import time

from martrep.default_sim import hedge_mc, martingale_ztest, simulate
from martrep.models import mixed_preset
from martrep.report import table_csv

PAYOFF = "(tau == 2) * (eta == 2)"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--presets", nargs="+", default=["equal-hazard", "unequal-hazard", "equal-hazard-density"])
    ap.add_argument("--paths", nargs="+", type=int, default=[10_000, 100_000])
    ap.add_argument("--dt", nargs="+", type=float, default=[1e-2, 1e-3])
    ap.add_argument("--seed", type=int, default=12345)
    ap.add_argument("--payoff", default=PAYOFF)
    args = ap.parse_args()
    rows = []
    for name in args.presets:
        for dt in args.dt:
            model = mixed_preset(name, dt=dt)
            for n in args.paths:
                t0 = time.perf_counter()
                b = simulate(model, n, args.seed)
                row = {"preset": name, "dt": dt, "paths": n}
                for c in ("M", "Hprime", "MH"):
                    row[f"max|z| {c}"] = round(martingale_ztest(b, c).max_abs_z(), 2)
                row["R2 full"] = round(hedge_mc(b, args.payoff).r2, 4)
                row["R2 no MH"] = round(hedge_mc(b, args.payoff, ("M", "Hprime")).r2, 4)
                row["seconds"] = round(time.perf_counter() - t0, 2)
                rows.append(row)
    print(table_csv(rows), end="")


if __name__ == "__main__":
    main()
