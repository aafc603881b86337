"""Command-line entry point: scenario ingestion, command dispatch, and
result serialization.

Verbs:
  validate-bep  Monte-Carlo check of the analytic error-probability law
  link          one full beacon-to-receiver run (sync, decode, report)
  sweep         coverage maps, CA table, and room-accuracy summary
  trace         dump rays between two points as CSV

Exit codes: 0 success, 1 usage or scenario errors, 2 validation failure
(e.g. an empirical BER outside its confidence band).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .channel import PilotChannel, build_pilot_channel, zed_delta_norm2
from .link import (
    DetectorState, NoiseModel, analytic_bep_from_snr, complex_awgn, detect_bit,
    detect_training, estimate_states, monte_carlo_ber, sync_metric, transmit_pilots,
)
from .locmap import (
    Deployment, coverage_area, decode_id, grids_for_ntti, room_accuracy, sweep_multi,
)
from .params import (
    LinkBudget, build_pilot_grid, derive_link_budget, linear_to_db, watt_to_dbm,
)
from .raytrace import Tracer, format_rays
from .scenario import Scenario, ScenarioError, load_scenario

MAP_CSV_SCHEMA = "# schema=zedloc-map-v1"
CA_CSV_SCHEMA = "# schema=zedloc-ca-v1"
BEP_CSV_SCHEMA = "# schema=zedloc-bep-v1"


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        raise SystemExit(self._fail(message))

    @staticmethod
    def _fail(message) -> int:
        print(f"error: {message}", file=sys.stderr)
        return 1


def _point_arg(text: str, flag: str) -> tuple[float, float]:
    parts = text.split(",")
    try:
        x, y = (float(p) for p in parts)
    except ValueError:
        raise ScenarioError(f"{flag} expects 'x,y' in meters, got {text!r}") from None
    return x, y


def _load(args) -> Scenario:
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario = Scenario(
            params=scenario.params, plan=scenario.plan,
            bs_position=scenario.bs_position, beacons=scenario.beacons,
            trace_options=scenario.trace_options, seed=args.seed,
        )
    return scenario


def _report_header(scenario: Scenario) -> str:
    p = scenario.params
    return (
        f"zedloc {__version__} | f0 = {p.f0 / 1e6:g} MHz, bw = {p.bw / 1e6:g} MHz, "
        f"n_rb = {p.n_rb}, n_tti = {p.n_tti}, k = {p.k_pilots}, "
        f"p_bs = {watt_to_dbm(p.p_bs):.1f} dBm, n_th = {watt_to_dbm(p.n_th):.1f} dBm/Hz, "
        f"nf = {linear_to_db(p.nf):.1f} dB, bep_threshold = {p.bep_threshold:g}, "
        f"seed = {scenario.seed}"
    )


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_validate_bep(args) -> int:
    scenario = _load(args)
    params, budget = scenario.params, derive_link_budget(scenario.params)
    grid = build_pilot_grid(params)
    n = grid.n_total
    snr_db = _parse_sweep_spec(args.snr_db)
    print(_report_header(scenario))
    print(f"validate-bep: {len(snr_db)} SNR points, {args.bits} bits each, N = {n}")

    lines = [BEP_CSV_SCHEMA, "snr_db,analytic_bep,empirical_ber,band_halfwidth,ok"]
    failures = 0
    for i, sdb in enumerate(snr_db):
        snr = 10.0 ** (sdb / 10.0)
        analytic = float(analytic_bep_from_snr(snr, n))
        # synthetic channel pinned to this SNR: flat unit backscatter scaled
        # so that p_u * |phi*lambda|^2 / n0 = snr
        amp = np.sqrt(snr * budget.n0 / budget.p_u)
        chan = PilotChannel(
            gamma=np.zeros(n, dtype=complex),
            phi=np.full(n, amp, dtype=complex),
            lambda_=np.ones(n, dtype=complex),
        )
        noise = NoiseModel(n0=budget.n0, seed=scenario.seed + i)
        ber, _ = monte_carlo_ber(chan, budget, noise, args.bits)
        band = 3.0 * np.sqrt(analytic * (1.0 - analytic) / args.bits)
        ok = abs(ber - analytic) <= band
        failures += 0 if ok else 1
        lines.append(f"{sdb!r},{analytic!r},{ber!r},{band!r},{int(ok)}")
        print(
            f"  snr {sdb:+7.2f} dB  analytic {analytic:.5f}  empirical {ber:.5f}  "
            f"band ±{band:.5f}  {'ok' if ok else 'FAIL'}"
        )
    if args.out_dir:
        path = _out_dir(args) / "bep_validation.csv"
        path.write_text("\n".join(lines) + "\n")
        print(f"wrote {path}")
    if failures:
        print(f"validate-bep: {failures} point(s) outside the 3-sigma band")
        return 2
    print("validate-bep: all points inside the 3-sigma band")
    return 0


def _parse_sweep_spec(spec: str) -> list[float]:
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ScenarioError(f"--snr-db range expects 'start:stop:num', got {spec!r}")
        try:
            start, stop, num = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise ScenarioError(f"--snr-db range expects numbers, got {spec!r}") from None
        if num < 1:
            raise ScenarioError("--snr-db needs at least one point")
        return [float(v) for v in np.linspace(start, stop, num)]
    try:
        return [float(v) for v in spec.split(",")]
    except ValueError:
        raise ScenarioError(f"--snr-db expects a comma list or 'start:stop:num', got {spec!r}") from None


def cmd_link(args) -> int:
    scenario = _load(args)
    dep = scenario.deployment()
    params, budget = scenario.params, derive_link_budget(scenario.params)
    grid = build_pilot_grid(params)
    beacon = next((b for b in dep.beacons if b.id == args.zed_id), None)
    if beacon is None:
        raise ScenarioError(f"beacon id {args.zed_id} not present in the scenario")
    sm = _point_arg(args.sm, "--sm")
    if not dep.plan.contains(sm):
        raise ScenarioError(f"--sm position {sm} lies outside the plan bounds")

    print(_report_header(scenario))
    opts = scenario.trace_options
    tracer = Tracer(
        dep.plan, params.f0, opts.max_reflections,
        gain_floor_db=opts.gain_floor_db, min_path_length=opts.min_distance_m,
    )
    chan = build_pilot_channel(
        tracer.trace(dep.bs_position, sm),
        tracer.trace(dep.bs_position, beacon.position),
        tracer.trace(beacon.position, sm),
        grid,
    )
    snr = budget.p_u * zed_delta_norm2(chan) / budget.n0
    bep = float(analytic_bep_from_snr(snr, grid.n_total))
    print(f"link: beacon {beacon.id} at {beacon.position}, receiver at {sm}")
    print(f"  snr = {linear_to_db(snr):+.2f} dB (linear {snr:.4g}), analytic bep = {bep:.4g}")

    # one slot: idle periods, training S0 S1, then the codeword
    x_t = transmit_pilots(chan.gamma, budget.p_u)
    x_r = transmit_pilots(chan.g, budget.p_u)
    tx_bits = [0] * (args.idle + params.l_train) + [1] * params.l_train + list(beacon.codeword)
    rng = NoiseModel(n0=budget.n0, seed=scenario.seed).generator()
    stream = [
        (x_t if b == 0 else x_r) + complex_awgn(grid.n_total, budget.n0, rng)
        for b in tx_bits
    ]
    n_windows = len(stream) - 2 * params.l_train + 1
    mus = [
        sync_metric(np.stack(stream[t:t + 2 * params.l_train]), params.l_train)
        for t in range(n_windows)
    ]
    print("  mu trace: " + " ".join(f"{t}:{mu:.3f}" for t, mu in enumerate(mus)))
    offset = detect_training(stream, params.l_train, args.threshold)
    if offset is None:
        print(f"  sync: no window exceeded mu > {args.threshold}")
        return 2
    print(f"  sync: training detected at bit-period offset {offset}")
    est_t, est_r = estimate_states(np.stack(stream[offset:offset + 2 * params.l_train]))
    det = DetectorState(est_t, est_r)
    data = stream[offset + 2 * params.l_train:offset + 2 * params.l_train + params.n_bits_id]
    if len(data) < params.n_bits_id:
        print("  decode: stream too short after sync")
        return 2
    bits = [detect_bit(y, det)[0] for y in data]
    decoded = decode_id(bits)
    status = "ok" if decoded == beacon.id else f"MISMATCH (sent {beacon.id})"
    print(f"  decode: bits {''.join(map(str, bits))} -> id {decoded} [{status}]")
    return 0 if decoded == beacon.id else 2


def _write_map_csv(path: Path, cov) -> None:
    lines = [MAP_CSV_SCHEMA, "x_m,y_m,room,covered,best_zed,best_snr_db,best_bep"]
    xs, ys = cov.x_centers, cov.y_centers
    ids = list(cov.beacon_ids)
    for iy in range(cov.ny):
        for ix in range(cov.nx):
            room = cov.room[iy, ix] or ""
            if cov.covered[iy, ix]:
                best = int(cov.best_zed[iy, ix])
                col = ids.index(best)
                snr_db = linear_to_db(cov.snr[iy, ix, col])
                row = (
                    f"{xs[ix]!r},{ys[iy]!r},{room},1,{best},"
                    f"{snr_db!r},{cov.bep[iy, ix, col]!r}"
                )
            else:
                row = f"{xs[ix]!r},{ys[iy]!r},{room},0,,,"
            lines.append(row)
    path.write_text("\n".join(lines) + "\n")


def _write_pgm(path: Path, values: np.ndarray) -> None:
    """ASCII PGM, row 0 at the top of the map (max y)."""
    img = np.flipud(values.astype(int))
    lines = [f"P2", f"{img.shape[1]} {img.shape[0]}", "255"]
    lines += [" ".join(str(v) for v in row) for row in img]
    path.write_text("\n".join(lines) + "\n")


def _heatmaps(out: Path, tag: str, cov) -> list[Path]:
    ids = list(cov.beacon_ids)
    ny, nx = cov.ny, cov.nx
    snr_img = np.zeros((ny, nx))
    bep_img = np.zeros((ny, nx))
    best_img = np.zeros((ny, nx))
    for iy in range(ny):
        for ix in range(nx):
            if not cov.covered[iy, ix]:
                continue
            col = ids.index(int(cov.best_zed[iy, ix]))
            # snr: -40..+40 dB onto 1..255; bep: -log10 in 0..8 onto 1..255
            sdb = np.clip(linear_to_db(cov.snr[iy, ix, col]), -40.0, 40.0)
            snr_img[iy, ix] = 1 + round((sdb + 40.0) / 80.0 * 254)
            neg = np.clip(-np.log10(max(cov.bep[iy, ix, col], 1e-300)), 0.0, 8.0)
            bep_img[iy, ix] = 1 + round(neg / 8.0 * 254)
            best_img[iy, ix] = round(int(cov.best_zed[iy, ix]) * 255 / max(ids))
    paths = []
    for name, img in (
        ("snr_db", snr_img), ("bep", bep_img), ("best_zed", best_img),
        ("covered", cov.covered * 255),
    ):
        p = out / f"heatmap_{name}_{tag}.pgm"
        _write_pgm(p, img)
        paths.append(p)
    return paths


def cmd_sweep(args) -> int:
    scenario = _load(args)
    dep = scenario.deployment()
    budget = derive_link_budget(scenario.params)
    n_ttis = sorted({int(v) for v in args.n_tti.split(",")})
    grids = grids_for_ntti(scenario.params, n_ttis)
    out = _out_dir(args)
    print(_report_header(scenario))
    print(f"sweep: n_tti in {n_ttis}, {args.workers} worker(s), output -> {out}")

    maps = sweep_multi(dep, grids, budget, scenario.trace_options, workers=args.workers)

    ca_lines = [CA_CSV_SCHEMA, "zed_id,n_tti,pixels,area_m2"]
    summary: dict = {"n_tti": {}, "beacons": [b.id for b in dep.beacons_by_id()]}
    for t in n_ttis:
        cov = maps[t]
        _write_map_csv(out / f"map_ntti{t}.csv", cov)
        _heatmaps(out, f"ntti{t}", cov)
        acc = room_accuracy(cov, dep.plan)
        covered = int(cov.covered.sum())
        summary["n_tti"][str(t)] = {
            "covered_pixels": covered,
            "total_pixels": cov.ny * cov.nx,
            "room_accuracy": acc.accuracy,
            "matched": acc.matched,
            "evaluated": acc.evaluated,
            "outside_room": acc.outside_room,
        }
        for b in dep.beacons_by_id():
            pixels, area = coverage_area(cov, b.id)
            ca_lines.append(f"{b.id},{t},{pixels},{area!r}")
        acc_txt = "n/a" if acc.accuracy is None else f"{acc.accuracy:.4f}"
        print(
            f"  n_tti={t}: covered {covered}/{cov.ny * cov.nx} pixels, "
            f"room accuracy {acc_txt}"
        )
    (out / "ca_table.csv").write_text("\n".join(ca_lines) + "\n")
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out / 'ca_table.csv'} and {out / 'summary.json'}")
    return 0


def cmd_trace(args) -> int:
    scenario = _load(args)
    opts = scenario.trace_options
    tx = _point_arg(args.tx, "--tx")
    rx = _point_arg(args.rx, "--rx")
    tracer = Tracer(
        scenario.plan, scenario.params.f0, opts.max_reflections,
        gain_floor_db=opts.gain_floor_db, min_path_length=opts.min_distance_m,
    )
    text = format_rays(tracer.trace(tx, rx))
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="zedloc", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=False):
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--out-dir", required=out_required, default=None,
                       help="directory for output files")

    p = sub.add_parser("validate-bep", help="Monte-Carlo check of the analytic BEP law")
    common(p)
    p.add_argument("--snr-db", default="-22:-8:8",
                   help="SNR sweep: comma list or 'start:stop:num' in dB")
    p.add_argument("--bits", type=int, default=100_000, help="bits per SNR point")
    p.set_defaults(func=cmd_validate_bep)

    p = sub.add_parser("link", help="single beacon-to-receiver run")
    common(p)
    p.add_argument("--zed-id", type=int, required=True)
    p.add_argument("--sm", required=True, help="receiver position 'x,y' in meters")
    p.add_argument("--idle", type=int, default=3, help="idle bit periods before training")
    p.add_argument("--threshold", type=float, default=0.9, help="sync metric threshold")
    p.set_defaults(func=cmd_link)

    p = sub.add_parser("sweep", help="coverage maps and CA/room-accuracy tables")
    common(p, out_required=True)
    p.add_argument("--n-tti", default="1,2,3,6", help="comma list of n_tti variants")
    p.add_argument("--workers", type=int, default=1, help="parallel sweep workers")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("trace", help="dump rays between two points as CSV")
    common(p)
    p.add_argument("--tx", required=True, help="transmitter 'x,y' in meters")
    p.add_argument("--rx", required=True, help="receiver 'x,y' in meters")
    p.add_argument("--out", default=None, help="output CSV file (default stdout)")
    p.set_defaults(func=cmd_trace)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:  # argparse --help or usage error
        code = exc.code
        return 0 if code is None else int(code)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
