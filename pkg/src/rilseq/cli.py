"""Command-line front end.

Subcommands: verify, search, noise, flag, gauge, oracle-check. Every run
that writes files also writes a JSON run manifest (<output>.manifest.json)
holding the fully resolved configuration, seed and output list; output files
reference their manifest (CSV via a leading comment line, catalogs via a
top-level key), and re-running with the same arguments reproduces the
outputs bit for bit.

Exit codes: 0 success, 1 verification failure, 2 usage or configuration
error. Default output directory comes from $RILSEQ_OUT_DIR (falling back to
the working directory).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import analysis, exchange, noise, objective, search
from .exchange import ExchangeSequence
from .objective import QaReversal, RilSpec


def _out_dir(args) -> Path:
    base = getattr(args, "out_dir", None) or os.environ.get("RILSEQ_OUT_DIR") or "."
    p = Path(base)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _fail_usage(msg: str):
    print(f"error: {msg}", file=sys.stderr)
    raise SystemExit(2)


def _resolve_sequence(name_or_path: str) -> ExchangeSequence:
    if name_or_path in exchange.BUNDLED_NAMES:
        return exchange.bundled_sequence(name_or_path)
    path = Path(name_or_path)
    if not path.exists():
        _fail_usage(
            f"unknown sequence {name_or_path!r}: not a bundled name "
            f"{exchange.BUNDLED_NAMES} and no such file"
        )
    try:
        return exchange.load_sequence(path)
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        _fail_usage(f"could not parse sequence file {path}: {exc}")


def _resolve_mask(spec: str) -> np.ndarray:
    if spec == "14":
        return exchange.RIL14_MASK.copy()
    if spec == "19":
        return exchange.RIL19_MASK.copy()
    try:
        slots = sorted({int(tok) for tok in spec.split(",")})
    except ValueError:
        _fail_usage(f"mask must be '14', '19' or comma-separated slots, got {spec!r}")
    mask = np.zeros(exchange.N_SLOTS, dtype=bool)
    for s in slots:
        if not 1 <= s <= exchange.N_SLOTS:
            _fail_usage(f"slot {s} out of range 1..{exchange.N_SLOTS}")
        if s == exchange.PLACEHOLDER_SLOT:
            _fail_usage(f"slot {exchange.PLACEHOLDER_SLOT} is the placeholder and cannot be active")
        mask[s - 1] = True
    return mask


def _write_manifest(args, command: str, config: dict, outputs: list[Path],
                    seed, t0: float) -> Path:
    main_out = outputs[0]
    man_path = main_out.with_name(main_out.name + ".manifest.json")
    doc = {
        "command": command,
        "argv": sys.argv[1:],
        "config": config,
        "seed": seed,
        "version": __version__,
        "wall_time_s": round(time.time() - t0, 3),
        "outputs": [str(p) for p in outputs],
    }
    man_path.write_text(json.dumps(doc, indent=1) + "\n")
    return man_path


# ---------------------------------------------------------------------------


def cmd_verify(args) -> int:
    seq = _resolve_sequence(args.sequence)
    spec = RilSpec(flaggable=args.flaggable, gate_constraint=args.gate)
    report = objective.verify_sequence(seq, spec)
    f_tot = report["f_total"]
    ok = f_tot < args.threshold
    print(f"sequence: {seq.name or args.sequence}  (active slots: {seq.n_active})")
    print(f"constraint: gate={args.gate} flaggable={args.flaggable}")
    rev = report["rev"]
    print(f"qa reversal: phi={rev.phi:.6f} gamma={rev.gamma:.6f}"
          + ("  (pinned)" if args.flaggable else "  (fitted)"))
    print(f"f0      = {report['f0']:.3e}")
    print(f"f_total = {f_tot:.3e}   (threshold {args.threshold:g})")
    res = report["residuals"]
    print(f"isometry residuals: max|rows 2-4|={res['half_rows_2_4']:.3e} "
          f"|leak 5|^2={res['leak_5']:.3e} |leak 8|^2={res['leak_8']:.3e}")
    if report["gate_distance"] is not None:
        print(f"gate distance ({args.gate}) = {report['gate_distance']:.3e}")
    reset = report["reset"]
    if reset is not None:
        print(f"reset state: alpha={reset.alpha:.6f} beta={reset.beta:.6f}  "
              f"theta_bloch={reset.theta_bloch:.6f} phi_bloch={reset.phi_bloch:.6f}")
    else:
        print("reset state: undefined (leak transfer incomplete)")
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def cmd_oracle_check(args) -> int:
    from .basis import LINKS, oracle_block
    from .exchange import block_exchange

    rng = np.random.default_rng(args.seed)
    worst = 0.0
    per_link = {}
    n_each = max(1, args.trials // len(LINKS))
    for link in LINKS:
        dev = 0.0
        for theta in rng.uniform(-2 * np.pi, 2 * np.pi, n_each):
            bh, bt = oracle_block(link, theta)
            blk = block_exchange(link, theta)
            dev = max(
                dev,
                float(np.max(np.abs(bh - blk.half))),
                float(np.max(np.abs(bt - blk.threehalf))),
            )
        per_link[link] = dev
        worst = max(worst, dev)
    for link, dev in per_link.items():
        print(f"link {link}: max deviation {dev:.3e} over {n_each} angles")
    print(f"max deviation: {worst:.3e}  (bound 1e-12)")
    ok = worst < 1e-12
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def cmd_search(args) -> int:
    t0 = time.time()
    mask = _resolve_mask(args.mask)
    spec = RilSpec(flaggable=args.flaggable, gate_constraint=args.gate)
    cfg = search.SearchConfig(
        mask=mask, spec=spec, seed=args.seed,
        temperature=args.temperature, stepsize=args.stepsize,
        iterations=args.iterations, interval=args.interval,
        success_threshold=args.threshold, max_restarts=args.seeds,
        stop_when=args.stop_when,
    )
    out = Path(args.out) if args.out else _out_dir(args) / "catalog.json"
    if args.census:
        records = search.census_search(
            cfg, out,
            progress=lambda run, n_records, elapsed: print(
                f"run {run + 1}/{cfg.max_restarts}: {n_records} records, {elapsed:.0f}s",
                flush=True,
            ),
        )
    else:
        records = search.basin_hop(cfg)
    man = _write_manifest(args, "search", cfg.to_jsonable(), [out], args.seed, t0)
    search.save_catalog(records, out, config=cfg, extra={"manifest": man.name})
    print(f"{len(records)} distinct records below {cfg.success_threshold:g} -> {out}")
    for r in records[:10]:
        print(f"  run {r.run} hop {r.iteration}: f={r.f_total:.2e} "
              f"theta_bloch={r.reset.theta_bloch:.4f} phi_bloch={r.reset.phi_bloch:.4f}")
    return 0


def _parse_sigmas(args) -> list[float]:
    if args.sigma is not None and args.sigma_range is not None:
        _fail_usage("give either --sigma or --sigma-range, not both")
    if args.sigma is not None:
        return [args.sigma]
    if args.sigma_range is not None:
        try:
            lo, hi, num = args.sigma_range.split(":")
            return list(np.linspace(float(lo), float(hi), int(num)))
        except ValueError:
            _fail_usage("--sigma-range must be start:stop:count")
    _fail_usage("one of --sigma or --sigma-range is required")


def cmd_noise(args) -> int:
    t0 = time.time()
    seq = _resolve_sequence(args.sequence)
    sigmas = _parse_sigmas(args)
    if args.samples < 1:
        _fail_usage("--samples must be >= 1")
    if args.rev == "zero":
        rev = QaReversal(0.0, 0.0)
    else:
        rev = objective.fit_reversal(exchange.isometry(seq))
    try:
        reset = objective.extract_reset_state(exchange.isometry(seq))
    except objective.NotASolutionError as exc:
        _fail_usage(f"sequence is not a solution, reset error undefined: {exc}")
    rows = noise.sweep(
        seq, sigmas, args.samples, seed=args.seed, correlation=args.model,
        rev=rev, reset=reset, workers=args.workers,
    )
    out = Path(args.out) if args.out else _out_dir(args) / "noise.csv"
    man = _write_manifest(
        args, "noise",
        {"sequence": args.sequence, "sigmas": sigmas, "samples": args.samples,
         "model": args.model, "rev": {"phi": rev.phi, "gamma": rev.gamma},
         "workers": args.workers},
        [out], args.seed, t0,
    )
    noise.write_metrics_csv(out, rows, header_comment=f"manifest: {man.name}")
    print(f"{len(rows)} rows -> {out}")
    for r in rows:
        print(f"  sigma={r.sigma:.4g}: p_L_ind={r.p_L_ind:.3e} "
              f"1-F_Q={1 - r.F_Q:.3e} eps_F={r.eps_F:.3e} eps_R={r.eps_R:.3e}")
    return 0


def _metrics_from_file(path: str, sigma: float | None):
    rows = noise.read_metrics_csv(path)
    if sigma is None:
        if len(rows) > 1:
            _fail_usage(f"{path} has {len(rows)} rows; select one with --sigma")
        return rows[0]
    match = [r for r in rows if abs(r.sigma - sigma) < 1e-12]
    if not match:
        _fail_usage(f"no row with sigma={sigma} in {path}")
    return match[0]


def cmd_flag(args) -> int:
    try:
        flag = analysis.FlagParams(eps_L=args.eps_L, eps_1S=args.eps_1S,
                                   eps_0T=args.eps_0T)
    except ValueError as exc:
        _fail_usage(str(exc))
    m = _metrics_from_file(args.metrics_file, args.sigma)
    w0 = analysis.wrong_guess_given_0(flag, m)
    w1 = analysis.wrong_guess_given_1(flag, m)
    table = analysis.joint_flag_table(flag, m)
    print(f"metrics row: sigma={m.sigma:g} p_L_ind={m.p_L_ind:.3e} "
          f"eps_F={m.eps_F:.3e} eps_5={m.eps_5:.3e} eps_8={m.eps_8:.3e}")
    print("leading order:")
    print(f"  P(wrong | flag 0) = {w0:.6e}")
    print(f"  P(wrong | flag 1) = {w1:.6e}")
    print("exact joint table:")
    print(f"  P(flag 0) = {table.p_flag(0):.6e}   P(flag 1) = {table.p_flag(1):.6e}")
    for f in (0, 1):
        for o, on in ((0, "U_out"), (1, "L_out")):
            for i, iname in ((0, "U_in"), (1, "L_in")):
                print(f"  P({f}_M {on} {iname}) = {table.p(f, o, i):.6e}")
    print(f"  P(wrong | flag 0) = {table.wrong_guess_given(0):.6e}")
    print(f"  P(wrong | flag 1) = {table.wrong_guess_given(1):.6e}")
    return 0


def cmd_gauge(args) -> int:
    try:
        g = analysis.GaugeParams(eta=args.eta)
    except ValueError as exc:
        _fail_usage(str(exc))
    st = analysis.gauge_stationary(g)
    print(f"eta = {g.eta:g}")
    print(f"stationary gauge populations: p_down={st.p_down:.8f} p_up={st.p_up:.8f}")
    print(f"decay eigenvalue: {st.decay_eigenvalue:.8f}")
    print(f"coherence weight: {st.coherence_weight:.8f}  (~3 eta/4 = {0.75 * g.eta:.8f})")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="rilseq",
        description="Reset-if-leaked exchange sequences: verify, search, characterize.",
    )
    p.add_argument("--version", action="version", version=f"rilseq {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="check a sequence against the reset-if-leaked conditions")
    v.add_argument("sequence", help="bundled name or sequence file")
    v.add_argument("--flaggable", action="store_true", help="pin the QA output to the flag state")
    v.add_argument("--gate", choices=objective.GATE_CONSTRAINTS, default="identity")
    v.add_argument("--threshold", type=float, default=objective.PRINTED_ANGLE_THRESHOLD)
    v.set_defaults(func=cmd_verify)

    o = sub.add_parser("oracle-check",
                       help="compare closed-form blocks with the 32-dim construction")
    o.add_argument("--trials", type=int, default=200)
    o.add_argument("--seed", type=int, default=0)
    o.set_defaults(func=cmd_oracle_check)

    s = sub.add_parser("search", help="basin-hopping search for new sequences")
    s.add_argument("--mask", default="14", help="'14', '19' or comma-separated 1-based slots")
    s.add_argument("--flaggable", action="store_true")
    s.add_argument("--gate", choices=objective.GATE_CONSTRAINTS, default="identity")
    s.add_argument("--seeds", type=int, default=20, help="number of independent restarts")
    s.add_argument("--seed", type=int, default=0, help="base RNG seed")
    s.add_argument("--threshold", type=float, default=1e-9)
    s.add_argument("--iterations", type=int, default=100)
    s.add_argument("--temperature", type=float, default=1e-5)
    s.add_argument("--stepsize", type=float, default=2 * np.pi)
    s.add_argument("--interval", type=int, default=50)
    s.add_argument("--stop-when", type=int, default=None,
                   help="stop after this many distinct records")
    s.add_argument("--census", action="store_true",
                   help="long-running mode with catalog checkpointing")
    s.add_argument("--out", default=None)
    s.add_argument("--out-dir", default=None)
    s.set_defaults(func=cmd_search)

    n = sub.add_parser("noise", help="Monte-Carlo noise characterization")
    n.add_argument("--sequence", required=True)
    n.add_argument("--sigma", type=float, default=None)
    n.add_argument("--sigma-range", default=None, help="start:stop:count")
    n.add_argument("--samples", type=int, default=100_000)
    n.add_argument("--seed", type=int, default=0)
    n.add_argument("--model", choices=noise.NOISE_MODELS, default="static")
    n.add_argument("--rev", choices=("fit", "zero"), default="fit",
                   help="QA reversal: fit to the sequence or pin to zero")
    n.add_argument("--workers", type=int, default=1)
    n.add_argument("--out", default=None)
    n.add_argument("--out-dir", default=None)
    n.set_defaults(func=cmd_noise)

    f = sub.add_parser("flag", help="flag-readout reliability from a metrics row")
    f.add_argument("--eps-L", type=float, required=True, dest="eps_L")
    f.add_argument("--eps-1S", type=float, required=True, dest="eps_1S")
    f.add_argument("--eps-0T", type=float, required=True, dest="eps_0T")
    f.add_argument("--metrics-file", required=True)
    f.add_argument("--sigma", type=float, default=None, help="row selector")
    f.set_defaults(func=cmd_flag)

    g = sub.add_parser("gauge", help="stationary gauge state under pump + relaxation")
    g.add_argument("--eta", type=float, required=True)
    g.set_defaults(func=cmd_gauge)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
