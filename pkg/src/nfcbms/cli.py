"""``nfcbms`` command line.

Exit codes:

    0   success
    1   verification failed (log integrity, or a threat scenario off expectation)
    2   I/O error (missing or unreadable file)
    3   configuration error
    4   bad key file
    5   simulation finished without reaching normal operation (e.g. auth shutdown)
    64  usage error
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import random
import sys
from dataclasses import replace
from pathlib import Path

from . import ecc
from .auth import BadKeyFile, load_private_key, sign_uid, write_keyfile
from .ccb import MonitoringSample
from .ntag import provision, save_tag
from .securelog import CorruptEntry, LogStore, ScanOutcome, SecurityModule, SessionKeys
from .system import CONFIG_ENV, MODES, ConfigError, RunConfig, load_config, simulate

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_IO = 2
EXIT_CONFIG = 3
EXIT_BAD_KEY = 4
EXIT_RUN = 5
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# -- keys / provisioning ------------------------------------------------------


def cmd_keygen(args) -> int:
    rng = random.Random(args.seed) if args.seed is not None else random.SystemRandom()
    d = rng.randrange(1, ecc.SECP128R1.n)
    write_keyfile(args.out, d)
    if args.public_out:
        write_keyfile(args.public_out, public_key=ecc.public_key(d))
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_provision(args) -> int:
    try:
        uid = bytes.fromhex(args.uid)
    except ValueError:
        raise UsageError(f"--uid must be hex, got {args.uid!r}") from None
    if len(uid) != 8:
        raise UsageError(f"--uid must be 8 bytes, got {len(uid)}")
    d = load_private_key(args.key)
    tag = provision(uid, sign_uid(d, uid))
    save_tag(tag, args.out)
    print(f"wrote {args.out} uid={uid.hex()}")
    return EXIT_OK


# -- simulate -------------------------------------------------------------------


def _run_config(args) -> RunConfig:
    path = args.config or os.environ.get(CONFIG_ENV)
    cfg = load_config(path) if path else RunConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.iterations is not None:
        cfg = replace(cfg, iterations=args.iterations)
    if args.no_security:
        cfg = replace(cfg, security=False)
    if args.cached_init:
        cfg = replace(cfg, cached_init=True)
    if args.mode is not None:
        cfg = replace(cfg, mode=args.mode)
    if args.ccbs is not None:
        cfg = replace(cfg, ccbs=args.ccbs)
    cfg.validate()
    return cfg


def cmd_simulate(args) -> int:
    cfg = _run_config(args)
    summary = simulate(cfg, args.out)
    failed = 0
    for s in summary["ccbs"]:
        line = f"ccb{s['ccb']} uid={s['module_uid']} outcome={s['outcome']}"
        if "init" in s:
            line += f" init={s['init']['total_ms']:.2f}ms"
        if "cycles" in s:
            line += f" cycles={s['cycles']['count']} total={s['cycles']['total_ms']:.2f}ms"
        if "readout" in s:
            r = s["readout"]
            line += f" reads={r['iterations']} total={r['total_ms']:.2f}ms rate={r['rate_per_s']:.2f}/s bytes={r['payload_bytes']}"
        print(line)
        failed += s["outcome"] != "ok"
    if args.out:
        print(f"outputs in {args.out}")
    return EXIT_RUN if failed else EXIT_OK


# -- log ------------------------------------------------------------------------


def _keys_for(path: str, store: LogStore) -> SessionKeys:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise BadKeyFile(f"{path}: {exc}") from None
    candidates = [doc] if "enc_key" in doc else list(doc.values())
    first = next(iter(store.records()), None)
    try:
        keys = [SessionKeys.from_json(c) for c in candidates]
    except (KeyError, TypeError, ValueError) as exc:
        raise BadKeyFile(f"{path}: {exc}") from None
    if not keys:
        raise BadKeyFile(f"{path}: no session keys")
    if first is not None:
        for k in keys:
            if k.session_id == first.session_id:
                return k
    return keys[0]


def _scan(args):
    store = LogStore(args.file) if Path(args.file).is_file() else None
    if store is None:
        raise FileNotFoundError(f"{args.file}: no such log file")
    hsm = None
    if args.keys:
        hsm = SecurityModule()
        hsm.insert_keys(_keys_for(args.keys, store))
    elif store.protected:
        raise UsageError("--keys is required for a protected log")
    return store, list(store.scan(hsm))


def cmd_log_verify(args) -> int:
    store, entries = _scan(args)
    bad = 0
    for e in entries:
        if e.missing_before:
            print(f"gap: sequence {e.missing_before[0]}..{e.missing_before[-1]} missing before record {e.index}")
        if e.outcome is not ScanOutcome.OK:
            bad += 1
            seq = e.record.sequence if e.record is not None else "?"
            print(f"record {e.index} (sequence {seq}): {e.outcome.value}")
    gaps = sum(1 for e in entries if e.missing_before)
    print(f"{len(entries)} records, {len(entries) - bad} verified, {bad} failed, {gaps} gaps")
    return EXIT_VERIFY if bad or gaps or not store.protected else EXIT_OK


CSV_HEADER = (
    ["record", "sequence", "module_uid", "session_id", "timestamp_ms", "temperature_centiC"]
    + [f"cell{i}_mV" for i in range(1, 15)]
    + ["pack_voltage_mV", "pack_soc_pct", "min_cell_mV", "max_cell_mV", "avg_cell_mV", "fault_bitmap", "bcc_status"]
)


def cmd_log_decrypt(args) -> int:
    _, entries = _scan(args)
    rows, bad = [], 0
    for e in entries:
        if e.sample is None or e.outcome not in (ScanOutcome.OK, ScanOutcome.UNVERIFIED):
            bad += 1
            print(f"record {e.index}: {e.outcome.value}, skipped", file=sys.stderr)
            continue
        s = MonitoringSample.from_bytes(e.sample)
        p = s.pack
        temp = s.temperature_centiC
        rows.append(
            [e.index, s.sequence, s.module_uid.hex(), s.session_id, s.timestamp_ms, "" if temp is None else temp]
            + s.cell_mV
            + [p.pack_voltage_mV, p.pack_soc_pct, p.min_cell_mV, p.max_cell_mV, p.avg_cell_mV, p.fault_bitmap, p.bcc_status]
        )
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(CSV_HEADER)
        w.writerows(rows)
    finally:
        if args.out:
            out.close()
    return EXIT_VERIFY if bad else EXIT_OK


# -- threats / report -------------------------------------------------------------


def cmd_threat(args) -> int:
    from .threats import ALL_COUNTERMEASURES, SCENARIOS, Countermeasure, matrix_report, run_scenario

    if args.all == bool(args.id):
        raise UsageError("give exactly one of --id or --all")
    if args.id and args.id not in SCENARIOS:
        raise UsageError(f"unknown threat id {args.id!r}; expected one of {', '.join(sorted(SCENARIOS))}")
    disabled = set()
    for name in args.disable or []:
        try:
            disabled.add(Countermeasure[name])
        except KeyError:
            raise UsageError(f"unknown countermeasure {name!r}") from None
    enabled = ALL_COUNTERMEASURES - disabled
    ids = sorted(SCENARIOS) if args.all else [args.id]
    outcomes = [run_scenario(t, enabled, seed=args.seed) for t in ids]
    if args.verbose:
        for o in outcomes:
            print(f"== {o.scenario.id} evidence={json.dumps(o.evidence, sort_keys=True)}")
            for line in o.transcript:
                print(f"   {line}")
    text = matrix_report(outcomes)
    sys.stdout.write(text)
    if args.report:
        Path(args.report).write_text(text)
    matched = sum(o.matched_expectation for o in outcomes)
    print(f"{matched}/{len(outcomes)} matched")
    return EXIT_OK if matched == len(outcomes) else EXIT_VERIFY


def cmd_report_tables(args) -> int:
    from .tables import readout_rows, render, sampling_rows

    sys.stdout.write(render(sampling_rows(args.seed), readout_rows(args.seed)))
    return EXIT_OK


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nfcbms", description="NFC battery-module monitoring simulator")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    k = sub.add_parser("keygen", help="create a manufacturer key file")
    k.add_argument("--out", required=True)
    k.add_argument("--public-out")
    k.add_argument("--seed", type=int)
    k.set_defaults(func=cmd_keygen)

    pv = sub.add_parser("provision", help="sign a tag UID and write the tag file")
    pv.add_argument("--key", required=True, help="manufacturer key file (JSON)")
    pv.add_argument("--uid", required=True, help="8-byte UID as hex")
    pv.add_argument("--out", required=True)
    pv.set_defaults(func=cmd_provision)

    s = sub.add_parser("simulate", help="run init + N cycles and write reports")
    s.add_argument("--config", help=f"run config JSON (default: ${CONFIG_ENV})")
    s.add_argument("--seed", type=int)
    s.add_argument("--iterations", type=int)
    s.add_argument("--no-security", action="store_true")
    s.add_argument("--cached-init", action="store_true")
    s.add_argument("--mode", choices=MODES)
    s.add_argument("--ccbs", type=int)
    s.add_argument("--out", help="output directory")
    s.set_defaults(func=cmd_simulate)

    lg = sub.add_parser("log", help="verify or decrypt a sample log")
    lsub = lg.add_subparsers(dest="log_command", required=True, parser_class=_Parser)
    for name, func in (("verify", cmd_log_verify), ("decrypt", cmd_log_decrypt)):
        c = lsub.add_parser(name)
        c.add_argument("file")
        c.add_argument("--keys", help="session key JSON")
        if name == "decrypt":
            c.add_argument("--out", help="CSV output (default stdout)")
        c.set_defaults(func=func)

    t = sub.add_parser("threat", help="run threat scenarios")
    tsub = t.add_subparsers(dest="threat_command", required=True, parser_class=_Parser)
    tr = tsub.add_parser("run")
    tr.add_argument("--id")
    tr.add_argument("--all", action="store_true")
    tr.add_argument("--report", help="write the matrix CSV here")
    tr.add_argument("--disable", action="append", metavar="C", help="switch off a countermeasure (C1, C2, C3, C5)")
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("-v", "--verbose", action="store_true")
    tr.set_defaults(func=cmd_threat)

    r = sub.add_parser("report", help="reproduce the timing tables")
    rsub = r.add_subparsers(dest="report_command", required=True, parser_class=_Parser)
    rt = rsub.add_parser("tables")
    rt.add_argument("--seed", type=int, default=0)
    rt.set_defaults(func=cmd_report_tables)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"nfcbms: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BadKeyFile as exc:
        print(f"nfcbms: bad key file: {exc}", file=sys.stderr)
        return EXIT_BAD_KEY
    except ConfigError as exc:
        print(f"nfcbms: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CorruptEntry as exc:
        print(f"nfcbms: corrupt log: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except OSError as exc:
        print(f"nfcbms: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
