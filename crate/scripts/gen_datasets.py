#!/usr/bin/env python3
"""Regenerates the synthetic corpora under crates/core/data.

Output is a pure function of the fixed seeds below, so rerunning the script
reproduces the committed files byte for byte.
"""

import csv
import random
from pathlib import Path

DATA = Path(__file__).resolve().parent.parent / "crates" / "core" / "data"

DAYS = ["Sun", "Mon", "Tue", "Wed", "Thu", "Fri", "Sat"]


def ip(rng):
    return ".".join(str(rng.randint(1, 254)) for _ in range(4))


def stamp(rng, i):
    sec = 4 * 3600 + i * 7 + rng.randint(0, 6)
    return f"{DAYS[i // 400 % 7]} Dec 04 {sec // 3600 % 24:02d}:{sec // 60 % 60:02d}:{sec % 60:02d} 2005"


def apache(rng):
    paths = ["/var/www/html/", "/var/www/html/icons/", "/srv/www/htdocs/"]
    events = [
        ("E1", "notice", "jk2_init() Found child <*> in scoreboard slot <*>", 836,
         lambda: f"jk2_init() Found child {rng.randint(1000, 32000)} in scoreboard slot {rng.randint(6, 10)}"),
        ("E2", "notice", "workerEnv.init() ok <*>", 569,
         lambda: "workerEnv.init() ok /etc/httpd/conf/workers2.properties"),
        ("E3", "error", "mod_jk child workerEnv in error state <*>", 539,
         lambda: f"mod_jk child workerEnv in error state {rng.randint(6, 9)}"),
        ("E4", "error", "[client <*>] Directory index forbidden by rule: <*>", 32,
         lambda: f"[client {ip(rng)}] Directory index forbidden by rule: {rng.choice(paths)}"),
        ("E5", "error", "jk2_init() Can't find child <*> in scoreboard", 12,
         lambda: f"jk2_init() Can't find child {rng.randint(1000, 32000)} in scoreboard"),
        ("E6", "error", "mod_jk child init <*> <*>", 12,
         lambda: f"mod_jk child init 1 {rng.choice(['-2', '-1'])}"),
    ]
    return events


def service(rng):
    users = ["root", "admin", "alice", "bob", "deploy", "backup", "www-data"]
    durations = ["45 s", "2 min 3 s", "1 h 4 min 9 s", "12 s", "3 min"]
    errors = ["disk quota exceeded", "connection reset by peer", "timeout", "checksum mismatch on read"]
    services = ["nginx", "postgres", "redis", "kafka-broker"]
    events = [
        ("E1", "INFO", "Accepted password for <*> from <*> port <*> ssh2", 260,
         lambda: f"Accepted password for {rng.choice(users)} from {ip(rng)} port {rng.randint(1024, 65535)} ssh2"),
        ("E2", "WARN", "Failed password for invalid user <*> from <*> port <*> ssh2", 180,
         lambda: f"Failed password for invalid user {rng.choice(['test', 'guest', 'oracle', 'pi'])} from {ip(rng)} port {rng.randint(1024, 65535)} ssh2"),
        ("E3", "INFO", "Received block <*> of size <*> from <*>", 320,
         lambda: f"Received block blk_{rng.randint(10**9, 10**10)} of size {rng.randint(1, 67108864)} from /{ip(rng)}"),
        ("E4", "INFO", "PacketResponder <*> for block <*> terminating", 300,
         lambda: f"PacketResponder {rng.randint(0, 2)} for block blk_{rng.randint(10**9, 10**10)} terminating"),
        ("E5", "INFO", "Connection closed by <*> [preauth]", 150,
         lambda: f"Connection closed by {ip(rng)} [preauth]"),
        ("E6", "INFO", "session opened for user <*> by (uid=<*>)", 200,
         lambda: f"session opened for user {rng.choice(users)} by (uid={rng.choice([0, 0, 1000, 33])})"),
        ("E7", "INFO", "Job <*> finished in <*>", 160,
         lambda: f"Job {rng.randint(1, 999)} finished in {rng.choice(durations)}"),
        ("E8", "ERROR", "Worker <*> reported error: <*>", 90,
         lambda: f"Worker {rng.randint(1, 16)} reported error: {rng.choice(errors)}"),
        ("E9", "INFO", "Starting service <*> version <*>", 60,
         lambda: f"Starting service {rng.choice(services)} version {rng.randint(1, 9)}.{rng.randint(0, 20)}.{rng.randint(0, 9)}"),
        ("E10", "INFO", "Deleting block <*> file <*>", 140,
         lambda: f"Deleting block blk_{rng.randint(10**9, 10**10)} file /data/dfs/current/blk_{rng.randint(10**9, 10**10)}"),
        ("E11", "DEBUG", "Heartbeat from node <*> ok", 100,
         lambda: f"Heartbeat from node n{rng.randint(1, 40)} ok"),
        ("E12", "INFO", "User <*> logged out", 40,
         lambda: f"User {rng.choice(users)} logged out"),
    ]
    return events


def write_structured(name, seed, build):
    rng = random.Random(seed)
    events = build(rng)
    bag = [e for e in events for _ in range(e[3])]
    rng.shuffle(bag)
    assert len(bag) == 2000, len(bag)
    path = DATA / f"{name}_2k.log_structured.csv"
    with path.open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["LineId", "Time", "Level", "Content", "EventId", "EventTemplate"])
        for i, (eid, level, template, _, make) in enumerate(bag):
            w.writerow([i + 1, stamp(rng, i), level, make(), eid, template])
    with (DATA / f"{name}_2k.log").open("w") as f:
        with path.open() as src:
            for row in csv.DictReader(src):
                f.write(row["Content"] + "\n")


def anomaly_logs(seed):
    rng = random.Random(seed)
    normal_makers = [
        lambda: f"Heartbeat from node n{rng.randint(1, 40)} ok",
        lambda: f"Accepted password for deploy from 10.0.0.{rng.randint(2, 9)} port 22 ssh2",
        lambda: f"PacketResponder {rng.randint(0, 2)} for block blk_{rng.randint(100, 120)} terminating",
        lambda: f"Job {rng.randint(1, 30)} finished in {rng.randint(5, 60)} s",
        lambda: f"session opened for user backup by (uid=0)",
        lambda: f"Starting service nginx version 1.{rng.randint(18, 20)}.0",
    ]
    abnormal = [
        "kernel: Out of memory: Kill process 2231 (java) score 912 or sacrifice child",
        "EXT4-fs error (device sda1): ext4_find_entry:1455: inode #2: comm ls: reading directory lblock 0",
        "segfault at 0000000000000008 ip 00007f3a9c2b1d4e sp 00007ffd1c9e8a40 error 4 in libc.so.6",
        "Possible SYN flooding on port 443. Sending cookies.",
        "RAID array md0 degraded: disk sdb failed and was removed",
        "TLS handshake failure with upstream payments-gateway: certificate has expired",
    ]
    normal = [rng.choice(normal_makers)() for _ in range(300)]
    (DATA / "anomaly" / "normal.log").write_text("\n".join(normal) + "\n")
    incoming, labels = [], []
    pending = list(abnormal)
    for i in range(40):
        if i % 7 == 3 and pending:
            incoming.append(pending.pop(0))
            labels.append("abnormal")
        else:
            incoming.append(rng.choice(normal))
            labels.append("normal")
    (DATA / "anomaly" / "incoming.log").write_text("\n".join(incoming) + "\n")
    with (DATA / "anomaly" / "labels.csv").open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["LineId", "Label"])
        for i, label in enumerate(labels):
            w.writerow([i + 1, label])


if __name__ == "__main__":
    (DATA / "anomaly").mkdir(parents=True, exist_ok=True)
    write_structured("Apache", 20051204, apache)
    write_structured("Service", 424242, service)
    anomaly_logs(7)
