#!/usr/bin/env python3
"""Scripted operator for otdt_server.

Replays a list of timestamped hand inputs, starts the trial and prints every
line the server sends. Works against a headless server, where each input is
applied when simulated time reaches its "t".

    tools/scripted_client.py --port 7878 --scenario minimal \
        --input left:0.5,0,0@0.1 --input left:0,0,0@0.5
"""

import argparse
import json
import socket
import sys


def parse_input(text):
    device, rest = text.split(":", 1)
    vel, t = rest.split("@", 1)
    return {"type": "hand_input", "device": device,
            "vel": [float(v) for v in vel.split(",")], "t": float(t)}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=7878)
    ap.add_argument("--scenario")
    ap.add_argument("--input", action="append", default=[], type=parse_input,
                    help="device:vx,vy,vz@t (repeatable)")
    ap.add_argument("--observe", type=int, help="attach to a running session id instead")
    ap.add_argument("--quiet", action="store_true", help="print only the result line")
    args = ap.parse_args()

    with socket.create_connection((args.host, args.port)) as sock:
        stream = sock.makefile("rw", encoding="utf-8", newline="\n")
        send = lambda msg: (stream.write(json.dumps(msg) + "\n"), stream.flush())
        print(stream.readline().rstrip("\n"))
        if args.observe is not None:
            send({"type": "observe", "session": args.observe})
        else:
            if args.scenario:
                send({"type": "select", "scenario": args.scenario})
            for msg in args.input:
                send(msg)
            send({"type": "control", "action": "start"})
        result = None
        for line in stream:
            line = line.rstrip("\n")
            if json.loads(line).get("type") == "result":
                result = line
            if not args.quiet:
                print(line)
        if args.quiet and result:
            print(result)
    return 0 if result else 1


if __name__ == "__main__":
    sys.exit(main())
