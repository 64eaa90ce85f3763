#!/usr/bin/env python3
"""Stand-in for vvp. It does not evaluate Verilog. It prints the literal
text of every unconditional $display, honours // stub: directives, and
writes the $dumpfile so the coverage stub has something to read.

Directives (in any source):
  stub:sim-hang          never terminate
  stub:require TEXT      fail unless design.v contains TEXT
  stub:mismatches N      report N output mismatches
  stub:exit N            exit with status N after printing
"""

import json
import re
import sys

sys.dont_write_bytecode = True
import time

from stub_common import die, directives, read_source, strip_comments

DISPLAY = re.compile(r'\$(?:display|error|fatal|info)\s*\(\s*(?:\d+\s*,\s*)?"((?:[^"\\]|\\.)*)"')
DUMPFILE = re.compile(r'\$dumpfile\s*\(\s*"([^"]+)"')
CONDITIONAL = re.compile(r"(^|[^\w$])(if|else)\b")
FORMAT = re.compile(r"%0?[0-9]*[dhbtsxoc]")


def main():
    args = [a for a in sys.argv[1:] if not a.startswith("-")]
    if not args:
        die("vvp: no input file")
    image = args[0]
    try:
        with open(image, encoding="utf-8") as f:
            manifest = json.load(f)
    except (OSError, ValueError):
        die(f"{image}: Unable to open input file.")

    sources = {}
    for name in manifest.get("sources", []):
        text = read_source(name)
        if text is not None:
            sources[name] = text
    everything = "\n".join(sources.values())
    design = sources.get("design.v", "")

    if directives(everything, "sim-hang"):
        while True:
            time.sleep(1)

    for name, text in sources.items():
        code = strip_comments(text)
        lines = text.split("\n")
        for number, line in enumerate(code.split("\n")):
            if "$" not in line or CONDITIONAL.search(line):
                continue
            for m in DISPLAY.finditer(lines[number]):
                print(FORMAT.sub("0", m.group(1)).replace('\\"', '"').replace("\\n", "\n"))

    for wanted in directives(everything, "require"):
        if wanted not in design:
            print(f"ASSERTION FAILED [require] at time 0: design does not contain '{wanted}'")

    for count in directives(everything, "mismatches"):
        print(f"Mismatches: {int(count)} in 20 samples")

    for m in DUMPFILE.finditer(everything):
        with open(m.group(1), "w", encoding="utf-8") as f:
            json.dump({"stub": "vcd", "sources": list(sources)}, f)
        print(f"VCD info: dumpfile {m.group(1)} opened for output.")

    if "$finish" in everything:
        print("testbench.v:1: $finish called at 0 (1s)")

    codes = directives(everything, "exit")
    return int(codes[-1]) if codes else 0


if __name__ == "__main__":
    sys.exit(main())
