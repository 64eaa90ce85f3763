#!/usr/bin/env python3
"""Stand-in for iverilog: heuristic syntax and elaboration checks with
Icarus-style messages. Writes a manifest of the sources as the compiled
object so fake_vvp.py can "run" it."""

import json
import re
import sys

sys.dont_write_bytecode = True
import time

from stub_common import directives, read_source, strip_comments

PAIRS = [
    ("module", "endmodule"),
    ("macromodule", "endmodule"),
    ("case", "endcase"),
    ("casez", "endcase"),
    ("casex", "endcase"),
    ("function", "endfunction"),
    ("task", "endtask"),
    ("generate", "endgenerate"),
    ("begin", "end"),
]
STATEMENT_START = re.compile(
    r"^\s*(assign|wire|reg|logic|integer|localparam|genvar)\b")
NEXT_ITEM = re.compile(
    r"^\s*(assign|wire|reg|logic|integer|localparam|always\w*|initial|end\w*|module|"
    r"input|output|inout|parameter|genvar)\b")
KEYWORDS = {
    "module", "macromodule", "endmodule", "input", "output", "inout", "wire", "reg", "logic",
    "assign", "always", "always_ff", "always_comb", "always_latch", "initial", "if", "else",
    "case", "casez", "casex", "endcase", "for", "while", "repeat", "forever", "begin", "end",
    "integer", "parameter", "localparam", "function", "endfunction", "task", "endtask",
    "return", "genvar", "generate", "endgenerate", "bit", "int", "default", "posedge",
    "negedge", "or", "and", "not", "wait", "fork", "join", "signed", "unsigned", "real",
    "time", "event", "supply0", "supply1", "tri", "defparam", "specify", "endspecify",
}
INSTANCE = re.compile(r"^\s*([A-Za-z_][\w$]*)\s*(#\s*\(.*\))?\s+([A-Za-z_][\w$]*)\s*\(")
DECLARATION = re.compile(r"(?:^|[^\w$`])(?:module|macromodule)\s+([A-Za-z_][\w$]*)")
WORD = re.compile(r"[A-Za-z_][\w$]*")


def line_of(text, offset):
    return text.count("\n", 0, offset) + 1


def bracket_errors(name, code):
    stack = []
    closing = {")": "(", "]": "[", "}": "{"}
    for i, c in enumerate(code):
        if c in "([{":
            stack.append((c, i))
        elif c in closing:
            if not stack or stack[-1][0] != closing[c]:
                return [f"{name}:{line_of(code, i)}: syntax error"]
            stack.pop()
    if stack:
        return [f"{name}:{line_of(code, stack[-1][1])}: syntax error"]
    return []


def pairing_errors(name, code):
    errors = []
    openers = {o: c for o, c in PAIRS}
    closers = {c for _, c in PAIRS}
    stack = []
    for m in WORD.finditer(code):
        word = m.group(0)
        if word in openers:
            stack.append((openers[word], m.start()))
        elif word in closers:
            if not stack or stack[-1][0] != word:
                errors.append(f"{name}:{line_of(code, m.start())}: syntax error")
                return errors
            stack.pop()
    if stack:
        errors.append(f"{name}:{line_of(code, len(code))}: syntax error")
    return errors


def semicolon_errors(name, code):
    errors = []
    lines = code.split("\n")
    depth = 0
    for index, line in enumerate(lines):
        if depth == 0 and STATEMENT_START.match(line):
            # walk forward until the statement ends
            j = index
            text = line
            while ";" not in text:
                j += 1
                if j >= len(lines) or NEXT_ITEM.match(lines[j]):
                    errors.append(f"{name}:{min(j + 1, len(lines))}: syntax error")
                    break
                text = lines[j]
        depth += line.count("(") - line.count(")")
        depth = max(depth, 0)
    return errors


def main():
    args = sys.argv[1:]
    out = None
    files = []
    i = 0
    while i < len(args):
        if args[i] == "-o" and i + 1 < len(args):
            out = args[i + 1]
            i += 2
            continue
        if not args[i].startswith("-"):
            files.append(args[i])
        i += 1
    if out is None or not files:
        print("iverilog: error: no output file or no sources")
        return 1

    sources = {}
    for name in files:
        text = read_source(name)
        if text is None:
            print(f"{name}: No such file or directory")
            return 1
        sources[name] = text

    if any(directives(t, "compile-hang") for t in sources.values()):
        time.sleep(3600)

    errors = []
    for name, text in sources.items():
        code = strip_comments(text)
        found = bracket_errors(name, code) or pairing_errors(name, code)
        errors += found or semicolon_errors(name, code)
    if errors:
        for e in errors:
            print(e)
        print("I give up.")
        return 2

    declared = set()
    for text in sources.values():
        declared.update(DECLARATION.findall(strip_comments(text)))
    missing = {}
    elab = []
    for name, text in sources.items():
        for number, line in enumerate(strip_comments(text).split("\n"), start=1):
            for statement in line.split(";"):
                m = INSTANCE.match(statement)
                if not m:
                    continue
                kind = m.group(1)
                if kind in KEYWORDS or m.group(3) in KEYWORDS or kind in declared:
                    continue
                elab.append(f"{name}:{number}: error: Unknown module type: {kind}")
                missing[kind] = missing.get(kind, 0) + 1
    for text in directives("\n".join(sources.values()), "warn"):
        print(f"{files[0]}:1: warning: {text}")
    if elab:
        for e in elab:
            print(e)
        print(f"{len(elab) + len(missing)} error(s) during elaboration.")
        print("*** These modules were missing:")
        for kind, count in sorted(missing.items()):
            print(f"        {kind} referenced {count} times.")
        print("***")
        return 1

    with open(out, "w", encoding="utf-8") as f:
        json.dump({"stub": "vvp", "sources": files}, f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
