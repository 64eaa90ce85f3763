"""Helpers shared by the fake EDA tools."""

import re
import sys

DIRECTIVE = re.compile(r"//\s*stub:(?P<name>[a-z-]+)(?P<arg>[^\n]*)")


def read_source(path):
    try:
        with open(path, encoding="utf-8", errors="replace") as f:
            return f.read()
    except OSError:
        return None


def strip_comments(text):
    """Blank out comments, keeping newlines so line numbers survive."""
    out = []
    i = 0
    n = len(text)
    while i < n:
        if text.startswith("//", i):
            j = text.find("\n", i)
            j = n if j < 0 else j
            out.append(" " * (j - i))
            i = j
        elif text.startswith("/*", i):
            j = text.find("*/", i + 2)
            j = n if j < 0 else j + 2
            out.append("".join("\n" if c == "\n" else " " for c in text[i:j]))
            i = j
        elif text[i] == '"':
            j = i + 1
            while j < n and text[j] != '"' and text[j] != "\n":
                j += 2 if text[j] == "\\" else 1
            j = min(j + 1, n)
            out.append('"' + " " * (j - i - 2) + '"' if j - i >= 2 else text[i:j])
            i = j
        else:
            out.append(text[i])
            i += 1
    return "".join(out)


def directives(text, name):
    return [m.group("arg").strip() for m in DIRECTIVE.finditer(text) if m.group("name") == name]


def die(message, code=1):
    print(message)
    sys.exit(code)
