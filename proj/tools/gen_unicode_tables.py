#!/usr/bin/env python3
"""Regenerates core/src/unicode_tables.inc from Python's unicodedata.

Usage: python3 tools/gen_unicode_tables.py > core/src/unicode_tables.inc
"""
import sys
import unicodedata


def ranges(pred):
    out = []
    start = None
    for cp in range(0x110000):
        hit = pred(cp)
        if hit and start is None:
            start = cp
        elif not hit and start is not None:
            out.append((start, cp - 1))
            start = None
    if start is not None:
        out.append((start, 0x10FFFF))
    return out


def is_punct_or_symbol(cp):
    return unicodedata.category(chr(cp))[0] in ("P", "S")


WHITESPACE = [0x09, 0x0A, 0x0B, 0x0C, 0x0D, 0x20, 0x85, 0xA0, 0x1680,
              *range(0x2000, 0x200B), 0x2028, 0x2029, 0x202F, 0x205F, 0x3000]


def main():
    w = sys.stdout.write
    w("// Generated by tools/gen_unicode_tables.py (Unicode %s). Do not edit.\n\n"
      % unicodedata.unidata_version)
    w("constexpr CodepointRange kPunctOrSymbol[] = {\n")
    for lo, hi in ranges(is_punct_or_symbol):
        w("    {0x%X, 0x%X},\n" % (lo, hi))
    w("};\n\n")
    w("constexpr CodepointRange kWhitespace[] = {\n")
    for lo, hi in ranges(lambda cp: cp in WHITESPACE):
        w("    {0x%X, 0x%X},\n" % (lo, hi))
    w("};\n\n")
    w("constexpr LowerMapping kLowerMap[] = {\n")
    for cp in range(0x110000):
        c = chr(cp)
        lo = c.lower()
        if len(lo) == 1 and lo != c:
            w("    {0x%X, 0x%X},\n" % (cp, ord(lo)))
    w("};\n")


if __name__ == "__main__":
    main()
