r"""Reading and writing back-off models in ARPA text format.

Layout produced by :func:`write_arpa`::

    \data\
    ngram 1=4
    ngram 2=5

    \1-grams:
    -99.0000000<TAB><s><TAB>-0.3010300
    -0.4771213<TAB>a<TAB>-0.3010300
    ...

    \2-grams:
    -0.1760913<TAB><s> a
    ...

    \end\

Each entry line is ``LOGP<TAB>SYMBOLS<TAB>BOW`` with the BOW column absent at
the highest order and for entries that never act as a context.  Symbols are
space-separated; the start and end markers render as ``<s>`` and ``</s>``.
Log values are printed with seven decimal places, enough to round-trip every
query within 1e-6.  Entries are sorted by symbol index (start marker first),
so identical models serialize to identical bytes.

The reader is strict: bad headers, section length mismatches, duplicate
entries, unknown or multi-character symbols, positive log probabilities and a
back-off weight on the highest order are all rejected with the offending line
number.
"""

from __future__ import annotations

import hashlib
import io
import math
from pathlib import Path
from typing import TextIO, Union

from .charset import EOS, SOS, Charset
from .ngram import Entry, Gram, NgramModel

Sink = Union[str, Path, TextIO]


class ArpaFormatError(ValueError):
    """Malformed ARPA input; carries the 1-based offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


def _render(symbol: str) -> str:
    return symbol  # SOS/EOS are already stored as "<s>"/"</s>"


def _sort_key(model: NgramModel, gram: Gram) -> tuple[int, ...]:
    return tuple(-1 if s == SOS else model.charset.index(s) for s in gram)


def write_arpa(model: NgramModel, sink: Sink) -> None:
    """Serialize ``model`` to ``sink`` (path or text stream)."""
    if isinstance(sink, (str, Path)):
        with open(sink, "w", encoding="utf-8", newline="\n") as fh:
            _write(model, fh)
    else:
        _write(model, sink)


def _write(model: NgramModel, out: TextIO) -> None:
    out.write("\\data\\\n")
    for m in range(1, model.order + 1):
        out.write(f"ngram {m}={len(model.tables[m])}\n")
    for m in range(1, model.order + 1):
        out.write(f"\n\\{m}-grams:\n")
        for gram in sorted(model.tables[m], key=lambda g: _sort_key(model, g)):
            logp, bow = model.tables[m][gram]
            line = f"{logp:.7f}\t{' '.join(_render(s) for s in gram)}"
            if bow is not None:
                line += f"\t{bow:.7f}"
            out.write(line + "\n")
    out.write("\n\\end\\\n")


def arpa_bytes(model: NgramModel) -> bytes:
    buf = io.StringIO()
    _write(model, buf)
    return buf.getvalue().encode("utf-8")


def fingerprint(model: NgramModel) -> str:
    """Hex digest identifying the model by its serialized bytes."""
    return hashlib.sha256(arpa_bytes(model)).hexdigest()


def read_arpa(source: Sink) -> NgramModel:
    """Parse an ARPA file back into a queryable model.

    The vocabulary is reconstructed from the unigram section; all symbols
    other than ``<s>``/``</s>`` must be single characters, and higher-order
    entries may only use symbols introduced there.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            return _read(fh)
    return _read(source)


def _read(fh: TextIO) -> NgramModel:
    lines = fh.read().split("\n")
    pos = 0

    def next_line() -> tuple[int, str]:
        nonlocal pos
        while pos < len(lines):
            pos += 1
            line = lines[pos - 1].rstrip("\r")
            if line.strip() != "":
                return pos, line
        raise ArpaFormatError("unexpected end of file", len(lines))

    lineno, line = next_line()
    if line.strip() != "\\data\\":
        raise ArpaFormatError(r"expected \data\ header", lineno)

    counts: dict[int, int] = {}
    while True:
        lineno, line = next_line()
        if line.startswith("\\"):
            break
        if not line.startswith("ngram "):
            raise ArpaFormatError(f"expected 'ngram m=COUNT', got {line!r}", lineno)
        body = line[len("ngram ") :]
        if "=" not in body:
            raise ArpaFormatError(f"malformed count line {line!r}", lineno)
        left, right = body.split("=", 1)
        try:
            m, c = int(left), int(right)
        except ValueError:
            raise ArpaFormatError(f"malformed count line {line!r}", lineno) from None
        if m in counts:
            raise ArpaFormatError(f"duplicate count for order {m}", lineno)
        counts[m] = c
    if not counts or sorted(counts) != list(range(1, len(counts) + 1)):
        raise ArpaFormatError("orders in the \\data\\ section must be contiguous from 1", lineno)
    order = len(counts)

    tables: list[dict[Gram, Entry]] = [dict() for _ in range(order + 1)]
    vocab: set[str] = set()
    for m in range(1, order + 1):
        if not line.strip() == f"\\{m}-grams:":
            raise ArpaFormatError(f"expected \\{m}-grams: section header, got {line!r}", lineno)
        for _ in range(counts[m]):
            lineno, line = next_line()
            if line.startswith("\\"):
                raise ArpaFormatError(
                    f"\\{m}-grams: section ended after {len(tables[m])} of {counts[m]} entries",
                    lineno,
                )
            gram, entry = _parse_entry(line, m, order, lineno)
            for s in gram[:-1]:
                _check_symbol(s, m, vocab, lineno)
            if m == 1:
                vocab.add(gram[0])
            else:
                _check_symbol(gram[-1], m, vocab, lineno)
            if gram in tables[m]:
                raise ArpaFormatError(f"duplicate {m}-gram {' '.join(gram)!r}", lineno)
            tables[m][gram] = entry
        lineno, line = next_line()
        if not line.startswith("\\"):
            raise ArpaFormatError(
                f"\\{m}-grams: section has more than the declared {counts[m]} entries", lineno
            )
    if line.strip() != "\\end\\":
        raise ArpaFormatError(r"expected \end\ terminator", lineno)

    symbols = sorted(vocab - {SOS, EOS})
    for s in symbols:
        if len(s) != 1:
            raise ArpaFormatError(f"vocabulary entry {s!r} is not a single character")
    charset = Charset(tuple(symbols))
    return NgramModel(order, charset, tables)


def _check_symbol(s: str, m: int, vocab: set[str], lineno: int) -> None:
    if s not in vocab:
        raise ArpaFormatError(f"unknown symbol {s!r} in {m}-gram (no unigram entry)", lineno)


def _parse_entry(line: str, m: int, order: int, lineno: int) -> tuple[Gram, Entry]:
    parts = line.split("\t")
    if len(parts) not in (2, 3):
        raise ArpaFormatError(f"expected LOGP<TAB>SYMBOLS[<TAB>BOW], got {line!r}", lineno)
    try:
        logp = float(parts[0])
    except ValueError:
        raise ArpaFormatError(f"bad log probability {parts[0]!r}", lineno) from None
    if not math.isfinite(logp):
        raise ArpaFormatError(f"non-finite log probability {parts[0]!r}", lineno)
    if logp > 0:
        raise ArpaFormatError(f"positive log probability {parts[0]}", lineno)
    gram = tuple(parts[1].split())
    if len(gram) != m:
        raise ArpaFormatError(f"expected {m} symbols, got {len(gram)}", lineno)
    bow = None
    if len(parts) == 3:
        if m == order:
            raise ArpaFormatError("back-off weight on a highest-order entry", lineno)
        try:
            bow = float(parts[2])
        except ValueError:
            raise ArpaFormatError(f"bad back-off weight {parts[2]!r}", lineno) from None
        if not math.isfinite(bow):
            raise ArpaFormatError(f"non-finite back-off weight {parts[2]!r}", lineno)
    return gram, (logp, bow)
