"""Tokenization helpers shared by metrics, chunkers, and the stub backend."""

from __future__ import annotations

# CJK unified ideographs, extension A, compatibility ideographs, kana, hangul.
_CJK_RANGES = (
    (0x3400, 0x4DBF),
    (0x4E00, 0x9FFF),
    (0xF900, 0xFAFF),
    (0x3040, 0x30FF),
    (0xAC00, 0xD7AF),
)


def is_cjk(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _CJK_RANGES)


def whitespace_tokens(text: str) -> list[str]:
    return text.split()


def mixed_tokens(text: str) -> list[str]:
    """Whitespace tokens, with runs of CJK characters exploded into single chars.

    Language-neutral rule used for ROUGE-L and token-targeted chunking: scripts
    without word delimiters are counted per character, everything else per
    whitespace-delimited word.
    """
    out: list[str] = []
    for piece in text.split():
        buf: list[str] = []
        for ch in piece:
            if is_cjk(ch):
                if buf:
                    out.append("".join(buf))
                    buf = []
                out.append(ch)
            else:
                buf.append(ch)
        if buf:
            out.append("".join(buf))
    return out


def tokens_for_rule(text: str, token_rule: str) -> list[str]:
    if token_rule == "whitespace":
        return whitespace_tokens(text)
    if token_rule == "cjk_char":
        return mixed_tokens(text)
    raise ValueError(f"unknown token rule: {token_rule!r}")
