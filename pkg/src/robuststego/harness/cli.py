"""``robuststego`` command line.

Exit codes: 0 success, 1 usage or input error, 2 decode failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from ..attacks import AttackConfig, apply_attack, attack_chunks, embedding_drift, local_consistency
from ..channel import (
    ChannelHistory,
    HiddenMessage,
    StegoDocument,
    WatermarkKeySet,
    generate_master_key,
    read_key_file,
    write_key_file,
)
from ..ecc import FramingError, decode_text, ecc_decode, ecc_encode, encode_text
from ..embedding import codec as embed_codec
from ..embedding.embedders import ToyEmbedder, embed_text
from ..embedding.lsh import save_lsh, train_pca_lsh
from ..watermark import codec as wm_codec
from ..watermark.detection import required_length
from .cost import CostModel, total_cost
from .experiments import SCHEMAS, run_experiment, write_csv
from .profile import Profile

EXIT_OK, EXIT_USAGE, EXIT_DECODE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        # argparse's default exits 2, which this tool reserves for decode failures
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(args: argparse.Namespace, obj: dict[str, Any], text: str) -> None:
    print(json.dumps(obj, sort_keys=True) if args.json else text)


def _history(args: argparse.Namespace) -> ChannelHistory:
    prior: list[str] = []
    prompt = args.prompt or ""
    if args.history:
        obj = json.loads(Path(args.history).read_text(encoding="utf-8"))
        prior = list(obj.get("prior_messages", []))
        prompt = args.prompt if args.prompt is not None else obj.get("prompt", "")
    return ChannelHistory(tuple(prior), prompt)


def _profile(args: argparse.Namespace, scheme: str | None = None) -> Profile:
    if not args.profile:
        raise UsageError("--profile is required")
    profile = Profile.load(args.profile)
    if scheme is not None and profile.scheme != scheme:
        raise UsageError(f"--profile describes a {profile.scheme} codec, not {scheme}")
    return profile


def _message(s: str) -> HiddenMessage:
    try:
        return HiddenMessage.from_string(s)
    except ValueError as e:
        raise UsageError(f"--message: {e}") from e


# -- commands ---------------------------------------------------------------


def cmd_keygen(args: argparse.Namespace) -> int:
    bits = _profile(args).key_bits if args.profile else args.key_bits
    if args.seed is not None:
        # reproducible keys are for experiments only
        raw = b"".join(
            hashlib.sha256(b"keygen" + args.seed.to_bytes(8, "big") + i.to_bytes(4, "big")).digest()
            for i in range((bits // 8 + 31) // 32)
        )
        key = raw[: bits // 8]
    else:
        key = generate_master_key(bits)
    write_key_file(args.out, key)
    _emit(args, {"key_file": args.out, "key_bits": bits}, f"wrote {bits}-bit key to {args.out}")
    return EXIT_OK


def cmd_encode_wm(args: argparse.Namespace) -> int:
    profile = _profile(args, "watermark")
    params = profile.watermark_params()
    message = _message(args.message)
    if message.length != params.n_bits:
        raise UsageError(f"--message has {message.length} bits; profile expects {params.n_bits}")
    keys = WatermarkKeySet.derive(read_key_file(args.key, profile.key_bits), params.n_bits)
    doc = wm_codec.encode(keys, message, _history(args), profile.model(), params, rng_seed=args.seed or 0)
    Path(args.out).write_text(doc.dumps() + "\n", encoding="utf-8")
    _emit(args, {"out": args.out, "tokens": len(doc.token_indices or ())},
          f"wrote {len(doc.token_indices or ())} tokens to {args.out}")
    return EXIT_OK


def _load_doc(path: str, scheme: str) -> StegoDocument | str:
    raw = Path(path).read_text(encoding="utf-8")
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError:
        return raw  # plain (possibly attacked) stegotext
    if not isinstance(obj, dict) or "scheme" not in obj:
        return raw
    doc = StegoDocument.from_json(obj)
    if doc.scheme != scheme:
        raise UsageError(f"{path} holds a {doc.scheme} document")
    return doc


def cmd_decode_wm(args: argparse.Namespace) -> int:
    profile = _profile(args, "watermark")
    params = profile.watermark_params()
    keys = WatermarkKeySet.derive(read_key_file(args.key, profile.key_bits), params.n_bits)
    history = _history(args)
    doc = _load_doc(args.input, "watermark")
    if isinstance(doc, StegoDocument) and doc.history_digest and doc.history_digest != history.digest():
        logging.warning("channel history differs from the one used at encode time")
    if args.text and isinstance(doc, StegoDocument):
        doc = doc.text
    try:
        msg, report = wm_codec.decode(keys, history, doc, params, profile.vocabulary())
    except wm_codec.DecodeError as e:
        print(f"decode failed: {e}", file=sys.stderr)
        return EXIT_DECODE
    _emit(args, {"message": msg.to_string(), "report": report.to_json()}, msg.to_string())
    return EXIT_OK


def cmd_encode_embed(args: argparse.Namespace) -> int:
    profile = _profile(args, "embedding")
    if (args.message is None) == (args.text is None):
        raise UsageError("give exactly one of --message or --text")
    bits = list(_message(args.message).bits) if args.message is not None else encode_text(args.text)
    ecc = profile.ecc()
    coded = ecc_encode(ecc, bits)
    lsh = profile.lsh()
    doc, report = embed_codec.encode(
        coded, profile.model(), profile.embedder(), lsh, _history(args), profile.max_attempts,
        chunk_tokens=profile.chunk_tokens, seed=args.seed or 0,
    )
    params = dict(doc.params, message_bits=len(bits), ecc=ecc.to_json(), framed=args.text is not None)
    doc = StegoDocument("embedding", doc.text, None, params, doc.history_digest)
    Path(args.out).write_text(doc.dumps() + "\n", encoding="utf-8")
    info = {"out": args.out, "chunks": len(report.attempts), "attempts": report.attempts, "misses": report.misses}
    _emit(args, info, f"wrote {len(report.attempts)} chunks to {args.out} "
          f"(mean attempts {report.mean_attempts:.2f}, misses {len(report.misses)})")
    return EXIT_OK


def cmd_decode_embed(args: argparse.Namespace) -> int:
    profile = _profile(args, "embedding")
    doc = _load_doc(args.input, "embedding")
    params = doc.params if isinstance(doc, StegoDocument) else {}
    ecc = profile.ecc()
    framed = bool(params.get("framed", args.as_text))
    n_bits = args.bits or params.get("message_bits")
    if not n_bits:
        raise UsageError("--bits is required for a plain-text stegotext")
    coded_len = int(params.get("n") or ecc.encoded_length(int(n_bits)))
    try:
        got = embed_codec.decode(doc, profile.embedder(), profile.lsh(), coded_len)
        bits = ecc_decode(ecc, got.bits)
        out = decode_text(bits) if framed else "".join(map(str, bits[: int(n_bits)]))
    except (embed_codec.DecodeError, FramingError) as e:
        print(f"decode failed: {e}", file=sys.stderr)
        return EXIT_DECODE
    _emit(args, {"message": out}, out)
    return EXIT_OK


def _paragraphs(text: str) -> list[str]:
    return embed_codec.split_chunks(text)


def cmd_train_pca_lsh(args: argparse.Namespace) -> int:
    embedder = _profile(args).embedder() if args.profile else ToyEmbedder()
    texts = _paragraphs(Path(args.corpus).read_text(encoding="utf-8"))
    model = train_pca_lsh([embed_text(embedder, t) for t in texts], args.hash_bits, args.threshold)
    save_lsh(model, args.out)
    _emit(args, {"out": args.out, "eigenvalues": model.eigenvalues.tolist()},
          f"trained {args.hash_bits}-bit PCA hash on {len(texts)} texts; wrote {args.out}")
    return EXIT_OK


def cmd_attack(args: argparse.Namespace) -> int:
    cfg = AttackConfig(args.kind, args.mode, args.fraction, args.n, args.lexicon, seed=args.seed or 0)
    src = Path(args.input).read_bytes()
    if cfg.fraction == 0:
        Path(args.out).write_bytes(src)
    else:
        text = src.decode("utf-8")
        out = attack_chunks(text, cfg) if args.per_chunk else apply_attack(text, cfg)
        Path(args.out).write_text(out, encoding="utf-8")
    _emit(args, {"out": args.out, "config": cfg.to_json()}, f"wrote {args.out}")
    return EXIT_OK


def cmd_consistency(args: argparse.Namespace) -> int:
    x = Path(args.x).read_text(encoding="utf-8")
    fx = Path(args.fx).read_text(encoding="utf-8")
    v = local_consistency(x, fx, args.k)
    _emit(args, {"consistency": v, "k": args.k}, f"{v:.6f}")
    return EXIT_OK


def cmd_drift(args: argparse.Namespace) -> int:
    embedder = _profile(args).embedder() if args.profile else ToyEmbedder()
    x = Path(args.x).read_text(encoding="utf-8")
    fx = Path(args.fx).read_text(encoding="utf-8")
    e, c = embedding_drift(x, fx, embedder)
    _emit(args, {"euclidean": e, "cosine": c}, f"euclidean={e:.6f} cosine={c:.6f}")
    return EXIT_OK


def cmd_estimate_length(args: argparse.Namespace) -> int:
    t = required_length(args.bits, args.delta, args.epsilon, args.safety)
    _emit(args, {"required_length": t}, str(t))
    return EXIT_OK


def cmd_cost(args: argparse.Namespace) -> int:
    cm = CostModel(args.n, args.h, args.W, args.T_out, args.p_in, args.p_out, args.c)
    v = total_cost(cm)
    _emit(args, {"total_cost": v, "total_queries": cm.total_queries}, f"{v:.6g}")
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    path = Path(args.config)
    config = json.loads(path.read_text(encoding="utf-8"))
    if args.which:
        config["which"] = args.which
    if args.seed is not None:
        config["seed"] = args.seed
    rows = run_experiment(config, path.resolve().parent, workers=args.workers)
    text = write_csv(rows, SCHEMAS[config["which"]], args.out)
    if args.out is None:
        sys.stdout.write(text)
    elif args.json:
        print(json.dumps({"out": args.out, "rows": len(rows)}))
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--profile", help="codec profile (JSON)")
    common.add_argument("--seed", type=int, default=None, help="seed for randomized steps")
    common.add_argument("--json", action="store_true", help="machine-readable output")
    history = argparse.ArgumentParser(add_help=False)
    history.add_argument("--prompt", default=None, help="channel prompt")
    history.add_argument("--history", help="JSON file with prior_messages and prompt")

    p = _Parser(prog="robuststego", description="Robust LLM steganography toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("keygen", parents=[common], help="write a fresh master key")
    s.add_argument("--out", required=True)
    s.add_argument("--key-bits", type=int, default=256)
    s.set_defaults(func=cmd_keygen)

    s = sub.add_parser("encode-wm", parents=[common, history], help="hide bits with the watermark codec")
    s.add_argument("--key", required=True)
    s.add_argument("--message", required=True, help="bit string, e.g. 101")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_encode_wm)

    s = sub.add_parser("decode-wm", parents=[common, history], help="recover watermark bits")
    s.add_argument("--key", required=True)
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--text", action="store_true", help="decode the rendered text, not token indices")
    s.set_defaults(func=cmd_decode_wm)

    s = sub.add_parser("encode-embed", parents=[common, history], help="hide bits with the embedding codec")
    s.add_argument("--message", help="bit string")
    s.add_argument("--text", help="UTF-8 text (framed with a length header)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_encode_embed)

    s = sub.add_parser("decode-embed", parents=[common], help="recover embedded bits")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--bits", type=int, help="message length for plain-text input")
    s.add_argument("--as-text", action="store_true", help="plain-text input carries framed UTF-8")
    s.set_defaults(func=cmd_decode_embed)

    s = sub.add_parser("train-pca-lsh", parents=[common], help="fit a PCA hash on blank-line separated texts")
    s.add_argument("--corpus", required=True)
    s.add_argument("--hash-bits", type=int, required=True)
    s.add_argument("--threshold", choices=("zero", "median"), default="zero")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train_pca_lsh)

    s = sub.add_parser("attack", parents=[common], help="tamper with a text file")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--kind", required=True, choices=("ngram_shuffle", "synonym", "paraphrase"))
    s.add_argument("--mode", choices=("local", "global"), default="global")
    s.add_argument("--fraction", type=float, default=0.1)
    s.add_argument("--n", type=int, default=3, help="shuffle unit length in words")
    s.add_argument("--lexicon", help="synonym table (word: syn1, syn2)")
    s.add_argument("--per-chunk", action="store_true", help="attack each blank-line chunk separately")
    s.set_defaults(func=cmd_attack)

    s = sub.add_parser("consistency", parents=[common], help="fraction of k-word windows preserved")
    s.add_argument("--x", required=True)
    s.add_argument("--fx", required=True)
    s.add_argument("--k", type=int, default=3)
    s.set_defaults(func=cmd_consistency)

    s = sub.add_parser("drift", parents=[common], help="embedding drift between two texts")
    s.add_argument("--x", required=True)
    s.add_argument("--fx", required=True)
    s.set_defaults(func=cmd_drift)

    s = sub.add_parser("estimate-length", parents=[common], help="tokens needed for reliable detection")
    s.add_argument("--bits", type=int, required=True)
    s.add_argument("--delta", type=float, required=True)
    s.add_argument("--epsilon", type=float, required=True)
    s.add_argument("--safety", type=float, default=1.0)
    s.set_defaults(func=cmd_estimate_length)

    s = sub.add_parser("cost", parents=[common], help="query cost of the embedding codec")
    s.add_argument("--n", type=float, required=True, help="bits to hide")
    s.add_argument("--h", type=int, required=True, help="bits per chunk")
    s.add_argument("--c", type=float, default=None, help="queries per chunk (default 2**h)")
    s.add_argument("--W", type=float, required=True, help="input tokens per query")
    s.add_argument("--T-out", dest="T_out", type=float, required=True, help="output tokens per query")
    s.add_argument("--p-in", dest="p_in", type=float, required=True)
    s.add_argument("--p-out", dest="p_out", type=float, required=True)
    s.set_defaults(func=cmd_cost)

    s = sub.add_parser("experiment", parents=[common], help="run an experiment config and write CSV")
    s.add_argument("--config", required=True)
    s.add_argument("--which", choices=tuple(SCHEMAS))
    s.add_argument("--out")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_experiment)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # --help, or a usage error already reported by argparse
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as e:
        print(f"{parser.prog} {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError, FileNotFoundError, json.JSONDecodeError) as e:
        print(f"{parser.prog} {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
