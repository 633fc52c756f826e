#!/usr/bin/env python3
"""Convert a HuggingFace BERT checkpoint into an advstance weight archive.

    convert_hf_weights.py MODEL_DIR_OR_FILE OUT.bin [--vocab vocab.txt]

Accepts a directory holding model.safetensors or pytorch_model.bin (plus
vocab.txt), or one of those files directly. Tensor names are mapped onto the
encoder's ``encoder.*`` layout, Linear weights are transposed to (in, out)
and vectors become 1 x n rows. vocab.txt is copied next to the archive, which
is where the encoder looks for it by default.
"""

import argparse
import re
import shutil
import struct
import sys
from pathlib import Path

import numpy as np

MAGIC = b"ADVSTAR1"


def write_archive(path, tensors):
    """Little-endian: magic, u64 count, then per tensor u8 kind 0, u64 name
    length, name, u64 rows, u64 cols and row-major float64 data."""
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(tensors)))
        for name in sorted(tensors):
            value = np.ascontiguousarray(tensors[name], dtype="<f8")
            encoded = name.encode("utf-8")
            f.write(struct.pack("<BQ", 0, len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<QQ", value.shape[0], value.shape[1]))
            f.write(value.tobytes())


def read_archive(path):
    tensors = {}
    with open(path, "rb") as f:
        if f.read(8) != MAGIC:
            raise ValueError(f"{path}: not an advstance archive")
        (count,) = struct.unpack("<Q", f.read(8))
        for _ in range(count):
            kind, length = struct.unpack("<BQ", f.read(9))
            name = f.read(length).decode("utf-8")
            if kind == 0:
                rows, cols = struct.unpack("<QQ", f.read(16))
                tensors[name] = np.frombuffer(f.read(8 * rows * cols), dtype="<f8").reshape(rows, cols)
            else:
                (n,) = struct.unpack("<Q", f.read(8))
                f.read(n)
    return tensors


def load_state_dict(source):
    source = Path(source)
    if source.is_dir():
        for candidate in ("model.safetensors", "pytorch_model.bin"):
            if (source / candidate).exists():
                source = source / candidate
                break
        else:
            raise FileNotFoundError(f"no model.safetensors or pytorch_model.bin in {source}")
    if source.suffix == ".safetensors":
        from safetensors.numpy import load_file

        return {k: np.asarray(v, dtype=np.float64) for k, v in load_file(str(source)).items()}
    import torch

    state = torch.load(str(source), map_location="cpu", weights_only=True)
    return {k: v.detach().to(torch.float64).numpy() for k, v in state.items()}


_LINEAR = re.compile(r"(query|key|value|dense)\.weight$")


def convert_state_dict(state):
    """Maps BERT tensor names to encoder parameter names and layouts."""
    out = {}
    for name, value in state.items():
        name = name.removeprefix("bert.")
        name = name.replace("LayerNorm.gamma", "LayerNorm.weight").replace("LayerNorm.beta", "LayerNorm.bias")
        if name.startswith("embeddings."):
            if name.endswith("position_ids"):
                continue
            target = "encoder." + name
        elif name.startswith("encoder.layer."):
            target = name
        else:
            continue  # pooler and task heads are not part of the encoder
        value = np.asarray(value, dtype=np.float64)
        if value.ndim == 1:
            value = value.reshape(1, -1)
        elif _LINEAR.search(name):
            value = value.T
        out[target] = value
    if "encoder.embeddings.word_embeddings.weight" not in out:
        raise ValueError("no BERT embedding tensors found")
    return out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("source", help="HuggingFace model directory or weight file")
    parser.add_argument("output", help="archive to write")
    parser.add_argument("--vocab", help="vocab.txt (default: next to the source)")
    args = parser.parse_args(argv)

    tensors = convert_state_dict(load_state_dict(args.source))
    output = Path(args.output)
    output.parent.mkdir(parents=True, exist_ok=True)
    write_archive(output, tensors)

    source_dir = Path(args.source) if Path(args.source).is_dir() else Path(args.source).parent
    vocab = Path(args.vocab) if args.vocab else source_dir / "vocab.txt"
    if vocab.exists():
        if vocab.resolve() != (output.parent / "vocab.txt").resolve():
            shutil.copyfile(vocab, output.parent / "vocab.txt")
    else:
        print(f"warning: {vocab} not found; set encoder.vocab_path explicitly", file=sys.stderr)
    layers = sum(1 for k in tensors if k.endswith("attention.self.query.weight"))
    print(f"wrote {len(tensors)} tensors ({layers} layers) to {output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
