#!/usr/bin/env python3
"""Convert the weights shipped with the `mtcnn` pip package into cascade stages.

    export_mtcnn_weights.py [--weights FILE] [--out DIR]

Writes proposal.fgw, refine.fgw and output.fgw into DIR (default:
$FORGEGUARD_MODEL_CACHE/cascade), which is where the CLI looks for them.

Those networks were trained on transposed images (x and y swapped). Instead of
transposing every input, the spatial axes of the kernels are swapped, the rows
of the first dense layer are reordered to match, and the landmark outputs are
interleaved as (x, y) pairs.
"""

import argparse
import os
import struct
import sys

import numpy as np

CONV, PRELU, POOL, DENSE, HEAD, INPUT = 2, 3, 4, 5, 6, 1
CLASSIFIER, BOX, LANDMARKS = 0, 1, 2

# Per stage: trunk layout as (kind, args) and the spatial shape entering the
# first dense layer (None for fully convolutional stages).
LAYOUT = {
    "pnet": ("proposal", [("conv", 1), ("prelu",), ("pool", 2, 2), ("conv", 1), ("prelu",), ("conv", 1), ("prelu",)],
             None),
    "rnet": ("refine", [("conv", 1), ("prelu",), ("pool", 3, 2), ("conv", 1), ("prelu",), ("pool", 3, 2),
                        ("conv", 1), ("prelu",), ("dense",), ("prelu",)], (3, 3, 64)),
    "onet": ("output", [("conv", 1), ("prelu",), ("pool", 3, 2), ("conv", 1), ("prelu",), ("pool", 3, 2),
                        ("conv", 1), ("prelu",), ("pool", 2, 2), ("conv", 1), ("prelu",), ("dense",), ("prelu",)],
             (3, 3, 128)),
}
HEADS = {"pnet": [CLASSIFIER, BOX], "rnet": [CLASSIFIER, BOX], "onet": [CLASSIFIER, BOX, LANDMARKS]}


def write_container(path, tag, layers):
    """layers: list of (name, kind, attrs, [ndarray])."""

    def s(text):
        b = text.encode("utf-8")
        return struct.pack("<I", len(b)) + b

    body = bytearray(s(tag))
    body += struct.pack("<I", len(layers))
    for name, kind, attrs, tensors in layers:
        body += s(name) + struct.pack("<II", kind, len(attrs))
        body += b"".join(struct.pack("<i", a) for a in attrs)
        body += struct.pack("<I", len(tensors))
        for t in tensors:
            t = np.ascontiguousarray(t, dtype="<f4")
            body += struct.pack("<I", t.ndim) + struct.pack("<%dI" % t.ndim, *t.shape) + t.tobytes()
    with open(path, "wb") as f:
        f.write(b"FGWC" + struct.pack("<IQ", 1, len(body)) + body)


def convert(net, weights):
    role, trunk, flat_shape = LAYOUT[net]
    w = list(weights)
    layers = [("input", INPUT, [], [np.array([127.5, 0.0078125])])]
    for i, op in enumerate(trunk):
        name = "%s_%d" % (op[0], i)
        if op[0] == "conv":
            kernel, bias = w.pop(0), w.pop(0)
            layers.append((name, CONV, [op[1]], [kernel.transpose(1, 0, 2, 3), bias]))
        elif op[0] == "prelu":
            layers.append((name, PRELU, [], [w.pop(0).reshape(-1)]))
        elif op[0] == "pool":
            layers.append((name, POOL, [op[1], op[2]], []))
        else:
            kernel, bias = w.pop(0), w.pop(0)
            h, wd, c = flat_shape
            # Row (y, x, c) of the transposed map is row (x, y, c) of ours.
            kernel = kernel.reshape(wd, h, c, -1).transpose(1, 0, 2, 3).reshape(h * wd * c, -1)
            layers.append((name, DENSE, [], [kernel, bias]))
    for kind in HEADS[net]:
        kernel, bias = w.pop(0), w.pop(0)
        kernel = kernel.reshape(-1, kernel.shape[-1])
        if kind == LANDMARKS:
            order = [i // 2 + 5 * (i % 2) for i in range(10)]
            kernel, bias = kernel[:, order], bias[order]
        layers.append(("head_%d" % kind, HEAD, [kind], [kernel, bias]))
    if w:
        raise SystemExit("%s: %d unexpected tensors left over" % (net, len(w)))
    return role, layers


def default_weights():
    try:
        import mtcnn
    except ImportError:
        raise SystemExit("pass --weights or `pip install mtcnn`")
    return os.path.join(os.path.dirname(mtcnn.__file__), "data", "mtcnn_weights.npy")


def default_out():
    cache = os.environ.get("FORGEGUARD_MODEL_CACHE") or os.path.join(os.path.expanduser("~"), ".cache", "forgeguard",
                                                                      "models")
    return os.path.join(cache, "cascade")


def main(argv):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--weights", help="mtcnn_weights.npy (default: the installed mtcnn package)")
    ap.add_argument("--out", help="output directory (default: $FORGEGUARD_MODEL_CACHE/cascade)")
    args = ap.parse_args(argv)
    weights = np.load(args.weights or default_weights(), allow_pickle=True).tolist()
    out = args.out or default_out()
    os.makedirs(out, exist_ok=True)
    for net in ("pnet", "rnet", "onet"):
        role, layers = convert(net, weights[net])
        path = os.path.join(out, role + ".fgw")
        write_container(path, "cascade/" + role, layers)
        print(path)


if __name__ == "__main__":
    main(sys.argv[1:])
