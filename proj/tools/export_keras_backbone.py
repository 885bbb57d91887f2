#!/usr/bin/env python3
"""Export Keras application backbones to forgeguard weight containers.

    export_keras_backbone.py register --variant efficientnet_b4 [--weights imagenet|none|FILE] [--cache DIR]
    export_keras_backbone.py fixtures OUT_DIR

`register` writes <variant>.fgw into the model registry (FORGEGUARD_MODEL_CACHE
by default) and records its sha256 in registry.json. `fixtures` builds small
randomly initialised members of each family and stores their weights next to
the features Keras computes for a fixed probe image; the C++ executor is
tested against them.
"""

import argparse
import hashlib
import json
import os
import struct
import sys

import numpy as np

os.environ.setdefault("TF_CPP_MIN_LOG_LEVEL", "3")
os.environ.setdefault("KERAS_BACKEND", "tensorflow")


def write_fgwc(path, tag, layers):
    """layers: list of (name, [ndarray])."""

    def s(text):
        b = text.encode("utf-8")
        return struct.pack("<I", len(b)) + b

    body = bytearray(s(tag))
    body += struct.pack("<I", len(layers))
    for name, tensors in layers:
        body += s(name) + struct.pack("<II", 0, 0) + struct.pack("<I", len(tensors))
        for t in tensors:
            t = np.ascontiguousarray(t, dtype="<f4")
            body += struct.pack("<I", t.ndim) + struct.pack("<%dI" % t.ndim, *t.shape) + t.tobytes()
    with open(path, "wb") as f:
        f.write(b"FGWC" + struct.pack("<IQ", 1, len(body)) + body)


def weighted_layers(model):
    import keras

    out = []
    for layer in model.layers:
        if isinstance(layer, keras.layers.Normalization):
            continue  # folded into the preprocessing descriptor
        w = layer.get_weights()
        if w:
            out.append((layer.name, w))
    return out


def probe_image(h, w):
    y, x, c = np.meshgrid(np.arange(h), np.arange(w), np.arange(3), indexing="ij")
    return ((x * 37 + y * 11 + c * 101 + (x * y) % 17 * 5) % 256).astype(np.uint8)


def randomize_batchnorm(model, rng):
    import keras

    for layer in model.layers:
        if isinstance(layer, keras.layers.BatchNormalization):
            n = layer.get_weights()[0].shape[0]
            layer.set_weights([
                rng.uniform(0.5, 1.5, n).astype("f4"),
                rng.normal(0, 0.1, n).astype("f4"),
                rng.normal(0, 0.1, n).astype("f4"),
                rng.uniform(0.5, 1.5, n).astype("f4"),
            ])


def build(variant, weights, input_size=None):
    import keras

    apps = keras.applications
    if variant == "efficientnet_b4":
        return apps.EfficientNetB4(include_top=False, weights=weights, pooling="avg",
                                   input_shape=(input_size or 380, input_size or 380, 3))
    if variant == "resnet50":
        return apps.ResNet50(include_top=False, weights=weights, pooling="avg",
                             input_shape=(input_size or 128, input_size or 128, 3))
    if variant == "vgg16":
        return apps.VGG16(include_top=False, weights=weights, pooling="avg",
                          input_shape=(input_size or 128, input_size or 128, 3))
    raise SystemExit("unknown variant " + variant)


def cmd_register(args):
    weights = None if args.weights == "none" else args.weights
    model = build(args.variant, weights)
    cache = args.cache or os.environ.get("FORGEGUARD_MODEL_CACHE") or os.path.expanduser("~/.cache/forgeguard/models")
    os.makedirs(cache, exist_ok=True)
    path = os.path.join(cache, args.variant + ".fgw")
    write_fgwc(path, "backbone/" + args.variant, weighted_layers(model))
    digest = hashlib.sha256(open(path, "rb").read()).hexdigest()
    index_path = os.path.join(cache, "registry.json")
    index = json.load(open(index_path)) if os.path.exists(index_path) else {"models": {}}
    index["models"][args.variant] = {"file": args.variant + ".fgw", "sha256": digest}
    with open(index_path, "w") as f:
        json.dump(index, f, indent=2)
        f.write("\n")
    print(f"registered {args.variant} ({model.count_params()} params) at {path}")


def cmd_fixtures(args):
    import keras
    from keras.src.applications import efficientnet, resnet

    rng = np.random.default_rng(7)
    keras.utils.set_random_seed(7)
    os.makedirs(args.out, exist_ok=True)
    fixtures = []

    # EfficientNet family, odd input to exercise the asymmetric stride padding.
    size = 67
    m = efficientnet.EfficientNet(0.25, 0.5, size, include_top=False, weights=None, pooling="avg",
                                  input_shape=(size, size, 3), name="tiny_efficientnet")
    mean = np.array([0.485, 0.456, 0.406], "f4")
    var = np.array([0.05, 0.06, 0.07], "f4")
    norm = [l for l in m.layers if isinstance(l, keras.layers.Normalization)][0]
    w = norm.get_weights()
    norm.set_weights([mean.reshape(w[0].shape), var.reshape(w[1].shape)] + w[2:])
    norm.finalize_state()  # call() reads tensors derived from the variables
    randomize_batchnorm(m, rng)
    fixtures.append(("efficientnet", m, size, {"width": 0.25, "depth": 0.5},
                     {"bgr": False, "input_scale": 1 / 255, "mean": mean.tolist(),
                      "scale": (1 / np.sqrt(var)).tolist()}, lambda x: x))

    size = 61

    def stack_fn(x):
        x = resnet.stack_residual_blocks_v1(x, 8, 2, stride1=1, name="conv2")
        return resnet.stack_residual_blocks_v1(x, 16, 1, name="conv3")

    m = resnet.ResNet(stack_fn, False, True, include_top=False, weights=None, pooling="avg",
                      input_shape=(size, size, 3), name="tiny_resnet")
    randomize_batchnorm(m, rng)
    caffe = {"bgr": True, "input_scale": 1.0, "mean": [103.939, 116.779, 123.68], "scale": [1.0, 1.0, 1.0]}
    fixtures.append(("resnet", m, size, {"stem_filters": 64, "stacks": [[8, 2, 1], [16, 1, 2]]}, caffe,
                     lambda x: keras.applications.resnet50.preprocess_input(x)))

    size = 36
    inp = keras.Input((size, size, 3))
    x = inp
    blocks = [[1, 8], [2, 16]]
    for b, (convs, filters) in enumerate(blocks, 1):
        for c in range(1, convs + 1):
            x = keras.layers.Conv2D(filters, 3, padding="same", activation="relu", name=f"block{b}_conv{c}")(x)
        x = keras.layers.MaxPooling2D(2, 2, name=f"block{b}_pool")(x)
    x = keras.layers.GlobalAveragePooling2D()(x)
    m = keras.Model(inp, x, name="tiny_vgg")
    fixtures.append(("vgg", m, size, {"blocks": blocks}, caffe,
                     lambda x: keras.applications.vgg16.preprocess_input(x)))

    for family, model, size, config, pre, preprocess in fixtures:
        image = probe_image(size, size)
        batch = preprocess(image[None].astype("f4"))
        feats = np.asarray(model(batch, training=False))[0]
        layers = weighted_layers(model)
        write_fgwc(os.path.join(args.out, f"tiny_{family}.fgw"), f"backbone/tiny_{family}", layers)
        meta = {
            "family": family,
            "resolution": size,
            "config": config,
            "preprocessing": pre,
            "learned_params": int(sum(t.size for _, ts in layers for t in ts)),
            "features": [float(v) for v in feats],
        }
        with open(os.path.join(args.out, f"tiny_{family}.json"), "w") as f:
            json.dump(meta, f)
        print(f"{family}: {meta['learned_params']} params, {len(feats)} features")


def main(argv):
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="cmd", required=True)
    reg = sub.add_parser("register")
    reg.add_argument("--variant", required=True, choices=["efficientnet_b4", "resnet50", "vgg16"])
    reg.add_argument("--weights", default="imagenet")
    reg.add_argument("--cache")
    fix = sub.add_parser("fixtures")
    fix.add_argument("out")
    args = parser.parse_args(argv)
    {"register": cmd_register, "fixtures": cmd_fixtures}[args.cmd](args)


if __name__ == "__main__":
    main(sys.argv[1:])
