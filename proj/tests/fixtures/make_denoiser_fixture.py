# Copyright 2026 The rm3d Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Regenerates the frozen denoiser parity fixture in tests/data.

The forward pass below is a plain numpy implementation written against the
descriptor documentation, independent of the C++ code. Weights are stored as
f32 records and the reference output is computed in float64 from the stored
values.

Usage: python3 make_denoiser_fixture.py <output dir>
"""

import struct
import sys
from pathlib import Path

import numpy as np

LICENSE_HEADER = """# Copyright 2026 The rm3d Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""

DESCRIPTOR = """denoiser v1
latent_channels 1
condition_channels 2
time_embedding 8
conv3d stem 3 4 3
resblock rb1 4 4 3
film f1 4
save s0
down
resblock rb2 4 6 3
xattn a1 6 4
up
concat s0
resblock rb3 10 4 1
act silu
conv3d head 4 1 1
"""

SHAPE = (4, 4, 3)
T_VALUE = 137.0

TYPE_CODES = {np.dtype(np.uint8): 0, np.dtype(np.int32): 1, np.dtype(np.float32): 2, np.dtype(np.float64): 3}


def write_records(path, arrays):
    with open(path, "wb") as f:
        for a in arrays:
            a = np.ascontiguousarray(a)
            f.write(b"RM3D")
            f.write(struct.pack("<B", 1))
            f.write(struct.pack("<I", a.ndim))
            for d in a.shape:
                f.write(struct.pack("<I", d))
            f.write(struct.pack("<B", TYPE_CODES[a.dtype]))
            f.write(a.astype(a.dtype.newbyteorder("<")).tobytes())


def parse(text):
    layers = []
    header = {}
    for line in text.splitlines()[1:]:
        tok = line.split()
        if not tok:
            continue
        if tok[0] in ("latent_channels", "condition_channels", "time_embedding"):
            header[tok[0]] = int(tok[1])
        else:
            layers.append(tok)
    return header, layers


def param_shapes(header, layers):
    d, cc = header["time_embedding"], header["condition_channels"]
    out = []
    if d:
        out += [("time.fc1.weight", (d, d)), ("time.fc1.bias", (d,)),
                ("time.fc2.weight", (d, d)), ("time.fc2.bias", (d,))]
    for tok in layers:
        op = tok[0]
        if op == "conv3d":
            name, i, o, k = tok[1], int(tok[2]), int(tok[3]), int(tok[4])
            out += [(name + ".weight", (o, i, k, k, k)), (name + ".bias", (o,))]
        elif op == "resblock":
            name, i, o, k = tok[1], int(tok[2]), int(tok[3]), int(tok[4])
            out += [(name + ".conv1.weight", (o, i, k, k, k)), (name + ".conv1.bias", (o,))]
            if d:
                out += [(name + ".temb.weight", (o, d)), (name + ".temb.bias", (o,))]
            out += [(name + ".conv2.weight", (o, o, k, k, k)), (name + ".conv2.bias", (o,))]
            if i != o:
                out += [(name + ".skip.weight", (o, i, 1, 1, 1)), (name + ".skip.bias", (o,))]
        elif op == "film":
            c = int(tok[2])
            out += [(tok[1] + ".weight", (2 * c, cc, 1, 1, 1)), (tok[1] + ".bias", (2 * c,))]
        elif op == "xattn":
            c, dim = int(tok[2]), int(tok[3])
            out += [(tok[1] + ".q.weight", (dim, c)), (tok[1] + ".k.weight", (dim, cc)),
                    (tok[1] + ".v.weight", (c, cc))]
    return out


def silu(x):
    return x / (1.0 + np.exp(-x))


def conv3d(x, w, b):
    k = w.shape[2]
    p = k // 2
    xp = np.pad(x, ((0, 0), (p, p), (p, p), (p, p)))
    _, nx, ny, nz = x.shape
    out = np.zeros((w.shape[0], nx, ny, nz))
    for a in range(k):
        for e in range(k):
            for f in range(k):
                patch = xp[:, a:a + nx, e:e + ny, f:f + nz]
                out += np.einsum("oc,cxyz->oxyz", w[:, :, a, e, f], patch)
    return out + b[:, None, None, None]


def pool(x):
    c, nx, ny, nz = x.shape
    return x.reshape(c, nx // 2, 2, ny // 2, 2, nz).mean(axis=(2, 4))


def upsample(x):
    return x.repeat(2, axis=1).repeat(2, axis=2)


def embedding(t, dim):
    half = dim // 2
    f = np.exp(-np.log(10000.0) * np.arange(half) / half)
    return np.concatenate([np.sin(t * f), np.cos(t * f)])


def forward(header, layers, params, x_t, t, cond):
    it = iter(params)
    temb = None
    if header["time_embedding"]:
        w1, b1, w2, b2 = next(it), next(it), next(it), next(it)
        temb = silu(w2 @ silu(w1 @ embedding(t, header["time_embedding"]) + b1) + b2)
    x = np.concatenate([x_t, cond])
    level = 0
    slots = {}
    for tok in layers:
        op = tok[0]
        c_level = cond
        for _ in range(level):
            c_level = pool(c_level)
        if op == "conv3d":
            x = conv3d(x, next(it), next(it))
        elif op == "act":
            x = silu(x) if tok[1] == "silu" else np.maximum(x, 0.0)
        elif op == "resblock":
            h = conv3d(silu(x), next(it), next(it))
            if temb is not None:
                h = h + (next(it) @ temb + next(it))[:, None, None, None]
            h = conv3d(silu(h), next(it), next(it))
            skip = conv3d(x, next(it), next(it)) if tok[2] != tok[3] else x
            x = h + skip
        elif op == "film":
            c = int(tok[2])
            gb = conv3d(c_level, next(it), next(it))
            x = x * (1.0 + gb[:c]) + gb[c:]
        elif op == "xattn":
            wq, wk, wv = next(it), next(it), next(it)
            c = x.shape[0]
            xs = x.reshape(c, -1)
            cs = c_level.reshape(c_level.shape[0], -1)
            q = wq @ xs
            k = wk @ cs
            v = wv @ cs
            s = q.T @ k / np.sqrt(wq.shape[0])
            s = np.exp(s - s.max(axis=1, keepdims=True))
            s /= s.sum(axis=1, keepdims=True)
            x = x + (v @ s.T).reshape(x.shape)
        elif op == "down":
            x = pool(x)
            level += 1
        elif op == "up":
            x = upsample(x)
            level -= 1
        elif op == "save":
            slots[tok[1]] = x
        elif op == "concat":
            x = np.concatenate([x, slots[tok[1]]])
    return x


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else ".")
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20260101)
    header, layers = parse(DESCRIPTOR)
    params = []
    for _, shape in param_shapes(header, layers):
        fan_in = int(np.prod(shape[1:])) if len(shape) > 1 else 1
        scale = np.sqrt(2.0 / fan_in) if len(shape) > 1 else 0.1
        params.append((rng.standard_normal(shape) * scale).astype(np.float32))
    x_t = rng.standard_normal((header["latent_channels"],) + SHAPE)
    cond = rng.uniform(0.0, 1.0, (header["condition_channels"],) + SHAPE)
    eps = forward(header, layers, [p.astype(np.float64) for p in params], x_t, T_VALUE, cond)

    (out / "parity_denoiser.txt").write_text(LICENSE_HEADER + DESCRIPTOR)
    write_records(out / "parity_weights.rm3d", params)
    write_records(out / "parity.rm3d", [x_t, np.array([T_VALUE]), cond, eps])


if __name__ == "__main__":
    main()
