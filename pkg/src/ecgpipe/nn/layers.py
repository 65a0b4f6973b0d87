"""
Layers with handwritten forward and backward passes.

Every layer is stateless: parameters arrive as a dict of arrays (views into
the model's flat parameter vector) and ``forward`` returns whatever cache
``backward`` needs. ``backward`` returns the input gradient and a dict of
parameter gradients keyed like ``param_shapes``.

Shapes: 1D feature maps are (batch, channels, time); 2D maps are
(batch, channels, height, width); sequences are (batch, time, features).
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def glorot_uniform(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _same_pad(k):
    left = (k - 1) // 2
    return left, k - 1 - left


class Layer:
    name = "layer"

    def param_shapes(self):
        return {}

    def init_params(self, params, rng):
        for p in params.values():
            p[...] = 0.0

    def output_shape(self, shape):
        return shape

    def forward(self, params, x):
        raise NotImplementedError

    def backward(self, params, cache, dy):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}()"


class Conv1D(Layer):
    """Stride-1 convolution with zero 'same' padding (extra pad on the right)."""

    name = "conv1d"

    def __init__(self, in_channels, out_channels, kernel_size):
        self.cin, self.cout, self.k = in_channels, out_channels, kernel_size

    def __repr__(self):
        return f"Conv1D({self.cin}, {self.cout}, k={self.k})"

    def param_shapes(self):
        return {"W": (self.cout, self.cin, self.k), "b": (self.cout,)}

    def init_params(self, params, rng):
        params["W"][...] = glorot_uniform(rng, params["W"].shape,
                                          self.cin * self.k, self.cout * self.k)
        params["b"][...] = 0.0

    def output_shape(self, shape):
        c, t = shape
        return (self.cout, t)

    def forward(self, params, x):
        B, C, T = x.shape
        if C != self.cin:
            raise ValueError(f"Conv1D expects {self.cin} channels, got {C}")
        left, right = _same_pad(self.k)
        xp = np.pad(x, ((0, 0), (0, 0), (left, right)))
        # (B, C, T, k) -> rows of length C*k, one per output position
        cols = sliding_window_view(xp, self.k, axis=2).transpose(0, 2, 1, 3)
        cols = cols.reshape(B * T, C * self.k)
        y = cols @ params["W"].reshape(self.cout, -1).T + params["b"]
        return y.reshape(B, T, self.cout).transpose(0, 2, 1), (cols, x.shape)

    def backward(self, params, cache, dy):
        cols, (B, C, T) = cache
        dym = dy.transpose(0, 2, 1).reshape(B * T, self.cout)
        dW = (dym.T @ cols).reshape(params["W"].shape)
        dcols = (dym @ params["W"].reshape(self.cout, -1)).reshape(B, T, C, self.k)
        left, _ = _same_pad(self.k)
        dxp = np.zeros((B, C, T + self.k - 1))
        for j in range(self.k):
            dxp[:, :, j:j + T] += dcols[:, :, :, j].transpose(0, 2, 1)
        return dxp[:, :, left:left + T], {"W": dW, "b": dym.sum(axis=0)}


class Conv2D(Layer):
    """Stride-1 square-kernel convolution with zero 'same' padding."""

    name = "conv2d"

    def __init__(self, in_channels, out_channels, kernel_size):
        self.cin, self.cout, self.k = in_channels, out_channels, kernel_size

    def __repr__(self):
        return f"Conv2D({self.cin}, {self.cout}, k={self.k})"

    def param_shapes(self):
        return {"W": (self.cout, self.cin, self.k, self.k), "b": (self.cout,)}

    def init_params(self, params, rng):
        area = self.k * self.k
        params["W"][...] = glorot_uniform(rng, params["W"].shape,
                                          self.cin * area, self.cout * area)
        params["b"][...] = 0.0

    def output_shape(self, shape):
        c, h, w = shape
        return (self.cout, h, w)

    def forward(self, params, x):
        B, C, H, Wd = x.shape
        if C != self.cin:
            raise ValueError(f"Conv2D expects {self.cin} channels, got {C}")
        left, right = _same_pad(self.k)
        xp = np.pad(x, ((0, 0), (0, 0), (left, right), (left, right)))
        W = params["W"]
        y = np.zeros((B, H, Wd, self.cout))
        for i in range(self.k):
            for j in range(self.k):
                # (B, C, H, W) x (O, C) -> (B, H, W, O)
                y += np.tensordot(xp[:, :, i:i + H, j:j + Wd], W[:, :, i, j],
                                  axes=([1], [1]))
        y += params["b"]
        return y.transpose(0, 3, 1, 2).copy(), xp

    def backward(self, params, xp, dy):
        B, O, H, Wd = dy.shape
        W = params["W"]
        dW = np.empty_like(W)
        dxp = np.zeros_like(xp)
        for i in range(self.k):
            for j in range(self.k):
                xs = xp[:, :, i:i + H, j:j + Wd]
                dW[:, :, i, j] = np.tensordot(dy, xs, axes=([0, 2, 3], [0, 2, 3]))
                dxp[:, :, i:i + H, j:j + Wd] += np.tensordot(
                    dy, W[:, :, i, j], axes=([1], [0])).transpose(0, 3, 1, 2)
        left, _ = _same_pad(self.k)
        dx = dxp[:, :, left:left + H, left:left + Wd]
        return dx, {"W": dW, "b": dy.sum(axis=(0, 2, 3))}


class ReLU(Layer):
    name = "relu"

    def forward(self, params, x):
        mask = x > 0
        return x * mask, mask

    def backward(self, params, mask, dy):
        return dy * mask, {}


class MaxPool1D(Layer):
    """Window 2, stride 2; a trailing odd sample is dropped. Ties go to the first."""

    name = "maxpool1d"

    def output_shape(self, shape):
        c, t = shape
        return (c, t // 2)

    def forward(self, params, x):
        B, C, T = x.shape
        To = T // 2
        win = x[:, :, :2 * To].reshape(B, C, To, 2)
        arg = np.argmax(win, axis=-1)
        y = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
        return y, (x.shape, arg)

    def backward(self, params, cache, dy):
        shape, arg = cache
        B, C, T = shape
        To = T // 2
        dwin = np.zeros((B, C, To, 2))
        np.put_along_axis(dwin, arg[..., None], dy[..., None], axis=-1)
        dx = np.zeros(shape)
        dx[:, :, :2 * To] = dwin.reshape(B, C, 2 * To)
        return dx, {}


class MaxPool2D(Layer):
    """2x2 window, stride 2; trailing odd rows/columns dropped. Ties go to the first
    element in row-major window order."""

    name = "maxpool2d"

    def output_shape(self, shape):
        c, h, w = shape
        return (c, h // 2, w // 2)

    def forward(self, params, x):
        B, C, H, W = x.shape
        Ho, Wo = H // 2, W // 2
        win = (x[:, :, :2 * Ho, :2 * Wo].reshape(B, C, Ho, 2, Wo, 2)
               .transpose(0, 1, 2, 4, 3, 5).reshape(B, C, Ho, Wo, 4))
        arg = np.argmax(win, axis=-1)
        y = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
        return y, (x.shape, arg)

    def backward(self, params, cache, dy):
        shape, arg = cache
        B, C, H, W = shape
        Ho, Wo = H // 2, W // 2
        dwin = np.zeros((B, C, Ho, Wo, 4))
        np.put_along_axis(dwin, arg[..., None], dy[..., None], axis=-1)
        dx = np.zeros(shape)
        dx[:, :, :2 * Ho, :2 * Wo] = (dwin.reshape(B, C, Ho, Wo, 2, 2)
                                      .transpose(0, 1, 2, 4, 3, 5)
                                      .reshape(B, C, 2 * Ho, 2 * Wo))
        return dx, {}


class GlobalAvgPool(Layer):
    """Mean over every axis after the channel axis."""

    name = "gap"

    def output_shape(self, shape):
        return (shape[0],)

    def forward(self, params, x):
        axes = tuple(range(2, x.ndim))
        return x.mean(axis=axes), x.shape

    def backward(self, params, shape, dy):
        n = int(np.prod(shape[2:]))
        dx = np.broadcast_to(dy.reshape(dy.shape + (1,) * (len(shape) - 2)), shape) / n
        return dx.copy(), {}


class ToSequence(Layer):
    """(batch, channels, time) -> (batch, time, channels)."""

    name = "to_sequence"

    def output_shape(self, shape):
        c, t = shape
        return (t, c)

    def forward(self, params, x):
        return x.transpose(0, 2, 1), None

    def backward(self, params, cache, dy):
        return dy.transpose(0, 2, 1), {}


class Dense(Layer):
    name = "dense"

    def __init__(self, in_features, out_features):
        self.nin, self.nout = in_features, out_features

    def __repr__(self):
        return f"Dense({self.nin}, {self.nout})"

    def param_shapes(self):
        return {"W": (self.nin, self.nout), "b": (self.nout,)}

    def init_params(self, params, rng):
        params["W"][...] = glorot_uniform(rng, params["W"].shape, self.nin, self.nout)
        params["b"][...] = 0.0

    def output_shape(self, shape):
        return (self.nout,)

    def forward(self, params, x):
        return x @ params["W"] + params["b"], x

    def backward(self, params, x, dy):
        return dy @ params["W"].T, {"W": x.T @ dy, "b": dy.sum(axis=0)}


class GRU(Layer):
    """Gated recurrent unit, gate blocks ordered [update z, reset r, candidate n].

    z = sigmoid(x Wz + h Uz + bz)
    r = sigmoid(x Wr + h Ur + br)
    n = tanh(x Wn + (r * h) Un + bn)
    h' = z * h + (1 - z) * n

    Input (batch, time, features); returns the last hidden state, or the
    whole hidden sequence when ``return_sequences`` is set. h0 = 0.
    """

    name = "gru"

    def __init__(self, in_features, units, return_sequences=False):
        self.nin, self.units, self.return_sequences = in_features, units, return_sequences

    def __repr__(self):
        return f"GRU({self.nin}, {self.units}, seq={self.return_sequences})"

    def param_shapes(self):
        H = self.units
        return {"W": (self.nin, 3 * H), "U": (H, 3 * H), "b": (3 * H,)}

    def init_params(self, params, rng):
        H = self.units
        params["W"][...] = glorot_uniform(rng, params["W"].shape, self.nin, 3 * H)
        params["U"][...] = glorot_uniform(rng, params["U"].shape, H, 3 * H)
        params["b"][...] = 0.0

    def output_shape(self, shape):
        t, _ = shape
        return (t, self.units) if self.return_sequences else (self.units,)

    def forward(self, params, x):
        B, T, _ = x.shape
        H = self.units
        W, U, b = params["W"], params["U"], params["b"]
        xw = x @ W + b
        h = np.zeros((B, H))
        hs = np.empty((B, T + 1, H))
        hs[:, 0] = h
        zs, rs, ns = (np.empty((B, T, H)) for _ in range(3))
        for t in range(T):
            hu = h @ U[:, :2 * H]
            z = sigmoid(xw[:, t, :H] + hu[:, :H])
            r = sigmoid(xw[:, t, H:2 * H] + hu[:, H:])
            n = np.tanh(xw[:, t, 2 * H:] + (r * h) @ U[:, 2 * H:])
            h = z * h + (1.0 - z) * n
            zs[:, t], rs[:, t], ns[:, t], hs[:, t + 1] = z, r, n, h
        out = hs[:, 1:].copy() if self.return_sequences else h
        return out, (x, hs, zs, rs, ns)

    def backward(self, params, cache, dy):
        x, hs, zs, rs, ns = cache
        B, T, _ = x.shape
        H = self.units
        W, U = params["W"], params["U"]
        dW, dU, db = np.zeros_like(W), np.zeros_like(U), np.zeros(3 * H)
        dx = np.empty_like(x)
        dh = np.zeros((B, H))
        for t in reversed(range(T)):
            dh = dh + (dy[:, t] if self.return_sequences else (dy if t == T - 1 else 0.0))
            h_prev, z, r, n = hs[:, t], zs[:, t], rs[:, t], ns[:, t]
            dz = dh * (h_prev - n)
            dn = dh * (1.0 - z)
            dh_prev = dh * z
            dan = dn * (1.0 - n * n)
            rh = r * h_prev
            drh = dan @ U[:, 2 * H:].T
            dr = drh * h_prev
            dh_prev += drh * r
            daz = dz * z * (1.0 - z)
            dar = dr * r * (1.0 - r)
            da = np.concatenate([daz, dar, dan], axis=1)
            dW += x[:, t].T @ da
            dU[:, :2 * H] += h_prev.T @ da[:, :2 * H]
            dU[:, 2 * H:] += rh.T @ dan
            db += da.sum(axis=0)
            dx[:, t] = da @ W.T
            dh = dh_prev + da[:, :2 * H] @ U[:, :2 * H].T
        return dx, {"W": dW, "U": dU, "b": db}


class LSTM(Layer):
    """Long short-term memory, gate blocks ordered [input i, forget f, cell g, output o].

    i, f, o = sigmoid(x W + h U + b) blocks; g = tanh(...)
    c' = f * c + i * g
    h' = o * tanh(c')

    h0 = c0 = 0. Returns the last hidden state or the full sequence.
    """

    name = "lstm"

    def __init__(self, in_features, units, return_sequences=False):
        self.nin, self.units, self.return_sequences = in_features, units, return_sequences

    def __repr__(self):
        return f"LSTM({self.nin}, {self.units}, seq={self.return_sequences})"

    def param_shapes(self):
        H = self.units
        return {"W": (self.nin, 4 * H), "U": (H, 4 * H), "b": (4 * H,)}

    def init_params(self, params, rng):
        H = self.units
        params["W"][...] = glorot_uniform(rng, params["W"].shape, self.nin, 4 * H)
        params["U"][...] = glorot_uniform(rng, params["U"].shape, H, 4 * H)
        params["b"][...] = 0.0

    def output_shape(self, shape):
        t, _ = shape
        return (t, self.units) if self.return_sequences else (self.units,)

    def forward(self, params, x):
        B, T, _ = x.shape
        H = self.units
        W, U, b = params["W"], params["U"], params["b"]
        xw = x @ W + b
        hs = np.zeros((B, T + 1, H))
        cs = np.zeros((B, T + 1, H))
        gates = np.empty((B, T, 4 * H))
        for t in range(T):
            a = xw[:, t] + hs[:, t] @ U
            g = np.empty_like(a)
            g[:, :2 * H] = sigmoid(a[:, :2 * H])
            g[:, 2 * H:3 * H] = np.tanh(a[:, 2 * H:3 * H])
            g[:, 3 * H:] = sigmoid(a[:, 3 * H:])
            c = g[:, H:2 * H] * cs[:, t] + g[:, :H] * g[:, 2 * H:3 * H]
            cs[:, t + 1] = c
            hs[:, t + 1] = g[:, 3 * H:] * np.tanh(c)
            gates[:, t] = g
        out = hs[:, 1:].copy() if self.return_sequences else hs[:, T].copy()
        return out, (x, hs, cs, gates)

    def backward(self, params, cache, dy):
        x, hs, cs, gates = cache
        B, T, _ = x.shape
        H = self.units
        W, U = params["W"], params["U"]
        dW, dU, db = np.zeros_like(W), np.zeros_like(U), np.zeros(4 * H)
        dx = np.empty_like(x)
        dh = np.zeros((B, H))
        dc = np.zeros((B, H))
        for t in reversed(range(T)):
            dh = dh + (dy[:, t] if self.return_sequences else (dy if t == T - 1 else 0.0))
            g = gates[:, t]
            i, f, gg, o = g[:, :H], g[:, H:2 * H], g[:, 2 * H:3 * H], g[:, 3 * H:]
            tc = np.tanh(cs[:, t + 1])
            do = dh * tc
            dc = dc + dh * o * (1.0 - tc * tc)
            di = dc * gg
            df = dc * cs[:, t]
            dg = dc * i
            da = np.concatenate([
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * (1.0 - gg * gg),
                do * o * (1.0 - o),
            ], axis=1)
            dW += x[:, t].T @ da
            dU += hs[:, t].T @ da
            db += da.sum(axis=0)
            dx[:, t] = da @ W.T
            dh = da @ U.T
            dc = dc * f
        return dx, {"W": dW, "U": dU, "b": db}


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits, onehot):
    """Mean categorical cross-entropy over the batch and its gradient w.r.t. logits."""
    z = logits - logits.max(axis=1, keepdims=True)
    log_p = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    B = logits.shape[0]
    loss = -float((onehot * log_p).sum()) / B
    probs = np.exp(log_p)
    return loss, (probs - onehot) / B, probs
