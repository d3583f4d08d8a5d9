"""Reference implementations of the benchmark kernels, their dataset
generators, and the single-vs-double precision study.

Each kernel carries its C source plus in-process evaluators at 32- and
64-bit precision.  The 32-bit evaluators follow C's usual arithmetic
conversions step by step (float*float stays float; libm calls promote to
double; returns cast back to float), so they can be cross-checked against
the compiled source to 1 ulp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .imaging import synthetic_image, to_gray
from .rng import Rng
from .tasks import Task

F = np.float32

FFT0_SRC = """float fftSin_Output0(float x) {
    return sin(-2 * 3.1415 * x);
}"""

FFT1_SRC = """float fftSin_Output1(float x) {
    return cos(-2 * 3.1415 * x);
}"""

INVK2J0_SRC = """float inversek2j_Output0(float x, float y) {
  float l1 = 0.5 ;
  float l2 = 0.5 ;
  float theta2 = (float) acos(
    ((x * x) + (y * y) - (l1 * l1) - (l2 * l2)) /
    (2 * l1 * l2)
  );
  return (float) asin(
    (y * (l1 + l2 * cos(theta2)) - x * l2 * sin(theta2)) /
    (x * x + y * y)
  );
}"""

INVK2J1_SRC = """float inversek2j_Output1(float x, float y) {
  float l1 = 0.5 ;
  float l2 = 0.5 ;
  return (float) acos(
    ((x * x) + (y * y) - (l1 * l1) - (l2 * l2)) /
    (2 * l1 * l2)
  );
}"""

KMEANS_SRC = """float euclideanDistance(
    float p_0, float p_1, float p_2,
    float c1_0, float c1_1, float c1_2) {
  float r;

  r = 0;
  r += (p_0 - c1_0) * (p_0 - c1_0);
  r += (p_1 - c1_1) * (p_1 - c1_1);
  r += (p_2 - c1_2) * (p_2 - c1_2);

  return sqrt(r);
}"""

SOBEL_SRC = """float sobel(
    float w00, float w01, float w02,
    float w10, float w11, float w12,
    float w20, float w21, float w22) {
  float sx = 0.0;
  sx += w00 * -1;
  sx += w10 * 0;
  sx += w20 * 1;
  sx += w01 * -2;
  sx += w11 * 0;
  sx += w21 * 2;
  sx += w02 * -1;
  sx += w12 * 0;
  sx += w22 * 1;

  float sy = 0.0;
  sy += w00 * -1;
  sy += w10 * -2;
  sy += w20 * -1;
  sy += w01 * 0;
  sy += w11 * 0;
  sy += w21 * 0;
  sy += w02 * 1;
  sy += w12 * 2;
  sy += w22 * 1;

  float s = sqrt(
    sx * sx + sy * sy);
  if (s >= (256 / sqrt(
      256 * 256 + 256 * 256)))
    s = 255 / sqrt(
      256 * 256 + 256 * 256);
  return s;
}"""

# per-argument coefficients (argument order w00,w01,w02,w10,...,w22) and the
# accumulation order the source uses (w00, w10, w20, w01, ...)
_SOBEL_KX = (-1.0, -2.0, -1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 1.0)
_SOBEL_KY = (-1.0, 0.0, 1.0, -2.0, 0.0, 2.0, -1.0, 0.0, 1.0)
_SOBEL_ORDER = (0, 3, 6, 1, 4, 7, 2, 5, 8)
_SOBEL_THRESHOLD = 256.0 / math.sqrt(256.0 * 256.0 + 256.0 * 256.0)
_SOBEL_CLAMP = 255.0 / math.sqrt(256.0 * 256.0 + 256.0 * 256.0)


def _c_acos(v: float) -> float:
    """C acos: out-of-domain arguments yield NaN instead of raising."""
    try:
        return math.acos(v)
    except ValueError:
        return math.nan


def _c_asin(v: float) -> float:
    try:
        return math.asin(v)
    except ValueError:
        return math.nan


def _c_div(n: float, d: float) -> float:
    """IEEE division: 0/0 -> NaN, n/0 -> signed infinity."""
    if d == 0.0:
        if n == 0.0 or math.isnan(n):
            return math.nan
        return math.copysign(math.inf, n) * math.copysign(1.0, d)
    return n / d


def _fft0_64(x):
    return math.sin(-2.0 * 3.1415 * x)


def _fft0_32(x):
    return F(math.sin(-2.0 * 3.1415 * float(F(x))))


def _fft1_64(x):
    return math.cos(-2.0 * 3.1415 * x)


def _fft1_32(x):
    return F(math.cos(-2.0 * 3.1415 * float(F(x))))


def _acos_arg_64(x, y):
    return (x * x + y * y - 0.25 - 0.25) / 0.5


def _acos_arg_32(x, y):
    xf, yf = F(x), F(y)
    quarter = F(F(0.5) * F(0.5))
    num = F(F(F(F(xf * xf) + F(yf * yf)) - quarter) - quarter)
    den = F(F(F(2.0) * F(0.5)) * F(0.5))
    return F(num / den)


def _invk2j1_64(x, y):
    return _c_acos(_acos_arg_64(x, y))


def _invk2j1_32(x, y):
    return F(_c_acos(float(_acos_arg_32(x, y))))


def _invk2j0_64(x, y):
    t2 = _c_acos(_acos_arg_64(x, y))
    num = y * (0.5 + 0.5 * math.cos(t2)) - x * 0.5 * math.sin(t2)
    return _c_asin(_c_div(num, x * x + y * y))


def _invk2j0_32(x, y):
    xf, yf = F(x), F(y)
    t2 = _invk2j1_32(x, y)  # float theta2
    c, s = math.cos(float(t2)), math.sin(float(t2))
    num = float(yf) * (0.5 + 0.5 * c) - float(F(xf * F(0.5))) * s
    den = float(F(F(xf * xf) + F(yf * yf)))
    return F(_c_asin(_c_div(num, den)))


def _kmeans_64(*args):
    r = 0.0
    for a, b in zip(args[:3], args[3:]):
        r += (a - b) * (a - b)
    return math.sqrt(r)


def _kmeans_32(*args):
    r = F(0.0)
    for a, b in zip(args[:3], args[3:]):
        d = F(F(a) - F(b))
        r = F(r + F(d * d))
    return F(math.sqrt(float(r)))


def _sobel_64(*w):
    sx = 0.0
    for i in _SOBEL_ORDER:
        sx += w[i] * _SOBEL_KX[i]
    sy = 0.0
    for i in _SOBEL_ORDER:
        sy += w[i] * _SOBEL_KY[i]
    s = math.sqrt(sx * sx + sy * sy)
    if s >= _SOBEL_THRESHOLD:
        s = _SOBEL_CLAMP
    return s


def _sobel_32(*w):
    wf = [F(v) for v in w]
    sx = F(0.0)
    for i in _SOBEL_ORDER:
        sx = F(sx + F(wf[i] * F(_SOBEL_KX[i])))
    sy = F(0.0)
    for i in _SOBEL_ORDER:
        sy = F(sy + F(wf[i] * F(_SOBEL_KY[i])))
    s = F(math.sqrt(float(F(F(sx * sx) + F(sy * sy)))))
    if float(s) >= _SOBEL_THRESHOLD:
        s = F(_SOBEL_CLAMP)
    return s


@dataclass(frozen=True)
class Kernel:
    name: str
    arity: int
    source: str
    fn_name: str
    _eval32: object = field(repr=False)
    _eval64: object = field(repr=False)

    def evaluate(self, row, bits: int = 64) -> float:
        row = np.atleast_1d(np.asarray(row, dtype=np.float64))
        if row.shape != (self.arity,):
            raise ValueError(f"{self.name} takes {self.arity} inputs, got shape {row.shape}")
        fn = self._eval64 if bits == 64 else self._eval32
        with np.errstate(all="ignore"):
            return float(fn(*row))

    def evaluate_rows(self, rows: np.ndarray, bits: int = 64) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.float64)
        fn = self._eval64 if bits == 64 else self._eval32
        with np.errstate(all="ignore"):
            return np.array([float(fn(*row)) for row in rows])

    def double_source(self) -> str:
        """The all-double variant used by the precision study's compiled path."""
        import re
        return re.sub(r"\bfloat\b", "double", self.source)

    def param_types(self) -> list[str]:
        import re
        m = re.search(r"\(([^)]*)\)", self.source)
        return [p.strip() for p in m.group(1).split(",")]


KERNELS = {
    "fft0": Kernel("fft0", 1, FFT0_SRC, "fftSin_Output0", _fft0_32, _fft0_64),
    "fft1": Kernel("fft1", 1, FFT1_SRC, "fftSin_Output1", _fft1_32, _fft1_64),
    "invk2j0": Kernel("invk2j0", 2, INVK2J0_SRC, "inversek2j_Output0", _invk2j0_32, _invk2j0_64),
    "invk2j1": Kernel("invk2j1", 2, INVK2J1_SRC, "inversek2j_Output1", _invk2j1_32, _invk2j1_64),
    "kmeans": Kernel("kmeans", 6, KMEANS_SRC, "euclideanDistance", _kmeans_32, _kmeans_64),
    "sobel": Kernel("sobel", 9, SOBEL_SRC, "sobel", _sobel_32, _sobel_64),
}


def eval_kernel(kernel: Kernel | str, row, bits: int = 64) -> float:
    if isinstance(kernel, str):
        kernel = KERNELS[kernel]
    return kernel.evaluate(row, bits)


# ---------------------------------------------------------------------------
# dataset generation


@dataclass
class BenchDataset:
    kernel: str
    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    seed: int
    dropped_rows: int = 0  # rows whose reference output was NaN

    def to_task(self) -> Task:
        return Task(name=self.kernel, source=KERNELS[self.kernel].source,
                    arity=KERNELS[self.kernel].arity,
                    train_x=self.train_x, train_y=self.train_y,
                    test_x=self.test_x, test_y=self.test_y)

    def to_record(self):
        """The shared dataset-record form, so the experiment drivers treat
        benchmarks and mined programs uniformly."""
        from .corpus.pipeline import ProgramRecord
        from .tokenizer import lex

        kernel = KERNELS[self.kernel]
        inputs = np.concatenate([self.train_x, self.test_x])
        outputs = np.concatenate([self.train_y[:, 0], self.test_y[:, 0]])
        return ProgramRecord(
            id=f"benchmark::{self.kernel}",
            source=kernel.source,
            tokens=lex(kernel.source),
            arity=kernel.arity,
            inputs=inputs,
            outputs=outputs,
            split_seed=self.seed,
            audit=["benchmark"],
            train_prefix=self.train_x.shape[0],
        )


def _disjoint_test(rng: Rng, train: np.ndarray, count: int, low, high) -> np.ndarray:
    """Uniform draws resampled until disjoint from the training rows."""
    seen = {row.tobytes() for row in train}
    dims = train.shape[1]
    out = []
    draw = rng.uniform(np.asarray(low), np.asarray(high), size=(count, dims))
    queue = list(draw)
    while len(out) < count:
        if not queue:
            queue = list(rng.uniform(np.asarray(low), np.asarray(high),
                                     size=(count, dims)))
        row = queue.pop()
        key = row.tobytes()
        if key in seen:
            continue
        seen.add(key)
        out.append(row)
    return np.array(out)


def _finish(kernel: Kernel, train_x, test_x, seed, counted_drop=True) -> BenchDataset:
    train_y = kernel.evaluate_rows(train_x)[:, None]
    test_y = kernel.evaluate_rows(test_x)[:, None]
    dropped = 0
    keep_tr = np.isfinite(train_y[:, 0])
    keep_te = np.isfinite(test_y[:, 0])
    if counted_drop:
        dropped = int((~keep_tr).sum() + (~keep_te).sum())
    return BenchDataset(kernel.name, train_x[keep_tr], train_y[keep_tr],
                        test_x[keep_te], test_y[keep_te], seed, dropped)


def gen_inputs(kernel: Kernel | str, seed: int, train_rows: int | None = None,
               test_rows: int | None = None, image_size: int = 64) -> BenchDataset:
    """Per-kernel train/test input generation.

    fft draws from U[0, 1/2] with an exact-value-disjoint test set; invk2j
    draws from U([-1/2, 1] x [0, 1]) likewise (rows outside the reachable
    workspace produce NaN and are dropped with a count); kmeans trains on
    U[0, 1]^6 and tests on bundled-image pixels paired with random
    centroids; sobel windows a bundled grayscale image.
    """
    if isinstance(kernel, str):
        kernel = KERNELS[kernel]
    rng = Rng(seed).child("bench", kernel.name)
    if kernel.name in ("fft0", "fft1"):
        n_train = train_rows or 32_768
        n_test = test_rows or 2_048
        train = rng.child("train").uniform(0.0, 0.5, size=(n_train, 1))
        test = _disjoint_test(rng.child("test"), train, n_test, [0.0], [0.5])
        return _finish(kernel, train, test, seed)
    if kernel.name in ("invk2j0", "invk2j1"):
        n_train = train_rows or 10_000
        n_test = test_rows or 10_000
        low, high = [-0.5, 0.0], [1.0, 1.0]
        train = rng.child("train").uniform(np.array(low), np.array(high),
                                           size=(n_train, 2))
        test = _disjoint_test(rng.child("test"), train, n_test, low, high)
        return _finish(kernel, train, test, seed)
    if kernel.name == "kmeans":
        n_train = train_rows or 50_000
        train = rng.child("train").uniform(0.0, 1.0, size=(n_train, 6))
        img = synthetic_image(image_size, image_size, variant=1)
        pixels = img.reshape(-1, 3).astype(np.float64) / 255.0
        if test_rows:
            pixels = pixels[:test_rows]
        centroids = rng.child("centroids").uniform(0.0, 1.0, size=(6, 3))
        pick = rng.child("assign").integers(0, 6, size=pixels.shape[0])
        test = np.concatenate([pixels, centroids[pick]], axis=1)
        return _finish(kernel, train, test, seed)
    if kernel.name == "sobel":
        train_img = to_gray(synthetic_image(image_size, image_size, variant=2)) / 255.0
        test_img = to_gray(synthetic_image(image_size, image_size, variant=3)) / 255.0
        train = _windows(train_img)
        test = _windows(test_img)
        if train_rows:
            train = train[:train_rows]
        if test_rows:
            test = test[:test_rows]
        return _finish(kernel, train, test, seed)
    raise ValueError(f"unknown kernel {kernel.name}")


def _windows(gray: np.ndarray) -> np.ndarray:
    """All 3x3 sliding windows, flattened to the kernel's argument order."""
    w = np.lib.stride_tricks.sliding_window_view(gray, (3, 3))
    return w.reshape(-1, 9)


def downcast_study(kernel: Kernel | str, dataset: BenchDataset) -> float:
    """Mean squared difference between 32- and 64-bit kernel evaluations."""
    if isinstance(kernel, str):
        kernel = KERNELS[kernel]
    rows = np.concatenate([dataset.train_x, dataset.test_x])
    lo = kernel.evaluate_rows(rows, bits=32)
    hi = kernel.evaluate_rows(rows, bits=64)
    return float(np.mean((lo - hi) ** 2))
