#pragma once

// Fixed-function forward/backward kernels for the small architecture
// family used here: 3x3 same-padding convolutions, leaky-rectifier and
// tanh pointwise maps, 2x2 average pooling and nearest upsampling, and
// channel concatenation. Buffers are dense row-major (i * w + j) * c + ch.
// These are internal to the library; the public modules wrap them.

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace cimle::nn {

// weights layout: ((co * 3 + di) * 3 + dj) * cin + ci, taps di,dj over the
// 3x3 window centred on the output pixel, zero padding at the border.
inline void conv3x3(const double* in, int h, int w, int cin, const double* wgt,
                    const double* bias, int cout, double* out) {
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            double* o = out + (static_cast<std::size_t>(i) * w + j) * cout;
            for (int co = 0; co < cout; ++co) o[co] = bias[co];
            for (int di = 0; di < 3; ++di) {
                const int ii = i + di - 1;
                if (ii < 0 || ii >= h) continue;
                for (int dj = 0; dj < 3; ++dj) {
                    const int jj = j + dj - 1;
                    if (jj < 0 || jj >= w) continue;
                    const double* px =
                        in + (static_cast<std::size_t>(ii) * w + jj) * cin;
                    for (int co = 0; co < cout; ++co) {
                        const double* wk =
                            wgt + ((static_cast<std::size_t>(co) * 3 + di) * 3 + dj) * cin;
                        double acc = 0.0;
                        for (int ci = 0; ci < cin; ++ci) acc += wk[ci] * px[ci];
                        o[co] += acc;
                    }
                }
            }
        }
    }
}

// d<loss>/d<in> given d<loss>/d<out>; accumulates into gin (caller zeroes).
inline void conv3x3_grad_input(const double* gout, int h, int w, int cout,
                               const double* wgt, int cin, double* gin) {
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            const double* go = gout + (static_cast<std::size_t>(i) * w + j) * cout;
            for (int di = 0; di < 3; ++di) {
                const int ii = i + di - 1;
                if (ii < 0 || ii >= h) continue;
                for (int dj = 0; dj < 3; ++dj) {
                    const int jj = j + dj - 1;
                    if (jj < 0 || jj >= w) continue;
                    double* gi = gin + (static_cast<std::size_t>(ii) * w + jj) * cin;
                    for (int co = 0; co < cout; ++co) {
                        const double g = go[co];
                        if (g == 0.0) continue;
                        const double* wk =
                            wgt + ((static_cast<std::size_t>(co) * 3 + di) * 3 + dj) * cin;
                        for (int ci = 0; ci < cin; ++ci) gi[ci] += g * wk[ci];
                    }
                }
            }
        }
    }
}

// Accumulates parameter gradients into gwgt/gbias (caller zeroes).
inline void conv3x3_grad_params(const double* in, const double* gout, int h,
                                int w, int cin, int cout, double* gwgt,
                                double* gbias) {
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            const double* go = gout + (static_cast<std::size_t>(i) * w + j) * cout;
            for (int co = 0; co < cout; ++co) gbias[co] += go[co];
            for (int di = 0; di < 3; ++di) {
                const int ii = i + di - 1;
                if (ii < 0 || ii >= h) continue;
                for (int dj = 0; dj < 3; ++dj) {
                    const int jj = j + dj - 1;
                    if (jj < 0 || jj >= w) continue;
                    const double* px =
                        in + (static_cast<std::size_t>(ii) * w + jj) * cin;
                    for (int co = 0; co < cout; ++co) {
                        const double g = go[co];
                        if (g == 0.0) continue;
                        double* gw =
                            gwgt + ((static_cast<std::size_t>(co) * 3 + di) * 3 + dj) * cin;
                        for (int ci = 0; ci < cin; ++ci) gw[ci] += g * px[ci];
                    }
                }
            }
        }
    }
}

inline void leaky_relu(const double* in, std::size_t n, double slope, double* out) {
    for (std::size_t k = 0; k < n; ++k) {
        out[k] = in[k] > 0.0 ? in[k] : slope * in[k];
    }
}

inline void leaky_relu_grad(const double* in, const double* gout, std::size_t n,
                            double slope, double* gin) {
    for (std::size_t k = 0; k < n; ++k) {
        gin[k] = gout[k] * (in[k] > 0.0 ? 1.0 : slope);
    }
}

inline void tanh_map(const double* in, std::size_t n, double* out) {
    for (std::size_t k = 0; k < n; ++k) out[k] = std::tanh(in[k]);
}

// Takes the activation values (not preactivations): tanh' = 1 - tanh^2.
inline void tanh_grad_from_output(const double* out, const double* gout,
                                  std::size_t n, double* gin) {
    for (std::size_t k = 0; k < n; ++k) gin[k] = gout[k] * (1.0 - out[k] * out[k]);
}

// 2x2 average pooling, stride 2. h and w must be even.
inline void avgpool2(const double* in, int h, int w, int c, double* out) {
    assert(h % 2 == 0 && w % 2 == 0);
    const int oh = h / 2, ow = w / 2;
    for (int i = 0; i < oh; ++i) {
        for (int j = 0; j < ow; ++j) {
            for (int ch = 0; ch < c; ++ch) {
                const double s =
                    in[(static_cast<std::size_t>(2 * i) * w + 2 * j) * c + ch] +
                    in[(static_cast<std::size_t>(2 * i) * w + 2 * j + 1) * c + ch] +
                    in[(static_cast<std::size_t>(2 * i + 1) * w + 2 * j) * c + ch] +
                    in[(static_cast<std::size_t>(2 * i + 1) * w + 2 * j + 1) * c + ch];
                out[(static_cast<std::size_t>(i) * ow + j) * c + ch] = 0.25 * s;
            }
        }
    }
}

inline void avgpool2_grad(const double* gout, int oh, int ow, int c, double* gin) {
    const int w = 2 * ow;
    for (int i = 0; i < oh; ++i) {
        for (int j = 0; j < ow; ++j) {
            for (int ch = 0; ch < c; ++ch) {
                const double g =
                    0.25 * gout[(static_cast<std::size_t>(i) * ow + j) * c + ch];
                gin[(static_cast<std::size_t>(2 * i) * w + 2 * j) * c + ch] += g;
                gin[(static_cast<std::size_t>(2 * i) * w + 2 * j + 1) * c + ch] += g;
                gin[(static_cast<std::size_t>(2 * i + 1) * w + 2 * j) * c + ch] += g;
                gin[(static_cast<std::size_t>(2 * i + 1) * w + 2 * j + 1) * c + ch] += g;
            }
        }
    }
}

// Nearest-neighbour 2x upsampling.
inline void upsample2(const double* in, int ih, int iw, int c, double* out) {
    const int w = 2 * iw;
    for (int i = 0; i < 2 * ih; ++i) {
        for (int j = 0; j < w; ++j) {
            const double* src =
                in + (static_cast<std::size_t>(i / 2) * iw + j / 2) * c;
            double* dst = out + (static_cast<std::size_t>(i) * w + j) * c;
            for (int ch = 0; ch < c; ++ch) dst[ch] = src[ch];
        }
    }
}

inline void upsample2_grad(const double* gout, int ih, int iw, int c, double* gin) {
    const int w = 2 * iw;
    for (int i = 0; i < 2 * ih; ++i) {
        for (int j = 0; j < w; ++j) {
            const double* g = gout + (static_cast<std::size_t>(i) * w + j) * c;
            double* dst = gin + (static_cast<std::size_t>(i / 2) * iw + j / 2) * c;
            for (int ch = 0; ch < c; ++ch) dst[ch] += g[ch];
        }
    }
}

// Channel-wise concatenation of two buffers with the same spatial grid.
inline void concat_channels(const double* a, int ca, const double* b, int cb,
                            int hw, double* out) {
    for (int k = 0; k < hw; ++k) {
        const double* pa = a + static_cast<std::size_t>(k) * ca;
        const double* pb = b + static_cast<std::size_t>(k) * cb;
        double* po = out + static_cast<std::size_t>(k) * (ca + cb);
        for (int c = 0; c < ca; ++c) po[c] = pa[c];
        for (int c = 0; c < cb; ++c) po[ca + c] = pb[c];
    }
}

inline void split_channels_grad(const double* gout, int ca, int cb, int hw,
                                double* ga, double* gb) {
    for (int k = 0; k < hw; ++k) {
        const double* po = gout + static_cast<std::size_t>(k) * (ca + cb);
        double* pa = ga + static_cast<std::size_t>(k) * ca;
        double* pb = gb + static_cast<std::size_t>(k) * cb;
        for (int c = 0; c < ca; ++c) pa[c] += po[c];
        for (int c = 0; c < cb; ++c) pb[c] += po[ca + c];
    }
}

} // namespace cimle::nn
