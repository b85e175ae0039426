#include "cimle/generator.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "cimle/serialize.hpp"
#include "nn_kernels.hpp"

namespace cimle {

namespace {

constexpr double kLeakySlope = 0.2;

struct LayerDef {
    int cin;
    int cout;
    std::size_t w_off;
    std::size_t b_off;
};

std::size_t append_layer(std::vector<LayerDef>& defs, std::size_t off, int cin,
                         int cout) {
    const std::size_t nw = 9ull * cin * cout;
    defs.push_back({cin, cout, off, off + nw});
    return off + nw + static_cast<std::size_t>(cout);
}

// Main-net layers in processing order: coarsest scale first, each scale
// running the full `hidden` stack, then the affine output convolution.
std::vector<LayerDef> main_layer_defs(const GeneratorSpec& s, std::size_t* total) {
    std::vector<LayerDef> defs;
    const int c0 = s.input_classes + s.noise_channels;
    std::size_t off = 0;
    for (int sc = s.refine_scales - 1; sc >= 0; --sc) {
        const bool coarsest = (sc == s.refine_scales - 1);
        const int cin0 = coarsest ? c0 : s.hidden.back() + c0;
        off = append_layer(defs, off, cin0, s.hidden[0]);
        for (std::size_t k = 1; k < s.hidden.size(); ++k) {
            off = append_layer(defs, off, s.hidden[k - 1], s.hidden[k]);
        }
    }
    off = append_layer(defs, off, s.hidden.back(), 3);
    if (total != nullptr) *total = off;
    return defs;
}

std::vector<LayerDef> encoder_layer_defs(const GeneratorSpec& s, std::size_t* total) {
    std::vector<LayerDef> defs;
    std::size_t off = 0;
    off = append_layer(defs, off, s.input_classes + s.seed_dim, s.encoder_hidden[0]);
    off = append_layer(defs, off, s.encoder_hidden[0], s.encoder_hidden[1]);
    off = append_layer(defs, off, s.encoder_hidden[1], s.noise_channels);
    if (total != nullptr) *total = off;
    return defs;
}

void check_main_shapes(const GeneratorState& state, const SemanticLayout& x,
                       const NoiseField& z) {
    const GeneratorSpec& s = state.spec;
    if (x.height() != s.height || x.width() != s.width ||
        x.num_classes() != s.input_classes) {
        throw std::invalid_argument("generator: layout shape does not match spec");
    }
    if (z.height() != s.height || z.width() != s.width ||
        z.channels() != s.noise_channels) {
        throw std::invalid_argument("generator: noise field shape does not match spec");
    }
    if (state.theta.size() != s.main_param_count() ||
        state.theta_e.size() != s.encoder_param_count()) {
        throw std::invalid_argument("generator: parameter vector length mismatch");
    }
}

std::vector<double> build_main_input(const GeneratorSpec& s,
                                     const SemanticLayout& x, const NoiseField& z) {
    const int c0 = s.input_classes + s.noise_channels;
    std::vector<double> in(static_cast<std::size_t>(s.height) * s.width * c0);
    for (int i = 0; i < s.height; ++i) {
        for (int j = 0; j < s.width; ++j) {
            double* px = in.data() + (static_cast<std::size_t>(i) * s.width + j) * c0;
            const int cls = x.class_at(i, j);
            for (int p = 0; p < s.input_classes; ++p) px[p] = (p == cls) ? 1.0 : 0.0;
            for (int c = 0; c < s.noise_channels; ++c) {
                px[s.input_classes + c] = z.at(i, j, c);
            }
        }
    }
    return in;
}

// Everything forward() computed, kept for the reverse pass.
struct MainTrace {
    std::vector<std::vector<double>> scale_input; // [sc]: avgpool^sc of input
    struct Scale {
        std::vector<double> concat_in; // non-coarsest scales only
        std::vector<std::vector<double>> pre;
        std::vector<std::vector<double>> act;
    };
    std::vector<Scale> scales;  // processing order (coarsest first)
    std::vector<double> out;    // H*W*3
};

void main_forward(const GeneratorState& state, const SemanticLayout& x,
                  const NoiseField& z, MainTrace& tr) {
    const GeneratorSpec& s = state.spec;
    check_main_shapes(state, x, z);
    const int S = s.refine_scales;
    const int c0 = s.input_classes + s.noise_channels;
    const int L = static_cast<int>(s.hidden.size());
    const auto defs = main_layer_defs(s, nullptr);
    const double* th = state.theta.data();

    tr.scale_input.assign(S, {});
    tr.scale_input[0] = build_main_input(s, x, z);
    for (int sc = 1; sc < S; ++sc) {
        const int ph = s.height >> (sc - 1), pw = s.width >> (sc - 1);
        tr.scale_input[sc].assign(
            static_cast<std::size_t>(ph / 2) * (pw / 2) * c0, 0.0);
        nn::avgpool2(tr.scale_input[sc - 1].data(), ph, pw, c0,
                     tr.scale_input[sc].data());
    }

    tr.scales.assign(S, {});
    int def_idx = 0;
    const std::vector<double>* prev_act = nullptr;
    for (int p = 0; p < S; ++p) {
        const int sc = S - 1 - p;
        const int h = s.height >> sc, w = s.width >> sc;
        const std::size_t hw = static_cast<std::size_t>(h) * w;
        auto& st = tr.scales[p];
        const double* layer_in = nullptr;
        if (p == 0) {
            layer_in = tr.scale_input[sc].data();
        } else {
            std::vector<double> up(hw * s.hidden.back());
            nn::upsample2(prev_act->data(), h / 2, w / 2, s.hidden.back(), up.data());
            st.concat_in.resize(hw * (s.hidden.back() + c0));
            nn::concat_channels(up.data(), s.hidden.back(),
                                tr.scale_input[sc].data(), c0, static_cast<int>(hw),
                                st.concat_in.data());
            layer_in = st.concat_in.data();
        }
        st.pre.resize(L);
        st.act.resize(L);
        for (int k = 0; k < L; ++k) {
            const LayerDef& d = defs[def_idx++];
            st.pre[k].assign(hw * d.cout, 0.0);
            nn::conv3x3(k == 0 ? layer_in : st.act[k - 1].data(), h, w, d.cin,
                        th + d.w_off, th + d.b_off, d.cout, st.pre[k].data());
            st.act[k].resize(hw * d.cout);
            nn::leaky_relu(st.pre[k].data(), st.pre[k].size(), kLeakySlope,
                           st.act[k].data());
        }
        prev_act = &st.act[L - 1];
    }

    const LayerDef& od = defs[def_idx];
    tr.out.assign(static_cast<std::size_t>(s.height) * s.width * 3, 0.0);
    nn::conv3x3(prev_act->data(), s.height, s.width, od.cin, th + od.w_off,
                th + od.b_off, od.cout, tr.out.data());
    for (double v : tr.out) {
        if (!std::isfinite(v)) {
            throw NumericError("generator forward produced a non-finite value");
        }
    }
}

MainBackward main_backward(const GeneratorState& state, const ImageTensor& upstream,
                           const MainTrace& tr) {
    const GeneratorSpec& s = state.spec;
    if (upstream.height() != s.height || upstream.width() != s.width ||
        upstream.channels() != 3) {
        throw std::invalid_argument("backward: upstream gradient shape mismatch");
    }
    const int S = s.refine_scales;
    const int c0 = s.input_classes + s.noise_channels;
    const int L = static_cast<int>(s.hidden.size());
    std::size_t total = 0;
    const auto defs = main_layer_defs(s, &total);
    const double* th = state.theta.data();

    MainBackward result{std::vector<double>(total, 0.0),
                        NoiseField(s.height, s.width, s.noise_channels)};
    double* gth = result.grad_theta.data();

    // Output convolution.
    const LayerDef& od = defs.back();
    const auto& last_act = tr.scales[S - 1].act[L - 1];
    std::vector<double> g_act(last_act.size(), 0.0);
    nn::conv3x3_grad_params(last_act.data(), upstream.data().data(), s.height,
                            s.width, od.cin, od.cout, gth + od.w_off,
                            gth + od.b_off);
    nn::conv3x3_grad_input(upstream.data().data(), s.height, s.width, od.cout,
                           th + od.w_off, od.cin, g_act.data());

    // Scale stacks, finest processing position first.
    std::vector<std::vector<double>> g_scale_input(S);
    for (int sc = 0; sc < S; ++sc) {
        g_scale_input[sc].assign(tr.scale_input[sc].size(), 0.0);
    }
    for (int p = S - 1; p >= 0; --p) {
        const int sc = S - 1 - p;
        const int h = s.height >> sc, w = s.width >> sc;
        const std::size_t hw = static_cast<std::size_t>(h) * w;
        const auto& st = tr.scales[p];
        for (int k = L - 1; k >= 0; --k) {
            const LayerDef& d = defs[static_cast<std::size_t>(p) * L + k];
            std::vector<double> g_pre(st.pre[k].size());
            nn::leaky_relu_grad(st.pre[k].data(), g_act.data(), g_pre.size(),
                                kLeakySlope, g_pre.data());
            const double* layer_in =
                k > 0 ? st.act[k - 1].data()
                      : (p == 0 ? tr.scale_input[sc].data() : st.concat_in.data());
            nn::conv3x3_grad_params(layer_in, g_pre.data(), h, w, d.cin, d.cout,
                                    gth + d.w_off, gth + d.b_off);
            const std::size_t gin_size =
                k > 0 ? st.act[k - 1].size()
                      : (p == 0 ? tr.scale_input[sc].size() : st.concat_in.size());
            std::vector<double> g_in(gin_size, 0.0);
            nn::conv3x3_grad_input(g_pre.data(), h, w, d.cout, th + d.w_off, d.cin,
                                   g_in.data());
            if (k > 0) {
                g_act = std::move(g_in);
            } else if (p == 0) {
                for (std::size_t t = 0; t < g_in.size(); ++t) {
                    g_scale_input[sc][t] += g_in[t];
                }
            } else {
                // Split concat(upsampled coarse features, scale input).
                std::vector<double> g_up(hw * s.hidden.back(), 0.0);
                nn::split_channels_grad(g_in.data(), s.hidden.back(), c0,
                                        static_cast<int>(hw), g_up.data(),
                                        g_scale_input[sc].data());
                std::vector<double> g_prev(
                    static_cast<std::size_t>(h / 2) * (w / 2) * s.hidden.back(), 0.0);
                nn::upsample2_grad(g_up.data(), h / 2, w / 2, s.hidden.back(),
                                   g_prev.data());
                g_act = std::move(g_prev);
            }
        }
    }

    // Collapse the avgpool chain back to full resolution.
    for (int sc = S - 1; sc >= 1; --sc) {
        const int oh = s.height >> sc, ow = s.width >> sc;
        nn::avgpool2_grad(g_scale_input[sc].data(), oh, ow, c0,
                          g_scale_input[sc - 1].data());
    }

    // Noise gradient: the trailing noise_channels slots of the input.
    for (int i = 0; i < s.height; ++i) {
        for (int j = 0; j < s.width; ++j) {
            const double* g =
                g_scale_input[0].data() +
                (static_cast<std::size_t>(i) * s.width + j) * c0;
            for (int c = 0; c < s.noise_channels; ++c) {
                result.grad_noise.at(i, j, c) = g[s.input_classes + c];
            }
        }
    }
    return result;
}

struct EncoderTrace {
    std::vector<double> input;
    std::vector<double> pre1, act1, pre2, act2, out;
};

void encoder_forward(const GeneratorState& state, const SemanticLayout& x,
                     const NoiseSeed& seed, EncoderTrace& tr) {
    const GeneratorSpec& s = state.spec;
    if (seed.dim() != s.seed_dim) {
        throw std::invalid_argument("noise_encode: seed dimension mismatch");
    }
    if (x.height() != s.height || x.width() != s.width ||
        x.num_classes() != s.input_classes) {
        throw std::invalid_argument("noise_encode: layout shape does not match spec");
    }
    if (state.theta_e.size() != s.encoder_param_count()) {
        throw std::invalid_argument("noise_encode: parameter vector length mismatch");
    }
    const auto defs = encoder_layer_defs(s, nullptr);
    const double* th = state.theta_e.data();
    const int cin = s.input_classes + s.seed_dim;
    const std::size_t hw = static_cast<std::size_t>(s.height) * s.width;

    tr.input.resize(hw * cin);
    for (int i = 0; i < s.height; ++i) {
        for (int j = 0; j < s.width; ++j) {
            double* px = tr.input.data() +
                         (static_cast<std::size_t>(i) * s.width + j) * cin;
            const int cls = x.class_at(i, j);
            for (int p = 0; p < s.input_classes; ++p) px[p] = (p == cls) ? 1.0 : 0.0;
            for (int d = 0; d < s.seed_dim; ++d) {
                px[s.input_classes + d] = seed.values[d];
            }
        }
    }

    tr.pre1.assign(hw * defs[0].cout, 0.0);
    nn::conv3x3(tr.input.data(), s.height, s.width, defs[0].cin, th + defs[0].w_off,
                th + defs[0].b_off, defs[0].cout, tr.pre1.data());
    tr.act1.resize(tr.pre1.size());
    nn::leaky_relu(tr.pre1.data(), tr.pre1.size(), kLeakySlope, tr.act1.data());

    tr.pre2.assign(hw * defs[1].cout, 0.0);
    nn::conv3x3(tr.act1.data(), s.height, s.width, defs[1].cin, th + defs[1].w_off,
                th + defs[1].b_off, defs[1].cout, tr.pre2.data());
    tr.act2.resize(tr.pre2.size());
    nn::leaky_relu(tr.pre2.data(), tr.pre2.size(), kLeakySlope, tr.act2.data());

    tr.out.assign(hw * defs[2].cout, 0.0);
    nn::conv3x3(tr.act2.data(), s.height, s.width, defs[2].cin, th + defs[2].w_off,
                th + defs[2].b_off, defs[2].cout, tr.out.data());
    for (double v : tr.out) {
        if (!std::isfinite(v)) {
            throw NumericError("noise encoder produced a non-finite value");
        }
    }
}

EncoderBackward encoder_backward_traced(const GeneratorState& state,
                                        const NoiseField& upstream,
                                        const EncoderTrace& tr) {
    const GeneratorSpec& s = state.spec;
    if (upstream.height() != s.height || upstream.width() != s.width ||
        upstream.channels() != s.noise_channels) {
        throw std::invalid_argument("encoder_backward: upstream shape mismatch");
    }
    std::size_t total = 0;
    const auto defs = encoder_layer_defs(s, &total);
    const double* th = state.theta_e.data();
    EncoderBackward result{std::vector<double>(total, 0.0), NoiseSeed{}};
    result.grad_seed.values.assign(s.seed_dim, 0.0);
    double* gth = result.grad_theta_e.data();

    std::vector<double> g_act2(tr.act2.size(), 0.0);
    nn::conv3x3_grad_params(tr.act2.data(), upstream.values().data(), s.height,
                            s.width, defs[2].cin, defs[2].cout, gth + defs[2].w_off,
                            gth + defs[2].b_off);
    nn::conv3x3_grad_input(upstream.values().data(), s.height, s.width,
                           defs[2].cout, th + defs[2].w_off, defs[2].cin,
                           g_act2.data());

    std::vector<double> g_pre2(tr.pre2.size());
    nn::leaky_relu_grad(tr.pre2.data(), g_act2.data(), g_pre2.size(), kLeakySlope,
                        g_pre2.data());
    std::vector<double> g_act1(tr.act1.size(), 0.0);
    nn::conv3x3_grad_params(tr.act1.data(), g_pre2.data(), s.height, s.width,
                            defs[1].cin, defs[1].cout, gth + defs[1].w_off,
                            gth + defs[1].b_off);
    nn::conv3x3_grad_input(g_pre2.data(), s.height, s.width, defs[1].cout,
                           th + defs[1].w_off, defs[1].cin, g_act1.data());

    std::vector<double> g_pre1(tr.pre1.size());
    nn::leaky_relu_grad(tr.pre1.data(), g_act1.data(), g_pre1.size(), kLeakySlope,
                        g_pre1.data());
    std::vector<double> g_input(tr.input.size(), 0.0);
    nn::conv3x3_grad_params(tr.input.data(), g_pre1.data(), s.height, s.width,
                            defs[0].cin, defs[0].cout, gth + defs[0].w_off,
                            gth + defs[0].b_off);
    nn::conv3x3_grad_input(g_pre1.data(), s.height, s.width, defs[0].cout,
                           th + defs[0].w_off, defs[0].cin, g_input.data());

    // Broadcast seed channels: sum spatial contributions.
    const int cin = s.input_classes + s.seed_dim;
    for (std::size_t k = 0; k < static_cast<std::size_t>(s.height) * s.width; ++k) {
        const double* g = g_input.data() + k * cin;
        for (int d = 0; d < s.seed_dim; ++d) {
            result.grad_seed.values[d] += g[s.input_classes + d];
        }
    }
    return result;
}

} // namespace

void GeneratorSpec::validate() const {
    if (input_classes < 1 || noise_channels < 1 || seed_dim < 1 || height < 1 ||
        width < 1) {
        throw std::invalid_argument("GeneratorSpec: all counts must be >= 1");
    }
    if (hidden.empty()) {
        throw std::invalid_argument("GeneratorSpec: hidden widths must be non-empty");
    }
    for (int w : hidden) {
        if (w < 1) throw std::invalid_argument("GeneratorSpec: hidden width must be >= 1");
    }
    if (encoder_hidden.size() != 2) {
        throw std::invalid_argument(
            "GeneratorSpec: encoder is 3-layer, needs exactly 2 hidden widths");
    }
    for (int w : encoder_hidden) {
        if (w < 1) {
            throw std::invalid_argument("GeneratorSpec: encoder width must be >= 1");
        }
    }
    if (refine_scales != 1 && refine_scales != 2) {
        throw std::invalid_argument("GeneratorSpec: refine_scales must be 1 or 2");
    }
    if (refine_scales == 2 && (height % 2 != 0 || width % 2 != 0)) {
        throw std::invalid_argument(
            "GeneratorSpec: two-scale refinement needs even height and width");
    }
}

std::size_t GeneratorSpec::main_param_count() const {
    std::size_t total = 0;
    main_layer_defs(*this, &total);
    return total;
}

std::size_t GeneratorSpec::encoder_param_count() const {
    std::size_t total = 0;
    encoder_layer_defs(*this, &total);
    return total;
}

GeneratorState init_params(const GeneratorSpec& spec, Rng& rng) {
    spec.validate();
    GeneratorState state;
    state.spec = spec;
    state.theta.assign(spec.main_param_count(), 0.0);
    state.theta_e.assign(spec.encoder_param_count(), 0.0);
    auto fill = [&rng](std::vector<double>& params,
                       const std::vector<LayerDef>& defs) {
        for (const LayerDef& d : defs) {
            const double scale = 1.0 / std::sqrt(9.0 * d.cin);
            for (std::size_t t = 0; t < 9ull * d.cin * d.cout; ++t) {
                params[d.w_off + t] = scale * rng.next_gaussian();
            }
            // biases stay zero
        }
    };
    fill(state.theta, main_layer_defs(spec, nullptr));
    fill(state.theta_e, encoder_layer_defs(spec, nullptr));
    return state;
}

NoiseField noise_encode(const GeneratorState& state, const SemanticLayout& x,
                        const NoiseSeed& seed) {
    EncoderTrace tr;
    encoder_forward(state, x, seed, tr);
    return NoiseField(state.spec.height, state.spec.width,
                      state.spec.noise_channels, std::move(tr.out));
}

ImageTensor forward(const GeneratorState& state, const SemanticLayout& x,
                    const NoiseField& z) {
    MainTrace tr;
    main_forward(state, x, z, tr);
    return ImageTensor(state.spec.height, state.spec.width, 3, std::move(tr.out));
}

ImageTensor generate(const GeneratorState& state, const SemanticLayout& x,
                     const NoiseSeed& seed) {
    return forward(state, x, noise_encode(state, x, seed));
}

MainBackward backward(const GeneratorState& state, const SemanticLayout& x,
                      const NoiseField& z, const ImageTensor& upstream) {
    MainTrace tr;
    main_forward(state, x, z, tr);
    return main_backward(state, upstream, tr);
}

EncoderBackward encoder_backward(const GeneratorState& state,
                                 const SemanticLayout& x, const NoiseSeed& seed,
                                 const NoiseField& upstream_field) {
    EncoderTrace tr;
    encoder_forward(state, x, seed, tr);
    return encoder_backward_traced(state, upstream_field, tr);
}

GeneratorGrad backward_full(const GeneratorState& state, const SemanticLayout& x,
                            const NoiseSeed& seed, const ImageTensor& upstream) {
    EncoderTrace etr;
    encoder_forward(state, x, seed, etr);
    NoiseField z(state.spec.height, state.spec.width, state.spec.noise_channels,
                 etr.out);
    MainTrace mtr;
    main_forward(state, x, z, mtr);
    MainBackward main = main_backward(state, upstream, mtr);
    EncoderBackward enc = encoder_backward_traced(state, main.grad_noise, etr);
    return GeneratorGrad{std::move(main.grad_theta), std::move(enc.grad_theta_e),
                         std::move(enc.grad_seed)};
}

GeneratorState apply_update(const GeneratorState& state, const GeneratorGrad& grad,
                            double eta) {
    if (grad.theta.size() != state.theta.size() ||
        grad.theta_e.size() != state.theta_e.size()) {
        throw std::invalid_argument("apply_update: gradient length mismatch");
    }
    for (double g : grad.theta) {
        if (!std::isfinite(g)) {
            throw std::invalid_argument("apply_update: non-finite gradient entry");
        }
    }
    for (double g : grad.theta_e) {
        if (!std::isfinite(g)) {
            throw std::invalid_argument("apply_update: non-finite gradient entry");
        }
    }
    GeneratorState next = state;
    for (std::size_t k = 0; k < next.theta.size(); ++k) {
        next.theta[k] -= eta * grad.theta[k];
    }
    for (std::size_t k = 0; k < next.theta_e.size(); ++k) {
        next.theta_e[k] -= eta * grad.theta_e[k];
    }
    return next;
}

namespace {

constexpr char kCkptMagic[8] = {'C', 'I', 'M', 'L', 'c', 'k', 'p', 't'};
constexpr std::uint32_t kCkptVersion = 1;

void write_spec(std::ostream& os, const GeneratorSpec& s) {
    io::put_i32(os, s.input_classes);
    io::put_i32(os, s.noise_channels);
    io::put_i32(os, s.seed_dim);
    io::put_i32(os, s.height);
    io::put_i32(os, s.width);
    io::put_u32(os, static_cast<std::uint32_t>(s.hidden.size()));
    for (int h : s.hidden) io::put_i32(os, h);
    io::put_u32(os, static_cast<std::uint32_t>(s.encoder_hidden.size()));
    for (int h : s.encoder_hidden) io::put_i32(os, h);
    io::put_i32(os, s.refine_scales);
    io::put_u8(os, s.noise_mode == NoiseMode::PerPixel ? 0 : 1);
}

GeneratorSpec read_spec(std::istream& is) {
    GeneratorSpec s;
    s.input_classes = io::get_i32(is);
    s.noise_channels = io::get_i32(is);
    s.seed_dim = io::get_i32(is);
    s.height = io::get_i32(is);
    s.width = io::get_i32(is);
    s.hidden.resize(io::get_u32(is));
    for (auto& h : s.hidden) h = io::get_i32(is);
    s.encoder_hidden.resize(io::get_u32(is));
    for (auto& h : s.encoder_hidden) h = io::get_i32(is);
    s.refine_scales = io::get_i32(is);
    s.noise_mode = io::get_u8(is) == 0 ? NoiseMode::PerPixel : NoiseMode::PerChannel;
    return s;
}

} // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ostringstream body;
    body.write(kCkptMagic, sizeof(kCkptMagic));
    io::put_u32(body, kCkptVersion);
    write_spec(body, ckpt.state.spec);
    io::put_u64(body, ckpt.metric_seed);
    io::put_u32(body, static_cast<std::uint32_t>(ckpt.lambda.size()));
    for (double v : ckpt.lambda) io::put_f64(body, v);
    io::put_u64(body, ckpt.state.theta.size());
    for (double v : ckpt.state.theta) io::put_f64(body, v);
    io::put_u64(body, ckpt.state.theta_e.size());
    for (double v : ckpt.state.theta_e) io::put_f64(body, v);

    const std::string bytes = body.str();
    const std::uint32_t crc =
        crc32(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + path);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    io::put_u32(os, crc);
    os.flush();
    if (!os) throw std::runtime_error("write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CorruptFileError("cannot open checkpoint " + path);
    std::string bytes((std::istreambuf_iterator<char>(is)),
                      std::istreambuf_iterator<char>());
    if (bytes.size() < sizeof(kCkptMagic) + 4) {
        throw CorruptFileError("checkpoint truncated: " + path);
    }
    const std::size_t body_size = bytes.size() - 4;
    std::uint32_t stored = 0;
    for (int b = 0; b < 4; ++b) {
        stored |= static_cast<std::uint32_t>(
                      static_cast<unsigned char>(bytes[body_size + b]))
                  << (8 * b);
    }
    const std::uint32_t actual = crc32(
        reinterpret_cast<const unsigned char*>(bytes.data()), body_size);
    if (stored != actual) {
        throw CorruptFileError("checkpoint CRC mismatch: " + path);
    }
    std::istringstream body(bytes.substr(0, body_size));
    char magic[8];
    body.read(magic, sizeof(magic));
    if (body.gcount() != sizeof(magic) ||
        !std::equal(std::begin(magic), std::end(magic), std::begin(kCkptMagic))) {
        throw CorruptFileError("checkpoint bad magic: " + path);
    }
    const std::uint32_t version = io::get_u32(body);
    if (version != kCkptVersion) {
        throw CorruptFileError("checkpoint version unsupported");
    }
    Checkpoint ckpt;
    ckpt.state.spec = read_spec(body);
    ckpt.state.spec.validate();
    ckpt.metric_seed = io::get_u64(body);
    ckpt.lambda.resize(io::get_u32(body));
    for (auto& v : ckpt.lambda) v = io::get_f64(body);
    ckpt.state.theta.resize(io::get_u64(body));
    for (auto& v : ckpt.state.theta) v = io::get_f64(body);
    ckpt.state.theta_e.resize(io::get_u64(body));
    for (auto& v : ckpt.state.theta_e) v = io::get_f64(body);
    if (ckpt.state.theta.size() != ckpt.state.spec.main_param_count() ||
        ckpt.state.theta_e.size() != ckpt.state.spec.encoder_param_count()) {
        throw CorruptFileError("checkpoint parameter count mismatch");
    }
    return ckpt;
}

} // namespace cimle
