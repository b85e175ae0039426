#include "cimle/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace cimle {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

long long parse_int(const std::string& v, int line) {
    std::size_t pos = 0;
    long long out;
    try {
        out = std::stoll(v, &pos);
    } catch (...) {
        throw ConfigError("expected an integer, got '" + v + "'", line);
    }
    if (pos != v.size()) {
        throw ConfigError("expected an integer, got '" + v + "'", line);
    }
    return out;
}

std::uint64_t parse_u64(const std::string& v, int line) {
    std::size_t pos = 0;
    std::uint64_t out;
    try {
        out = std::stoull(v, &pos);
    } catch (...) {
        throw ConfigError("expected an unsigned integer, got '" + v + "'", line);
    }
    if (pos != v.size()) {
        throw ConfigError("expected an unsigned integer, got '" + v + "'", line);
    }
    return out;
}

double parse_real(const std::string& v, int line) {
    std::size_t pos = 0;
    double out;
    try {
        out = std::stod(v, &pos);
    } catch (...) {
        throw ConfigError("expected a real number, got '" + v + "'", line);
    }
    if (pos != v.size() || !std::isfinite(out)) {
        throw ConfigError("expected a finite real number, got '" + v + "'", line);
    }
    return out;
}

bool parse_bool(const std::string& v, int line) {
    if (v == "on" || v == "true" || v == "1") return true;
    if (v == "off" || v == "false" || v == "0") return false;
    throw ConfigError("expected on/off, got '" + v + "'", line);
}

std::vector<int> parse_int_list(const std::string& v, int line) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(static_cast<int>(parse_int(trim(item), line)));
    }
    if (out.empty()) throw ConfigError("expected a comma-separated list", line);
    return out;
}

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string format_int_list(const std::vector<int>& v) {
    std::string out;
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (k > 0) out += ",";
        out += std::to_string(v[k]);
    }
    return out;
}

void apply_key(ExperimentConfig& c, const std::string& key, const std::string& val,
               int line) {
    auto as_int = [&] { return static_cast<int>(parse_int(val, line)); };
    if (key == "task") {
        if (val != "gmm" && val != "layout") {
            throw ConfigError("task must be 'gmm' or 'layout'", line);
        }
        c.task = val;
    } else if (key == "seed") {
        c.train.seed = parse_u64(val, line);
    } else if (key == "epochs") {
        c.train.epochs = as_int();
    } else if (key == "batch_size") {
        c.train.batch_size = as_int();
    } else if (key == "samples_per_example") {
        c.train.samples_per_example = as_int();
    } else if (key == "inner_steps") {
        c.train.inner_steps = as_int();
    } else if (key == "inner_batch_size") {
        c.train.inner_batch_size = as_int();
    } else if (key == "learning_rate") {
        c.train.learning_rate = parse_real(val, line);
    } else if (key == "rebalance") {
        c.train.rebalance = parse_bool(val, line);
    } else if (key == "distance") {
        if (val == "perceptual") {
            c.train.distance = TrainConfig::Distance::Perceptual;
        } else if (val == "l2") {
            c.train.distance = TrainConfig::Distance::L2;
        } else {
            throw ConfigError("distance must be 'perceptual' or 'l2'", line);
        }
    } else if (key == "noise_channels") {
        c.noise_channels = as_int();
    } else if (key == "seed_dim") {
        c.seed_dim = as_int();
    } else if (key == "hidden") {
        c.hidden = parse_int_list(val, line);
    } else if (key == "encoder_hidden") {
        c.encoder_hidden = parse_int_list(val, line);
    } else if (key == "refine_scales") {
        c.refine_scales = as_int();
    } else if (key == "noise_mode") {
        if (val == "per_pixel") {
            c.noise_mode = NoiseMode::PerPixel;
        } else if (val == "per_channel") {
            c.noise_mode = NoiseMode::PerChannel;
        } else {
            throw ConfigError("noise_mode must be 'per_pixel' or 'per_channel'", line);
        }
    } else if (key == "metric_seed") {
        c.metric_seed = parse_u64(val, line);
    } else if (key == "eval_metric_seed") {
        c.eval_metric_seed = parse_u64(val, line);
    } else if (key == "out_dir") {
        c.out_dir = val;
    } else if (key == "checkpoint_every") {
        c.checkpoint_every = as_int();
    } else if (key == "gmm.num_conditions") {
        c.gmm.num_conditions = as_int();
    } else if (key == "gmm.modes_per_condition") {
        c.gmm.modes_per_condition = as_int();
    } else if (key == "gmm.height") {
        c.gmm.height = as_int();
    } else if (key == "gmm.width") {
        c.gmm.width = as_int();
    } else if (key == "gmm.mode_std") {
        c.gmm.mode_std = parse_real(val, line);
    } else if (key == "gmm.samples_per_condition") {
        c.gmm.samples_per_condition = as_int();
    } else if (key == "layout.height") {
        c.layout.height = as_int();
    } else if (key == "layout.width") {
        c.layout.width = as_int();
    } else if (key == "layout.num_classes") {
        c.layout.num_classes = as_int();
    } else if (key == "layout.palette_modes") {
        c.layout.palette_modes = as_int();
    } else if (key == "layout.num_layouts") {
        c.layout.num_layouts = as_int();
    } else if (key == "layout.images_per_layout") {
        c.layout.images_per_layout = as_int();
    } else if (key == "layout.noise_std") {
        c.layout.noise_std = parse_real(val, line);
    } else if (key == "layout.mode_bias") {
        c.layout.mode_bias = parse_real(val, line);
    } else {
        throw ConfigError("unknown key '" + key + "'", line);
    }
}

} // namespace

int ExperimentConfig::task_height() const {
    return task == "gmm" ? gmm.height : layout.height;
}

int ExperimentConfig::task_width() const {
    return task == "gmm" ? gmm.width : layout.width;
}

int ExperimentConfig::task_classes() const {
    return task == "gmm" ? gmm.num_conditions : layout.num_classes;
}

GeneratorSpec ExperimentConfig::generator_spec() const {
    GeneratorSpec spec;
    spec.input_classes = task_classes();
    spec.noise_channels = noise_channels;
    spec.seed_dim = seed_dim;
    spec.height = task_height();
    spec.width = task_width();
    spec.hidden = hidden;
    spec.encoder_hidden = encoder_hidden;
    spec.refine_scales = refine_scales;
    spec.noise_mode = noise_mode;
    return spec;
}

void ExperimentConfig::validate() const {
    try {
        train.validate();
        if (task == "gmm") {
            gmm.validate();
        } else {
            layout.validate();
        }
        generator_spec().validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (checkpoint_every < 0) {
        throw ConfigError("checkpoint_every must be >= 0");
    }
    if (out_dir.empty()) {
        throw ConfigError("out_dir must not be empty");
    }
}

std::string ExperimentConfig::canonical() const {
    std::ostringstream os;
    os << "batch_size = " << train.batch_size << "\n";
    os << "checkpoint_every = " << checkpoint_every << "\n";
    os << "distance = "
       << (train.distance == TrainConfig::Distance::Perceptual ? "perceptual" : "l2")
       << "\n";
    os << "encoder_hidden = " << format_int_list(encoder_hidden) << "\n";
    os << "epochs = " << train.epochs << "\n";
    os << "eval_metric_seed = " << eval_metric_seed << "\n";
    os << "gmm.height = " << gmm.height << "\n";
    os << "gmm.mode_std = " << format_real(gmm.mode_std) << "\n";
    os << "gmm.modes_per_condition = " << gmm.modes_per_condition << "\n";
    os << "gmm.num_conditions = " << gmm.num_conditions << "\n";
    os << "gmm.samples_per_condition = " << gmm.samples_per_condition << "\n";
    os << "gmm.width = " << gmm.width << "\n";
    os << "hidden = " << format_int_list(hidden) << "\n";
    os << "inner_batch_size = " << train.inner_batch_size << "\n";
    os << "inner_steps = " << train.inner_steps << "\n";
    os << "layout.height = " << layout.height << "\n";
    os << "layout.images_per_layout = " << layout.images_per_layout << "\n";
    os << "layout.mode_bias = " << format_real(layout.mode_bias) << "\n";
    os << "layout.noise_std = " << format_real(layout.noise_std) << "\n";
    os << "layout.num_classes = " << layout.num_classes << "\n";
    os << "layout.num_layouts = " << layout.num_layouts << "\n";
    os << "layout.palette_modes = " << layout.palette_modes << "\n";
    os << "layout.width = " << layout.width << "\n";
    os << "learning_rate = " << format_real(train.learning_rate) << "\n";
    os << "metric_seed = " << metric_seed << "\n";
    os << "noise_channels = " << noise_channels << "\n";
    os << "noise_mode = "
       << (noise_mode == NoiseMode::PerPixel ? "per_pixel" : "per_channel") << "\n";
    os << "out_dir = " << out_dir << "\n";
    os << "rebalance = " << (train.rebalance ? "on" : "off") << "\n";
    os << "refine_scales = " << refine_scales << "\n";
    os << "samples_per_example = " << train.samples_per_example << "\n";
    os << "seed = " << train.seed << "\n";
    os << "seed_dim = " << seed_dim << "\n";
    os << "task = " << task << "\n";
    return os.str();
}

ExperimentConfig ExperimentConfig::parse_string(const std::string& text) {
    ExperimentConfig c;
    std::istringstream is(text);
    std::string raw;
    int line = 0;
    while (std::getline(is, raw)) {
        ++line;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw = raw.substr(0, hash);
        const std::string stripped = trim(raw);
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("expected 'key = value'", line);
        }
        const std::string key = trim(stripped.substr(0, eq));
        const std::string val = trim(stripped.substr(eq + 1));
        if (key.empty()) throw ConfigError("empty key", line);
        apply_key(c, key, val, line);
    }
    return c;
}

ExperimentConfig ExperimentConfig::parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path);
    std::stringstream buf;
    buf << is.rdbuf();
    return parse_string(buf.str());
}

} // namespace cimle
