#include "gsmap/io/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "gsmap/io/sequence.hpp"

namespace gsmap {

namespace {

struct KeyBinding {
    std::function<std::string(const PipelineConfig&)> get;
    std::function<void(PipelineConfig&, const std::string&)> set;
};

double to_double(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw std::runtime_error("config: invalid number '" + v + "' for key " + key);
    }
}

int to_int(const std::string& v, const std::string& key) {
    const double d = to_double(v, key);
    const int i = static_cast<int>(d);
    if (i != d) throw std::runtime_error("config: expected integer for key " + key);
    return i;
}

bool to_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::runtime_error("config: expected true/false for key " + key);
}

#define NUM_KEY(name, field)                                                        \
    {name, {[](const PipelineConfig& c) { return format_double(c.field); },         \
            [](PipelineConfig& c, const std::string& v) { c.field = to_double(v, name); }}}
#define INT_KEY(name, field)                                                        \
    {name, {[](const PipelineConfig& c) { return std::to_string(c.field); },        \
            [](PipelineConfig& c, const std::string& v) { c.field = to_int(v, name); }}}
#define BOOL_KEY(name, field)                                                       \
    {name, {[](const PipelineConfig& c) { return c.field ? "true" : "false"; },     \
            [](PipelineConfig& c, const std::string& v) { c.field = to_bool(v, name); }}}

// Ordered: serialization emits keys in this order.
const std::vector<std::pair<std::string, KeyBinding>>& bindings() {
    static const std::vector<std::pair<std::string, KeyBinding>> b = {
        NUM_KEY("voxel.size", voxel_size),
        INT_KEY("voxel.cap", voxel_cap),
        NUM_KEY("voxel.active_window", voxel_active_window),
        NUM_KEY("kf.tau_r_deg", kf.tau_r_deg),
        NUM_KEY("kf.tau_t_m", kf.tau_t_m),
        NUM_KEY("kf.tau_overlap", kf.tau_overlap),
        NUM_KEY("kf.tau_alpha", kf.tau_alpha),
        INT_KEY("kf.delay_depth", kf.delay_depth),
        INT_KEY("kf.iter_budget", kf.iter_budget),
        NUM_KEY("kf.blur_threshold", kf.blur_threshold),
        NUM_KEY("train.lambda", train.lambda),
        NUM_KEY("train.lambda_d", train.lambda_d),
        INT_KEY("train.pyramid_levels", train.pyramid_levels),
        INT_KEY("train.iters_per_level", train.iters_per_level),
        NUM_KEY("train.lr.position", train.lr.position),
        NUM_KEY("train.lr.rotation", train.lr.rotation),
        NUM_KEY("train.lr.scale", train.lr.log_scale),
        NUM_KEY("train.lr.opacity", train.lr.opacity),
        NUM_KEY("train.lr.sh", train.lr.sh),
        NUM_KEY("train.prune_threshold", train.prune_threshold),
        INT_KEY("train.sh_interval", train.sh_interval),
        INT_KEY("run.points_per_frame", points_per_frame),
        INT_KEY("run.threads", threads),
        BOOL_KEY("run.single_thread", single_thread),
        INT_KEY("run.checkpoint_interval", checkpoint_interval),
        INT_KEY("run.prune_interval", prune_interval),
        {"run.out_dir",
         {[](const PipelineConfig& c) { return c.out_dir; },
          [](PipelineConfig& c, const std::string& v) { c.out_dir = v; }}},
        {"run.seed",
         {[](const PipelineConfig& c) { return std::to_string(c.seed); },
          [](PipelineConfig& c, const std::string& v) {
              c.seed = static_cast<uint32_t>(to_int(v, "run.seed"));
          }}},
    };
    return b;
}

#undef NUM_KEY
#undef INT_KEY
#undef BOOL_KEY

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

} // namespace

std::string PipelineConfig::serialize() const {
    std::string out;
    for (const auto& [key, binding] : bindings()) {
        out += key;
        out += " = ";
        out += binding.get(*this);
        out += '\n';
    }
    return out;
}

PipelineConfig PipelineConfig::parse(const std::string& text) {
    PipelineConfig cfg;
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: missing '=' on line " + std::to_string(line_no));
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        bool found = false;
        for (const auto& [name, binding] : bindings()) {
            if (name == key) {
                binding.set(cfg, value);
                found = true;
                break;
            }
        }
        if (!found) throw std::runtime_error("config: unknown key '" + key + "'");
    }
    return cfg;
}

PipelineConfig PipelineConfig::load_file(const std::string& path, bool apply_env) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    PipelineConfig cfg = parse(ss.str());
    if (apply_env) cfg.apply_environment();
    cfg.validate();
    return cfg;
}

void PipelineConfig::apply_environment() {
    for (const auto& [key, binding] : bindings()) {
        std::string env_name = "GSMAP_";
        for (char c : key) env_name += c == '.' ? '_' : static_cast<char>(std::toupper(c));
        if (const char* v = std::getenv(env_name.c_str())) binding.set(*this, v);
    }
}

void PipelineConfig::validate() const {
    if (voxel_size <= 0.0) throw std::runtime_error("config: voxel.size must be positive");
    if (voxel_cap <= 0) throw std::runtime_error("config: voxel.cap must be positive");
    if (kf.tau_r_deg <= 0.0 || kf.tau_t_m <= 0.0)
        throw std::runtime_error("config: keyframe thresholds must be positive");
    if (kf.delay_depth < 0) throw std::runtime_error("config: kf.delay_depth must be >= 0");
    if (kf.iter_budget <= 0) throw std::runtime_error("config: kf.iter_budget must be positive");
    if (train.lambda < 0.0 || train.lambda > 1.0)
        throw std::runtime_error("config: train.lambda must be in [0,1]");
    if (train.lambda_d < 0.0) throw std::runtime_error("config: train.lambda_d must be >= 0");
    if (train.pyramid_levels < 0)
        throw std::runtime_error("config: train.pyramid_levels must be >= 0");
    if (train.prune_threshold <= 0.0 || train.prune_threshold >= 1.0)
        throw std::runtime_error("config: train.prune_threshold must be in (0,1)");
    if (points_per_frame <= 0)
        throw std::runtime_error("config: run.points_per_frame must be positive");
}

} // namespace gsmap
