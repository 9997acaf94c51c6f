#include "lvgpt/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "lvgpt/error.hpp"

namespace lvgpt {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::string bad_value(std::string_view key, std::string_view value, std::string_view expected) {
    return "config key '" + std::string(key) + "': invalid value '" + std::string(value) + "' (expected " +
           std::string(expected) + ")";
}

template <typename U>
U parse_uint(std::string_view key, std::string_view v) {
    U out{};
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(bad_value(key, v, "unsigned integer"));
    return out;
}

double parse_double(std::string_view key, std::string_view v) {
    double out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(bad_value(key, v, "number"));
    return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError(bad_value(key, v, "true or false"));
}

std::string fmt_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

struct Field {
    std::function<void(RunConfig&, std::string_view key, std::string_view value)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <typename U>
Field size_field(U RunConfig::*outer) {
    return {[outer](RunConfig& c, std::string_view k, std::string_view v) { c.*outer = parse_uint<U>(k, v); },
            [outer](const RunConfig& c) { return std::to_string(c.*outer); }};
}

template <typename Member>
Field model_size(Member ModelConfig::*m) {
    return {[m](RunConfig& c, std::string_view k, std::string_view v) { c.model.*m = parse_uint<std::size_t>(k, v); },
            [m](const RunConfig& c) { return std::to_string(c.model.*m); }};
}

template <typename Member>
Field vision_size(Member VisionTokenizerConfig::*m) {
    return {[m](RunConfig& c, std::string_view k, std::string_view v) {
                c.model.tokenizer.*m = parse_uint<std::size_t>(k, v);
            },
            [m](const RunConfig& c) { return std::to_string(c.model.tokenizer.*m); }};
}

Field optim_double(double AdamConfig::*m) {
    return {[m](RunConfig& c, std::string_view k, std::string_view v) { c.optim.*m = parse_double(k, v); },
            [m](const RunConfig& c) { return fmt_double(c.optim.*m); }};
}

Field string_field(std::string RunConfig::*m) {
    return {[m](RunConfig& c, std::string_view, std::string_view v) { c.*m = std::string(v); },
            [m](const RunConfig& c) { return c.*m; }};
}

// Wraps enum parsers so their errors name the offending key.
template <typename Fn>
auto keyed(std::string_view key, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        throw ConfigError("config key '" + std::string(key) + "': " + e.what());
    }
}

const std::vector<std::pair<std::string, Field>>& schema() {
    static const std::vector<std::pair<std::string, Field>> s{
        {"model.d", model_size(&ModelConfig::d)},
        {"model.layers", model_size(&ModelConfig::n_layers)},
        {"model.heads", model_size(&ModelConfig::n_heads)},
        {"model.mlp_ratio", model_size(&ModelConfig::mlp_ratio)},
        {"model.max_pos", model_size(&ModelConfig::max_pos)},
        {"model.max_question_len", model_size(&ModelConfig::max_question_len)},
        {"model.num_classes", model_size(&ModelConfig::num_classes)},
        {"model.vocab_size", model_size(&ModelConfig::vocab_size)},
        {"model.dropout",
         {[](RunConfig& c, std::string_view k, std::string_view v) { c.model.dropout = parse_double(k, v); },
          [](const RunConfig& c) { return fmt_double(c.model.dropout); }}},
        {"seq.order",
         {[](RunConfig& c, std::string_view k, std::string_view v) {
              c.model.sequencing.order = keyed(k, [&] { return parse_token_order(v); });
          },
          [](const RunConfig& c) { return std::string(to_string(c.model.sequencing.order)); }}},
        {"seq.vision_pose",
         {[](RunConfig& c, std::string_view k, std::string_view v) {
              c.model.sequencing.vision_pose = keyed(k, [&] { return parse_vision_pose_mode(v); });
          },
          [](const RunConfig& c) { return std::string(to_string(c.model.sequencing.vision_pose)); }}},
        {"seq.type_embedding",
         {[](RunConfig& c, std::string_view k, std::string_view v) {
              c.model.sequencing.use_type_embedding = parse_bool(k, v);
          },
          [](const RunConfig& c) { return fmt_bool(c.model.sequencing.use_type_embedding); }}},
        {"seq.vision_projection_path",
         {[](RunConfig& c, std::string_view k, std::string_view v) {
              c.model.sequencing.use_vision_projection_path = parse_bool(k, v);
          },
          [](const RunConfig& c) { return fmt_bool(c.model.sequencing.use_vision_projection_path); }}},
        {"vision.backend",
         {[](RunConfig& c, std::string_view k, std::string_view v) {
              c.model.tokenizer.backend = keyed(k, [&] { return parse_vision_backend(v); });
          },
          [](const RunConfig& c) { return std::string(to_string(c.model.tokenizer.backend)); }}},
        {"vision.image_size", vision_size(&VisionTokenizerConfig::image_size)},
        {"vision.patch_grid", vision_size(&VisionTokenizerConfig::patch_grid)},
        {"vision.token_dim", vision_size(&VisionTokenizerConfig::token_dim)},
        {"vision.internal_pose",
         {[](RunConfig& c, std::string_view k, std::string_view v) {
              c.model.tokenizer.vit_internal_pose = parse_bool(k, v);
          },
          [](const RunConfig& c) { return fmt_bool(c.model.tokenizer.vit_internal_pose); }}},
        {"optim.lr", optim_double(&AdamConfig::lr)},
        {"optim.beta1", optim_double(&AdamConfig::beta1)},
        {"optim.beta2", optim_double(&AdamConfig::beta2)},
        {"optim.epsilon", optim_double(&AdamConfig::epsilon)},
        {"train.epochs", size_field(&RunConfig::epochs)},
        {"train.batch_size", size_field(&RunConfig::batch_size)},
        {"train.seed", size_field(&RunConfig::seed)},
        {"train.precision",
         {[](RunConfig& c, std::string_view k, std::string_view v) {
              if (v == "f32") c.precision = Precision::f32;
              else if (v == "f64") c.precision = Precision::f64;
              else throw ConfigError(bad_value(k, v, "f32 or f64"));
          },
          [](const RunConfig& c) { return std::string(to_string(c.precision)); }}},
        {"data.train", string_field(&RunConfig::train_manifest)},
        {"data.test", string_field(&RunConfig::test_manifest)},
        {"data.test_rephrased", string_field(&RunConfig::rephrased_manifest)},
        {"data.labels", string_field(&RunConfig::label_map)},
        {"data.vocab_min_count", size_field(&RunConfig::vocab_min_count)},
        {"eval.threads", size_field(&RunConfig::eval_threads)},
        {"out.dir", string_field(&RunConfig::out_dir)},
    };
    return s;
}

const Field& field(std::string_view key) {
    for (const auto& [k, f] : schema())
        if (k == key) return f;
    throw ConfigError("unknown config key '" + std::string(key) + "'");
}

}  // namespace

std::string_view to_string(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

Profile parse_profile(std::string_view s) {
    if (s == "paper") return Profile::paper;
    if (s == "desk") return Profile::desk;
    throw ConfigError("unknown profile '" + std::string(s) + "' (expected desk or paper)");
}

RunConfig default_run_config(Profile profile) {
    RunConfig c;
    if (profile == Profile::desk) {
        c.epochs = 10;
        c.batch_size = 4;
        c.optim.lr = 5e-4;
        c.model.tokenizer.backend = VisionBackend::vit_lite;
        c.model.tokenizer.patch_grid = 2;
    }
    return c;
}

const std::vector<std::string>& run_config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& [name, f] : schema()) k.push_back(name);
        return k;
    }();
    return keys;
}

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
    field(key).set(cfg, key, value);
}

std::string get_setting(const RunConfig& cfg, std::string_view key) { return field(key).get(cfg); }

RunConfig parse_run_config(std::string_view text, const RunConfig& base) {
    RunConfig cfg = base;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        const std::string key = trim(std::string_view(body).substr(0, eq));
        const std::string value = trim(std::string_view(body).substr(eq + 1));
        try {
            apply_setting(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path, const RunConfig& base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str(), base);
}

std::string serialize_run_config(const RunConfig& cfg) {
    std::string out;
    for (const auto& [key, f] : schema()) out += key + " = " + f.get(cfg) + "\n";
    return out;
}

}  // namespace lvgpt
