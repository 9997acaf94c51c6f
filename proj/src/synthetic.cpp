#include "lvgpt/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>

#include "lvgpt/error.hpp"

namespace lvgpt {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kMaxTemplates = 4;

const std::map<std::string, std::array<int, 3>>& palette() {
    static const std::map<std::string, std::array<int, 3>> p{
        {"red", {220, 40, 40}},   {"green", {40, 200, 60}},   {"blue", {50, 80, 230}},
        {"yellow", {225, 215, 40}}, {"magenta", {210, 50, 200}}, {"cyan", {40, 210, 215}},
    };
    return p;
}

const std::set<std::string>& drawable_shapes() {
    static const std::set<std::string> s{"square", "circle", "triangle", "diamond"};
    return s;
}

// {color, shape, count} x template. "{}" is the subject slot.
const std::array<std::array<const char*, kMaxTemplates>, 3> kTemplates{{
    {"what color is the shape in the {}", "which color is the {} object",
     "what is the color of the item at the {}", "tell me the colour of the thing sitting {}"},
    {"what shape is in the {}", "which shape is the {} object", "what is the shape of the item at the {}",
     "tell me the form of the thing sitting {}"},
    {"how many {}s are there", "how many {}s are in the image", "what is the number of {}s in the image",
     "tell me the count of {}s in the picture"},
}};

std::size_t type_index(std::string_view type) {
    if (type == "color") return 0;
    if (type == "shape") return 1;
    if (type == "count") return 2;
    throw ValueError("unknown question type '" + std::string(type) + "'");
}

template <typename Vec>
const auto& pick(const Vec& v, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
    return v[d(rng)];
}

std::size_t uniform_index(std::size_t n, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> d(0, n - 1);
    return d(rng);
}

bool inside_shape(const std::string& shape, double px, double py, double x0, double y0, double size) {
    const double cx = x0 + size / 2.0, cy = y0 + size / 2.0;
    if (shape == "square") return px >= x0 && px < x0 + size && py >= y0 && py < y0 + size;
    if (shape == "circle") {
        const double r = size / 2.0;
        return (px - cx) * (px - cx) + (py - cy) * (py - cy) <= r * r;
    }
    if (shape == "triangle") {
        if (py < y0 || py >= y0 + size) return false;
        const double half = (py - y0 + 0.5) / size * (size / 2.0);
        return std::abs(px - cx) <= half;
    }
    // diamond
    return std::abs(px - cx) + std::abs(py - cy) <= size / 2.0;
}

struct Draft {
    Scene scene;
    std::string type;
    std::string subject;
    std::int64_t answer;
};

}  // namespace

void SyntheticSpec::validate() const {
    if (grid_side < 2 || grid_side > 3) throw ConfigError("synthetic: grid_side must be 2 or 3");
    if (image_size % grid_side != 0 || image_size / grid_side < 8) {
        throw ConfigError("synthetic: image_size must split into grid cells of at least 8 pixels");
    }
    if (shapes.size() < 2) throw ConfigError("synthetic: need at least two shapes");
    if (colors.size() < 2) throw ConfigError("synthetic: need at least two colors");
    for (const auto& s : shapes)
        if (!drawable_shapes().count(s)) throw ConfigError("synthetic: cannot draw shape '" + s + "'");
    for (const auto& c : colors)
        if (!palette().count(c)) throw ConfigError("synthetic: no palette entry for color '" + c + "'");
    std::set<std::string> names(shapes.begin(), shapes.end());
    names.insert(colors.begin(), colors.end());
    if (names.size() != shapes.size() + colors.size()) throw ConfigError("synthetic: duplicate shape/color names");
    if (templates_per_type < 2 || templates_per_type > kMaxTemplates) {
        throw ConfigError("synthetic: templates_per_type must be in [2, " + std::to_string(kMaxTemplates) + "]");
    }
    if (max_count > cells()) {
        throw ConfigError("synthetic: count answers up to " + std::to_string(max_count) + " exceed the " +
                          std::to_string(cells()) + " grid cells");
    }
}

std::string Scene::describe() const {
    std::string s = "side=" + std::to_string(side) + ";";
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) s += ",";
        s += cells[i].color + ":" + cells[i].shape;
    }
    return s;
}

LabelMap synthetic_label_map(const SyntheticSpec& spec) {
    std::vector<std::string> names(spec.colors);
    names.insert(names.end(), spec.shapes.begin(), spec.shapes.end());
    for (std::size_t k = 0; k <= spec.effective_max_count(); ++k) names.push_back(std::to_string(k));
    return LabelMap(std::move(names));
}

std::string cell_phrase(std::size_t side, std::size_t index) {
    static const std::array<const char*, 3> rows3{"top", "middle", "bottom"}, cols3{"left", "center", "right"};
    const std::size_t r = index / side, c = index % side;
    if (side == 2) return std::string(r == 0 ? "top" : "bottom") + " " + (c == 0 ? "left" : "right");
    if (side == 3) return std::string(rows3[r]) + " " + cols3[c];
    throw ValueError("cell_phrase: unsupported grid side " + std::to_string(side));
}

std::string question_text(std::string_view type, std::size_t template_id, std::string_view subject) {
    if (template_id >= kMaxTemplates) throw ValueError("question template " + std::to_string(template_id) + " missing");
    std::string t = kTemplates[type_index(type)][template_id];
    t.replace(t.find("{}"), 2, subject);
    return t;
}

RgbImage render_scene(const Scene& scene, std::size_t image_size, std::mt19937_64& rng) {
    RgbImage img(image_size, image_size);
    std::uniform_int_distribution<int> bg_dist(15, 45), noise(-8, 8);
    std::uniform_real_distribution<double> bright(0.8, 1.0);
    const int bg = bg_dist(rng);
    const std::size_t cell = image_size / scene.side;
    const std::size_t margin = std::max<std::size_t>(1, cell / 8);

    std::vector<std::array<int, 3>> fill(image_size * image_size, {bg, bg, bg});
    for (std::size_t i = 0; i < scene.cells.size(); ++i) {
        const auto& c = scene.cells[i];
        const auto base = palette().at(c.color);
        const double b = bright(rng);
        const std::size_t max_size = cell - 2 * margin;
        std::uniform_int_distribution<std::size_t> size_dist(max_size - std::min<std::size_t>(2, max_size / 4), max_size);
        const std::size_t size = size_dist(rng);
        std::uniform_int_distribution<std::size_t> off(0, max_size - size);
        const double x0 = static_cast<double>((i % scene.side) * cell + margin + off(rng));
        const double y0 = static_cast<double>((i / scene.side) * cell + margin + off(rng));
        for (std::size_t y = (i / scene.side) * cell; y < (i / scene.side + 1) * cell; ++y)
            for (std::size_t x = (i % scene.side) * cell; x < (i % scene.side + 1) * cell; ++x)
                if (inside_shape(c.shape, x + 0.5, y + 0.5, x0, y0, static_cast<double>(size))) {
                    for (int ch = 0; ch < 3; ++ch) fill[y * image_size + x][ch] = static_cast<int>(base[ch] * b);
                }
    }
    for (std::size_t p = 0; p < fill.size(); ++p)
        for (int ch = 0; ch < 3; ++ch)
            img.rgb[p * 3 + ch] = static_cast<std::uint8_t>(std::clamp(fill[p][ch] + noise(rng), 0, 255));
    return img;
}

SyntheticData generate_synthetic(const SyntheticSpec& spec, const fs::path& out_dir) {
    spec.validate();
    const LabelMap labels = synthetic_label_map(spec);
    const std::size_t n_colors = spec.colors.size(), n_shapes = spec.shapes.size();
    const std::size_t K = spec.templates_per_type;
    const std::size_t default_templates = spec.holdout_last_template ? K - 1 : K;

    std::error_code ec;
    fs::create_directories(out_dir / "images", ec);
    if (ec) throw DataError("cannot create " + (out_dir / "images").string() + ": " + ec.message());

    std::mt19937_64 rng(spec.seed);

    auto random_cell = [&](std::mt19937_64& r) { return SceneCell{pick(spec.shapes, r), pick(spec.colors, r)}; };

    // Builds a scene whose answer to a question of the class's type is the class.
    auto draft_for_class = [&](std::int64_t cls, std::mt19937_64& r) {
        Draft d;
        d.answer = cls;
        d.scene.side = spec.grid_side;
        d.scene.cells.resize(spec.cells());
        for (auto& c : d.scene.cells) c = random_cell(r);
        const auto k = static_cast<std::size_t>(cls);
        if (k < n_colors + n_shapes) {
            const std::size_t pos = uniform_index(spec.cells(), r);
            if (k < n_colors) {
                d.type = "color";
                d.scene.cells[pos].color = spec.colors[k];
            } else {
                d.type = "shape";
                d.scene.cells[pos].shape = spec.shapes[k - n_colors];
            }
            d.subject = cell_phrase(spec.grid_side, pos);
        } else {
            const std::size_t count = k - n_colors - n_shapes;
            const std::string& target = pick(spec.shapes, r);
            std::vector<std::string> others;
            for (const auto& s : spec.shapes)
                if (s != target) others.push_back(s);
            std::vector<std::size_t> order(spec.cells());
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::shuffle(order.begin(), order.end(), r);
            for (std::size_t i = 0; i < order.size(); ++i) {
                d.scene.cells[order[i]].shape = i < count ? target : pick(others, r);
            }
            d.type = "count";
            d.subject = target;
        }
        return d;
    };

    // Balanced class schedule: each class appears floor/ceil(n / C) times.
    auto class_schedule = [&](std::size_t n) {
        std::vector<std::int64_t> cls(n);
        for (std::size_t i = 0; i < n; ++i) cls[i] = static_cast<std::int64_t>(i % labels.size());
        std::shuffle(cls.begin(), cls.end(), rng);
        return cls;
    };

    SyntheticData out;
    out.train.labels = out.test.labels = out.test_rephrased.labels = labels;
    std::set<std::string> train_scenes;

    auto emit = [&](const std::string& split, std::size_t n, bool disjoint_from_train) {
        std::vector<VQASample> samples, rephrased;
        const auto schedule = class_schedule(n);
        for (std::size_t i = 0; i < n; ++i) {
            Draft d;
            for (int attempt = 0;; ++attempt) {
                d = draft_for_class(schedule[i], rng);
                if (!disjoint_from_train || !train_scenes.count(d.scene.describe())) break;
                if (attempt > 10000) throw ConfigError("synthetic: cannot find test scenes disjoint from train");
            }
            if (!disjoint_from_train) train_scenes.insert(d.scene.describe());

            char name[64];
            std::snprintf(name, sizeof(name), "%s_%05zu.ppm", split.c_str(), i);
            const fs::path image = out_dir / "images" / name;
            write_ppm(image, render_scene(d.scene, spec.image_size, rng));

            VQASample s;
            s.image_path = image;
            s.answer_class = d.answer;
            s.question_type = d.type;
            s.scene = d.scene.describe();
            s.template_id = static_cast<int>(uniform_index(default_templates, rng));
            s.question = question_text(d.type, static_cast<std::size_t>(s.template_id), d.subject);
            samples.push_back(s);

            s.template_id = static_cast<int>(K - 1);
            s.question = question_text(d.type, K - 1, d.subject);
            rephrased.push_back(std::move(s));
        }
        return std::make_pair(std::move(samples), std::move(rephrased));
    };

    out.train.samples = emit("train", spec.n_train, false).first;
    auto [test, test_rephrased] = emit("test", spec.n_test, true);
    out.test.samples = std::move(test);
    out.test_rephrased.samples = std::move(test_rephrased);

    out.label_map = out_dir / "labels.tsv";
    out.train_manifest = out_dir / "train.jsonl";
    out.test_manifest = out_dir / "test.jsonl";
    out.rephrased_manifest = out_dir / "test_rephrased.jsonl";
    labels.write(out.label_map);
    write_manifest(out.train_manifest, out.train.samples, labels);
    write_manifest(out.test_manifest, out.test.samples, labels);
    write_manifest(out.rephrased_manifest, out.test_rephrased.samples, labels);
    return out;
}

}  // namespace lvgpt
