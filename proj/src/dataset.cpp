#include "lvgpt/dataset.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lvgpt/error.hpp"

namespace lvgpt {

namespace fs = std::filesystem;
using nlohmann::json;

LabelMap::LabelMap(std::vector<std::string> names) : names_(std::move(names)) {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (!ids_.emplace(names_[i], static_cast<std::int64_t>(i)).second) {
            throw DataError("duplicate class name '" + names_[i] + "' in label map");
        }
    }
}

LabelMap LabelMap::read(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open label map " + path.string());
    std::map<std::int64_t, std::string> by_id;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 'name<TAB>id'");
        }
        std::int64_t id = 0;
        try {
            std::size_t used = 0;
            id = std::stoll(line.substr(tab + 1), &used);
            if (used != line.size() - tab - 1) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad class id");
        }
        if (!by_id.emplace(id, line.substr(0, tab)).second) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": duplicate id " + std::to_string(id));
        }
    }
    std::vector<std::string> names;
    for (auto& [id, name] : by_id) {
        if (id != static_cast<std::int64_t>(names.size())) {
            throw DataError(path.string() + ": class ids must be dense 0..n-1");
        }
        names.push_back(name);
    }
    return LabelMap(std::move(names));
}

void LabelMap::write(const fs::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write label map " + path.string());
    for (std::size_t i = 0; i < names_.size(); ++i) out << names_[i] << '\t' << i << '\n';
}

std::int64_t LabelMap::id(const std::string& name) const {
    auto it = ids_.find(name);
    if (it == ids_.end()) throw DataError("unknown class '" + name + "'");
    return it->second;
}

const std::string& LabelMap::name(std::int64_t id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= names_.size()) {
        throw DataError("class id " + std::to_string(id) + " out of range");
    }
    return names_[static_cast<std::size_t>(id)];
}

fs::path default_label_map_path(const fs::path& manifest) { return manifest.parent_path() / "labels.tsv"; }

VQADataset load_dataset(const fs::path& manifest, const fs::path& label_map, bool check_images) {
    std::ifstream in(manifest);
    if (!in) throw DataError("cannot open manifest " + manifest.string());
    VQADataset ds;
    ds.labels = LabelMap::read(label_map.empty() ? default_label_map_path(manifest) : label_map);
    const fs::path root = manifest.parent_path();

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = manifest.string() + ":" + std::to_string(lineno) + ": ";
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError(where + "malformed JSON (" + e.what() + ")");
        }
        if (!rec.is_object()) throw DataError(where + "record is not a JSON object");
        auto field = [&](const char* key) -> const json& {
            if (!rec.contains(key)) throw DataError(where + "missing \"" + key + "\" field");
            return rec.at(key);
        };
        VQASample s;
        try {
            s.image_path = root / field("image").get<std::string>();
            s.question = field("question").get<std::string>();
            const auto answer = field("answer").get<std::string>();
            try {
                s.answer_class = ds.labels.id(answer);
            } catch (const DataError&) {
                throw DataError(where + "unknown class '" + answer + "'");
            }
            s.question_type = field("type").get<std::string>();
            s.template_id = field("template").get<int>();
            if (rec.contains("scene")) s.scene = rec.at("scene").get<std::string>();
        } catch (const json::type_error& e) {
            throw DataError(where + "field has the wrong type (" + e.what() + ")");
        }
        if (s.question.empty()) throw DataError(where + "empty question");
        if (check_images && !fs::exists(s.image_path)) {
            throw DataError(where + "image file not found: " + s.image_path.string());
        }
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

void write_manifest(const fs::path& manifest, const std::vector<VQASample>& samples, const LabelMap& labels) {
    std::ofstream out(manifest);
    if (!out) throw DataError("cannot write manifest " + manifest.string());
    const fs::path root = manifest.parent_path();
    for (const auto& s : samples) {
        json rec;
        const fs::path rel = root.empty() ? s.image_path : s.image_path.lexically_relative(root);
        rec["image"] = (rel.empty() ? s.image_path : rel).generic_string();
        rec["question"] = s.question;
        rec["answer"] = labels.name(s.answer_class);
        rec["type"] = s.question_type;
        rec["template"] = s.template_id;
        if (!s.scene.empty()) rec["scene"] = s.scene;
        out << rec.dump() << '\n';
    }
}

}  // namespace lvgpt
