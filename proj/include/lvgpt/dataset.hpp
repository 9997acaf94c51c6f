#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace lvgpt {

struct VQASample {
    std::filesystem::path image_path;  // resolved against the manifest directory
    std::string question;
    std::int64_t answer_class = 0;
    std::string question_type;
    int template_id = 0;
    std::string scene;  // optional scene description (synthetic data)

    friend bool operator==(const VQASample&, const VQASample&) = default;
};

// Class name <-> id; ids are dense 0..n-1. Stored as "name<TAB>id" lines.
class LabelMap {
public:
    LabelMap() = default;
    explicit LabelMap(std::vector<std::string> names);

    static LabelMap read(const std::filesystem::path& path);
    void write(const std::filesystem::path& path) const;

    // Throws DataError for an unknown name.
    std::int64_t id(const std::string& name) const;
    const std::string& name(std::int64_t id) const;
    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }

    friend bool operator==(const LabelMap& a, const LabelMap& b) { return a.names_ == b.names_; }

private:
    std::vector<std::string> names_;
    std::map<std::string, std::int64_t> ids_;
};

struct VQADataset {
    std::vector<VQASample> samples;
    LabelMap labels;
};

// Parses a JSON-lines manifest. Each non-blank line is an object with
// "image", "question", "answer" (class name), "type", "template" and an
// optional "scene". The label map defaults to labels.tsv beside the manifest.
// Throws DataError naming the offending line.
VQADataset load_dataset(const std::filesystem::path& manifest, const std::filesystem::path& label_map = {},
                        bool check_images = true);

// Image paths are written relative to the manifest's directory.
void write_manifest(const std::filesystem::path& manifest, const std::vector<VQASample>& samples,
                    const LabelMap& labels);

std::filesystem::path default_label_map_path(const std::filesystem::path& manifest);

}  // namespace lvgpt
