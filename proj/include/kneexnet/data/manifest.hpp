#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kneexnet/grade.hpp"

namespace kneexnet::data {

enum class Split { unassigned, train, val, test };

std::string_view to_string(Split split);
/// Accepts "train", "val", "test" and "" / "unassigned".
std::optional<Split> parse_split(std::string_view text);

struct SampleRecord {
    std::string image_path;
    KLGrade grade;
    std::string subject_id;
    Split split = Split::unassigned;
};

class ManifestError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Ordered inventory of labeled radiographs. Class counts are derived from the
/// records and kept consistent by construction.
class DatasetManifest {
public:
    DatasetManifest() = default;
    explicit DatasetManifest(std::vector<SampleRecord> records, std::filesystem::path base_dir = {});

    const std::vector<SampleRecord>& records() const { return records_; }
    const ClassCounts& class_counts() const { return counts_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }

    /// Directory that relative image paths are resolved against.
    const std::filesystem::path& base_dir() const { return base_dir_; }
    std::filesystem::path resolve(const SampleRecord& record) const;

    /// Records of a single split, in manifest order.
    DatasetManifest subset(Split split) const;
    std::vector<KLGrade> grades() const;

private:
    std::vector<SampleRecord> records_;
    ClassCounts counts_{};
    std::filesystem::path base_dir_;
};

/// Reads `image_path,kl_grade,subject_id[,split]` CSV. Relative image paths
/// resolve against the manifest's directory.
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Writes the manifest with the split column populated. Relative image paths are
/// rebased so they stay valid from the output file's directory.
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
/// CSV text; with a target_dir, relative paths are rebased onto it.
std::string format_manifest(const DatasetManifest& manifest, const std::filesystem::path& target_dir = {});

}  // namespace kneexnet::data
