#include "kneexnet/data/manifest.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace kneexnet::data {

std::string_view to_string(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
        case Split::unassigned: break;
    }
    return "";
}

std::optional<Split> parse_split(std::string_view text) {
    if (text.empty() || text == "unassigned") return Split::unassigned;
    if (text == "train") return Split::train;
    if (text == "val") return Split::val;
    if (text == "test") return Split::test;
    return std::nullopt;
}

DatasetManifest::DatasetManifest(std::vector<SampleRecord> records, std::filesystem::path base_dir)
    : records_(std::move(records)), base_dir_(std::move(base_dir)) {
    for (const auto& r : records_) {
        if (r.image_path.empty()) throw ManifestError("sample record with empty image_path");
        ++counts_[r.grade.index()];
    }
}

std::filesystem::path DatasetManifest::resolve(const SampleRecord& record) const {
    std::filesystem::path p(record.image_path);
    if (p.is_absolute() || base_dir_.empty()) return p;
    return base_dir_ / p;
}

DatasetManifest DatasetManifest::subset(Split split) const {
    std::vector<SampleRecord> out;
    for (const auto& r : records_) {
        if (r.split == split) out.push_back(r);
    }
    return DatasetManifest(std::move(out), base_dir_);
}

std::vector<KLGrade> DatasetManifest::grades() const {
    std::vector<KLGrade> out;
    out.reserve(records_.size());
    for (const auto& r : records_) out.push_back(r.grade);
    return out;
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

// RFC 4180 style: quoted fields may contain commas and doubled quotes.
std::vector<std::string> split_csv_line(std::string_view line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (quoted) throw ManifestError(fmt::format("line {}: unterminated quoted field", line_no));
    fields.emplace_back(trim(cur));
    return fields;
}

std::string quote_if_needed(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ManifestError(fmt::format("cannot open manifest '{}'", path.string()));

    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ManifestError(fmt::format("'{}': missing header", path.string()));
    ++line_no;
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

    const auto header = split_csv_line(line, line_no);
    int col_path = -1, col_grade = -1, col_subject = -1, col_split = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const auto& h = header[i];
        const int idx = static_cast<int>(i);
        if (h == "image_path") col_path = idx;
        else if (h == "kl_grade") col_grade = idx;
        else if (h == "subject_id") col_subject = idx;
        else if (h == "split") col_split = idx;
    }
    if (col_path < 0 || col_grade < 0 || col_subject < 0) {
        throw ManifestError(fmt::format("'{}': header must contain image_path, kl_grade, subject_id", path.string()));
    }

    std::vector<SampleRecord> records;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line, line_no);
        if (fields.size() != header.size()) {
            throw ManifestError(fmt::format("line {}: expected {} fields, found {}", line_no, header.size(),
                                            fields.size()));
        }
        SampleRecord rec;
        rec.image_path = fields[static_cast<std::size_t>(col_path)];
        if (rec.image_path.empty()) throw ManifestError(fmt::format("line {}: empty image_path", line_no));

        const auto& grade_text = fields[static_cast<std::size_t>(col_grade)];
        int grade = -1;
        const auto [ptr, ec] = std::from_chars(grade_text.data(), grade_text.data() + grade_text.size(), grade);
        if (ec != std::errc{} || ptr != grade_text.data() + grade_text.size()) {
            throw ManifestError(fmt::format("line {}: kl_grade '{}' is not an integer", line_no, grade_text));
        }
        if (grade < 0 || grade > 4) {
            throw ManifestError(fmt::format("line {}: kl_grade {} outside 0-4", line_no, grade));
        }
        rec.grade = KLGrade(grade);
        rec.subject_id = fields[static_cast<std::size_t>(col_subject)];
        if (col_split >= 0) {
            const auto split = parse_split(fields[static_cast<std::size_t>(col_split)]);
            if (!split) {
                throw ManifestError(fmt::format("line {}: unknown split '{}'", line_no,
                                                fields[static_cast<std::size_t>(col_split)]));
            }
            rec.split = *split;
        }
        records.push_back(std::move(rec));
    }
    return DatasetManifest(std::move(records), path.parent_path());
}

std::string format_manifest(const DatasetManifest& manifest, const std::filesystem::path& target_dir) {
    namespace fs = std::filesystem;
    const bool rebase = !target_dir.empty() && !manifest.base_dir().empty();
    const fs::path target = rebase ? fs::absolute(target_dir).lexically_normal() : fs::path{};
    std::ostringstream out;
    out << "image_path,kl_grade,subject_id,split\n";
    for (const auto& r : manifest.records()) {
        std::string image_path = r.image_path;
        if (rebase && !fs::path(r.image_path).is_absolute()) {
            const auto abs = fs::absolute(manifest.resolve(r)).lexically_normal();
            const auto rel = abs.lexically_relative(target);
            image_path = rel.empty() ? abs.generic_string() : rel.generic_string();
        }
        out << quote_if_needed(image_path) << ',' << r.grade.value() << ',' << quote_if_needed(r.subject_id)
            << ',' << to_string(r.split) << '\n';
    }
    return out.str();
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ManifestError(fmt::format("cannot write manifest '{}'", path.string()));
    out << format_manifest(manifest, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
    if (!out) throw ManifestError(fmt::format("failed writing manifest '{}'", path.string()));
}

}  // namespace kneexnet::data
