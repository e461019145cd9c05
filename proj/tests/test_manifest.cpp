#include <doctest.h>

#include "helpers.hpp"
#include "kneexnet/data/manifest.hpp"

using namespace kneexnet;
using namespace kneexnet::data;
using test_support::read_file;
using test_support::scratch_dir;
using test_support::write_file;

namespace {

std::string error_of(const std::filesystem::path& path) {
    try {
        load_manifest(path);
    } catch (const ManifestError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("load_manifest counts grades in row order") {
    const auto dir = scratch_dir("manifest_counts");
    write_file(dir / "m.csv", "image_path,kl_grade,subject_id\na.png,0,s1\nb.png,0,s2\nc.png,4,s3\n");
    const auto m = load_manifest(dir / "m.csv");
    REQUIRE(m.size() == 3);
    CHECK(m.class_counts() == ClassCounts{2, 0, 0, 0, 1});
    CHECK(m.records()[0].image_path == "a.png");
    CHECK(m.records()[2].grade == KLGrade(4));
    CHECK(m.records()[1].split == Split::unassigned);
    CHECK(m.resolve(m.records()[0]) == dir / "a.png");
}

TEST_CASE("header-only manifest is empty") {
    const auto dir = scratch_dir("manifest_empty");
    write_file(dir / "m.csv", "image_path,kl_grade,subject_id\n");
    const auto m = load_manifest(dir / "m.csv");
    CHECK(m.empty());
    CHECK(m.class_counts() == ClassCounts{});
}

TEST_CASE("out-of-range grade names the line") {
    const auto dir = scratch_dir("manifest_bad_grade");
    write_file(dir / "m.csv", "image_path,kl_grade,subject_id\na.png,1,s\nb.png,5,s\n");
    const auto msg = error_of(dir / "m.csv");
    CHECK(msg.find("line 3") != std::string::npos);
}

TEST_CASE("malformed manifests are rejected") {
    const auto dir = scratch_dir("manifest_malformed");
    write_file(dir / "short.csv", "image_path,kl_grade,subject_id\na.png,1\n");
    CHECK(error_of(dir / "short.csv").find("line 2") != std::string::npos);
    write_file(dir / "nocol.csv", "image_path,grade,subject_id\na.png,1,s\n");
    CHECK(error_of(dir / "nocol.csv").find("kl_grade") != std::string::npos);
    write_file(dir / "nan.csv", "image_path,kl_grade,subject_id\na.png,x,s\n");
    CHECK(!error_of(dir / "nan.csv").empty());
    write_file(dir / "split.csv", "image_path,kl_grade,subject_id,split\na.png,1,s,holdout\n");
    CHECK(!error_of(dir / "split.csv").empty());
    CHECK_THROWS(load_manifest(dir / "missing.csv"));
}

TEST_CASE("quoted fields, BOM and CRLF are accepted") {
    const auto dir = scratch_dir("manifest_quoted");
    write_file(dir / "m.csv",
               "\xEF\xBB\xBFimage_path,kl_grade,subject_id,split\r\n\"x, y.png\",2,\"s\"\"1\",val\r\n");
    const auto m = load_manifest(dir / "m.csv");
    REQUIRE(m.size() == 1);
    CHECK(m.records()[0].image_path == "x, y.png");
    CHECK(m.records()[0].subject_id == "s\"1");
    CHECK(m.records()[0].split == Split::val);
}

TEST_CASE("write/load round trip keeps records and rebases paths") {
    const auto dir = scratch_dir("manifest_roundtrip");
    std::filesystem::create_directories(dir / "in");
    write_file(dir / "in" / "m.csv",
               "image_path,kl_grade,subject_id,split\nimg/a.png,3,p1,train\n\"b,c.png\",1,p2,test\n");
    const auto m = load_manifest(dir / "in" / "m.csv");
    write_manifest(m, dir / "out" / "copy.csv");
    const auto back = load_manifest(dir / "out" / "copy.csv");
    REQUIRE(back.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(std::filesystem::weakly_canonical(back.resolve(back.records()[i])) ==
              std::filesystem::weakly_canonical(m.resolve(m.records()[i])));
        CHECK(back.records()[i].grade == m.records()[i].grade);
        CHECK(back.records()[i].split == m.records()[i].split);
    }
    write_manifest(back, dir / "out" / "copy2.csv");
    CHECK(read_file(dir / "out" / "copy.csv") == read_file(dir / "out" / "copy2.csv"));
}

TEST_CASE("subset keeps manifest order") {
    DatasetManifest m({{"a", KLGrade(0), "s", Split::train},
                       {"b", KLGrade(1), "s", Split::test},
                       {"c", KLGrade(2), "s", Split::train}});
    const auto train = m.subset(Split::train);
    REQUIRE(train.size() == 2);
    CHECK(train.records()[1].image_path == "c");
    CHECK(train.class_counts() == ClassCounts{1, 0, 1, 0, 0});
}
