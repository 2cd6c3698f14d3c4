#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "irisforge/error.hpp"
#include "irisforge/irisproc.hpp"
#include "irisforge/toydata.hpp"

using namespace irisforge;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("irisforge_test_toydata_" + name);
  fs::remove_all(p);
  return p;
}

Manifest synthetic_manifest(int ids, int per_id) {
  Manifest m;
  m.image_size = 64;
  for (int i = 0; i < ids; ++i)
    for (int k = 0; k < per_id; ++k) m.samples.push_back(IrisSample{"x.png", 100 + i, AttributeVector::from_combination(k)});
  return m;
}

}  // namespace

TEST_CASE("rendering is deterministic and carries ground truth") {
  const auto v = AttributeVector::from_combination(37);
  const auto a = render_toy_iris(7, v, 64, 11);
  const auto b = render_toy_iris(7, v, 64, 11);
  CHECK(a.image.pixels == b.image.pixels);
  CHECK(a.pupil.r < a.limbus.r);
  const Style st = decode_attributes(v);
  CHECK(a.pupil.cx == 32 + st.shift.dx);
  CHECK(a.pupil.cy == 32 + st.shift.dy);
  CHECK_THROWS_AS(render_toy_iris(7, v, 32, 11), GeometryError);
}

TEST_CASE("rendered scene is eye-like") {
  const auto r = render_toy_iris(3, AttributeVector::from_combination(0), 64, 1);
  CHECK(r.image.at(32, 32) < 0.1f);  // pupil
  CHECK(r.image.at(1, 1) > 0.8f);    // sclera corner
  double iris = 0.0;
  for (int x = 42; x < 47; ++x) iris += r.image.at(x, 32);
  CHECK(iris / 5 > 0.1);
  CHECK(iris / 5 < 0.5);
}

TEST_CASE("same identity across styles matches, different identities do not") {
  const auto a = extract_template(render_toy_iris(7, AttributeVector::from_combination(0), 64, 1).image);
  const auto b = extract_template(render_toy_iris(7, AttributeVector::from_combination(31), 64, 2).image);
  const auto c = extract_template(render_toy_iris(8, AttributeVector::from_combination(0), 64, 1).image);
  REQUIRE(a);
  REQUIRE(b);
  REQUIRE(c);
  CHECK(1.0 - match_codes(a->code, b->code) < 0.3);
  CHECK(std::abs(hamming_distance(a->code, c->code, 0) - 0.5) <= 0.1);
}

TEST_CASE("dataset build counts, balance, determinism") {
  const auto dir1 = scratch("a"), dir2 = scratch("b");
  const auto m1 = build_toy_dataset(20, 10, 64, 1, dir1);
  const auto m2 = build_toy_dataset(20, 10, 64, 1, dir2);
  CHECK(m1.samples.size() == 200);
  CHECK(m1.identity_count() == 20);
  CHECK(manifest_content_hash(m1) == manifest_content_hash(m2));
  CHECK(fs::exists(dir1 / "manifest.json"));

  std::map<int, int> hist;
  for (const auto& s : m1.samples) ++hist[s.attribute.combination_index()];
  int lo = 1 << 30, hi = 0;
  for (const auto& [combo, count] : hist) lo = std::min(lo, count), hi = std::max(hi, count);
  CHECK(hist.size() == 50);
  CHECK(hi - lo <= 1);

  const auto loaded = load_manifest(dir1 / "manifest.json");
  CHECK(loaded.samples.size() == 200);
  CHECK(manifest_content_hash(loaded) == manifest_content_hash(m1));
  CHECK(loaded.samples[17].attribute == m1.samples[17].attribute);
  REQUIRE(loaded.samples[17].pupil.has_value());
  CHECK(loaded.samples[17].pupil->r == m1.samples[17].pupil->r);

  const auto m3 = build_toy_dataset(20, 10, 64, 2, scratch("c"));
  CHECK(manifest_content_hash(m3) != manifest_content_hash(m1));
  fs::remove_all(dir1);
  fs::remove_all(dir2);
  fs::remove_all(scratch("c"));
}

TEST_CASE("manifest load errors") {
  const auto dir = scratch("err");
  CHECK_THROWS_AS(load_manifest(dir / "nope.json"), LoadError);
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "m.json");
    f << R"({"image_size": 64, "seed": 1, "samples": [{"path": "missing.png", "identity_id": 0, "attribute": "100001000010"}]})";
  }
  CHECK_THROWS_AS(load_manifest(dir / "m.json"), LoadError);
  {
    std::ofstream f(dir / "m.json");
    f << R"({"image_size": 64, "samples": [{"path": "m.json", "identity_id": 0, "attribute": "110001000010"}]})";
  }
  CHECK_THROWS_AS(load_manifest(dir / "m.json"), LoadError);
  {
    std::ofstream f(dir / "m.json");
    f << "{not json";
  }
  CHECK_THROWS_AS(load_manifest(dir / "m.json"), LoadError);
  fs::remove_all(dir);
}

TEST_CASE("identity split sizes and disjointness") {
  const auto m = synthetic_manifest(20, 3);
  const auto [train, test] = split_dataset(m, 0.7, 5);
  CHECK(train.identity_count() == 14);
  CHECK(test.identity_count() == 6);
  CHECK(train.samples.size() + test.samples.size() == m.samples.size());

  const auto [t2, s2] = split_dataset(synthetic_manifest(2, 2), 0.7, 5);
  CHECK(t2.identity_count() == 1);
  CHECK(s2.identity_count() == 1);

  const auto [again_train, again_test] = split_dataset(m, 0.7, 5);
  CHECK(again_train.identities() == train.identities());

  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto [a, b] = split_dataset(m, 0.7, seed);
    const auto ia = a.identities(), ib = b.identities();
    std::vector<std::int64_t> both;
    std::set_intersection(ia.begin(), ia.end(), ib.begin(), ib.end(), std::back_inserter(both));
    CHECK(both.empty());
  }
  CHECK_THROWS_AS(split_dataset(synthetic_manifest(1, 4), 0.7, 1), SplitError);
  CHECK_THROWS_AS(split_dataset(m, 1.0, 1), SplitError);
}
