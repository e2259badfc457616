// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "error_code.hpp"
#include "temp_dir.hpp"
#include "viptt/dataset.hpp"
#include "viptt/random.hpp"
#include "viptt/synthetic.hpp"
#include "viptt/volume_io.hpp"

using viptt::ErrorCode;
using viptt::testing::code_of;
using viptt::testing::TempDir;

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

void write_sample(const std::filesystem::path& p, double value) {
  viptt::write_tensor(p, viptt::Tensor({2, 3, 3}, value));
}

viptt::Dataset labels_only(const std::vector<int>& labels, std::size_t k) {
  viptt::Dataset ds;
  ds.num_classes = k;
  for (std::size_t i = 0; i < labels.size(); ++i)
    ds.records.push_back({"s" + std::to_string(i), labels[i], nullptr});
  return ds;
}

viptt::Dataset in_memory(std::size_t n, std::size_t k) {
  viptt::Dataset ds;
  ds.num_classes = k;
  for (std::size_t i = 0; i < n; ++i) {
    auto vol = std::make_shared<viptt::Volume>(2, 5, 5, viptt::ValueDomain::UnitNormalized, 0.0);
    for (std::size_t j = 0; j < vol->data.size(); ++j) vol->data[j] = static_cast<double>((i * 7 + j) % 11) / 10.0;
    ds.records.push_back({"mem" + std::to_string(i), static_cast<int>(i % k), vol});
  }
  return ds;
}

}  // namespace

TEST_CASE("load_manifest resolves relative paths and infers K") {
  TempDir dir;
  std::filesystem::create_directories(dir / "vols");
  write_sample(dir / "vols/a.vpt", 0.1);
  write_sample(dir / "vols/b,c.vpt", 0.2);
  write_text(dir / "m.csv", "path,label\nvols/a.vpt,0\nvols/b,c.vpt,2\n");
  const auto ds = viptt::load_manifest(dir / "m.csv");
  REQUIRE(ds.size() == 2);
  CHECK(ds.num_classes == 3);
  CHECK(ds.records[1].label == 2);
  CHECK(ds.records[1].data_path.filename() == "b,c.vpt");
  CHECK(viptt::load_sample(ds.records[0]).data[0] == doctest::Approx(0.1).epsilon(1e-7));
  CHECK(viptt::load_manifest(dir / "m.csv", 5).num_classes == 5);

  SUBCASE("round trip through write_manifest") {
    write_text(dir / "copy.csv", "");
    viptt::write_manifest(dir / "copy.csv", ds);
    const auto back = viptt::load_manifest(dir / "copy.csv", 3);
    REQUIRE(back.size() == 2);
    CHECK(std::filesystem::equivalent(back.records[1].data_path, ds.records[1].data_path));
  }
}

TEST_CASE("load_manifest failure modes") {
  TempDir dir;
  write_sample(dir / "a.vpt", 0.0);
  write_text(dir / "bad_header.csv", "file,label\na.vpt,0\n");
  CHECK(code_of([&] { viptt::load_manifest(dir / "bad_header.csv"); }) == ErrorCode::MalformedManifest);
  write_text(dir / "bad_label.csv", "path,label\na.vpt,x\n");
  CHECK(code_of([&] { viptt::load_manifest(dir / "bad_label.csv"); }) == ErrorCode::MalformedManifest);
  write_text(dir / "no_comma.csv", "path,label\na.vpt\n");
  CHECK(code_of([&] { viptt::load_manifest(dir / "no_comma.csv"); }) == ErrorCode::MalformedManifest);
  write_text(dir / "missing.csv", "path,label\na.vpt,0\nghost.vpt,1\n");
  try {
    viptt::load_manifest(dir / "missing.csv");
    FAIL("expected MISSING_FILE");
  } catch (const viptt::Error& e) {
    CHECK(e.code() == ErrorCode::MissingFile);
    CHECK(std::string(e.what()).find("ghost.vpt") != std::string::npos);
  }
  write_text(dir / "range.csv", "path,label\na.vpt,4\n");
  CHECK(code_of([&] { viptt::load_manifest(dir / "range.csv", 3); }) == ErrorCode::LabelOutOfRange);
  write_text(dir / "neg.csv", "path,label\na.vpt,-1\n");
  CHECK(code_of([&] { viptt::load_manifest(dir / "neg.csv"); }) == ErrorCode::LabelOutOfRange);
  CHECK(code_of([&] { viptt::load_manifest(dir / "nope.csv"); }) == ErrorCode::MissingFile);
}

TEST_CASE("stratified_split partitions every class by rounded fraction") {
  viptt::SplitMix64 rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + rng.below(5);
    std::vector<int> labels;
    for (std::size_t c = 0; c < k; ++c) {
      const std::size_t n = 2 + rng.below(20);
      for (std::size_t i = 0; i < n; ++i) labels.push_back(static_cast<int>(c));
    }
    viptt::shuffle(std::span<int>(labels), rng);
    const auto ds = labels_only(labels, k);
    const double frac = 0.8;
    const auto [train, val] = viptt::stratified_split(ds, frac, rng.next());
    CHECK(train.size() + val.size() == ds.size());
    std::set<std::string> seen;
    for (const auto& r : train.records) seen.insert(r.data_path.string());
    for (const auto& r : val.records) seen.insert(r.data_path.string());
    CHECK(seen.size() == ds.size());
    const auto all = ds.class_counts();
    const auto tr = train.class_counts();
    const auto va = val.class_counts();
    for (std::size_t c = 0; c < k; ++c) {
      CHECK(tr[c] == static_cast<std::size_t>(std::llround(frac * static_cast<double>(all[c]))));
      CHECK(tr[c] + va[c] == all[c]);
    }
  }
}

TEST_CASE("stratified_split is deterministic and keeps manifest order") {
  const auto ds = labels_only({0, 1, 0, 1, 0, 1, 0, 1, 2, 2, 2}, 3);
  const auto a = viptt::stratified_split(ds, 0.8, 5);
  const auto b = viptt::stratified_split(ds, 0.8, 5);
  auto names = [](const viptt::Dataset& d) {
    std::vector<std::string> out;
    for (const auto& r : d.records) out.push_back(r.data_path.string());
    return out;
  };
  CHECK(names(a.first) == names(b.first));
  CHECK(names(a.second) == names(b.second));
  auto index_of = [](const std::string& s) { return std::stoi(s.substr(1)); };
  const auto tn = names(a.first);
  CHECK(std::is_sorted(tn.begin(), tn.end(), [&](auto& x, auto& y) { return index_of(x) < index_of(y); }));
  CHECK(code_of([&] { viptt::stratified_split(labels_only({0, 0, 1}, 2), 0.8, 1); }) == ErrorCode::ClassTooSmall);
}

TEST_CASE("class_weights examples and balance identity") {
  std::vector<int> eight_two(10, 0);
  eight_two[8] = eight_two[9] = 1;
  const auto w = viptt::class_weights(eight_two, 2);
  CHECK(w[0] == doctest::Approx(0.625).epsilon(1e-15));
  CHECK(w[1] == doctest::Approx(2.5).epsilon(1e-15));

  const std::vector<int> five_three_two{0, 0, 0, 0, 0, 1, 1, 1, 2, 2};
  const auto w3 = viptt::class_weights(five_three_two, 3);
  CHECK(w3[0] == doctest::Approx(10.0 / 15.0).epsilon(1e-15));
  CHECK(w3[1] == doctest::Approx(10.0 / 9.0).epsilon(1e-15));
  CHECK(w3[2] == doctest::Approx(10.0 / 6.0).epsilon(1e-15));

  CHECK(code_of([] { viptt::class_weights(std::vector<int>{0, 0, 2}, 3); }) == ErrorCode::EmptyClass);

  viptt::SplitMix64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + rng.below(6);
    std::vector<int> labels;
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t i = 0, n = 1 + rng.below(30); i < n; ++i) labels.push_back(static_cast<int>(c));
    const auto wk = viptt::class_weights(labels, k);
    double total = 0.0;
    for (int y : labels) total += wk[static_cast<std::size_t>(y)];
    CHECK(std::abs(total - static_cast<double>(labels.size())) <= 1e-12 * static_cast<double>(labels.size()));
    // Every class contributes the same total weight N / K.
    for (std::size_t c = 0; c < k; ++c) {
      const auto n_c = static_cast<double>(std::count(labels.begin(), labels.end(), static_cast<int>(c)));
      CHECK(wk[c] * n_c == doctest::Approx(static_cast<double>(labels.size()) / static_cast<double>(k)));
    }
  }
}

TEST_CASE("make_batches sizes, coverage and determinism") {
  const auto ds = in_memory(5, 2);
  const auto batches = viptt::make_batches(ds, 2, 3, std::nullopt);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].inputs.shape() == viptt::Shape{2, 2, 5, 5});
  CHECK(batches[1].inputs.dim(0) == 2);
  CHECK(batches[2].inputs.dim(0) == 1);
  std::vector<std::size_t> order;
  for (const auto& b : batches) order.insert(order.end(), b.indices.begin(), b.indices.end());
  std::vector<std::size_t> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<std::size_t>{0, 1, 2, 3, 4});

  const auto again = viptt::make_batches(ds, 2, 3, std::nullopt);
  for (std::size_t i = 0; i < batches.size(); ++i) {
    CHECK(batches[i].inputs == again[i].inputs);
    CHECK(batches[i].labels == again[i].labels);
  }
  // Without augmentation the batch holds the stored voxels untouched.
  for (const auto& b : batches)
    for (std::size_t s = 0; s < b.indices.size(); ++s) {
      const auto& src = ds.records[b.indices[s]].cached->data;
      CHECK(std::equal(src.begin(), src.end(), b.inputs.data().begin() + static_cast<std::ptrdiff_t>(s * src.size())));
      CHECK(b.labels[s] == ds.records[b.indices[s]].label);
      CHECK(b.angles[s] == 0.0);
    }

  bool differs = false;
  for (std::uint64_t seed = 4; seed < 10 && !differs; ++seed) {
    const auto other = viptt::plan_epoch(ds, 2, seed, std::nullopt);
    std::vector<std::size_t> o;
    for (const auto& p : other) o.insert(o.end(), p.indices.begin(), p.indices.end());
    differs = o != order;
  }
  CHECK(differs);
}

TEST_CASE("augmented batches draw angles from the configured set") {
  const auto ds = in_memory(6, 3);
  const viptt::AugmentSpec spec;
  const auto plans = viptt::plan_epoch(ds, 4, 11, spec);
  std::set<double> allowed(spec.angles_deg.begin(), spec.angles_deg.end());
  for (const auto& p : plans)
    for (double a : p.angles) CHECK(allowed.count(a) == 1);
  const auto plans2 = viptt::plan_epoch(ds, 4, 11, spec);
  CHECK(plans[0].angles == plans2[0].angles);
}

TEST_CASE("batches reject inconsistent volume shapes") {
  auto ds = in_memory(2, 2);
  ds.records[1].cached = std::make_shared<viptt::Volume>(2, 4, 5, viptt::ValueDomain::UnitNormalized, 0.0);
  CHECK(code_of([&] { viptt::make_batches(ds, 2, 0, std::nullopt); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("gen_synthetic_dataset writes loadable files and is reproducible") {
  TempDir a, b;
  viptt::SyntheticSpec spec;
  spec.samples_per_class = {10, 10, 10};
  const auto ds = viptt::gen_synthetic_dataset(spec, 42, a.path());
  CHECK(ds.size() == 30);
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(a.path()))
    if (e.path().extension() == ".vpt") ++files;
  CHECK(files == 30);
  const auto loaded = viptt::load_manifest(a / "manifest.csv");
  CHECK(loaded.size() == 30);
  CHECK(loaded.num_classes == 3);
  CHECK(loaded.class_counts() == std::vector<std::size_t>{10, 10, 10});
  const auto v = viptt::load_sample(loaded.records[0]);
  CHECK(v.depth == 8);
  CHECK(v.height == 32);
  CHECK(v.width == 32);

  viptt::gen_synthetic_dataset(spec, 42, b.path());
  for (const auto& e : std::filesystem::directory_iterator(a.path())) {
    CHECK(viptt::read_file_bytes(e.path()) == viptt::read_file_bytes(b.path() / e.path().filename()));
  }

  const auto mem = viptt::gen_synthetic_in_memory(spec, 42);
  REQUIRE(mem.size() == 30);
  for (std::size_t i = 0; i < 30; ++i) {
    CHECK(mem.records[i].label == loaded.records[i].label);
    CHECK(viptt::load_sample(mem.records[i]).data == viptt::load_sample(loaded.records[i]).data);
  }
}

TEST_CASE("class 0 of the moving-blob family travels along +x") {
  viptt::SyntheticSpec spec;
  spec.samples_per_class = {1, 1, 1, 1};
  spec.noise_std = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto vol = viptt::synthesize_sample(spec, 0, seed);
    double prev = -1.0;
    for (std::size_t d = 0; d < vol.depth; ++d) {
      double mass = 0.0, mx = 0.0;
      for (std::size_t y = 0; y < vol.height; ++y)
        for (std::size_t x = 0; x < vol.width; ++x) {
          const double m = vol.at(d, y, x) - spec.background;
          mass += m;
          mx += m * static_cast<double>(x);
        }
      REQUIRE(mass > 0.0);
      const double cx = mx / mass;
      CHECK(cx > prev);
      prev = cx;
    }
  }
}

TEST_CASE("synthetic volumes are normalized and differ by class") {
  for (auto family : {viptt::SignalFamily::MovingBlob, viptt::SignalFamily::Lesion}) {
    viptt::SyntheticSpec spec;
    spec.family = family;
    spec.samples_per_class = {2, 2, 2, 2, 2};
    const auto a = viptt::synthesize_sample(spec, 0, 9);
    const auto b = viptt::synthesize_sample(spec, 1, 9);
    CHECK(a.domain == viptt::ValueDomain::UnitNormalized);
    CHECK_NOTHROW(a.validate());
    CHECK(a.data != b.data);
    CHECK(viptt::synthesize_sample(spec, 0, 9) == a);
  }
}
