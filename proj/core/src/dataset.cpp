// SPDX-License-Identifier: Apache-2.0
#include "viptt/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "viptt/error.hpp"
#include "viptt/preprocess.hpp"
#include "viptt/random.hpp"

namespace viptt {

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

}  // namespace

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.label);
  return out;
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (const auto& r : records) ++counts.at(static_cast<std::size_t>(r.label));
  return counts;
}

Dataset load_manifest(const std::filesystem::path& path, std::optional<std::size_t> num_classes) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "manifest " + path.string() + " not found");
  const std::filesystem::path base = path.parent_path();

  std::string line;
  if (!std::getline(in, line) || trim(line) != "path,label") {
    throw Error(ErrorCode::MalformedManifest, path.string() + ": header must be `path,label`");
  }
  Dataset ds;
  int max_label = -1;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = path.string() + " row " + std::to_string(row);
    const auto comma = line.rfind(',');
    if (comma == std::string::npos || comma == 0) throw Error(ErrorCode::MalformedManifest, where + ": expected `path,label`");
    const std::string rel = trim(line.substr(0, comma));
    const std::string label_text = trim(line.substr(comma + 1));
    int label = 0;
    const auto [ptr, ec] = std::from_chars(label_text.data(), label_text.data() + label_text.size(), label);
    if (ec != std::errc() || ptr != label_text.data() + label_text.size()) {
      throw Error(ErrorCode::MalformedManifest, where + ": label `" + label_text + "` is not an integer");
    }
    if (label < 0 || (num_classes && static_cast<std::size_t>(label) >= *num_classes)) {
      throw Error(ErrorCode::LabelOutOfRange, where + ": label " + label_text);
    }
    std::filesystem::path data_path(rel);
    if (data_path.is_relative()) data_path = base / data_path;
    if (!std::filesystem::exists(data_path)) {
      throw Error(ErrorCode::MissingFile, where + ": " + data_path.string() + " does not exist");
    }
    max_label = std::max(max_label, label);
    ds.records.push_back({std::move(data_path), label, nullptr});
  }
  if (ds.records.empty()) throw Error(ErrorCode::MalformedManifest, path.string() + ": no samples");
  ds.num_classes = num_classes ? *num_classes : static_cast<std::size_t>(max_label + 1);
  if (ds.num_classes < 2) throw Error(ErrorCode::MalformedManifest, path.string() + ": need at least 2 classes");
  return ds;
}

void write_manifest(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  const std::filesystem::path base = path.parent_path().empty() ? "." : path.parent_path();
  out << "path,label\n";
  for (const auto& r : ds.records) {
    std::filesystem::path p = r.data_path;
    const auto rel = p.lexically_normal().lexically_relative(base.lexically_normal());
    if (!rel.empty() && *rel.begin() != "..") p = rel;
    out << p.generic_string() << ',' << r.label << '\n';
  }
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

Volume load_sample(const SampleRecord& record) {
  if (record.cached) return *record.cached;
  return read_volume_file(record.data_path);
}

Dataset preload(Dataset ds) {
  for (auto& r : ds.records) {
    if (!r.cached) r.cached = std::make_shared<const Volume>(read_volume_file(r.data_path));
  }
  return ds;
}

std::pair<Dataset, Dataset> stratified_split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "train_fraction must lie in (0, 1)");
  }
  std::vector<std::vector<std::size_t>> members(ds.num_classes);
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    members.at(static_cast<std::size_t>(ds.records[i].label)).push_back(i);
  }
  SplitMix64 rng(seed);
  std::vector<bool> to_train(ds.records.size(), false);
  for (std::size_t c = 0; c < members.size(); ++c) {
    auto& m = members[c];
    if (m.size() < 2) {
      throw Error(ErrorCode::ClassTooSmall, "class " + std::to_string(c) + " has " + std::to_string(m.size()) +
                                                " sample(s); stratified split needs 2");
    }
    shuffle(std::span<std::size_t>(m), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(m.size())));
    for (std::size_t k = 0; k < n_train; ++k) to_train[m[k]] = true;
  }
  Dataset train{{}, ds.num_classes};
  Dataset val{{}, ds.num_classes};
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    (to_train[i] ? train : val).records.push_back(ds.records[i]);
  }
  return {std::move(train), std::move(val)};
}

std::vector<double> class_weights(std::span<const int> labels, std::size_t num_classes) {
  std::vector<std::size_t> counts(num_classes, 0);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(y));
    }
    ++counts[static_cast<std::size_t>(y)];
  }
  std::vector<double> w(num_classes);
  const auto n = static_cast<double>(labels.size());
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (counts[c] == 0) throw Error(ErrorCode::EmptyClass, "class " + std::to_string(c) + " has no samples");
    w[c] = n / (static_cast<double>(num_classes) * static_cast<double>(counts[c]));
  }
  return w;
}

std::vector<BatchPlan> plan_epoch(const Dataset& ds, std::size_t batch_size, std::uint64_t seed,
                                  const std::optional<AugmentSpec>& augment) {
  if (batch_size == 0) throw Error(ErrorCode::InvalidArgument, "batch_size must be >= 1");
  if (augment && augment->angles_deg.empty()) throw Error(ErrorCode::InvalidArgument, "empty augmentation angle set");
  std::vector<std::size_t> order(ds.records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  SplitMix64 rng(seed);
  shuffle(std::span<std::size_t>(order), rng);

  std::vector<BatchPlan> plans;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    BatchPlan plan;
    const std::size_t end = std::min(order.size(), start + batch_size);
    for (std::size_t k = start; k < end; ++k) {
      plan.indices.push_back(order[k]);
      plan.angles.push_back(augment ? augment->angles_deg[rng.below(augment->angles_deg.size())] : 0.0);
    }
    plans.push_back(std::move(plan));
  }
  return plans;
}

Batch load_batch(const Dataset& ds, const BatchPlan& plan) {
  Batch batch;
  batch.indices = plan.indices;
  batch.angles = plan.angles;
  std::vector<double> data;
  Shape sample_shape;
  for (std::size_t k = 0; k < plan.indices.size(); ++k) {
    const SampleRecord& rec = ds.records.at(plan.indices[k]);
    Volume v = load_sample(rec);
    if (plan.angles[k] != 0.0) v = rotate_axial(v, plan.angles[k]);
    const Shape s{v.depth, v.height, v.width};
    if (k == 0) {
      sample_shape = s;
      data.reserve(plan.indices.size() * v.voxel_count());
    } else if (s != sample_shape) {
      throw Error(ErrorCode::ShapeMismatch, rec.data_path.string() + " has dims " + shape_to_string(s) +
                                                ", batch expects " + shape_to_string(sample_shape));
    }
    data.insert(data.end(), v.data.begin(), v.data.end());
    batch.labels.push_back(rec.label);
  }
  Shape shape{plan.indices.size()};
  shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
  batch.inputs = Tensor(std::move(shape), std::move(data));
  return batch;
}

std::vector<Batch> make_batches(const Dataset& ds, std::size_t batch_size, std::uint64_t seed,
                                const std::optional<AugmentSpec>& augment) {
  std::vector<Batch> out;
  for (const BatchPlan& plan : plan_epoch(ds, batch_size, seed, augment)) out.push_back(load_batch(ds, plan));
  return out;
}

}  // namespace viptt
