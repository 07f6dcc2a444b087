// src/container.cc

// Copyright 2026 dcsep authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "dcsep/container.h"

#include <bit>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace dcsep {

namespace {

constexpr char kMagic[8] = {'D', 'C', 'S', 'E', 'P', 'M', 'C', '\0'};

void PutU32(std::string *out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out->push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void PutU64(std::string *out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out->push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void PutString(std::string *out, const std::string &s) {
  PutU32(out, static_cast<std::uint32_t>(s.size()));
  out->append(s);
}

class Reader {
 public:
  explicit Reader(const std::string &bytes) : bytes_(bytes) {}

  std::uint64_t Uint(int width) {
    Need(width);
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += width;
    return v;
  }
  std::string String() {
    const auto n = Uint(4);
    Need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void Need(std::uint64_t n) const {
    Require(pos_ + n <= bytes_.size(), "model container: truncated data", Error::Kind::kIo);
  }
  bool AtEnd() const { return pos_ == bytes_.size(); }

 private:
  const std::string &bytes_;
  std::size_t pos_ = 0;
};

std::string Int(long v) { return std::to_string(v); }

NormalizationStats StatsFrom(const ModelContainer &c, const std::string &prefix) {
  NormalizationStats s;
  if (c.Has(prefix + ".mean")) {
    s.mean = c.GetVector(prefix + ".mean");
    s.std = c.GetVector(prefix + ".std");
  }
  return s;
}

}  // namespace

std::string FormatDouble(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void ModelContainer::Put(const std::string &name, const MatrixXd &m) {
  Tensor t;
  t.name = name;
  t.shape = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  const RowMatrixXd rm = m;
  t.data.assign(rm.data(), rm.data() + rm.size());
  for (auto &existing : tensors_)
    if (existing.name == name) {
      existing = std::move(t);
      return;
    }
  tensors_.push_back(std::move(t));
}

void ModelContainer::Put(const std::string &name, const VectorXd &v) {
  Tensor t;
  t.name = name;
  t.shape = {static_cast<std::uint64_t>(v.size())};
  t.data.assign(v.data(), v.data() + v.size());
  for (auto &existing : tensors_)
    if (existing.name == name) {
      existing = std::move(t);
      return;
    }
  tensors_.push_back(std::move(t));
}

bool ModelContainer::Has(const std::string &name) const {
  for (const auto &t : tensors_)
    if (t.name == name) return true;
  return false;
}

const Tensor &ModelContainer::Find(const std::string &name) const {
  for (const auto &t : tensors_)
    if (t.name == name) return t;
  throw Error("model container: missing tensor '" + name + "'", Error::Kind::kIo);
}

MatrixXd ModelContainer::GetMatrix(const std::string &name) const {
  const Tensor &t = Find(name);
  Require(t.shape.size() == 2, "model container: tensor '" + name + "' is not a matrix",
          Error::Kind::kIo);
  return Eigen::Map<const RowMatrixXd>(t.data.data(), static_cast<Index>(t.shape[0]),
                                       static_cast<Index>(t.shape[1]));
}

VectorXd ModelContainer::GetVector(const std::string &name) const {
  const Tensor &t = Find(name);
  return Eigen::Map<const VectorXd>(t.data.data(), static_cast<Index>(t.data.size()));
}

const std::string &ModelContainer::Meta(const std::string &key) const {
  const auto it = metadata.find(key);
  Require(it != metadata.end(), "model container: missing metadata '" + key + "'",
          Error::Kind::kIo);
  return it->second;
}

std::string ModelContainer::Serialize() const {
  std::string out(kMagic, kMagic + 8);
  PutU32(&out, kContainerVersion);
  PutU32(&out, static_cast<std::uint32_t>(metadata.size()));
  for (const auto &[k, v] : metadata) {
    PutString(&out, k);
    PutString(&out, v);
  }
  PutU32(&out, static_cast<std::uint32_t>(tensors_.size()));
  for (const auto &t : tensors_) {
    PutString(&out, t.name);
    PutU32(&out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) PutU64(&out, d);
    for (double v : t.data) PutU64(&out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

ModelContainer ModelContainer::Deserialize(const std::string &bytes) {
  Require(bytes.size() >= 12 && std::equal(kMagic, kMagic + 8, bytes.begin()),
          "model container: bad magic", Error::Kind::kIo);
  Reader r(bytes);
  for (int i = 0; i < 8; ++i) r.Uint(1);
  const auto version = r.Uint(4);
  Require(version == kContainerVersion,
          "model container: unsupported version " + std::to_string(version), Error::Kind::kIo);
  ModelContainer c;
  const auto nmeta = r.Uint(4);
  for (std::uint64_t i = 0; i < nmeta; ++i) {
    std::string k = r.String();
    c.metadata[k] = r.String();
  }
  const auto ntensors = r.Uint(4);
  for (std::uint64_t i = 0; i < ntensors; ++i) {
    Tensor t;
    t.name = r.String();
    const auto rank = r.Uint(4);
    std::uint64_t count = 1;
    for (std::uint64_t d = 0; d < rank; ++d) {
      t.shape.push_back(r.Uint(8));
      count *= t.shape.back();
    }
    r.Need(count * 8);
    t.data.resize(count);
    for (auto &v : t.data) v = std::bit_cast<double>(r.Uint(8));
    c.tensors_.push_back(std::move(t));
  }
  Require(r.AtEnd(), "model container: trailing bytes", Error::Kind::kIo);
  return c;
}

void ModelContainer::Save(const std::string &path) const {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream os(path, std::ios::binary);
  Require(os.good(), "cannot write " + path, Error::Kind::kIo);
  const std::string bytes = Serialize();
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ModelContainer ModelContainer::Load(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  Require(is.good(), "cannot open " + path, Error::Kind::kDependency);
  std::stringstream ss;
  ss << is.rdbuf();
  return Deserialize(ss.str());
}

std::string ModelContainer::Hash() const {
  const std::string bytes = Serialize();
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(Fnv1a(bytes.data(), bytes.size())));
  return buf;
}

ModelContainer ToContainer(const GmmUbm &ubm) {
  ModelContainer c;
  c.metadata["kind"] = "ubm";
  c.metadata["components"] = Int(ubm.num_components());
  c.metadata["dim"] = Int(ubm.dim());
  c.Put("weights", ubm.weights);
  c.Put("means", ubm.means);
  c.Put("variances", ubm.variances);
  return c;
}

GmmUbm UbmFromContainer(const ModelContainer &c) {
  Require(c.Meta("kind") == "ubm", "model container: not a UBM", Error::Kind::kIo);
  GmmUbm u;
  u.weights = c.GetVector("weights");
  u.means = c.GetMatrix("means");
  u.variances = c.GetMatrix("variances");
  return u;
}

ModelContainer ToContainer(const TotalVariabilityModel &tv) {
  ModelContainer c;
  c.metadata["kind"] = "tv";
  c.metadata["components"] = Int(tv.num_components);
  c.metadata["dim"] = Int(tv.dim);
  c.metadata["rank"] = Int(tv.rank());
  c.Put("m", tv.m);
  c.Put("T", tv.T);
  c.Put("sigma", tv.sigma);
  return c;
}

TotalVariabilityModel TvFromContainer(const ModelContainer &c) {
  Require(c.Meta("kind") == "tv", "model container: not a total variability model",
          Error::Kind::kIo);
  TotalVariabilityModel tv;
  tv.m = c.GetVector("m");
  tv.T = c.GetMatrix("T");
  tv.sigma = c.GetVector("sigma");
  tv.num_components = std::stol(c.Meta("components"));
  tv.dim = std::stol(c.Meta("dim"));
  return tv;
}

ModelContainer ToContainer(const LdaProjection &lda) {
  ModelContainer c;
  c.metadata["kind"] = "lda";
  c.metadata["input_dim"] = Int(lda.A.rows());
  c.metadata["output_dim"] = Int(lda.A.cols());
  c.Put("A", lda.A);
  c.Put("eigenvalues", lda.eigenvalues);
  c.Put("between", lda.between);
  c.Put("within", lda.within);
  return c;
}

LdaProjection LdaFromContainer(const ModelContainer &c) {
  Require(c.Meta("kind") == "lda", "model container: not an LDA projection", Error::Kind::kIo);
  LdaProjection lda;
  lda.A = c.GetMatrix("A");
  lda.eigenvalues = c.GetVector("eigenvalues");
  lda.between = c.GetMatrix("between");
  lda.within = c.GetMatrix("within");
  return lda;
}

ModelContainer ToContainer(const SeparationModel &model) {
  const NetworkConfig &n = model.network.config;
  ModelContainer c;
  c.metadata["kind"] = "separation-network";
  c.metadata["level"] = Int(model.level);
  c.metadata["net.freq_bins"] = Int(n.freq_bins);
  c.metadata["net.ivector_width"] = Int(n.ivector_width);
  c.metadata["net.embedding_dim"] = Int(n.embedding_dim);
  c.metadata["net.hidden"] = Int(n.hidden);
  c.metadata["net.layers"] = Int(n.layers);
  c.metadata["net.cell"] = CellTypeName(n.cell);
  c.Put("theta", model.network.theta);
  c.Put("features.mean", model.features.mean);
  c.Put("features.std", model.features.std);
  if (model.ivectors.mean.size() > 0) {
    c.Put("ivectors.mean", model.ivectors.mean);
    c.Put("ivectors.std", model.ivectors.std);
  }
  return c;
}

SeparationModel SeparationModelFromContainer(const ModelContainer &c) {
  Require(c.Meta("kind") == "separation-network", "model container: not a separation network",
          Error::Kind::kIo);
  SeparationModel m;
  m.level = std::stoi(c.Meta("level"));
  NetworkConfig &n = m.network.config;
  n.freq_bins = std::stoi(c.Meta("net.freq_bins"));
  n.ivector_width = std::stoi(c.Meta("net.ivector_width"));
  n.embedding_dim = std::stoi(c.Meta("net.embedding_dim"));
  n.hidden = std::stoi(c.Meta("net.hidden"));
  n.layers = std::stoi(c.Meta("net.layers"));
  n.cell = ParseCellType(c.Meta("net.cell"));
  m.network.theta = c.GetVector("theta");
  Require(m.network.theta.size() == NetworkParameters::Count(n),
          "model container: network weights do not match the stored topology", Error::Kind::kIo);
  m.features = StatsFrom(c, "features");
  m.ivectors = StatsFrom(c, "ivectors");
  return m;
}

}  // namespace dcsep
