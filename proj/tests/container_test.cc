// tests/container_test.cc

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

#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "dcsep/container.h"

using namespace dcsep;

TEST_CASE("container serialization is byte-stable") {
  ModelContainer c;
  c.metadata["kind"] = "test";
  c.metadata["alpha"] = FormatDouble(0.1);
  MatrixXd m(2, 3);
  m << 1, 2, 3, 4, 5, 6.25;
  c.Put("m", m);
  c.Put("v", VectorXd(VectorXd::LinSpaced(4, -1, 1)));
  const std::string bytes = c.Serialize();
  CHECK(bytes.substr(0, 8) == std::string("DCSEPMC\0", 8));
  const auto back = ModelContainer::Deserialize(bytes);
  CHECK(back.Serialize() == bytes);
  CHECK(back.GetMatrix("m") == m);
  CHECK(back.GetVector("v") == VectorXd::LinSpaced(4, -1, 1));
  CHECK(back.Meta("kind") == "test");
  CHECK(back.Hash() == c.Hash());
  CHECK(back.Hash().size() == 16);
  CHECK_THROWS_AS(back.GetMatrix("missing"), Error);

  const auto path = std::filesystem::temp_directory_path() / "dcsep_container_test.bin";
  c.Save(path.string());
  const auto loaded = ModelContainer::Load(path.string());
  loaded.Save(path.string());
  CHECK(ModelContainer::Load(path.string()).Serialize() == bytes);
  std::filesystem::remove(path);
}

TEST_CASE("container rejects foreign magic, other versions and truncation") {
  ModelContainer c;
  c.Put("x", VectorXd(VectorXd::Ones(3)));
  std::string bytes = c.Serialize();
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(ModelContainer::Deserialize(bad), Error);
  bad = bytes;
  bad[8] = 2;
  CHECK_THROWS_AS(ModelContainer::Deserialize(bad), Error);
  CHECK_THROWS_AS(ModelContainer::Deserialize(bytes.substr(0, bytes.size() - 3)), Error);
}

TEST_CASE("model converters round-trip") {
  GmmUbm ubm;
  ubm.weights = VectorXd::Constant(2, 0.5);
  ubm.means = MatrixXd::Random(2, 3);
  ubm.variances = MatrixXd::Constant(2, 3, 0.3);
  const auto u = UbmFromContainer(ModelContainer::Deserialize(ToContainer(ubm).Serialize()));
  CHECK(u.means == ubm.means);
  CHECK(u.variances == ubm.variances);

  SeparationModel sm;
  NetworkConfig cfg;
  cfg.freq_bins = 8;
  cfg.hidden = 3;
  cfg.layers = 1;
  cfg.embedding_dim = 2;
  cfg.cell = CellType::kLstm;
  cfg.ivector_width = 4;
  sm.network = InitNetwork(cfg, 7);
  sm.features = {VectorXd::Random(8), VectorXd::Ones(8)};
  sm.ivectors = {VectorXd::Random(4), VectorXd::Ones(4)};
  sm.level = 1;
  const auto c = ToContainer(sm);
  const auto back = SeparationModelFromContainer(ModelContainer::Deserialize(c.Serialize()));
  CHECK(back.network.theta == sm.network.theta);
  CHECK(back.network.config.cell == CellType::kLstm);
  CHECK(back.network.config.ivector_width == 4);
  CHECK(back.ivectors.mean == sm.ivectors.mean);
  CHECK(back.level == 1);
  CHECK(ToContainer(back).Serialize() == c.Serialize());
}
