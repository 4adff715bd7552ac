// Copyright 2026 The maskgrid Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "maskgrid/synthetic.hpp"

namespace maskgrid {

struct SplitSizes {
  int train = 0;
  int valid = 0;
  int test = 0;
};

/// 80/10/10 by index: [0, 0.8n) train, [0.8n, 0.9n) valid, the rest test.
SplitSizes split_sizes(int count);
std::string split_of(int index, int count);

struct DatasetExample {
  int index = 0;
  Codegram codegram;
  ConditioningBundle bundle;
  Mat beats;

  TrainExample train_example() const { return TrainExample{codegram, bundle, beats}; }
};

struct DatasetManifest {
  SyntheticTaskSpec task;
  int count = 0;
};

// Layout: manifest.json plus <split>/<index>.codegram and one
// <index>.<stream>.emb per conditioning stream and <index>.beats.emb.
void gen_dataset(const std::string& dir, const SyntheticTaskSpec& task, int count, int threads = 1);
DatasetManifest read_manifest(const std::string& dir);
std::vector<DatasetExample> load_split(const std::string& dir, const std::string& split);
DatasetExample load_example(const std::string& dir, int index);

std::string task_to_json(const SyntheticTaskSpec& task);
SyntheticTaskSpec task_from_json(const std::string& text);

}  // namespace maskgrid
