// Copyright 2026 The CoughKit Authors
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

#include <string>
#include <vector>

#include "coughkit/common.hpp"

namespace coughkit::data {

struct ManifestRow {
  std::string path;
  int label = 0;  // 0 negative, 1 positive
  std::string subject_id;
  bool is_test = false;
  int line_no = 0;
};

/// Labeled, subject-attributed, split-assigned file list. Invariants:
/// unique paths, subject-disjoint splits, one label per subject.
struct DatasetManifest {
  std::vector<ManifestRow> rows;
  std::string base_dir;  // relative paths resolve against the manifest's directory

  std::string resolve(const ManifestRow& row) const;
  int count(bool test_split, int label) const;
};

/// Parses and validates `path,label,subject_id,split` CSV. Violations are
/// rejected with the offending line number.
DatasetManifest parse_manifest(const std::string& path);

/// Same, from in-memory text (base_dir supplied by the caller).
DatasetManifest parse_manifest_text(const std::string& text, const std::string& base_dir,
                                    const std::string& origin = "<memory>");

void write_manifest(const std::string& path, const DatasetManifest& manifest);

}  // namespace coughkit::data
