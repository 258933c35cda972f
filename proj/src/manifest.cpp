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

#include "coughkit/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace coughkit::data {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

std::string DatasetManifest::resolve(const ManifestRow& row) const {
  std::filesystem::path p(row.path);
  if (p.is_absolute() || base_dir.empty()) return row.path;
  return (std::filesystem::path(base_dir) / p).string();
}

int DatasetManifest::count(bool test_split, int label) const {
  int n = 0;
  for (const auto& r : rows) {
    if (r.is_test == test_split && r.label == label) ++n;
  }
  return n;
}

DatasetManifest parse_manifest_text(const std::string& text, const std::string& base_dir,
                                    const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput(origin + ": empty manifest");
  {
    auto header = split_csv_line(line);
    const std::vector<std::string> expected{"path", "label", "subject_id", "split"};
    if (std::vector<std::string>(header.begin(), header.end()) != expected) {
      throw InvalidInput(origin + ":1: manifest header must be 'path,label,subject_id,split'");
    }
  }

  DatasetManifest manifest;
  manifest.base_dir = base_dir;
  std::set<std::string> seen_paths;
  std::map<std::string, bool> subject_split;  // subject -> is_test
  std::map<std::string, int> subject_label;

  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    const std::string at = origin + ":" + std::to_string(line_no);
    if (fields.size() != 4) {
      throw InvalidInput(at + ": expected 4 fields, got " + std::to_string(fields.size()));
    }
    ManifestRow row;
    row.path = fields[0];
    row.subject_id = fields[2];
    row.line_no = line_no;
    if (row.path.empty()) throw InvalidInput(at + ": empty path");
    if (row.subject_id.empty()) throw InvalidInput(at + ": empty subject_id");

    if (fields[1] == "0") {
      row.label = 0;
    } else if (fields[1] == "1") {
      row.label = 1;
    } else {
      throw InvalidInput(at + ": label must be 0 or 1, got '" + fields[1] + "'");
    }
    if (fields[3] == "train") {
      row.is_test = false;
    } else if (fields[3] == "test") {
      row.is_test = true;
    } else {
      throw InvalidInput(at + ": split must be 'train' or 'test', got '" + fields[3] + "'");
    }

    if (!seen_paths.insert(row.path).second) {
      throw InvalidInput(at + ": duplicate path '" + row.path + "'");
    }
    auto split_it = subject_split.find(row.subject_id);
    if (split_it == subject_split.end()) {
      subject_split[row.subject_id] = row.is_test;
    } else if (split_it->second != row.is_test) {
      throw InvalidInput(at + ": subject '" + row.subject_id + "' appears in both train and test splits");
    }
    auto label_it = subject_label.find(row.subject_id);
    if (label_it == subject_label.end()) {
      subject_label[row.subject_id] = row.label;
    } else if (label_it->second != row.label) {
      throw InvalidInput(at + ": subject '" + row.subject_id + "' has conflicting labels");
    }

    manifest.rows.push_back(std::move(row));
  }
  return manifest;
}

DatasetManifest parse_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open manifest: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string dir = std::filesystem::path(path).parent_path().string();
  return parse_manifest_text(buf.str(), dir, path);
}

void write_manifest(const std::string& path, const DatasetManifest& manifest) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot open manifest for writing: " + path);
  out << "path,label,subject_id,split\n";
  for (const auto& r : manifest.rows) {
    out << r.path << "," << r.label << "," << r.subject_id << "," << (r.is_test ? "test" : "train") << "\n";
  }
  if (!out) throw InvalidInput("short write to manifest: " + path);
}

}  // namespace coughkit::data
